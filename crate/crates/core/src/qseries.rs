//! Truncated Laurent series in q.
//!
//! A [`QSeries`] stores the coefficients of q^v, q^(v+1), ..., q^(v+N-1) and
//! nothing beyond: the coefficient of q^n for n >= v+N is unknown, not zero.
//! Coefficients live either in the exact domain (big rationals) or in a
//! binary floating point domain of fixed precision.

use std::fmt;

use rug::ops::Pow;
use rug::{Assign, Float, Integer, Rational};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::mp::log2_abs;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Exact,
    Float(u32),
}

#[derive(Clone, Debug, PartialEq)]
enum Coeffs {
    Exact(Vec<Rational>),
    Float(Vec<Float>),
}

/// A single coefficient as stored.
#[derive(Clone, Debug, PartialEq)]
pub enum Coeff {
    Exact(Rational),
    Float(Float),
}

impl Coeff {
    pub fn to_f64(&self) -> f64 {
        match self {
            Coeff::Exact(r) => r.to_f64(),
            Coeff::Float(f) => f.to_f64(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Coeff::Exact(r) => *r == 0,
            Coeff::Float(f) => f.is_zero(),
        }
    }
}

impl fmt::Display for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coeff::Exact(r) => write!(f, "{r}"),
            Coeff::Float(x) => write!(f, "{}", float_string(x)),
        }
    }
}

/// Binary operation selector for [`series_arith`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Right operand of [`series_arith`].
#[derive(Clone, Debug)]
pub enum Operand<'a> {
    Series(&'a QSeries),
    Integer(i64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct QSeries {
    lowest: i64,
    coeffs: Coeffs,
}

fn float_string(x: &Float) -> String {
    let digits = ((x.prec() as f64) * std::f64::consts::LOG10_2).ceil() as usize + 1;
    x.to_string_radix(10, Some(digits))
}

fn strip_exact(lowest: &mut i64, v: &mut Vec<Rational>) {
    let lead = v.iter().position(|c| *c != 0);
    if let Some(p) = lead {
        if p > 0 {
            v.drain(..p);
            *lowest += p as i64;
        }
    }
}

fn strip_float(lowest: &mut i64, v: &mut Vec<Float>) {
    let lead = v.iter().position(|c| !c.is_zero());
    if let Some(p) = lead {
        if p > 0 {
            v.drain(..p);
            *lowest += p as i64;
        }
    }
}

impl QSeries {
    /// Exact series from rationals; leading zeros are stripped.
    pub fn exact(lowest: i64, coeffs: Vec<Rational>) -> Self {
        let mut lowest = lowest;
        let mut coeffs = coeffs;
        strip_exact(&mut lowest, &mut coeffs);
        QSeries { lowest, coeffs: Coeffs::Exact(coeffs) }
    }

    pub fn from_integers(lowest: i64, coeffs: Vec<Integer>) -> Self {
        Self::exact(lowest, coeffs.into_iter().map(Rational::from).collect())
    }

    pub fn from_i64(lowest: i64, coeffs: &[i64]) -> Self {
        Self::exact(lowest, coeffs.iter().map(|&c| Rational::from(c)).collect())
    }

    /// Float series at the given precision; leading exact zeros are stripped.
    pub fn float(lowest: i64, coeffs: Vec<Float>, prec: u32) -> Self {
        let mut lowest = lowest;
        let mut coeffs: Vec<Float> = coeffs.into_iter().map(|c| Float::with_val(prec, c)).collect();
        strip_float(&mut lowest, &mut coeffs);
        QSeries { lowest, coeffs: Coeffs::Float(coeffs) }
    }

    /// The zero series known on [lowest, lowest + n).
    pub fn zero(lowest: i64, n: usize) -> Self {
        QSeries { lowest, coeffs: Coeffs::Exact(vec![Rational::new(); n]) }
    }

    /// The constant 1 with `n` stored terms.
    pub fn one(n: usize) -> Self {
        Self::monomial(0, n)
    }

    /// q^power with `n` stored terms.
    pub fn monomial(power: i64, n: usize) -> Self {
        let mut c = vec![Rational::new(); n];
        if n > 0 {
            c[0] = Rational::from(1);
        }
        QSeries { lowest: power, coeffs: Coeffs::Exact(c) }
    }

    pub fn lowest_order(&self) -> i64 {
        self.lowest
    }

    /// Number of stored (trustworthy) coefficients.
    pub fn truncation_order(&self) -> usize {
        match &self.coeffs {
            Coeffs::Exact(v) => v.len(),
            Coeffs::Float(v) => v.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.truncation_order()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// First exponent whose coefficient is not stored.
    pub fn end(&self) -> i64 {
        self.lowest + self.len() as i64
    }

    pub fn domain(&self) -> Domain {
        match &self.coeffs {
            Coeffs::Exact(_) => Domain::Exact,
            Coeffs::Float(v) => Domain::Float(v.first().map(|c| c.prec()).unwrap_or(crate::mp::DEFAULT_PREC)),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.coeffs, Coeffs::Exact(_))
    }

    pub fn is_zero(&self) -> bool {
        match &self.coeffs {
            Coeffs::Exact(v) => v.iter().all(|c| *c == 0),
            Coeffs::Float(v) => v.iter().all(|c| c.is_zero()),
        }
    }

    /// Exact coefficients, if the series is exact.
    pub fn exact_coeffs(&self) -> Option<&[Rational]> {
        match &self.coeffs {
            Coeffs::Exact(v) => Some(v),
            Coeffs::Float(_) => None,
        }
    }

    pub fn float_coeffs(&self) -> Option<&[Float]> {
        match &self.coeffs {
            Coeffs::Float(v) => Some(v),
            Coeffs::Exact(_) => None,
        }
    }

    /// Coefficient of q^n. Below the lowest order it is zero; at or beyond the
    /// truncation order it is an error.
    pub fn coefficient(&self, n: i64) -> Result<Coeff> {
        if n >= self.end() {
            return Err(Error::OutOfRange { n, lo: self.lowest, hi: self.end() });
        }
        if n < self.lowest {
            return Ok(match &self.coeffs {
                Coeffs::Exact(_) => Coeff::Exact(Rational::new()),
                Coeffs::Float(v) => Coeff::Float(Float::new(v[0].prec())),
            });
        }
        let i = (n - self.lowest) as usize;
        Ok(match &self.coeffs {
            Coeffs::Exact(v) => Coeff::Exact(v[i].clone()),
            Coeffs::Float(v) => Coeff::Float(v[i].clone()),
        })
    }

    /// Coefficient as a rational; only for exact series.
    pub fn rational(&self, n: i64) -> Result<Rational> {
        match self.coefficient(n)? {
            Coeff::Exact(r) => Ok(r),
            Coeff::Float(_) => Err(Error::InvalidArgument("series is not exact".into())),
        }
    }

    /// Coefficient as an integer; fails on float series or non-integral values.
    pub fn integer(&self, n: i64) -> Result<Integer> {
        let r = self.rational(n)?;
        if *r.denom() != 1 {
            return Err(Error::InvalidArgument(format!("coefficient of q^{n} is {r}")));
        }
        Ok(r.numer().clone())
    }

    pub fn coeff_f64(&self, n: i64) -> Result<f64> {
        Ok(self.coefficient(n)?.to_f64())
    }

    /// Leading coefficient a_v (zero for the zero series).
    pub fn leading(&self) -> Coeff {
        if self.is_empty() {
            return Coeff::Exact(Rational::new());
        }
        self.coefficient(self.lowest).expect("non-empty")
    }

    /// True when every exact coefficient is an integer.
    pub fn is_integral(&self) -> bool {
        match &self.coeffs {
            Coeffs::Exact(v) => v.iter().all(|c| *c.denom() == 1),
            Coeffs::Float(_) => false,
        }
    }

    /// log2 |a_n| for every stored coefficient (-inf for zeros).
    pub fn log2_magnitudes(&self) -> Vec<f64> {
        match &self.coeffs {
            Coeffs::Exact(v) => v.iter().map(log2_abs_rational).collect(),
            Coeffs::Float(v) => v.iter().map(log2_abs).collect(),
        }
    }

    /// Coefficients converted to floats at `prec` bits.
    pub fn float_values(&self, prec: u32) -> Vec<Float> {
        match &self.coeffs {
            Coeffs::Exact(v) => v.iter().map(|c| Float::with_val(prec, c)).collect(),
            Coeffs::Float(v) => v.iter().map(|c| Float::with_val(prec, c)).collect(),
        }
    }

    pub fn to_float(&self, prec: u32) -> QSeries {
        QSeries { lowest: self.lowest, coeffs: Coeffs::Float(self.float_values(prec)) }
    }

    /// Keep only the first `n` stored coefficients.
    pub fn truncate(&self, n: usize) -> QSeries {
        let mut s = self.clone();
        match &mut s.coeffs {
            Coeffs::Exact(v) => v.truncate(n),
            Coeffs::Float(v) => v.truncate(n),
        }
        s
    }

    /// Keep coefficients of exponents below `end`.
    pub fn truncate_at(&self, end: i64) -> QSeries {
        let n = (end - self.lowest).max(0) as usize;
        self.truncate(n.min(self.len()))
    }

    /// Multiply by q^s.
    pub fn shift(&self, s: i64) -> QSeries {
        let mut r = self.clone();
        r.lowest += s;
        r
    }

    pub fn neg(&self) -> QSeries {
        match &self.coeffs {
            Coeffs::Exact(v) => {
                QSeries { lowest: self.lowest, coeffs: Coeffs::Exact(v.iter().map(|c| Rational::from(-c)).collect()) }
            }
            Coeffs::Float(v) => QSeries {
                lowest: self.lowest,
                coeffs: Coeffs::Float(v.iter().map(|c| Float::with_val(c.prec(), -c)).collect()),
            },
        }
    }

    /// Multiply every coefficient by an exact scalar.
    pub fn scale(&self, c: &Rational) -> QSeries {
        match &self.coeffs {
            Coeffs::Exact(v) => QSeries::exact(self.lowest, v.iter().map(|a| Rational::from(a * c)).collect()),
            Coeffs::Float(v) => {
                let p = v.first().map(|x| x.prec()).unwrap_or(crate::mp::DEFAULT_PREC);
                QSeries::float(self.lowest, v.iter().map(|a| Float::with_val(p, a * c)).collect(), p)
            }
        }
    }

    pub fn scale_i64(&self, c: i64) -> QSeries {
        self.scale(&Rational::from(c))
    }

    /// Multiply every coefficient by a float scalar; the result is a float series.
    pub fn scale_float(&self, c: &Float) -> QSeries {
        let p = match self.domain() {
            Domain::Float(p) => p.max(c.prec()),
            Domain::Exact => c.prec(),
        };
        let v = self.float_values(p);
        QSeries::float(self.lowest, v.into_iter().map(|a| Float::with_val(p, a * c)).collect(), p)
    }

    /// Add an exact constant (a series with infinite truncation order).
    pub fn add_constant(&self, c: &Rational) -> QSeries {
        let zero_pos = -self.lowest;
        if zero_pos >= self.len() as i64 {
            return self.clone();
        }
        let c_series = if zero_pos < 0 {
            // constant sits below the stored range
            let n = self.end().max(0) as usize;
            let mut v = vec![Rational::new(); n];
            if n > 0 {
                v[0] = c.clone();
            }
            QSeries { lowest: 0, coeffs: Coeffs::Exact(v) }
        } else {
            let mut v = vec![Rational::new(); self.len()];
            v[zero_pos as usize] = c.clone();
            QSeries { lowest: self.lowest, coeffs: Coeffs::Exact(v) }
        };
        self.add(&c_series)
    }

    fn unify(a: &QSeries, b: &QSeries) -> (QSeries, QSeries) {
        match (a.domain(), b.domain()) {
            (Domain::Exact, Domain::Exact) => (a.clone(), b.clone()),
            (Domain::Float(p), Domain::Exact) => (a.clone(), b.to_float(p)),
            (Domain::Exact, Domain::Float(p)) => (a.to_float(p), b.clone()),
            (Domain::Float(p), Domain::Float(q)) => {
                let m = p.max(q);
                (a.to_float(m), b.to_float(m))
            }
        }
    }

    pub fn add(&self, other: &QSeries) -> QSeries {
        self.add_sub(other, false)
    }

    pub fn sub(&self, other: &QSeries) -> QSeries {
        self.add_sub(other, true)
    }

    fn add_sub(&self, other: &QSeries, subtract: bool) -> QSeries {
        let start = self.lowest.min(other.lowest);
        let end = self.end().min(other.end());
        let n = (end - start).max(0) as usize;
        let (a, b) = Self::unify(self, other);
        match (&a.coeffs, &b.coeffs) {
            (Coeffs::Exact(x), Coeffs::Exact(y)) => {
                let mut out = vec![Rational::new(); n];
                for (i, o) in out.iter_mut().enumerate() {
                    let e = start + i as i64;
                    if e >= a.lowest && e < a.end() {
                        *o += &x[(e - a.lowest) as usize];
                    }
                    if e >= b.lowest && e < b.end() {
                        if subtract {
                            *o -= &y[(e - b.lowest) as usize];
                        } else {
                            *o += &y[(e - b.lowest) as usize];
                        }
                    }
                }
                QSeries::exact(start, out)
            }
            (Coeffs::Float(x), Coeffs::Float(y)) => {
                let p = match a.domain() {
                    Domain::Float(p) => p,
                    Domain::Exact => unreachable!(),
                };
                let mut out = vec![Float::new(p); n];
                let mut worst_loss = 0.0f64;
                for (i, o) in out.iter_mut().enumerate() {
                    let e = start + i as i64;
                    let mut mag = f64::NEG_INFINITY;
                    if e >= a.lowest && e < a.end() {
                        let t = &x[(e - a.lowest) as usize];
                        mag = mag.max(log2_abs(t));
                        *o += t;
                    }
                    if e >= b.lowest && e < b.end() {
                        let t = &y[(e - b.lowest) as usize];
                        mag = mag.max(log2_abs(t));
                        if subtract {
                            *o -= t;
                        } else {
                            *o += t;
                        }
                    }
                    if mag.is_finite() {
                        let loss = mag - log2_abs(o);
                        if loss > worst_loss {
                            worst_loss = loss;
                        }
                    }
                }
                if worst_loss > (p as f64) - 16.0 {
                    log::warn!("float cancellation lost {worst_loss:.0} of {p} bits");
                }
                QSeries::float(start, out, p)
            }
            _ => unreachable!(),
        }
    }

    pub fn mul(&self, other: &QSeries) -> QSeries {
        let n = self.len().min(other.len());
        let lowest = self.lowest + other.lowest;
        let (a, b) = Self::unify(self, other);
        match (&a.coeffs, &b.coeffs) {
            (Coeffs::Exact(x), Coeffs::Exact(y)) => {
                let x_int = x.iter().all(|c| *c.denom() == 1);
                let y_int = y.iter().all(|c| *c.denom() == 1);
                if x_int && y_int {
                    let xi: Vec<Integer> = x[..n].iter().map(|c| c.numer().clone()).collect();
                    let yi: Vec<Integer> = y[..n].iter().map(|c| c.numer().clone()).collect();
                    let out = mul_integers(&xi, &yi, n);
                    return QSeries::from_integers(lowest, out);
                }
                let mut out = vec![Rational::new(); n];
                for i in 0..n {
                    if x[i] == 0 {
                        continue;
                    }
                    for j in 0..n - i {
                        out[i + j] += Rational::from(&x[i] * &y[j]);
                    }
                }
                QSeries::exact(lowest, out)
            }
            (Coeffs::Float(x), Coeffs::Float(y)) => {
                let p = x.first().or(y.first()).map(|c| c.prec()).unwrap_or(crate::mp::DEFAULT_PREC);
                let mut out = vec![Float::new(p); n];
                let mut t = Float::new(p);
                for i in 0..n {
                    if x[i].is_zero() {
                        continue;
                    }
                    for j in 0..n - i {
                        t.assign(&x[i] * &y[j]);
                        out[i + j] += &t;
                    }
                }
                QSeries::float(lowest, out, p)
            }
            _ => unreachable!(),
        }
    }

    /// Multiplicative inverse. Fails on the zero series.
    pub fn inverse(&self) -> Result<QSeries> {
        if self.is_empty() || self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let n = self.len();
        match &self.coeffs {
            Coeffs::Exact(v) => {
                let b0 = v[0].clone();
                let inv0 = Rational::from(b0.recip_ref());
                let mut c: Vec<Rational> = Vec::with_capacity(n);
                c.push(inv0.clone());
                let unit = b0 == 1 || b0 == -1;
                for k in 1..n {
                    let mut s = Rational::new();
                    for i in 1..=k {
                        if v[i] != 0 {
                            s += Rational::from(&v[i] * &c[k - i]);
                        }
                    }
                    let val = if unit { (-s) * &b0 } else { (-s) * &inv0 };
                    c.push(val);
                }
                Ok(QSeries::exact(-self.lowest, c))
            }
            Coeffs::Float(v) => {
                let p = v[0].prec();
                let inv0 = Float::with_val(p, v[0].recip_ref());
                let mut c: Vec<Float> = Vec::with_capacity(n);
                c.push(inv0.clone());
                let mut t = Float::new(p);
                for k in 1..n {
                    let mut s = Float::new(p);
                    for i in 1..=k {
                        t.assign(&v[i] * &c[k - i]);
                        s += &t;
                    }
                    c.push(Float::with_val(p, -s * &inv0));
                }
                Ok(QSeries::float(-self.lowest, c, p))
            }
        }
    }

    pub fn div(&self, other: &QSeries) -> Result<QSeries> {
        let inv = other.inverse()?;
        let n = self.len().min(other.len());
        Ok(self.mul(&inv).truncate(n))
    }

    /// Integer power; negative exponents need an invertible base.
    ///
    /// Uses the power recurrence w_n = (1/(n u_0)) sum_k ((e+1)k - n) u_k w_{n-k},
    /// so the cost is independent of |e|.
    pub fn pow(&self, e: i64) -> Result<QSeries> {
        if e == 0 {
            return Ok(QSeries::one(self.len()));
        }
        if self.is_empty() || self.is_zero() {
            if e > 0 {
                return Ok(self.clone());
            }
            return Err(Error::DivisionByZero);
        }
        let n = self.len();
        let lowest = self.lowest * e;
        match &self.coeffs {
            Coeffs::Exact(u) => {
                let u0 = u[0].clone();
                let w0 = pow_rational(&u0, e);
                let mut w: Vec<Rational> = Vec::with_capacity(n);
                w.push(w0);
                let integral = u.iter().all(|c| *c.denom() == 1) && (u0 == 1 || u0 == -1) && e > 0;
                if integral {
                    let ui: Vec<Integer> = u.iter().map(|c| c.numer().clone()).collect();
                    let mut wi: Vec<Integer> = vec![w[0].numer().clone()];
                    let u0i = ui[0].clone();
                    for k in 1..n {
                        let mut s = Integer::new();
                        for i in 1..=k {
                            if ui[i] != 0 {
                                let coef = (e + 1) * i as i64 - k as i64;
                                if coef != 0 {
                                    s += Integer::from(&ui[i] * &wi[k - i]) * coef;
                                }
                            }
                        }
                        s /= k as i64;
                        s *= &u0i;
                        wi.push(s);
                    }
                    return Ok(QSeries::from_integers(lowest, wi));
                }
                let inv_u0 = Rational::from(u0.recip_ref());
                for k in 1..n {
                    let mut s = Rational::new();
                    for i in 1..=k {
                        if u[i] != 0 {
                            let coef = (e + 1) * i as i64 - k as i64;
                            if coef != 0 {
                                s += Rational::from(&u[i] * &w[k - i]) * coef;
                            }
                        }
                    }
                    s /= k as i64;
                    s *= &inv_u0;
                    w.push(s);
                }
                Ok(QSeries::exact(lowest, w))
            }
            Coeffs::Float(u) => {
                let p = u[0].prec();
                let w0 = Float::with_val(p, rug::ops::Pow::pow(&u[0], e as i32));
                let inv_u0 = Float::with_val(p, u[0].recip_ref());
                let mut w: Vec<Float> = Vec::with_capacity(n);
                w.push(w0);
                let mut t = Float::new(p);
                for k in 1..n {
                    let mut s = Float::new(p);
                    for i in 1..=k {
                        let coef = (e + 1) * i as i64 - k as i64;
                        if coef != 0 {
                            t.assign(&u[i] * &w[k - i]);
                            t *= coef as f64;
                            s += &t;
                        }
                    }
                    s /= k as u32;
                    s *= &inv_u0;
                    w.push(s);
                }
                Ok(QSeries::float(lowest, w, p))
            }
        }
    }

    /// D = q d/dq applied `times` times: a_n -> n^times a_n.
    pub fn d_operator(&self, times: u32) -> QSeries {
        let lowest = self.lowest;
        match &self.coeffs {
            Coeffs::Exact(v) => {
                let out = v
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        let n = Integer::from(lowest + i as i64).pow(times);
                        Rational::from(c * n)
                    })
                    .collect();
                QSeries::exact(lowest, out)
            }
            Coeffs::Float(v) => {
                let p = v.first().map(|c| c.prec()).unwrap_or(crate::mp::DEFAULT_PREC);
                let out = v
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        let n = Integer::from(lowest + i as i64).pow(times);
                        Float::with_val(p, c * n)
                    })
                    .collect();
                QSeries::float(lowest, out, p)
            }
        }
    }

    /// JSON form: lowest order, domain and coefficients as decimal strings.
    pub fn to_json(&self) -> Value {
        let coeffs: Vec<String> = match &self.coeffs {
            Coeffs::Exact(v) => v.iter().map(|c| c.to_string()).collect(),
            Coeffs::Float(v) => v.iter().map(float_string).collect(),
        };
        match self.domain() {
            Domain::Exact => json!({
                "lowest_order": self.lowest,
                "domain": "exact",
                "truncation_order": self.len(),
                "coefficients": coeffs,
            }),
            Domain::Float(p) => json!({
                "lowest_order": self.lowest,
                "domain": "float",
                "precision": p,
                "truncation_order": self.len(),
                "coefficients": coeffs,
            }),
        }
    }

    pub fn from_json(v: &Value) -> Result<QSeries> {
        let bad = |m: &str| Error::InvalidArgument(format!("series json: {m}"));
        let lowest = v["lowest_order"].as_i64().ok_or_else(|| bad("lowest_order"))?;
        let coeffs = v["coefficients"].as_array().ok_or_else(|| bad("coefficients"))?;
        let strs: Vec<&str> =
            coeffs.iter().map(|c| c.as_str().ok_or_else(|| bad("coefficient"))).collect::<Result<_>>()?;
        match v["domain"].as_str() {
            Some("exact") => {
                let vals =
                    strs.iter().map(|s| s.parse::<Rational>().map_err(|_| bad(s))).collect::<Result<Vec<_>>>()?;
                Ok(QSeries { lowest, coeffs: Coeffs::Exact(vals) })
            }
            Some("float") => {
                let p = v["precision"].as_u64().ok_or_else(|| bad("precision"))? as u32;
                let vals = strs
                    .iter()
                    .map(|s| Float::parse(s).map(|x| Float::with_val(p, x)).map_err(|_| bad(s)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(QSeries { lowest, coeffs: Coeffs::Float(vals) })
            }
            _ => Err(bad("domain")),
        }
    }
}

fn pow_rational(r: &Rational, e: i64) -> Rational {
    let base = if e < 0 { Rational::from(r.recip_ref()) } else { r.clone() };
    let k = e.unsigned_abs() as u32;
    rug::ops::Pow::pow(base, k)
}

fn mul_integers(x: &[Integer], y: &[Integer], n: usize) -> Vec<Integer> {
    let mut out = vec![Integer::new(); n];
    for i in 0..n {
        if x[i] == 0 {
            continue;
        }
        for j in 0..n - i {
            if y[j] != 0 {
                out[i + j] += Integer::from(&x[i] * &y[j]);
            }
        }
    }
    out
}

/// log2 |r| for a rational, robust to huge values.
pub fn log2_abs_rational(r: &Rational) -> f64 {
    if *r == 0 {
        return f64::NEG_INFINITY;
    }
    log2_abs_integer(r.numer()) - log2_abs_integer(r.denom())
}

pub fn log2_abs_integer(i: &Integer) -> f64 {
    if *i == 0 {
        return f64::NEG_INFINITY;
    }
    let (m, e) = i.to_f64_exp();
    m.abs().log2() + e as f64
}

/// Binary arithmetic with a series or integer right operand.
pub fn series_arith(op: ArithOp, a: &QSeries, b: Operand<'_>) -> Result<QSeries> {
    match (op, b) {
        (ArithOp::Add, Operand::Series(s)) => Ok(a.add(s)),
        (ArithOp::Sub, Operand::Series(s)) => Ok(a.sub(s)),
        (ArithOp::Mul, Operand::Series(s)) => Ok(a.mul(s)),
        (ArithOp::Div, Operand::Series(s)) => a.div(s),
        (ArithOp::Pow, Operand::Series(_)) => Err(Error::InvalidArgument("exponent must be an integer".into())),
        (ArithOp::Add, Operand::Integer(c)) => Ok(a.add_constant(&Rational::from(c))),
        (ArithOp::Sub, Operand::Integer(c)) => Ok(a.add_constant(&Rational::from(-c))),
        (ArithOp::Mul, Operand::Integer(c)) => Ok(a.scale_i64(c)),
        (ArithOp::Div, Operand::Integer(c)) => {
            if c == 0 {
                return Err(Error::DivisionByZero);
            }
            Ok(a.scale(&Rational::from((1, c))))
        }
        (ArithOp::Pow, Operand::Integer(e)) => a.pow(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometric(n: usize) -> QSeries {
        QSeries::from_i64(0, &vec![1; n])
    }

    #[test]
    fn identity_product() {
        let f = QSeries::from_i64(0, &[1, 240, 2160, 6720]);
        assert_eq!(f.mul(&QSeries::one(4)), f);
    }

    #[test]
    fn opposite_orders_cancel() {
        let a = QSeries::from_i64(-1, &[1, 0, 0]);
        let b = QSeries::from_i64(1, &[1, 0, 0]);
        let p = a.mul(&b);
        assert_eq!(p.lowest_order(), 0);
        assert_eq!(p.rational(0).unwrap(), 1);
    }

    #[test]
    fn e4_squared_first_coefficient() {
        let e4 = QSeries::from_i64(0, &[1, 240, 2160]);
        assert_eq!(e4.mul(&e4).rational(1).unwrap(), 480);
    }

    #[test]
    fn inverse_of_one_minus_q() {
        let f = QSeries::from_i64(0, &[1, -1, 0, 0, 0]);
        assert_eq!(f.inverse().unwrap(), geometric(5));
    }

    #[test]
    fn division_tracks_orders() {
        let a = QSeries::from_i64(2, &[1, 1, 1, 1]);
        let b = QSeries::from_i64(1, &[1, 0, 0, 0]);
        let c = a.div(&b).unwrap();
        assert_eq!(c.lowest_order(), 1);
        assert_eq!(c.len(), 4);
    }

    #[test]
    fn zero_division_is_an_error() {
        assert_eq!(QSeries::zero(0, 3).inverse(), Err(Error::DivisionByZero));
    }

    #[test]
    fn out_of_range_is_an_error() {
        let f = QSeries::from_i64(0, &[1, 2]);
        assert!(f.coefficient(2).is_err());
        assert_eq!(f.rational(-3).unwrap(), 0);
    }

    #[test]
    fn pow_matches_repeated_multiplication() {
        let f = QSeries::from_i64(0, &[1, -3, 5, 7, -2, 4]);
        let mut r = QSeries::one(6);
        for _ in 0..5 {
            r = r.mul(&f);
        }
        assert_eq!(f.pow(5).unwrap(), r);
        let inv3 = f.pow(-3).unwrap();
        assert_eq!(inv3.mul(&r).truncate(6), f.pow(2).unwrap());
    }

    #[test]
    fn rational_pow() {
        let f = QSeries::exact(0, vec![Rational::from((1, 2)), Rational::from(3), Rational::from((-1, 3))]);
        let direct = f.mul(&f).mul(&f);
        assert_eq!(f.pow(3).unwrap(), direct);
    }

    #[test]
    fn d_operator_examples() {
        assert!(QSeries::one(5).d_operator(1).is_zero());
        let inv_q = QSeries::from_i64(-1, &[1, 0, 0]);
        assert_eq!(inv_q.d_operator(1).rational(-1).unwrap(), -1);
    }

    #[test]
    fn float_and_exact_agree() {
        let a = QSeries::from_i64(0, &[1, -24, 252, -1472]);
        let b = QSeries::from_i64(0, &[1, 240, 2160, 6720]);
        let exact = a.mul(&b).to_float(128);
        let float = a.to_float(128).mul(&b.to_float(128));
        for n in 0..4 {
            assert_eq!(exact.coeff_f64(n).unwrap(), float.coeff_f64(n).unwrap());
        }
    }

    #[test]
    fn json_round_trip() {
        let f = QSeries::exact(-1, vec![Rational::from(1), Rational::from((-1, 3)), Rational::from(744)]);
        let back = QSeries::from_json(&f.to_json()).unwrap();
        assert_eq!(back, f);
        let g = f.to_float(96);
        let back = QSeries::from_json(&g.to_json()).unwrap();
        assert_eq!(back.coeff_f64(0).unwrap(), g.coeff_f64(0).unwrap());
    }

    #[test]
    fn add_constant_below_range() {
        let f = QSeries::from_i64(-1, &[1, 0, 5]);
        let g = f.add_constant(&Rational::from(-744));
        assert_eq!(g.rational(0).unwrap(), -744);
        let h = QSeries::from_i64(2, &[1, 1]);
        assert_eq!(h.add_constant(&Rational::from(3)).rational(0).unwrap(), 3);
    }

    #[test]
    fn series_arith_dispatch() {
        let f = QSeries::from_i64(0, &[1, 1, 1]);
        let g = series_arith(ArithOp::Pow, &f, Operand::Integer(2)).unwrap();
        assert_eq!(g, QSeries::from_i64(0, &[1, 2, 3]));
        let h = series_arith(ArithOp::Div, &g, Operand::Series(&f)).unwrap();
        assert_eq!(h, f);
    }
}
