//! Classical forms, gap forms and quasimodular forms stored by E2-components.

use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use rug::{Integer, Rational};
use serde_json::{json, Value};

use crate::arith::sigma;
use crate::error::{Error, Result};
use crate::qseries::QSeries;

/// Bernoulli number B_n (with B_1 = -1/2), memoized.
pub fn bernoulli(n: usize) -> Rational {
    static TABLE: OnceLock<Mutex<Vec<Rational>>> = OnceLock::new();
    let table = TABLE.get_or_init(|| Mutex::new(vec![Rational::from(1)]));
    let mut t = table.lock().expect("bernoulli table");
    while t.len() <= n {
        let m = t.len();
        // B_m = -1/(m+1) sum_{k<m} C(m+1, k) B_k
        let mut s = Rational::new();
        let mut binom = Integer::from(1);
        for (k, b) in t.iter().enumerate() {
            s += Rational::from(b * &binom);
            binom *= (m + 1 - k) as u64;
            binom /= (k + 1) as u64;
        }
        let val = (-s) / Rational::from(m as u64 + 1);
        t.push(val);
    }
    t[n].clone()
}

/// E_k = 1 - (2k/B_k) sum sigma_{k-1}(n) q^n with `terms` stored coefficients.
/// k = 0 gives the constant 1; k = 2 gives the quasimodular E2.
pub fn eisenstein(k: u32, terms: usize) -> Result<QSeries> {
    if k % 2 == 1 {
        return Err(Error::InvalidArgument(format!("odd weight {k}")));
    }
    if k == 0 {
        return Ok(QSeries::one(terms));
    }
    let factor = Rational::from(-2 * k as i64) / bernoulli(k as usize);
    let mut c = Vec::with_capacity(terms);
    for n in 0..terms {
        if n == 0 {
            c.push(Rational::from(1));
        } else {
            c.push(Rational::from(&factor * sigma(k - 1, n as u64)));
        }
    }
    Ok(QSeries::exact(0, c))
}

/// Delta = (E4^3 - E6^2)/1728, lowest order 1.
pub fn delta(terms: usize) -> QSeries {
    let e4 = eisenstein(4, terms + 1).expect("weight 4");
    let e6 = eisenstein(6, terms + 1).expect("weight 6");
    let num = e4.pow(3).expect("pow").sub(&e6.mul(&e6));
    num.scale(&Rational::from((1, 1728))).truncate(terms)
}

/// j = E4^3/Delta, lowest order -1.
pub fn j_invariant(terms: usize) -> QSeries {
    let e4 = eisenstein(4, terms).expect("weight 4");
    e4.pow(3).expect("pow").div(&delta(terms)).expect("delta is invertible")
}

/// The named classical objects.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassicalForm {
    E2,
    E4,
    E6,
    E14,
    Delta,
    J,
}

impl ClassicalForm {
    /// Weight, with j counted as weight 0.
    pub fn weight(self) -> i64 {
        match self {
            ClassicalForm::E2 => 2,
            ClassicalForm::E4 => 4,
            ClassicalForm::E6 => 6,
            ClassicalForm::E14 => 14,
            ClassicalForm::Delta => 12,
            ClassicalForm::J => 0,
        }
    }
}

impl FromStr for ClassicalForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "e2" => Ok(ClassicalForm::E2),
            "e4" => Ok(ClassicalForm::E4),
            "e6" => Ok(ClassicalForm::E6),
            "e14" => Ok(ClassicalForm::E14),
            "delta" | "d" => Ok(ClassicalForm::Delta),
            "j" => Ok(ClassicalForm::J),
            _ => Err(Error::InvalidArgument(format!("unknown form {s}"))),
        }
    }
}

pub fn classical_form(name: ClassicalForm, terms: usize) -> Result<QSeries> {
    if terms == 0 {
        return Err(Error::InsufficientTerms { needed: 1, got: 0 });
    }
    Ok(match name {
        ClassicalForm::E2 => eisenstein(2, terms)?,
        ClassicalForm::E4 => eisenstein(4, terms)?,
        ClassicalForm::E6 => eisenstein(6, terms)?,
        ClassicalForm::E14 => {
            let e4 = eisenstein(4, terms)?;
            e4.mul(&e4).mul(&eisenstein(6, terms)?)
        }
        ClassicalForm::Delta => delta(terms),
        ClassicalForm::J => j_invariant(terms),
    })
}

/// Split k = 12 ell + k' with k' in {0, 4, 6, 8, 10, 14}.
pub fn weight_split(k: i64) -> Result<(i64, u32)> {
    if k < 0 || k % 2 != 0 {
        return Err(Error::Infeasible(format!("weight {k} must be even and non-negative")));
    }
    let r = k % 12;
    let (ell, kp) = if r == 2 { ((k - 14) / 12, 14) } else { (k / 12, r as u32) };
    if ell < 0 {
        return Err(Error::Infeasible(format!("no gap forms of weight {k}")));
    }
    Ok((ell, kp))
}

/// f_{k,m} = q^{-m} + O(q^{ell+1}).
#[derive(Clone, Debug, PartialEq)]
pub struct GapForm {
    pub k: i64,
    pub m: i64,
    pub ell: i64,
    pub kprime: u32,
    /// Coefficients c_0..c_{ell+m} of F with f = Delta^ell E_{k'} F(j).
    pub poly: Vec<Integer>,
    pub series: QSeries,
}

impl GapForm {
    pub fn to_json(&self) -> Value {
        let mut v = self.series.to_json();
        v["weight"] = json!(self.k);
        v["depth"] = json!(0);
        v["m"] = json!(self.m);
        v["ell"] = json!(self.ell);
        v["kprime"] = json!(self.kprime);
        v
    }

    pub fn as_quasiform(&self) -> QuasiForm {
        QuasiForm::modular(self.k, self.series.clone())
    }
}

/// Builds f_{k,m} with `terms` stored coefficients starting at q^{-m}.
///
/// The polynomial F is fixed by triangular elimination against Delta^ell E_{k'} j^i
/// using only coefficients up to q^ell; the full expansion then comes from a
/// Horner evaluation of F at j. Everything is integral since every pivot is 1.
pub fn gap_form(k: i64, m: i64, terms: usize) -> Result<GapForm> {
    let (ell, kprime) = weight_split(k)?;
    if m < -ell {
        return Err(Error::Infeasible(format!("m = {m} < -ell = {}", -ell)));
    }
    let deg = (ell + m) as usize;
    let needed = deg + 2;
    if terms < needed {
        return Err(Error::InsufficientTerms { needed, got: terms });
    }
    let ekp = eisenstein(kprime, terms)?;

    // elimination on the short basis
    let short = deg + 1;
    let base_short = delta(short).pow(ell)?.mul(&ekp.truncate(short));
    let j_short = j_invariant(short);
    let mut basis = Vec::with_capacity(deg + 1);
    let mut cur = base_short.clone();
    basis.push(cur.clone());
    for _ in 0..deg {
        cur = cur.mul(&j_short);
        basis.push(cur.clone());
    }
    let mut g = basis[deg].clone();
    let mut poly = vec![Integer::new(); deg + 1];
    poly[deg] = Integer::from(1);
    for i in (0..deg).rev() {
        let e = ell - i as i64;
        let c = g.integer(e)?;
        if c != 0 {
            let ci = Integer::from(-&c);
            g = g.sub(&basis[i].scale(&Rational::from(&c)));
            poly[i] = ci;
        }
    }

    // full expansion: S = F(j) by Horner, then Delta^ell E_{k'} S
    let j_full = j_invariant(terms);
    let mut s = QSeries::one(terms);
    for i in (0..deg).rev() {
        s = s.mul(&j_full).add_constant(&Rational::from(&poly[i]));
    }
    let base = delta(terms).pow(ell)?.mul(&ekp);
    let series = base.mul(&s).truncate(terms);
    Ok(GapForm { k, m, ell, kprime, poly, series })
}

/// f = sum_i f_i E2^i with f_i of weight k - 2i.
#[derive(Clone, Debug)]
pub struct QuasiForm {
    weight: i64,
    components: Vec<QSeries>,
    flat: QSeries,
}

impl QuasiForm {
    /// Builds from components; zero top components are dropped.
    pub fn new(weight: i64, components: Vec<QSeries>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("no components".into()));
        }
        let mut components = components;
        while components.len() > 1 && components.last().map(|c| c.is_zero()).unwrap_or(false) {
            components.pop();
        }
        if weight < 2 * (components.len() as i64 - 1) {
            return Err(Error::InvalidArgument(format!(
                "depth {} impossible in weight {weight}",
                components.len() - 1
            )));
        }
        let flat = flatten(&components)?;
        Ok(QuasiForm { weight, components, flat })
    }

    pub fn modular(weight: i64, f: QSeries) -> Self {
        let flat = f.clone();
        QuasiForm { weight, components: vec![f], flat }
    }

    /// E2 as the depth-one form 0 + 1*E2.
    pub fn e2(terms: usize) -> Self {
        QuasiForm::new(2, vec![QSeries::zero(0, terms), QSeries::one(terms)]).expect("E2")
    }

    pub fn weight(&self) -> i64 {
        self.weight
    }

    pub fn depth(&self) -> usize {
        self.components.len() - 1
    }

    pub fn components(&self) -> &[QSeries] {
        &self.components
    }

    pub fn component(&self, i: usize) -> Option<&QSeries> {
        self.components.get(i)
    }

    /// The q-expansion of the whole form.
    pub fn flat(&self) -> &QSeries {
        &self.flat
    }

    /// Coefficient domains are real by construction.
    pub fn real_coefficients(&self) -> bool {
        true
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.is_zero())
    }

    pub fn scale(&self, c: &Rational) -> QuasiForm {
        QuasiForm::new(self.weight, self.components.iter().map(|f| f.scale(c)).collect())
            .unwrap_or_else(|_| QuasiForm::modular(self.weight, self.components[0].scale(c)))
    }

    pub fn scale_float(&self, c: &rug::Float) -> QuasiForm {
        QuasiForm::new(self.weight, self.components.iter().map(|f| f.scale_float(c)).collect())
            .unwrap_or_else(|_| QuasiForm::modular(self.weight, self.components[0].scale_float(c)))
    }

    /// Sum of two forms of the same weight.
    pub fn add(&self, other: &QuasiForm) -> Result<QuasiForm> {
        if self.weight != other.weight {
            return Err(Error::InvalidArgument(format!("weights {} and {} differ", self.weight, other.weight)));
        }
        let n = self.components.len().max(other.components.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let c = match (self.components.get(i), other.components.get(i)) {
                (Some(a), Some(b)) => a.add(b),
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b.clone(),
                (None, None) => unreachable!(),
            };
            out.push(c);
        }
        QuasiForm::new(self.weight, out)
    }

    /// Equality of flattened expansions up to the common truncation order.
    pub fn same_expansion(&self, other: &QuasiForm) -> bool {
        let d = self.flat.sub(&other.flat);
        d.is_zero()
    }

    pub fn to_json(&self) -> Value {
        let mut v = self.flat.to_json();
        v["weight"] = json!(self.weight);
        v["depth"] = json!(self.depth());
        v["components"] = Value::Array(self.components.iter().map(|c| c.to_json()).collect());
        v
    }
}

fn flatten(components: &[QSeries]) -> Result<QSeries> {
    let max_len = components.iter().map(|c| c.len()).max().unwrap_or(0);
    let e2 = eisenstein(2, max_len.max(1))?;
    let mut acc = components[0].clone();
    let mut pow = QSeries::one(max_len.max(1));
    for c in &components[1..] {
        pow = pow.mul(&e2);
        acc = acc.add(&c.mul(&pow));
    }
    Ok(acc)
}

/// Serre derivative of a modular series of weight w: D f - (w/12) E2 f.
pub fn serre_modular(f: &QSeries, w: i64) -> Result<QSeries> {
    let e2 = eisenstein(2, f.len().max(1))?;
    Ok(f.d_operator(1).sub(&e2.mul(f).scale(&Rational::from((w, 12)))))
}

/// D f as a form of weight k+2 and depth p+1.
pub fn derivative_quasiform(f: &QuasiForm) -> Result<QuasiForm> {
    let k = f.weight;
    let p = f.depth();
    if f.is_zero() || (k == 0 && p == 0) {
        let n = f.flat.len();
        let d = f.flat.d_operator(1);
        return Ok(QuasiForm::modular(k + 2, if d.is_zero() { QSeries::zero(0, n) } else { d }));
    }
    let n = f.components.iter().map(|c| c.len()).max().unwrap_or(1);
    let e4 = eisenstein(4, n)?;
    let comps = &f.components;
    let mut out = Vec::with_capacity(p + 2);
    for jdx in 0..=p + 1 {
        let mut g: Option<QSeries> = None;
        let mut push = |s: QSeries| {
            g = Some(match g.take() {
                Some(acc) => acc.add(&s),
                None => s,
            });
        };
        if jdx <= p {
            push(serre_modular(&comps[jdx], k - 2 * jdx as i64)?);
        }
        if jdx < p {
            let c = Rational::from((-(jdx as i64 + 1), 12));
            push(e4.mul(&comps[jdx + 1]).scale(&c));
        }
        if jdx >= 1 {
            let c = Rational::from((k - jdx as i64 + 1, 12));
            push(comps[jdx - 1].scale(&c));
        }
        out.push(g.expect("at least one term"));
    }
    QuasiForm::new(k + 2, out)
}

/// theta f = D f - ((k - p)/12) E2 f, weight k+2 and the same depth.
pub fn serre_derivative(f: &QuasiForm) -> Result<QuasiForm> {
    let k = f.weight;
    let p = f.depth();
    let n = f.components.iter().map(|c| c.len()).max().unwrap_or(1);
    let e4 = eisenstein(4, n)?;
    let comps = &f.components;
    let mut out = Vec::with_capacity(p + 1);
    for jdx in 0..=p {
        let mut acc = serre_modular(&comps[jdx], k - 2 * jdx as i64)?;
        if jdx < p {
            acc = acc.add(&e4.mul(&comps[jdx + 1]).scale(&Rational::from((-(jdx as i64 + 1), 12))));
        }
        if jdx >= 1 {
            acc = acc.add(&comps[jdx - 1].scale(&Rational::from((p as i64 - jdx as i64 + 1, 12))));
        }
        out.push(acc);
    }
    QuasiForm::new(k + 2, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_values() {
        assert_eq!(bernoulli(2), Rational::from((1, 6)));
        assert_eq!(bernoulli(12), Rational::from((-691, 2730)));
    }

    #[test]
    fn e4_and_e6_coefficients() {
        let e4 = classical_form(ClassicalForm::E4, 5).unwrap();
        assert_eq!(e4.rational(2).unwrap(), 2160);
        let e6 = classical_form(ClassicalForm::E6, 5).unwrap();
        assert_eq!(e6.rational(1).unwrap(), -504);
        let e2 = classical_form(ClassicalForm::E2, 5).unwrap();
        assert_eq!(e2.rational(3).unwrap(), -96);
    }

    #[test]
    fn delta_and_j() {
        let d = classical_form(ClassicalForm::Delta, 6).unwrap();
        assert_eq!(d.lowest_order(), 1);
        assert_eq!(d.rational(1).unwrap(), 1);
        assert_eq!(d.rational(2).unwrap(), -24);
        assert_eq!(d.rational(6).unwrap(), -6048);
        let j = classical_form(ClassicalForm::J, 4).unwrap();
        assert_eq!(j.rational(-1).unwrap(), 1);
        assert_eq!(j.rational(0).unwrap(), 744);
        assert_eq!(j.rational(1).unwrap(), 196884);
        assert_eq!(j.rational(2).unwrap(), 21493760);
    }

    #[test]
    fn e14_is_e4_squared_e6() {
        let e14 = classical_form(ClassicalForm::E14, 8).unwrap();
        let direct = eisenstein(14, 8).unwrap();
        assert_eq!(e14, direct);
    }

    #[test]
    fn weight_splits() {
        assert_eq!(weight_split(96).unwrap(), (8, 0));
        assert_eq!(weight_split(86).unwrap(), (6, 14));
        assert_eq!(weight_split(14).unwrap(), (0, 14));
        assert_eq!(weight_split(0).unwrap(), (0, 0));
        assert!(weight_split(2).is_err());
    }

    #[test]
    fn gap_form_12() {
        let g = gap_form(12, 0, 6).unwrap();
        assert_eq!(g.series.rational(0).unwrap(), 1);
        assert_eq!(g.series.rational(1).unwrap(), 0);
        assert_eq!(g.series.rational(2).unwrap(), 196560);
        let d = gap_form(12, -1, 6).unwrap();
        assert_eq!(d.series, delta(6));
    }

    #[test]
    fn gap_forms_of_low_weight_are_eisenstein() {
        for k in [4u32, 6, 8, 10, 14] {
            let g = gap_form(k as i64, 0, 10).unwrap();
            assert_eq!(g.series, eisenstein(k, 10).unwrap());
        }
    }

    #[test]
    fn gap_form_weight_zero_is_j_polynomial() {
        let g = gap_form(0, 1, 5).unwrap();
        assert_eq!(g.series.rational(-1).unwrap(), 1);
        assert_eq!(g.series.rational(0).unwrap(), 0);
        assert_eq!(g.series.rational(1).unwrap(), 196884);
    }

    #[test]
    fn gap_form_rejects_bad_input() {
        assert!(gap_form(2, 0, 10).is_err());
        assert!(gap_form(24, -3, 10).is_err());
        assert!(matches!(gap_form(96, 0, 5), Err(Error::InsufficientTerms { .. })));
    }

    #[test]
    fn serre_derivative_of_e4() {
        let e4 = QuasiForm::modular(4, eisenstein(4, 8).unwrap());
        let t = serre_derivative(&e4).unwrap();
        assert_eq!(t.weight(), 6);
        assert_eq!(t.depth(), 0);
        assert_eq!(t.flat().rational(0).unwrap(), Rational::from((-1, 3)));
        assert_eq!(t.flat().rational(1).unwrap(), 168);
        let e6 = eisenstein(6, 8).unwrap().scale(&Rational::from((-1, 3)));
        assert_eq!(*t.flat(), e6);
    }

    #[test]
    fn serre_derivative_kills_delta() {
        let d = QuasiForm::modular(12, delta(20));
        assert!(serre_derivative(&d).unwrap().is_zero());
    }

    #[test]
    fn derivative_components() {
        let e6 = QuasiForm::modular(6, eisenstein(6, 10).unwrap());
        let d = derivative_quasiform(&e6).unwrap();
        assert_eq!(d.depth(), 1);
        assert_eq!(d.components()[1], eisenstein(6, 10).unwrap().scale(&Rational::from((1, 2))));
        assert_eq!(*d.flat(), e6.flat().d_operator(1));
    }

    #[test]
    fn derivative_of_depth_one_matches_flat() {
        let e2 = QuasiForm::e2(12);
        let d = derivative_quasiform(&e2).unwrap();
        assert_eq!(d.depth(), 2);
        assert!(d.flat().sub(&e2.flat().d_operator(1)).is_zero());
        let t = serre_derivative(&e2).unwrap();
        let expect = e2.flat().d_operator(1).sub(&e2.flat().mul(e2.flat()).scale(&Rational::from((1, 12))));
        assert!(t.flat().sub(&expect).is_zero());
    }

    #[test]
    fn derivative_of_constant() {
        let one = QuasiForm::modular(0, QSeries::one(5));
        assert!(derivative_quasiform(&one).unwrap().is_zero());
    }
}
