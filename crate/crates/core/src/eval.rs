//! Evaluation of q-series at points of the upper half-plane.
//!
//! Values come from the stored coefficients only. The truncation error is
//! estimated by a geometric-tail heuristic, which is not a proof.

use std::cell::RefCell;
use std::f64::consts::PI;

use rug::{Complex, Float};

use crate::error::{Error, Result};
use crate::forms::QuasiForm;
use crate::mp::{self, log2_abs};
use crate::qseries::QSeries;

/// Lowest admissible imaginary part for raw summation.
pub const MIN_Y: f64 = 0.3;

/// A point x + iy with y > 0.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct HPoint {
    pub x: f64,
    pub y: f64,
}

impl HPoint {
    pub fn from_xy(x: f64, y: f64) -> Result<HPoint> {
        if !(y > 0.0) || !x.is_finite() || !y.is_finite() {
            return Err(Error::InvalidArgument(format!("({x}, {y}) is not in the upper half-plane")));
        }
        Ok(HPoint { x, y })
    }

    /// 1/2 + i t.
    pub fn from_delta2(t: f64) -> Result<HPoint> {
        HPoint::from_xy(0.5, t)
    }

    /// 1/2 + (i/2) cot(theta), so |z| = 1/(2 sin theta).
    pub fn from_theta(theta: f64) -> Result<HPoint> {
        if !(theta > 0.0 && theta < PI / 2.0) {
            return Err(Error::InvalidArgument(format!("theta = {theta} outside (0, pi/2)")));
        }
        HPoint::from_xy(0.5, 0.5 / theta.tan())
    }

    /// e^{i phi} with pi/3 <= phi <= 2pi/3.
    pub fn from_arc(phi: f64) -> Result<HPoint> {
        let eps = 1e-12;
        if phi < PI / 3.0 - eps || phi > 2.0 * PI / 3.0 + eps {
            return Err(Error::InvalidArgument(format!("phi = {phi} outside [pi/3, 2pi/3]")));
        }
        HPoint::from_xy(phi.cos(), phi.sin())
    }

    pub fn i() -> HPoint {
        HPoint { x: 0.0, y: 1.0 }
    }

    /// rho = e^{i pi/3} = 1/2 + i sqrt(3)/2.
    pub fn rho() -> HPoint {
        HPoint { x: 0.5, y: 3f64.sqrt() / 2.0 }
    }

    pub fn to_complex(&self, prec: u32) -> Complex {
        mp::cplx(prec, self.x, self.y)
    }

    pub fn abs(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(&self, o: &HPoint) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

/// Value with a heuristic truncation estimate and a rounding estimate.
#[derive(Clone, Debug)]
pub struct EvalResult {
    pub value: Complex,
    /// Estimated |truncation error|; infinite when decay is not established.
    pub tail_bound: f64,
    /// log2 of the tail bound (usable when the bound underflows f64).
    pub log2_tail: f64,
    /// log2 of the estimated floating point error.
    pub log2_rounding: f64,
    pub terms_used: usize,
}

impl EvalResult {
    /// log2 of tail plus rounding uncertainty.
    pub fn log2_uncertainty(&self) -> f64 {
        log2_add(self.log2_tail, self.log2_rounding)
    }

    pub fn log2_abs(&self) -> f64 {
        mp::log2_abs_c(&self.value)
    }

    pub fn to_c64(&self) -> (f64, f64) {
        mp::to_c64(&self.value)
    }
}

/// log2(2^a + 2^b).
pub fn log2_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (1.0 + (lo - hi).exp2()).log2()
}

/// Coefficients of one series prepared for repeated evaluation at a fixed precision.
#[derive(Clone, Debug)]
pub struct Evaluator {
    lowest: i64,
    coeffs: Vec<Float>,
    log2_mag: Vec<f64>,
    prec: u32,
}

impl Evaluator {
    pub fn new(f: &QSeries, prec: u32) -> Evaluator {
        Evaluator { lowest: f.lowest_order(), coeffs: f.float_values(prec), log2_mag: f.log2_magnitudes(), prec }
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn lowest_order(&self) -> i64 {
        self.lowest
    }

    /// log2 of the term magnitudes |a_n| |q|^n at imaginary part y.
    pub fn term_profile(&self, y: f64) -> Vec<f64> {
        let lq = -2.0 * PI * y / std::f64::consts::LN_2;
        self.log2_mag.iter().enumerate().map(|(i, &m)| m + (self.lowest + i as i64) as f64 * lq).collect()
    }

    /// Heuristic truncation bound, in log2, at imaginary part y.
    ///
    /// The coefficient envelope is the maximum over the last 8 stored terms, grown
    /// at the rate seen between the two halves of the last 16. Sign changes and
    /// fluctuations of individual coefficients do not disturb it.
    pub fn log2_tail(&self, y: f64) -> f64 {
        let n = self.coeffs.len();
        if n == 0 {
            return f64::INFINITY;
        }
        let lq = -2.0 * PI * y / std::f64::consts::LN_2;
        let window = 16.min(n);
        let start = n - window;
        let mid = n - window / 2;
        let max_of = |r: std::ops::Range<usize>| r.map(|i| self.log2_mag[i]).fold(f64::NEG_INFINITY, f64::max);
        let recent = max_of(mid..n);
        if recent == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let older = max_of(start..mid);
        let growth =
            if older.is_finite() && mid > start { ((recent - older) / (n - mid) as f64).max(0.0) } else { 0.0 };
        let ratio = lq + growth;
        if ratio >= 0.0 {
            return f64::INFINITY;
        }
        // first omitted term at index n, then geometric with the envelope ratio
        let first = recent + growth + (self.lowest + n as i64) as f64 * lq;
        first - (1.0 - ratio.exp2()).log2() + 1.0
    }

    /// log2 of sum |a_n||q|^n, the scale of rounding errors.
    pub fn log2_abs_sum(&self, y: f64) -> f64 {
        self.term_profile(y).into_iter().fold(f64::NEG_INFINITY, log2_add)
    }

    /// Evaluate at q directly (|q| < 1), with y = -log|q|/(2 pi) used for the estimates.
    pub fn eval_q(&self, q: &Complex) -> Result<EvalResult> {
        let aq = mp::abs_c(q).to_f64();
        if !(aq < 1.0) {
            return Err(Error::NotConvergent(aq));
        }
        let y = -aq.ln() / (2.0 * PI);
        let p = self.prec;
        let mut s = Complex::new(p);
        for c in self.coeffs.iter().rev() {
            s *= q;
            *s.mut_real() += c;
        }
        if self.lowest != 0 {
            let qv = Complex::with_val(p, rug::ops::Pow::pow(q, self.lowest as i32));
            s *= qv;
        }
        let n = self.coeffs.len();
        let log2_tail = if aq == 0.0 { f64::NEG_INFINITY } else { self.log2_tail(y) };
        let log2_rounding = self.log2_abs_sum(y) - p as f64 + (n.max(2) as f64).log2() + 4.0;
        Ok(EvalResult { value: s, tail_bound: log2_tail.exp2(), log2_tail, log2_rounding, terms_used: n })
    }

    pub fn eval(&self, z: &Complex) -> Result<EvalResult> {
        let q = mp::q_of(&Complex::with_val(self.prec, z));
        self.eval_q(&q)
    }

    pub fn eval_point(&self, z: HPoint) -> Result<EvalResult> {
        self.eval(&z.to_complex(self.prec))
    }
}

/// Precision that leaves about `margin` bits after the worst cancellation
/// expected at imaginary part `y_min`.
pub fn auto_precision(f: &QSeries, y_min: f64, margin: u32) -> u32 {
    let ev = Evaluator::new(&f.truncate(f.len()), 53);
    let prof = ev.term_profile(y_min);
    let max = prof.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lead = prof.iter().cloned().find(|v| v.is_finite()).unwrap_or(0.0);
    let extra = max.max(0.0) + (-lead).max(0.0);
    let bits = margin as f64 + extra.ceil();
    (bits as u32).clamp(64, 1 << 20)
}

/// Series terms so that a weight-w series is summed to about 2^-bits at height y.
pub fn terms_for_height(weight: i64, y: f64, bits: f64) -> usize {
    let rate = 2.0 * PI * y / std::f64::consts::LN_2;
    let mut n = 16.0f64;
    for _ in 0..60 {
        let need = (bits + weight as f64 * n.log2()) / rate;
        if (need - n).abs() < 1.0 {
            break;
        }
        n = need.max(16.0);
    }
    n.ceil() as usize + 8
}

/// Evaluate a series at z with an optional tail tolerance.
pub fn evaluate(f: &QSeries, z: HPoint, prec: u32, tail_tol: Option<f64>) -> Result<EvalResult> {
    if z.y < MIN_Y {
        return Err(Error::InvalidArgument(format!("y = {} is below {MIN_Y}", z.y)));
    }
    let r = Evaluator::new(f, prec).eval_point(z)?;
    if let Some(tol) = tail_tol {
        if r.tail_bound > tol {
            return Err(Error::TailTooLarge { bound: r.tail_bound, tol });
        }
    }
    Ok(r)
}

/// Geodesic segments used for real restrictions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Segment {
    /// Re z = 0, parameter t = Im z.
    Delta1,
    /// Re z = 1/2, parameter t = Im z.
    Delta2,
    /// |z| = 1, parameter phi with z = e^{i phi}.
    Arc,
}

/// A real sample with its uncertainty.
#[derive(Clone, Debug)]
pub struct Sample {
    pub value: Float,
    /// log2 of the absolute uncertainty (tail plus rounding).
    pub log2_uncertainty: f64,
    /// log2 |imaginary part| that was discarded.
    pub log2_imag: f64,
}

impl Sample {
    /// Sign when it exceeds the uncertainty, else None.
    pub fn sign(&self) -> Option<i32> {
        if log2_abs(&self.value) > self.log2_uncertainty + 1.0 {
            Some(mp::sign(&self.value))
        } else {
            None
        }
    }
}

/// A real-valued function of one variable evaluable at a chosen precision.
pub trait RealFunction {
    fn sample(&self, t: f64, prec: u32) -> Result<Sample>;
    fn base_prec(&self) -> u32;
}

/// Wraps a closure t -> f64 (exact for test purposes).
pub struct FnReal<F: Fn(f64) -> f64>(pub F);

impl<F: Fn(f64) -> f64> RealFunction for FnReal<F> {
    fn sample(&self, t: f64, prec: u32) -> Result<Sample> {
        Ok(Sample {
            value: Float::with_val(prec, (self.0)(t)),
            log2_uncertainty: f64::NEG_INFINITY,
            log2_imag: f64::NEG_INFINITY,
        })
    }

    fn base_prec(&self) -> u32 {
        53
    }
}

/// Restriction of a real-coefficient form to a geodesic.
pub struct GeodesicFn {
    series: QSeries,
    segment: Segment,
    weight: i64,
    prec: u32,
    cache: RefCell<Option<Evaluator>>,
}

impl GeodesicFn {
    pub fn segment(&self) -> Segment {
        self.segment
    }

    pub fn series(&self) -> &QSeries {
        &self.series
    }

    fn evaluator(&self, prec: u32) -> Evaluator {
        let mut c = self.cache.borrow_mut();
        match c.as_ref() {
            Some(e) if e.prec() == prec => e.clone(),
            _ => {
                let e = Evaluator::new(&self.series, prec);
                *c = Some(e.clone());
                e
            }
        }
    }

    /// Point of the upper half-plane for parameter t.
    pub fn point(&self, t: f64) -> HPoint {
        match self.segment {
            Segment::Delta1 => HPoint { x: 0.0, y: t },
            Segment::Delta2 => HPoint { x: 0.5, y: t },
            Segment::Arc => HPoint { x: t.cos(), y: t.sin() },
        }
    }

    /// Value at t, with the imaginary residual checked against the uncertainty.
    pub fn value(&self, t: f64) -> Result<Sample> {
        self.sample(t, self.prec)
    }
}

impl RealFunction for GeodesicFn {
    fn sample(&self, t: f64, prec: u32) -> Result<Sample> {
        let ev = self.evaluator(prec);
        let (val, unc) = match self.segment {
            Segment::Delta1 | Segment::Delta2 => {
                let x = if self.segment == Segment::Delta1 { 0.0 } else { 0.5 };
                let z = mp::cplx(prec, x, t);
                let r = ev.eval(&z)?;
                let u = r.log2_uncertainty();
                (r.value, u)
            }
            Segment::Arc => {
                let phi = Float::with_val(prec, t);
                let z = Complex::with_val(prec, (phi.clone().cos(), phi.clone().sin()));
                let r = ev.eval(&z)?;
                let u = r.log2_uncertainty();
                let half = Float::with_val(prec, &phi * self.weight) / 2u32;
                let rot = Complex::with_val(prec, (half.clone().cos(), half.sin()));
                (Complex::with_val(prec, &r.value * &rot), u)
            }
        };
        let (re, im) = val.into_real_imag();
        let log2_imag = log2_abs(&im);
        let slack = log2_add(unc, log2_abs(&re) - prec as f64 + 16.0) + 4.0;
        if log2_imag > slack {
            return Err(Error::NonReal(format!("imaginary part 2^{log2_imag:.1} exceeds 2^{slack:.1} at t = {t}")));
        }
        Ok(Sample { value: re, log2_uncertainty: unc, log2_imag })
    }

    fn base_prec(&self) -> u32 {
        self.prec
    }
}

/// Real restriction g(t) of f to a geodesic.
///
/// On the arc the value is e^{i k phi/2} f(e^{i phi}), which is real for modular f.
pub fn restrict_geodesic(f: &QuasiForm, segment: Segment, prec: u32) -> Result<GeodesicFn> {
    if !f.real_coefficients() {
        return Err(Error::NonReal("coefficients are not real".into()));
    }
    Ok(restrict_series(f.flat(), f.weight(), segment, prec))
}

/// As [`restrict_geodesic`] for a bare series of the given weight.
pub fn restrict_series(f: &QSeries, weight: i64, segment: Segment, prec: u32) -> GeodesicFn {
    GeodesicFn { series: f.clone(), segment, weight, prec, cache: RefCell::new(None) }
}

/// f or Df of a real modular form f of weight k on the full line Re z = 0 or 1/2.
///
/// Below the self-dual height (1 on Re z = 0, 1/2 on Re z = 1/2) the value is
/// obtained from the point w = x + i/(s^2 t) with s = 1 or 2:
///
///   f(x + it)  = (i/st)^k f(w),
///   Df(x + it) = (i/st)^{k+2} Df(w) + s (k/2 pi i) (i/st)^{k+1} f(w).
pub struct LineFn {
    f: QSeries,
    df: QSeries,
    weight: i64,
    segment: Segment,
    derivative: bool,
    prec: u32,
    cache: RefCell<Option<(Evaluator, Evaluator)>>,
}

impl LineFn {
    pub fn new(f: &QSeries, weight: i64, segment: Segment, derivative: bool) -> Result<LineFn> {
        if segment == Segment::Arc {
            return Err(Error::InvalidArgument("LineFn needs Delta1 or Delta2".into()));
        }
        if weight % 2 != 0 {
            return Err(Error::InvalidArgument(format!("odd weight {weight}")));
        }
        Ok(LineFn {
            f: f.clone(),
            df: f.d_operator(1),
            weight,
            segment,
            derivative,
            prec: 128,
            cache: RefCell::new(None),
        })
    }

    pub fn with_prec(mut self, prec: u32) -> LineFn {
        self.prec = prec;
        self
    }

    fn scale(&self) -> f64 {
        if self.segment == Segment::Delta1 {
            1.0
        } else {
            2.0
        }
    }

    fn x(&self) -> f64 {
        if self.segment == Segment::Delta1 {
            0.0
        } else {
            0.5
        }
    }

    /// Height below which the transformed point is used.
    pub fn self_dual(&self) -> f64 {
        1.0 / self.scale()
    }

    fn evaluators(&self, prec: u32) -> (Evaluator, Evaluator) {
        let mut c = self.cache.borrow_mut();
        match c.as_ref() {
            Some((a, b)) if a.prec() == prec => (a.clone(), b.clone()),
            _ => {
                let pair = (Evaluator::new(&self.f, prec), Evaluator::new(&self.df, prec));
                *c = Some(pair.clone());
                pair
            }
        }
    }

    /// Imaginary part of the point where the series are actually summed.
    pub fn summation_height(&self, t: f64) -> f64 {
        if t >= self.self_dual() {
            t
        } else {
            1.0 / (self.scale() * self.scale() * t)
        }
    }
}

/// i^n as a real sign for even n.
fn i_pow_even(n: i64) -> i32 {
    if n.rem_euclid(4) == 0 {
        1
    } else {
        -1
    }
}

impl RealFunction for LineFn {
    fn sample(&self, t: f64, prec: u32) -> Result<Sample> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("t = {t} is not positive")));
        }
        let (ef, edf) = self.evaluators(prec);
        let x = self.x();
        let k = self.weight;
        let (re, unc) = if t >= self.self_dual() {
            let z = mp::cplx(prec, x, t);
            let r = if self.derivative { edf.eval(&z)? } else { ef.eval(&z)? };
            let u = r.log2_uncertainty();
            (r.value.into_real_imag().0, u)
        } else {
            let s = self.scale();
            let u = Float::with_val(prec, s) * t;
            let w = mp::cplx(prec, x, 1.0 / (s * s * t));
            let lu = u.to_f64().log2();
            let fw = ef.eval(&w)?;
            let fv = fw.value.real().clone();
            if !self.derivative {
                // i^k u^{-k}
                let fac = Float::with_val(prec, rug::ops::Pow::pow(u.clone(), -(k as i32)));
                let v = Float::with_val(prec, &fv * &fac) * i_pow_even(k);
                (v, fw.log2_uncertainty() - k as f64 * lu)
            } else {
                let dw = edf.eval(&w)?;
                let dv = dw.value.real().clone();
                let a =
                    Float::with_val(prec, &dv * Float::with_val(prec, rug::ops::Pow::pow(u.clone(), -(k as i32 + 2))))
                        * i_pow_even(k + 2);
                // s (k / 2 pi i) i^{k+1} u^{-(k+1)} = s k i^k / (2 pi) u^{-(k+1)}
                let c = Float::with_val(prec, s * k as f64) / (mp::pi(prec) * 2u32);
                let b =
                    Float::with_val(prec, &fv * Float::with_val(prec, rug::ops::Pow::pow(u.clone(), -(k as i32 + 1))))
                        * c
                        * i_pow_even(k);
                let ua = dw.log2_uncertainty() - (k + 2) as f64 * lu;
                let ub = fw.log2_uncertainty() - (k + 1) as f64 * lu + (s * k as f64 / (2.0 * PI)).log2();
                (a + b, log2_add(ua, ub))
            }
        };
        Ok(Sample { value: re, log2_uncertainty: unc, log2_imag: f64::NEG_INFINITY })
    }

    fn base_prec(&self) -> u32 {
        self.prec
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{classical_form, eisenstein, ClassicalForm};

    #[test]
    fn constant_one() {
        let r = evaluate(&QSeries::one(10), HPoint::from_xy(0.3, 1.1).unwrap(), 128, None).unwrap();
        assert_eq!(r.to_c64(), (1.0, 0.0));
        assert_eq!(r.tail_bound, 0.0);
    }

    #[test]
    fn delta_at_rho_has_tiny_tail() {
        let d = classical_form(ClassicalForm::Delta, 12).unwrap();
        let r = evaluate(&d, HPoint::rho(), 128, None).unwrap();
        let rel = r.log2_tail - r.log2_abs();
        assert!(rel < -60.0, "relative tail 2^{rel}");
    }

    #[test]
    fn e4_covariance_under_s() {
        let e4 = eisenstein(4, 80).unwrap();
        let ev = Evaluator::new(&e4, 128);
        let z = mp::cplx(128, 0.1, 1.3);
        let w = Complex::with_val(128, -Complex::with_val(128, z.recip_ref()));
        let lhs = ev.eval(&w).unwrap().value;
        let rhs = Complex::with_val(128, rug::ops::Pow::pow(&z, 4)) * ev.eval(&z).unwrap().value;
        let diff = Complex::with_val(128, &lhs - &rhs);
        assert!(mp::log2_abs_c(&diff) - mp::log2_abs_c(&rhs) < -50.0);
    }

    #[test]
    fn delta_is_negative_on_delta2() {
        let d = QuasiForm::modular(12, classical_form(ClassicalForm::Delta, 30).unwrap());
        let g = restrict_geodesic(&d, Segment::Delta2, 128).unwrap();
        for t in [0.9, 1.5, 3.0] {
            assert_eq!(g.value(t).unwrap().sign(), Some(-1));
        }
    }

    #[test]
    fn arc_restriction_is_real() {
        let e4 = QuasiForm::modular(4, eisenstein(4, 60).unwrap());
        let g = restrict_geodesic(&e4, Segment::Arc, 128).unwrap();
        let s = g.value(PI / 2.0).unwrap();
        assert!(s.log2_imag < log2_abs(&s.value) - 90.0);
        assert!(g.value(1.3).is_ok());
    }

    #[test]
    fn theta_parametrization() {
        let z = HPoint::from_theta(PI / 6.0).unwrap();
        assert!((z.y - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((z.abs() - 1.0).abs() < 1e-15);
        assert!(HPoint::from_theta(2.0).is_err());
        assert!(HPoint::from_arc(0.5).is_err());
    }
}
