//! Zero location and counting.
//!
//! Sign-change scans on geodesics, argument-principle counts on rectangles
//! and small circles, a census of the fundamental domain
//! F = {0 <= Re z < 1, |z| >= 1 for Re z <= 1/2, |z - 1| > 1 for Re z > 1/2},
//! and the closed-form counts attached to the valence formulas.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use rug::ops::Pow;
use rug::{Complex, Float, Rational};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::eval::{auto_precision, log2_add, restrict_series, Evaluator, HPoint, RealFunction, Sample, Segment, MIN_Y};
use crate::forms::{derivative_quasiform, eisenstein, QuasiForm};
use crate::mp::{self, log2_abs};
use crate::qseries::QSeries;

/// Classification tolerance for census positions.
pub const CLASS_TOL: f64 = 1e-8;
/// Clusters this close to i or rho are tested for a zero there by a winding number.
const ELLIPTIC_SNAP: f64 = 1e-3;

fn rho_c() -> C64 {
    C64::new(0.5, 3f64.sqrt() / 2.0)
}

// ---------------------------------------------------------------------------
// real roots on a segment

/// A bracketed real root.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RealRoot {
    pub t: f64,
    pub lo: f64,
    pub hi: f64,
}

fn sign_escalating(g: &dyn RealFunction, t: f64) -> Result<i32> {
    let mut prec = g.base_prec();
    for _ in 0..4 {
        let s: Sample = g.sample(t, prec)?;
        if s.value.is_zero() && s.log2_uncertainty == f64::NEG_INFINITY {
            return Ok(0);
        }
        if let Some(v) = s.sign() {
            return Ok(v);
        }
        prec *= 2;
    }
    Err(Error::Indeterminate(format!("sign of g({t}) below its uncertainty")))
}

/// Scan grid+1 equispaced samples and bisect every sign change to width tol.
///
/// Zeros of even order between samples are not detected.
pub fn real_zeros_on_segment(
    g: &dyn RealFunction,
    t_lo: f64,
    t_hi: f64,
    grid: usize,
    tol: f64,
) -> Result<Vec<RealRoot>> {
    if !(t_lo < t_hi) || grid < 2 {
        return Err(Error::InvalidArgument(format!("bad scan [{t_lo}, {t_hi}] with grid {grid}")));
    }
    let h = (t_hi - t_lo) / grid as f64;
    let ts: Vec<f64> = (0..=grid).map(|i| if i == grid { t_hi } else { t_lo + h * i as f64 }).collect();
    let mut signs = Vec::with_capacity(ts.len());
    for &t in &ts {
        signs.push(sign_escalating(g, t)?);
    }
    let mut roots = Vec::new();
    for i in 0..grid {
        let (s0, s1) = (signs[i], signs[i + 1]);
        if s0 == 0 {
            roots.push(RealRoot { t: ts[i], lo: ts[i], hi: ts[i] });
            continue;
        }
        if s1 == 0 {
            if i + 1 == grid {
                roots.push(RealRoot { t: ts[i + 1], lo: ts[i + 1], hi: ts[i + 1] });
            }
            continue;
        }
        if s0 != s1 {
            let (mut a, mut b) = (ts[i], ts[i + 1]);
            let sa = s0;
            while b - a > tol {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                let sm = sign_escalating(g, m)?;
                if sm == 0 {
                    a = m;
                    b = m;
                    break;
                }
                if sm == sa {
                    a = m;
                } else {
                    b = m;
                }
            }
            roots.push(RealRoot { t: 0.5 * (a + b), lo: a, hi: b });
        }
    }
    Ok(roots)
}

// ---------------------------------------------------------------------------
// complex evaluation of f and f'

/// f and f' = df/dz prepared at a fixed precision.
#[derive(Clone, Debug)]
pub struct FormEvaluator {
    f: Evaluator,
    df: Evaluator,
    prec: u32,
}

impl FormEvaluator {
    pub fn new(series: &QSeries, prec: u32) -> FormEvaluator {
        FormEvaluator { f: Evaluator::new(series, prec), df: Evaluator::new(&series.d_operator(1), prec), prec }
    }

    /// Precision chosen from the term profile at `y_min`.
    pub fn for_region(series: &QSeries, y_min: f64, margin: u32) -> FormEvaluator {
        FormEvaluator::new(series, auto_precision(series, y_min, margin))
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn value(&self) -> &Evaluator {
        &self.f
    }

    /// (f(z), f'(z)) at full precision.
    pub fn eval(&self, z: C64) -> Result<(Complex, Complex)> {
        let zc = mp::cplx(self.prec, z.re, z.im);
        let q = mp::q_of(&zc);
        let f = self.f.eval_q(&q)?.value;
        let d = self.df.eval_q(&q)?.value;
        let two_pi_i = Complex::with_val(self.prec, (0, mp::pi(self.prec) * 2u32));
        Ok((f, d * two_pi_i))
    }

    /// f'/f as a double.
    pub fn log_deriv(&self, z: C64) -> Result<C64> {
        let (f, fp) = self.eval(z)?;
        if f.is_zero() {
            return Ok(C64::new(f64::INFINITY, 0.0));
        }
        let r = Complex::with_val(self.prec, &fp / &f);
        let (a, b) = mp::to_c64(&r);
        Ok(C64::new(a, b))
    }

    /// Newton step f/f'.
    pub fn newton_step(&self, z: C64) -> Result<C64> {
        let (f, fp) = self.eval(z)?;
        if f.is_zero() {
            return Ok(C64::new(0.0, 0.0));
        }
        if fp.is_zero() {
            return Ok(C64::new(f64::INFINITY, 0.0));
        }
        let r = Complex::with_val(self.prec, &f / &fp);
        let (a, b) = mp::to_c64(&r);
        Ok(C64::new(a, b))
    }

    /// |f(z)| as a double (may underflow to 0).
    pub fn abs(&self, z: C64) -> Result<f64> {
        let (f, _) = self.eval(z)?;
        Ok(mp::abs_c(&f).to_f64())
    }
}

// ---------------------------------------------------------------------------
// argument principle

fn gl8() -> &'static (Vec<f64>, Vec<f64>) {
    static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    NODES.get_or_init(|| {
        let (x, w) = mp::gauss_legendre(8, 64);
        (x.iter().map(|v| v.to_f64()).collect(), w.iter().map(|v| v.to_f64()).collect())
    })
}

/// Moments (1/2 pi i) \oint z^k f'/f dz for k = 0, 1, 2 plus the smallest Newton distance seen.
#[derive(Clone, Copy, Debug)]
struct Moments {
    m: [C64; 3],
    min_newton: f64,
}

fn polyline_moments(fe: &FormEvaluator, verts: &[C64], panels: usize) -> Result<Moments> {
    let (xs, ws) = gl8();
    let mut m = [C64::new(0.0, 0.0); 3];
    let mut min_newton = f64::INFINITY;
    for e in 0..verts.len() {
        let a = verts[e];
        let b = verts[(e + 1) % verts.len()];
        for p in 0..panels {
            let pa = a + (b - a) * (p as f64 / panels as f64);
            let pb = a + (b - a) * ((p + 1) as f64 / panels as f64);
            let mid = (pa + pb) * 0.5;
            let half = (pb - pa) * 0.5;
            for (x, w) in xs.iter().zip(ws) {
                let z = mid + half * *x;
                let ld = fe.log_deriv(z)?;
                let nd = 1.0 / ld.norm();
                if nd < min_newton {
                    min_newton = nd;
                }
                let t = ld * half * *w;
                m[0] += t;
                m[1] += t * z;
                m[2] += t * z * z;
            }
        }
    }
    let two_pi_i = C64::new(0.0, 2.0 * PI);
    for v in m.iter_mut() {
        *v /= two_pi_i;
    }
    Ok(Moments { m, min_newton })
}

/// Adaptive moments: panels double until the zeroth moment moves by < 0.02.
fn adaptive_moments(fe: &FormEvaluator, verts: &[C64], start_panels: usize) -> Result<Moments> {
    let mut panels = start_panels.max(1);
    let mut prev = polyline_moments(fe, verts, panels)?;
    loop {
        panels *= 2;
        let cur = polyline_moments(fe, verts, panels)?;
        let d0 = (cur.m[0] - prev.m[0]).norm();
        let scale = verts.iter().map(|v| v.norm()).fold(1.0, f64::max);
        let d1 = (cur.m[1] - prev.m[1]).norm() / scale;
        if d0 < 0.02 && d1 < 0.02 {
            return Ok(cur);
        }
        if panels >= 512 {
            return Err(Error::NoConvergence(format!(
                "winding {:.4} vs {:.4} after {panels} panels per edge",
                cur.m[0].re, prev.m[0].re
            )));
        }
        prev = cur;
    }
}

fn round_winding(w: C64) -> Result<i64> {
    let r = w.re.round();
    if (w.re - r).abs() > 0.1 || w.im.abs() > 0.1 {
        return Err(Error::NonIntegerWinding(w.re));
    }
    Ok(r as i64)
}

fn rect_verts(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> [C64; 4] {
    [C64::new(x_lo, y_lo), C64::new(x_hi, y_lo), C64::new(x_hi, y_hi), C64::new(x_lo, y_hi)]
}

/// Number of zeros (with multiplicity) in a rectangle by the argument principle.
pub fn count_zeros_rect(f: &QuasiForm, x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64, quad_points: usize) -> Result<i64> {
    if !(x_lo < x_hi && y_lo < y_hi) {
        return Err(Error::InvalidArgument("empty rectangle".into()));
    }
    if y_lo < MIN_Y {
        return Err(Error::InvalidArgument(format!("y_lo = {y_lo} below {MIN_Y}")));
    }
    let fe = FormEvaluator::for_region(f.flat(), y_lo, 128);
    count_with(&fe, x_lo, x_hi, y_lo, y_hi, quad_points)
}

fn count_with(fe: &FormEvaluator, x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64, quad_points: usize) -> Result<i64> {
    let verts = rect_verts(x_lo, x_hi, y_lo, y_hi);
    let panels = (quad_points / 8).max(1);
    let mo = adaptive_moments(fe, &verts, panels)?;
    let size = (x_hi - x_lo).min(y_hi - y_lo);
    if mo.min_newton < 1e-9 * size {
        return Err(Error::BoundaryZero(format!(
            "Newton distance {:.2e} on the boundary of [{x_lo}, {x_hi}] x [{y_lo}, {y_hi}]",
            mo.min_newton
        )));
    }
    round_winding(mo.m[0])
}

/// Order of f at z0 and the sign of its leading Taylor coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LocalOrder {
    pub order: i64,
    /// Sign of Re(c_v i^v), the leading coefficient read along the upward
    /// vertical direction; None when that quantity is not clearly real.
    pub leading_sign: Option<i32>,
    /// log2 |c_v|.
    pub log2_leading: f64,
}

/// Winding number of f around |z - z0| = radius, and the leading Taylor coefficient.
pub fn local_order(f: &QuasiForm, z0: HPoint, radius: f64) -> Result<LocalOrder> {
    local_order_series(f.flat(), z0, radius)
}

pub fn local_order_series(f: &QSeries, z0: HPoint, radius: f64) -> Result<LocalOrder> {
    if !(radius > 0.0) || z0.y - radius < MIN_Y {
        return Err(Error::InvalidArgument(format!("circle of radius {radius} at {z0:?}")));
    }
    let fe = FormEvaluator::for_region(f, z0.y - radius, 128);
    local_order_with(&fe, z0, radius)
}

fn local_order_with(fe: &FormEvaluator, z0: HPoint, radius: f64) -> Result<LocalOrder> {
    let c0 = C64::new(z0.x, z0.y);
    let circle = |n: usize| -> Result<(C64, Vec<Complex>)> {
        let mut w = C64::new(0.0, 0.0);
        let mut vals = Vec::with_capacity(n);
        for k in 0..n {
            let a = 2.0 * PI * k as f64 / n as f64;
            let u = C64::new(a.cos(), a.sin());
            let z = c0 + u * radius;
            let (fv, fp) = fe.eval(z)?;
            let r = Complex::with_val(fe.prec(), &fp / &fv);
            let (re, im) = mp::to_c64(&r);
            // (1/2 pi i) f'/f dz with dz = i r u da
            w += C64::new(re, im) * u * radius / n as f64;
            vals.push(fv);
        }
        Ok((w, vals))
    };
    let mut n = 32;
    let (mut w, _) = circle(n)?;
    let vals;
    loop {
        let (w2, v2) = circle(2 * n)?;
        n *= 2;
        let done = (w2 - w).norm() < 1e-3;
        w = w2;
        if done {
            vals = v2;
            break;
        }
        if n > 4096 {
            return Err(Error::NoConvergence("local winding".into()));
        }
    }
    let order = round_winding(w)?;
    // c_v = (1/n) sum f(z_k) r^{-v} e^{-i v a_k}
    let prec = fe.prec();
    let mut c = Complex::new(prec);
    for (k, fv) in vals.iter().enumerate() {
        let a = -(order as f64) * 2.0 * PI * k as f64 / n as f64;
        let rot = mp::cplx(prec, a.cos(), a.sin());
        c += Complex::with_val(prec, fv * &rot);
    }
    c /= n as u32;
    let scale = Float::with_val(prec, radius).pow(-(order as i32));
    c *= scale;
    let log2_leading = mp::log2_abs_c(&c);
    // multiply by i^v
    let iv = match order.rem_euclid(4) {
        0 => mp::cplx(prec, 1.0, 0.0),
        1 => mp::cplx(prec, 0.0, 1.0),
        2 => mp::cplx(prec, -1.0, 0.0),
        _ => mp::cplx(prec, 0.0, -1.0),
    };
    let cv = Complex::with_val(prec, &c * &iv);
    let (re, im) = cv.into_real_imag();
    let leading_sign = if log2_abs(&re) > log2_abs(&im) + 8.0 { Some(mp::sign(&re)) } else { None };
    Ok(LocalOrder { order, leading_sign, log2_leading })
}

// ---------------------------------------------------------------------------
// census

/// Where a zero sits in F.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationClass {
    Delta1,
    Delta2,
    Arc,
    Interior,
    EllipticI,
    EllipticRho,
    Cusp,
}

impl LocationClass {
    pub fn name(self) -> &'static str {
        match self {
            LocationClass::Delta1 => "delta1",
            LocationClass::Delta2 => "delta2",
            LocationClass::Arc => "arc",
            LocationClass::Interior => "interior",
            LocationClass::EllipticI => "elliptic_i",
            LocationClass::EllipticRho => "elliptic_rho",
            LocationClass::Cusp => "cusp",
        }
    }

    pub fn e_z(self) -> u32 {
        match self {
            LocationClass::EllipticI => 2,
            LocationClass::EllipticRho => 3,
            _ => 1,
        }
    }

    /// On the boundary circle of F (arc, i or rho).
    pub fn on_unit_circle(self) -> bool {
        matches!(self, LocationClass::Arc | LocationClass::EllipticI | LocationClass::EllipticRho)
    }
}

/// A located zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ZeroRecord {
    pub position: HPoint,
    pub multiplicity: u32,
    pub location_class: LocationClass,
    pub e_z: u32,
    pub residual: f64,
}

impl ZeroRecord {
    pub fn weight(&self) -> Rational {
        Rational::from((self.multiplicity as i64, self.e_z as i64))
    }

    pub fn to_json(&self) -> Value {
        json!({
            "x": self.position.x,
            "y": self.position.y,
            "mult": self.multiplicity,
            "class": self.location_class.name(),
            "e_z": self.e_z,
            "residual": self.residual,
        })
    }
}

/// Census options.
#[derive(Clone, Debug, Default)]
pub struct CensusOptions {
    /// Top of the searched region; None uses the zero-free height.
    pub y_max: Option<f64>,
    /// Working precision; None chooses from the term profile.
    pub prec: Option<u32>,
    /// Skip the delta2 sign scan.
    pub skip_scan: bool,
}

/// Result of a census of F.
#[derive(Clone, Debug)]
pub struct Census {
    pub zeros: Vec<ZeroRecord>,
    /// Sum of v_z / e_z over finite zeros.
    pub total: Rational,
    /// Order at the cusp.
    pub v_infinity: i64,
    pub y_star: f64,
    pub y_max: f64,
    pub prec: u32,
    /// Sign changes of f on delta2 inside F (odd-order zeros there).
    pub delta2_sign_changes: Option<usize>,
}

impl Census {
    /// Zeros of one class counted with multiplicity.
    pub fn count(&self, class: LocationClass) -> u32 {
        self.zeros.iter().filter(|z| z.location_class == class).map(|z| z.multiplicity).sum()
    }

    /// Per class: (distinct zeros, zeros with multiplicity, weighted count).
    pub fn by_class(&self) -> BTreeMap<LocationClass, (usize, u32, Rational)> {
        let mut m: BTreeMap<LocationClass, (usize, u32, Rational)> = BTreeMap::new();
        for z in &self.zeros {
            let e = m.entry(z.location_class).or_insert((0, 0, Rational::new()));
            e.0 += 1;
            e.1 += z.multiplicity;
            e.2 += z.weight();
        }
        m
    }

    /// Total including the cusp contribution.
    pub fn total_with_cusp(&self) -> Rational {
        Rational::from(&self.total + self.v_infinity)
    }

    /// Number of distinct zeros on the unit circle weighted by 1/e_z.
    pub fn circle_count(&self) -> Rational {
        let mut c = Rational::new();
        for z in &self.zeros {
            if z.location_class.on_unit_circle() {
                c += Rational::from((1, z.e_z as i64));
            }
        }
        c
    }

    pub fn to_json(&self) -> Value {
        let classes: serde_json::Map<String, Value> = self
            .by_class()
            .into_iter()
            .map(|(k, (d, m, w))| {
                (k.name().to_string(), json!({"distinct": d, "with_multiplicity": m, "weighted": w.to_string()}))
            })
            .collect();
        json!({
            "zeros": self.zeros.iter().map(|z| z.to_json()).collect::<Vec<_>>(),
            "total": self.total.to_string(),
            "v_infinity": self.v_infinity,
            "total_with_cusp": self.total_with_cusp().to_string(),
            "by_class": classes,
            "y_star": self.y_star,
            "y_max": self.y_max,
            "precision": self.prec,
            "delta2_sign_changes": self.delta2_sign_changes,
        })
    }
}

/// Smallest y above which the leading term dominates the rest of the stored
/// series plus its tail estimate, so that f has no zeros there.
pub fn zero_free_height(f: &QSeries) -> Result<f64> {
    if f.is_zero() {
        return Err(Error::InvalidArgument("zero series".into()));
    }
    let ev = Evaluator::new(&f.truncate(f.len()), 53);
    let dominated = |y: f64| -> bool {
        let prof = ev.term_profile(y);
        let lead_idx = match prof.iter().position(|v| v.is_finite()) {
            Some(i) => i,
            None => return false,
        };
        let rest = prof[lead_idx + 1..].iter().cloned().fold(f64::NEG_INFINITY, log2_add);
        let rest = log2_add(rest, ev.log2_tail(y));
        prof[lead_idx] > rest + 1.0
    };
    let (mut lo, mut hi) = (MIN_Y, 2.0);
    while !dominated(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::NoConvergence("zero-free height".into()));
        }
    }
    if dominated(lo) {
        return Ok(lo);
    }
    for _ in 0..60 {
        let m = 0.5 * (lo + hi);
        if dominated(m) {
            hi = m;
        } else {
            lo = m;
        }
    }
    Ok(hi)
}

#[derive(Clone, Copy, Debug)]
struct Rect {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Rect {
    fn width(&self) -> f64 {
        self.x1 - self.x0
    }
    fn height(&self) -> f64 {
        self.y1 - self.y0
    }
    fn size(&self) -> f64 {
        self.width().max(self.height())
    }
    fn contains(&self, z: C64, slack: f64) -> bool {
        z.re >= self.x0 - slack && z.re <= self.x1 + slack && z.im >= self.y0 - slack && z.im <= self.y1 + slack
    }
}

/// Smallest Newton distance |f/f'| along a segment.
fn segment_clearance(fe: &FormEvaluator, a: C64, b: C64, samples: usize) -> Result<f64> {
    let mut best = f64::INFINITY;
    for i in 0..=samples {
        let z = a + (b - a) * (i as f64 / samples as f64);
        let s = fe.newton_step(z)?.norm();
        best = best.min(s);
    }
    Ok(best)
}

const CUT_FRACTIONS: [f64; 9] = [0.5, 0.4472, 0.5528, 0.3944, 0.6056, 0.3416, 0.6584, 0.2888, 0.7112];

fn split(fe: &FormEvaluator, r: &Rect) -> Result<(Rect, Rect)> {
    let vertical_cut = r.width() >= r.height();
    let len = if vertical_cut { r.height() } else { r.width() };
    let want = 0.03 * r.size().min(len.max(1e-300));
    let mut best = (f64::NEG_INFINITY, 0.5);
    for &fr in &CUT_FRACTIONS {
        let (a, b) = if vertical_cut {
            let x = r.x0 + fr * r.width();
            (C64::new(x, r.y0), C64::new(x, r.y1))
        } else {
            let y = r.y0 + fr * r.height();
            (C64::new(r.x0, y), C64::new(r.x1, y))
        };
        let samples = ((len / r.size()) * 24.0).ceil().max(8.0) as usize;
        let c = segment_clearance(fe, a, b, samples)?;
        if c >= want {
            best = (c, fr);
            break;
        }
        if c > best.0 {
            best = (c, fr);
        }
    }
    let fr = best.1;
    Ok(if vertical_cut {
        let x = r.x0 + fr * r.width();
        (Rect { x1: x, ..*r }, Rect { x0: x, ..*r })
    } else {
        let y = r.y0 + fr * r.height();
        (Rect { y1: y, ..*r }, Rect { y0: y, ..*r })
    })
}

fn polish(fe: &FormEvaluator, z0: C64, mult: u32) -> Result<C64> {
    let mut z = z0;
    for _ in 0..80 {
        let s = fe.newton_step(z)?;
        if !s.re.is_finite() || !s.im.is_finite() {
            break;
        }
        z -= s * mult as f64;
        if s.norm() < 1e-15 * z.norm().max(1.0) {
            break;
        }
    }
    Ok(z)
}

/// Zeros (position, multiplicity) inside a rectangle.
fn locate(fe: &FormEvaluator, r: Rect, depth: usize, out: &mut Vec<(C64, u32)>) -> Result<()> {
    let verts = rect_verts(r.x0, r.x1, r.y0, r.y1);
    let mo = adaptive_moments(fe, &verts, 2)?;
    let n = round_winding(mo.m[0])?;
    if n < 0 {
        return Err(Error::NonIntegerWinding(mo.m[0].re));
    }
    if n == 0 {
        return Ok(());
    }
    let n = n as u32;
    let mean = mo.m[1] / n as f64;
    let var = mo.m[2] / n as f64 - mean * mean;
    let cluster = n == 1 || var.norm().sqrt() < 1e-6 * r.size();
    if cluster && r.size() < 0.3 {
        let z = polish(fe, mean, n)?;
        if r.contains(z, 1e-9 + 1e-6 * r.size()) {
            out.push((z, n));
            return Ok(());
        }
    }
    if depth > 60 || r.size() < 1e-10 {
        // unresolved cluster: report the centroid
        out.push((mean, n));
        return Ok(());
    }
    let (a, b) = split(fe, &r)?;
    locate(fe, a, depth + 1, out)?;
    locate(fe, b, depth + 1, out)
}

/// Translate into 0 <= Re z < 1.
fn reduce_mod_1(z: C64) -> C64 {
    let mut x = z.re - z.re.floor();
    if x > 1.0 - CLASS_TOL {
        x -= 1.0;
    }
    C64::new(x, z.im)
}

fn in_domain(z: C64) -> bool {
    let x = z.re;
    if x <= 0.5 + CLASS_TOL {
        z.norm() >= 1.0 - CLASS_TOL
    } else {
        (z - 1.0).norm() > 1.0 + CLASS_TOL
    }
}

fn classify(z: C64) -> (LocationClass, C64) {
    let i = C64::new(0.0, 1.0);
    let rho = rho_c();
    if (z - i).norm() < CLASS_TOL {
        return (LocationClass::EllipticI, i);
    }
    if (z - rho).norm() < CLASS_TOL {
        return (LocationClass::EllipticRho, rho);
    }
    if z.re.abs() < CLASS_TOL {
        return (LocationClass::Delta1, C64::new(0.0, z.im));
    }
    if (z.re - 0.5).abs() < CLASS_TOL {
        return (LocationClass::Delta2, C64::new(0.5, z.im));
    }
    if (z.norm() - 1.0).abs() < CLASS_TOL {
        return (LocationClass::Arc, z);
    }
    (LocationClass::Interior, z)
}

fn pick_clear(fe: &FormEvaluator, candidates: &[f64], line: impl Fn(f64) -> (C64, C64), want: f64) -> Result<f64> {
    let mut best = (f64::NEG_INFINITY, candidates[0]);
    for &c in candidates {
        let (a, b) = line(c);
        let cl = segment_clearance(fe, a, b, 64)?;
        if cl >= want {
            return Ok(c);
        }
        if cl > best.0 {
            best = (cl, c);
        }
    }
    Ok(best.1)
}

/// All zeros of f in F below y_max, classified, with the weighted total.
pub fn domain_census(f: &QuasiForm, opts: &CensusOptions) -> Result<Census> {
    census_series(f.flat(), f.weight(), opts)
}

/// As [`domain_census`] for a bare series of the given weight.
pub fn census_series(series: &QSeries, weight: i64, opts: &CensusOptions) -> Result<Census> {
    if series.is_zero() {
        return Err(Error::InvalidArgument("identically zero form".into()));
    }
    let v_infinity = series.lowest_order();
    let y_star = zero_free_height(series)?;
    let y_max = opts.y_max.unwrap_or(y_star * 1.02 + 0.02).max(0.9);
    let y_cands = [0.8, 0.79, 0.81, 0.785, 0.815, 0.775, 0.825];
    let prec = opts.prec.unwrap_or_else(|| auto_precision(series, 0.77, 128));
    let fe = FormEvaluator::new(series, prec);

    // the rest of the series must be resolved at the bottom of the region
    let tail = fe.value().log2_tail(0.77);
    let scale = fe.value().log2_abs_sum(0.77);
    if tail > scale - 40.0 {
        return Err(Error::TailTooLarge { bound: tail.exp2(), tol: (scale - 40.0).exp2() });
    }

    let y_lo = pick_clear(&fe, &y_cands, |y| (C64::new(-0.3, y), C64::new(0.8, y)), 0.01)?;
    let x_cands = [-0.2113, -0.2371, -0.1879, -0.2617, -0.1633, -0.1399];
    let x0 = pick_clear(&fe, &x_cands, |x| (C64::new(x, y_lo), C64::new(x, y_max)), 0.01)?;
    let root = Rect { x0, x1: x0 + 1.0, y0: y_lo, y1: y_max };
    let mut found = Vec::new();
    locate(&fe, root, 0, &mut found)?;

    let mut zeros: Vec<ZeroRecord> = Vec::new();
    for (z, mult) in found {
        let zr = reduce_mod_1(z);
        // multiple zeros at i or rho are only located to about sqrt(eps), which may
        // put them just outside F, so the elliptic check comes first
        let near_elliptic = [C64::new(0.0, 1.0), rho_c()].iter().any(|t| (zr - t).norm() < ELLIPTIC_SNAP);
        if !near_elliptic && !in_domain(zr) {
            continue;
        }
        let (mut class, mut pos) = classify(zr);
        let mut mult = mult;
        // elliptic points: confirm by a small circle and snap
        for (target, cls) in [(C64::new(0.0, 1.0), LocationClass::EllipticI), (rho_c(), LocationClass::EllipticRho)] {
            if (zr - target).norm() < ELLIPTIC_SNAP && class != cls {
                let lo = local_order_with(&fe, HPoint { x: target.re, y: target.im }, 1e-4)?;
                if lo.order > 0 {
                    class = cls;
                    pos = target;
                    mult = lo.order as u32;
                }
            }
        }
        if class == LocationClass::EllipticI || class == LocationClass::EllipticRho {
            let lo = local_order_with(&fe, HPoint { x: pos.re, y: pos.im }, 1e-4)?;
            if lo.order > 0 {
                mult = lo.order as u32;
            }
        }
        let elliptic = matches!(class, LocationClass::EllipticI | LocationClass::EllipticRho);
        if !elliptic && !in_domain(zr) {
            continue;
        }
        if zeros.iter().any(|r| (C64::new(r.position.x, r.position.y) - pos).norm() < CLASS_TOL * 10.0) {
            continue;
        }
        let residual = fe.abs(pos)?;
        zeros.push(ZeroRecord {
            position: HPoint { x: pos.re, y: pos.im },
            multiplicity: mult,
            location_class: class,
            e_z: class.e_z(),
            residual,
        });
    }
    zeros.sort_by(|a, b| {
        (a.position.x, a.position.y).partial_cmp(&(b.position.x, b.position.y)).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut total = Rational::new();
    for z in &zeros {
        total += z.weight();
    }

    let delta2_sign_changes = if opts.skip_scan {
        None
    } else {
        let g = restrict_series(series, weight, Segment::Delta2, prec);
        let grid = (16 * weight.max(4) as usize).max(64);
        let lo = 3f64.sqrt() / 2.0 + 1e-6;
        let roots = real_zeros_on_segment(&g, lo, y_max, grid, 1e-9).ok();
        roots.map(|r| r.len())
    };

    Ok(Census { zeros, total, v_infinity, y_star, y_max, prec, delta2_sign_changes })
}

// ---------------------------------------------------------------------------
// closed forms

/// [(k-4)/6] + delta_{k = 2 mod 6}.
pub fn fk_prime_count(k: i64) -> Result<Rational> {
    if k < 4 || k % 2 != 0 {
        return Err(Error::InvalidArgument(format!("k = {k} must be even and >= 4")));
    }
    let base = (k - 4).div_euclid(6);
    let extra = if k.rem_euclid(6) == 2 { 1 } else { 0 };
    Ok(Rational::from(base + extra))
}

/// Orders at i and rho forced by the weight: v_i = 1 iff k = 2 mod 4,
/// v_rho = 2, 1, 0 for k = 2, 4, 0 mod 6.
pub fn trivial_orders(k: i64) -> Result<(i64, i64)> {
    if k < 4 || k % 2 != 0 {
        return Err(Error::InvalidArgument(format!("k = {k} must be even and >= 4")));
    }
    let vi = if k.rem_euclid(4) == 2 { 1 } else { 0 };
    let vr = match k.rem_euclid(6) {
        2 => 2,
        4 => 1,
        _ => 0,
    };
    Ok((vi, vr))
}

// ---------------------------------------------------------------------------
// valence constant for depth-one forms

/// Both sides of the depth-one valence formula.
#[derive(Clone, Debug)]
pub struct ValenceReport {
    /// Weight of f = f0 + f1 E2.
    pub weight: i64,
    pub n_infty: Rational,
    /// Finite census total.
    pub census_total: Rational,
    pub v_infinity: i64,
    /// Arc zeros of f1 with multiplicity, ascending in [pi/3, pi/2].
    pub arc_angles: Vec<f64>,
    pub r_f1: i32,
    pub v_rho_f1: i64,
    pub sign_terms: Vec<i32>,
    /// Sign terms with exponent weight-2 instead of the weight; None where that
    /// rotation leaves no real part to read.
    pub alt_sign_terms: Vec<Option<i32>>,
    pub exponent_conventions_disagree: bool,
    /// n_infty == census_total + v_infinity.
    pub agrees: bool,
    pub census: Census,
}

impl ValenceReport {
    pub fn to_json(&self) -> Value {
        json!({
            "weight": self.weight,
            "n_infty": self.n_infty.to_string(),
            "census_total": self.census_total.to_string(),
            "v_infinity": self.v_infinity,
            "census_total_with_cusp": self.census.total_with_cusp().to_string(),
            "arc_angles": self.arc_angles,
            "r_f1": self.r_f1,
            "v_rho_f1": self.v_rho_f1,
            "sign_terms": self.sign_terms,
            "alt_sign_terms": self.alt_sign_terms,
            "exponent_conventions_disagree": self.exponent_conventions_disagree,
            "agrees": self.agrees,
            "census": self.census.to_json(),
        })
    }
}

/// Arc zeros of a modular series of weight w with phi in [pi/3, pi/2], with multiplicity.
pub fn arc_zeros(f1: &QSeries, w: i64, prec: u32) -> Result<(Vec<f64>, i64, i64)> {
    let small = 1e-3;
    let v_rho = local_order_series(f1, HPoint::rho(), small)?.order;
    let v_i = local_order_series(f1, HPoint::i(), small)?.order;
    let g = restrict_series(f1, w, Segment::Arc, prec);
    let lo = PI / 3.0 + 2.0 * small;
    let hi = PI / 2.0 - 2.0 * small;
    let grid = (8 * w.max(8) as usize).max(64);
    let roots = real_zeros_on_segment(&g, lo, hi, grid, 1e-13)?;
    let mut angles = vec![PI / 3.0; v_rho.max(0) as usize];
    for r in roots {
        let z = HPoint { x: r.t.cos(), y: r.t.sin() };
        let gap = (r.t - lo).min(hi - r.t).max(1e-6);
        let m = local_order_series(f1, z, (0.5 * gap).min(1e-4))?.order.max(1);
        for _ in 0..m {
            angles.push(r.t);
        }
    }
    for _ in 0..v_i.max(0) {
        angles.push(PI / 2.0);
    }
    Ok((angles, v_rho, v_i))
}

/// Which elliptic point an angle on the arc names: Some(3) for pi/3, Some(2) for pi/2.
fn special_angle(phi: f64) -> Option<u32> {
    if (phi - PI / 3.0).abs() < 1e-9 {
        Some(3)
    } else if (phi - PI / 2.0).abs() < 1e-9 {
        Some(2)
    } else {
        None
    }
}

/// Signs of Re(e^{i e phi/2} f(e^{i phi})) for e = exponent and exponent - 2.
fn arc_value_sign(f: &QSeries, exponent: i64, phi: f64, prec: u32) -> Result<(i32, Option<i32>)> {
    let p = prec;
    let ph = match special_angle(phi) {
        Some(d) => mp::pi(p) / d,
        None => Float::with_val(p, phi),
    };
    let z = Complex::with_val(p, (ph.clone().cos(), ph.clone().sin()));
    let fe = Evaluator::new(f, p);
    let r = fe.eval(&z)?;
    let scale = fe.log2_abs_sum(phi.sin());
    let mut out = [None; 2];
    for (slot, e) in [exponent, exponent - 2].iter().enumerate() {
        let half = Float::with_val(p, &ph * *e) / 2u32;
        let rot = Complex::with_val(p, (half.clone().cos(), half.sin()));
        let v = Complex::with_val(p, &r.value * &rot);
        let (re, _) = v.into_real_imag();
        let la = log2_abs(&re);
        if la > r.log2_uncertainty() + 1.0 && la >= scale - 40.0 {
            out[slot] = Some(mp::sign(&re));
        }
    }
    match out[0] {
        Some(s) => Ok((s, out[1])),
        None => Err(Error::Indeterminate(format!("arc sign at phi = {phi}"))),
    }
}

/// N_infinity(f) for f = f0 + f1 E2 of weight k = weight(f1) + 2, checked against a census.
pub fn n_infty(f0: &QSeries, f1: &QSeries, weight: i64, opts: &CensusOptions) -> Result<ValenceReport> {
    if f1.is_zero() {
        return Err(Error::InvalidArgument("f1 vanishes; use the classical formula".into()));
    }
    let f = QuasiForm::new(weight, vec![f0.clone(), f1.clone()])?;
    let prec = opts.prec.unwrap_or_else(|| auto_precision(f.flat(), 0.8, 128));
    let (angles, v_rho, v_i) = arc_zeros(f1, weight - 2, prec)?;
    for (v, p, name) in [(v_rho, HPoint::rho(), "rho"), (v_i, HPoint::i(), "i")] {
        if v > 0 && (f0.is_zero() || local_order_series(f0, p, 1e-3)?.order > 0) {
            return Err(Error::CommonZero(name.to_string()));
        }
    }

    // r(f1): sign of the real arc function of f1 just past rho
    let next = angles.iter().cloned().find(|&a| a > PI / 3.0 + 1e-9).unwrap_or(PI / 2.0);
    let delta = ((next - PI / 3.0) * 0.25).min(1e-3);
    let g1 = restrict_series(f1, weight - 2, Segment::Arc, prec);
    let s = g1.value(PI / 3.0 + delta)?;
    let r_f1 = s.sign().ok_or_else(|| Error::Indeterminate("r(f1)".into()))?;

    let mut sign_terms = Vec::new();
    let mut alt = Vec::new();
    let mut sum = Rational::new();
    for (idx, &phi) in angles.iter().enumerate() {
        let j = idx as i64 + 1;
        let (s1, s2) =
            arc_value_sign(f.flat(), weight, phi, prec).map_err(|_| Error::CommonZero(format!("e^(i {phi})")))?;
        sign_terms.push(s1);
        alt.push(s2);
        let w = if special_angle(phi).is_some() { 2 } else { 1 };
        let sgn_j = if j % 2 == 0 { 1 } else { -1 };
        sum += Rational::from((sgn_j * s1 as i64, w));
    }
    let pre = if v_rho % 2 == 0 { 1 } else { -1 } * r_f1 as i64;
    let n_val = Rational::from((weight.div_euclid(6), 2)) - (sum * pre);
    let census = domain_census(&f, opts)?;

    // common zeros elsewhere: f1 must not be negligible at a zero of f
    let ev1 = Evaluator::new(f1, prec);
    for z in &census.zeros {
        if z.location_class == LocationClass::EllipticI || z.location_class == LocationClass::EllipticRho {
            continue;
        }
        let v = ev1.eval_point(z.position)?;
        if v.log2_abs() < ev1.log2_abs_sum(z.position.y) - 40.0 {
            return Err(Error::CommonZero(format!("{:?}", z.position)));
        }
    }

    let census_total = census.total.clone();
    let agrees = n_val == census.total_with_cusp();
    Ok(ValenceReport {
        weight,
        n_infty: n_val,
        census_total,
        v_infinity: census.v_infinity,
        arc_angles: angles,
        r_f1,
        v_rho_f1: v_rho,
        exponent_conventions_disagree: sign_terms.iter().zip(&alt).any(|(s, a)| a.is_some_and(|a| a != *s)),
        sign_terms,
        alt_sign_terms: alt,
        agrees,
        census,
    })
}

/// Right side of the specialized formula for f': k/12 + C(f) + (1/3) delta_{f(rho)=0}.
pub fn derivative_count_rhs(f: &QSeries, k: i64, opts: &CensusOptions) -> Result<Rational> {
    let c = census_series(f, k, opts)?;
    let at_rho = c.zeros.iter().any(|z| z.location_class == LocationClass::EllipticRho);
    let mut r = Rational::from((k, 12)) + c.circle_count();
    if at_rho {
        r += Rational::from((1, 3));
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
// perturbations of D E_k

/// Monomials E4^a E6^b spanning the modular forms of weight w.
pub fn monomial_basis(w: i64, terms: usize) -> Result<Vec<QSeries>> {
    let e4 = eisenstein(4, terms)?;
    let e6 = eisenstein(6, terms)?;
    let mut out = Vec::new();
    let mut b = 0;
    while 6 * b <= w {
        let rest = w - 6 * b;
        if rest % 4 == 0 {
            let a = rest / 4;
            out.push(e4.pow(a)?.mul(&e6.pow(b)?));
        }
        b += 1;
    }
    Ok(out)
}

/// Basis g_1..g_n of the real depth <= 1 forms of weight k + 2:
/// modular monomials of weight k+2, then E2 times those of weight k.
pub fn depth_one_basis(k: i64, terms: usize) -> Result<Vec<QuasiForm>> {
    let mut out = Vec::new();
    for g in monomial_basis(k + 2, terms)? {
        out.push(QuasiForm::modular(k + 2, g));
    }
    for g in monomial_basis(k, terms)? {
        out.push(QuasiForm::new(k + 2, vec![QSeries::zero(0, terms), g])?);
    }
    Ok(out)
}

/// Outcome of one perturbed census.
#[derive(Clone, Debug)]
pub struct PerturbationReport {
    pub k: i64,
    pub coefficients: Vec<f64>,
    pub max_offset: f64,
    pub all_delta2: bool,
    /// v_infinity of D E_k (1) against that of the perturbed form.
    pub base_v_infinity: i64,
    /// A nonzero constant term moves the cusp zero of D E_k into F, high up on delta1 or delta2.
    pub cusp_born: Option<ZeroRecord>,
    /// All zeros other than `cusp_born` are on delta2.
    pub others_delta2: bool,
    pub census: Census,
}

/// Census of D E_k + sum a_j g_j.
pub fn perturbation_experiment(k: i64, a: &[f64], terms: usize, opts: &CensusOptions) -> Result<PerturbationReport> {
    let base = derivative_quasiform(&QuasiForm::modular(k, eisenstein(k as u32, terms)?))?;
    let basis = depth_one_basis(k, terms)?;
    if a.len() > basis.len() {
        return Err(Error::InvalidArgument(format!("{} coefficients for a basis of size {}", a.len(), basis.len())));
    }
    let mut f = base;
    for (c, g) in a.iter().zip(&basis) {
        if *c != 0.0 {
            let r = Rational::from_f64(*c).ok_or_else(|| Error::InvalidArgument(format!("coefficient {c}")))?;
            f = f.add(&g.scale(&r))?;
        }
    }
    let census = domain_census(&f, opts)?;
    let mut max_offset: f64 = 0.0;
    let mut all_delta2 = true;
    for z in &census.zeros {
        max_offset = max_offset.max((z.position.x - 0.5).abs());
        if z.location_class != LocationClass::Delta2 {
            all_delta2 = false;
        }
    }
    let base_v_infinity = 1;
    let cusp_idx = if census.v_infinity < base_v_infinity {
        census.zeros.iter().enumerate().max_by(|a, b| a.1.position.y.total_cmp(&b.1.position.y)).map(|(i, _)| i)
    } else {
        None
    };
    let others_delta2 =
        census.zeros.iter().enumerate().all(|(i, z)| Some(i) == cusp_idx || z.location_class == LocationClass::Delta2);
    let cusp_born = cusp_idx.map(|i| census.zeros[i]);
    Ok(PerturbationReport {
        k,
        coefficients: a.to_vec(),
        max_offset,
        all_delta2,
        base_v_infinity,
        cusp_born,
        others_delta2,
        census,
    })
}
