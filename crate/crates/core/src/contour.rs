//! The kernel H = H1 + H2 whose horizontal integrals reproduce Df_{k,m},
//! the residue-corrected height shifts, the band constants used for large k,
//! and the sign pattern of Df_{k,0} on Re z = 1/2.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rug::ops::Pow;
use rug::{Complex, Float};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::eval::{log2_add, Evaluator, HPoint, Sample};
use crate::forms::{delta, eisenstein, gap_form, weight_split};
use crate::mp::{self, log2_abs};
use crate::qseries::QSeries;
use crate::zeros::fk_prime_count;

/// Height of the lower contour used for large k.
pub const A_BAND: f64 = 0.49;
/// Lower end of the theta band.
pub const THETA_LO: f64 = 0.38;
/// The band stops this far short of pi/6.
pub const THETA_GAP: f64 = 1e-6;

/// Which part of the kernel to return.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelPart {
    H1,
    H2,
    H,
}

/// Series and parameters shared by every kernel evaluation.
#[derive(Clone, Debug)]
pub struct KernelContext {
    pub k: i64,
    pub m: i64,
    pub ell: i64,
    pub kprime: u32,
    pub terms: usize,
    pub prec: u32,
    delta: Evaluator,
    e2: Evaluator,
    e4: Evaluator,
    e14: Evaluator,
    ekp: Evaluator,
    dekp: Evaluator,
    de14: Evaluator,
    /// Relative pole threshold on |j(tau) - j(z)|.
    pub pole_tol: f64,
}

/// Values at z reused across all tau.
#[derive(Clone, Debug)]
pub struct ZData {
    pub z: Complex,
    pub e2: Complex,
    pub delta_ell: Complex,
    pub ekp: Complex,
    pub dekp: Complex,
    pub e14: Complex,
    pub de14: Complex,
    pub j: Complex,
    /// j'(z) = 2 pi i Dj(z).
    pub jp: Complex,
}

/// Values at tau.
#[derive(Clone, Debug)]
struct TauData {
    delta: Complex,
    e14: Complex,
    ekp: Complex,
    j: Complex,
    jp: Complex,
}

impl KernelContext {
    pub fn new(k: i64, m: i64, terms: usize, prec: u32) -> Result<KernelContext> {
        let (ell, kprime) = weight_split(k)?;
        if terms < 8 {
            return Err(Error::InsufficientTerms { needed: 8, got: terms });
        }
        let ev = |s: &QSeries| Evaluator::new(s, prec);
        let ekp_s = eisenstein(kprime, terms)?;
        let e14_s = eisenstein(14, terms)?;
        Ok(KernelContext {
            k,
            m,
            ell,
            kprime,
            terms,
            prec,
            delta: ev(&delta(terms)),
            e2: ev(&eisenstein(2, terms)?),
            e4: ev(&eisenstein(4, terms)?),
            e14: ev(&e14_s),
            dekp: ev(&ekp_s.d_operator(1)),
            de14: ev(&e14_s.d_operator(1)),
            ekp: ev(&ekp_s),
            pole_tol: 1e-6,
        })
    }

    /// Default truncation and precision for moderate weights.
    pub fn with_defaults(k: i64, m: i64) -> Result<KernelContext> {
        KernelContext::new(k, m, 160, 192)
    }

    fn val(&self, e: &Evaluator, q: &Complex) -> Result<Complex> {
        let r = e.eval_q(q)?;
        let lv = r.log2_abs();
        if r.log2_tail > lv - (self.prec as f64) * 0.75 && r.log2_tail > r.log2_rounding {
            return Err(Error::TailTooLarge { bound: r.tail_bound, tol: lv.exp2() });
        }
        Ok(r.value)
    }

    fn two_pi_i(&self) -> Complex {
        Complex::with_val(self.prec, (0, mp::pi(self.prec) * 2u32))
    }

    /// Values at z.
    pub fn zdata(&self, z: &Complex) -> Result<ZData> {
        let p = self.prec;
        let q = mp::q_of(z);
        let d = self.val(&self.delta, &q)?;
        let e4 = self.val(&self.e4, &q)?;
        let e14 = self.val(&self.e14, &q)?;
        let j = Complex::with_val(p, e4.clone().square() * &e4 / &d);
        let dj = -Complex::with_val(p, &e14 / &d);
        let jp = Complex::with_val(p, &dj * self.two_pi_i());
        Ok(ZData {
            z: z.clone(),
            e2: self.val(&self.e2, &q)?,
            delta_ell: Complex::with_val(p, rug::ops::Pow::pow(&d, self.ell as i32)),
            ekp: self.val(&self.ekp, &q)?,
            dekp: self.val(&self.dekp, &q)?,
            de14: self.val(&self.de14, &q)?,
            e14,
            j,
            jp,
        })
    }

    fn tdata(&self, tau: &Complex) -> Result<TauData> {
        let p = self.prec;
        let q = mp::q_of(tau);
        let d = self.val(&self.delta, &q)?;
        let e4 = self.val(&self.e4, &q)?;
        let e14 = self.val(&self.e14, &q)?;
        let j = Complex::with_val(p, e4.clone().square() * &e4 / &d);
        let jp = (-Complex::with_val(p, &e14 / &d)) * self.two_pi_i();
        Ok(TauData { ekp: self.val(&self.ekp, &q)?, delta: d, e14, j, jp })
    }

    /// H1, H2 at (tau, z) with z data precomputed.
    pub fn kernel_parts(&self, tau: &Complex, zd: &ZData) -> Result<(Complex, Complex)> {
        let (h1, h2, _) = self.kernel_with_distance(tau, zd)?;
        Ok((h1, h2))
    }

    fn kernel_with_distance(&self, tau: &Complex, zd: &ZData) -> Result<(Complex, Complex, f64)> {
        let p = self.prec;
        let t = self.tdata(tau)?;
        let diff = Complex::with_val(p, &t.j - &zd.j);
        let scale = 1.0 + mp::abs_c(&zd.j).to_f64();
        let ad = mp::abs_c(&diff).to_f64();
        if ad < self.pole_tol * scale {
            return Err(Error::PoleProximity(format!("|j(tau) - j(z)| = {ad:.3e}")));
        }
        let dl_tau = Complex::with_val(p, rug::ops::Pow::pow(&t.delta, self.ell as i32));
        let ratio = Complex::with_val(p, &zd.delta_ell / &dl_tau);
        // e^{-2 pi i m tau} = q^{-m}
        let qm = mp::q_of(tau);
        let em = Complex::with_val(p, rug::ops::Pow::pow(&qm, -self.m as i32));
        let common = Complex::with_val(p, &ratio * &em) / &t.ekp;
        let lg = Complex::with_val(p, &t.jp / &diff);
        let inner = Complex::with_val(p, &zd.e2 * &zd.ekp) * Float::with_val(p, self.ell) + &zd.dekp;
        let h1 = -Complex::with_val(p, &common * &lg) * inner / self.two_pi_i();
        let four_pi2 = Float::with_val(p, mp::pi(p).square()) * 4u32;
        let jj = Complex::with_val(p, &zd.jp * &t.jp) / diff.square();
        let h2 = Complex::with_val(p, &common * &zd.ekp) * jj / four_pi2;
        Ok((h1, h2, ad))
    }

    pub fn kernel(&self, tau: &Complex, zd: &ZData, part: KernelPart) -> Result<Complex> {
        let (h1, h2) = self.kernel_parts(tau, zd)?;
        Ok(match part {
            KernelPart::H1 => h1,
            KernelPart::H2 => h2,
            KernelPart::H => h1 + h2,
        })
    }

    pub fn cplx(&self, z: HPoint) -> Complex {
        z.to_complex(self.prec)
    }
}

/// H(tau, z) or one of its parts.
pub fn kernel_eval(ctx: &KernelContext, tau: HPoint, z: HPoint, part: KernelPart) -> Result<Complex> {
    let zd = ctx.zdata(&ctx.cplx(z))?;
    ctx.kernel(&ctx.cplx(tau), &zd, part)
}

/// A converged horizontal integral.
#[derive(Clone, Debug)]
pub struct IntegralResult {
    pub value: Complex,
    /// |difference between the last two refinement levels|, log2.
    pub log2_error: f64,
    pub nodes: usize,
    /// Smallest |j(tau) - j(z)| seen at the nodes.
    pub min_pole_distance: f64,
}

/// Integral of H over Re tau in [-1/2, 1/2] at Im tau = height.
///
/// Periodic midpoint rule; the node count triples from `quad_points` until two
/// levels agree to `rel_tol` relative to the result.
pub fn horizontal_integral(
    ctx: &KernelContext,
    z: HPoint,
    height: f64,
    quad_points: usize,
    rel_tol: f64,
) -> Result<IntegralResult> {
    let zd = ctx.zdata(&ctx.cplx(z))?;
    horizontal_integral_zd(ctx, &zd, height, quad_points, rel_tol)
}

fn horizontal_integral_zd(
    ctx: &KernelContext,
    zd: &ZData,
    height: f64,
    quad_points: usize,
    rel_tol: f64,
) -> Result<IntegralResult> {
    if !(height > 0.0) {
        return Err(Error::InvalidArgument(format!("height {height}")));
    }
    let p = ctx.prec;
    let h = Float::with_val(p, height);
    let mut min_pole = f64::INFINITY;
    // midpoint nodes x_i = -1/2 + (i + 1/2)/n; tripling keeps the old nodes at i = 1 mod 3
    let add_nodes = |n: usize, skip_old: bool, min_pole: &mut f64| -> Result<Complex> {
        let mut s = Complex::new(p);
        for i in 0..n {
            if skip_old && i % 3 == 1 {
                continue;
            }
            let x = Float::with_val(p, 2 * i + 1) / Float::with_val(p, 2 * n) - Float::with_val(p, 0.5);
            let tau = Complex::with_val(p, (x, h.clone()));
            let (h1, h2, dist) = ctx.kernel_with_distance(&tau, zd)?;
            *min_pole = min_pole.min(dist);
            s += h1;
            s += h2;
        }
        Ok(s)
    };
    let mut n = quad_points.max(4);
    let mut total = add_nodes(n, false, &mut min_pole)?;
    let mut prev = Complex::with_val(p, &total / n as u32);
    loop {
        n *= 3;
        total += add_nodes(n, true, &mut min_pole)?;
        let cur = Complex::with_val(p, &total / n as u32);
        let diff = Complex::with_val(p, &cur - &prev);
        let le = mp::log2_abs_c(&diff);
        let lv = mp::log2_abs_c(&cur);
        if le <= lv + rel_tol.log2() || le < -(p as f64) + 8.0 {
            return Ok(IntegralResult { value: cur, log2_error: le, nodes: n, min_pole_distance: min_pole });
        }
        if n > 20000 {
            return Err(Error::NoConvergence(format!("horizontal integral at height {height}")));
        }
        prev = cur;
    }
}

/// Df_{k,m}(z) from the gap form expansion.
pub fn df_direct(k: i64, m: i64, z: HPoint, terms: usize, prec: u32) -> Result<Complex> {
    let g = gap_form(k, m, terms)?;
    let ev = Evaluator::new(&g.series.d_operator(1), prec);
    Ok(ev.eval_point(z)?.value)
}

/// g_{k'}(z) exactly as displayed with the integral identity at A'.
pub fn g_correction(ctx: &KernelContext, z: HPoint) -> Result<Complex> {
    let zd = ctx.zdata(&ctx.cplx(z))?;
    g_correction_zd(ctx, &zd)
}

fn g_correction_zd(ctx: &KernelContext, zd: &ZData) -> Result<Complex> {
    let p = ctx.prec;
    let den = Complex::with_val(p, &zd.e14 * &zd.ekp);
    if mp::abs_c(&den).to_f64() < 1e-30 {
        return Err(Error::InvalidArgument("E14(z) E_k'(z) vanishes".into()));
    }
    let e = &zd.ekp;
    let e2 = Complex::with_val(p, e.square_ref());
    let e3 = Complex::with_val(p, &e2 * e);
    let one = Complex::with_val(p, (1, 0));
    let t1 = Complex::with_val(p, &zd.de14 * &e3) * Complex::with_val(p, e - &one);
    let t2 = Complex::with_val(p, &zd.dekp * &zd.e14) * Complex::with_val(p, &e2 - &one);
    let ell = Float::with_val(p, ctx.ell);
    let poly = Complex::with_val(p, &e3 - Complex::with_val(p, &e2 * Float::with_val(p, &ell + 1u32))) + &ell;
    let t3 = Complex::with_val(p, &zd.e2 * &zd.e14) * e * poly;
    let t4 = Complex::with_val(p, &zd.e14 * &e3) * Float::with_val(p, ctx.m);
    let bracket = t1 + t2 - t3 + t4;
    let em = mp_q_pow(&zd.z, -ctx.m);
    Ok(em * bracket / den)
}

/// m e^{-2 pi i m z}, the correction produced by the pole at tau = z.
pub fn residue_correction(ctx: &KernelContext, z: HPoint) -> Complex {
    let zc = ctx.cplx(z);
    mp_q_pow(&zc, -ctx.m) * Float::with_val(ctx.prec, ctx.m)
}

/// E2 (E14^2 - 1) ell, the part of g_14 split off as the non-vanishing piece.
pub fn g14_main_part(ctx: &KernelContext, z: HPoint) -> Result<Complex> {
    let zd = ctx.zdata(&ctx.cplx(z))?;
    let p = ctx.prec;
    let e = Complex::with_val(p, zd.e14.square_ref()) - 1u32;
    Ok(Complex::with_val(p, &zd.e2 * e) * Float::with_val(p, ctx.ell))
}

fn mp_q_pow(z: &Complex, n: i64) -> Complex {
    let q = mp::q_of(z);
    Complex::with_val(z.prec().0, rug::ops::Pow::pow(&q, n as i32))
}

/// Residue of H(., z) at `center` by trapezoid on a small circle.
pub fn residue_numeric(ctx: &KernelContext, center: HPoint, z: HPoint, radius: f64, n: usize) -> Result<Complex> {
    let zd = ctx.zdata(&ctx.cplx(z))?;
    let p = ctx.prec;
    let c = ctx.cplx(center);
    let mut s = Complex::new(p);
    let two_pi = mp::pi(p) * 2u32;
    for i in 0..n {
        let a = Float::with_val(p, &two_pi * i as u32) / n as u32;
        let w = Complex::with_val(p, (a.clone().cos(), a.sin())) * Float::with_val(p, radius);
        let tau = Complex::with_val(p, &c + &w);
        s += ctx.kernel(&tau, &zd, KernelPart::H)? * w;
    }
    Ok(s / n as u32)
}

/// z = 1/2 + (i/2) cot(theta).
pub fn z_of_theta(theta: f64) -> HPoint {
    HPoint { x: 0.5, y: 0.5 / theta.tan() }
}

/// Both sides of the A' integral identity.
#[derive(Clone, Debug)]
pub struct AprimeCheck {
    pub integral: Complex,
    pub df: Complex,
    pub displayed: Complex,
    pub residue: Complex,
    /// |I - Df - g| / |Df| with the displayed g.
    pub rel_displayed: f64,
    /// |I - Df - m e^{-2 pi i m z}| / |Df|.
    pub rel_residue: f64,
}

/// Integral at A' against Df_{k,m}(z) plus each candidate correction.
pub fn aprime_identity(ctx: &KernelContext, theta: f64, a_prime: f64, terms: usize) -> Result<AprimeCheck> {
    let z = z_of_theta(theta);
    if !(a_prime >= 3f64.sqrt() / 2.0 - 1e-12 && a_prime < z.y) {
        return Err(Error::InvalidArgument(format!("A' = {a_prime} outside [sqrt3/2, {})", z.y)));
    }
    let zd = ctx.zdata(&ctx.cplx(z))?;
    let integral = horizontal_integral_zd(ctx, &zd, a_prime, 64, 1e-14)?.value;
    let df = df_direct(ctx.k, ctx.m, z, terms, ctx.prec)?;
    let displayed = g_correction_zd(ctx, &zd)?;
    let residue = residue_correction(ctx, z);
    let p = ctx.prec;
    let base = Complex::with_val(p, &integral - &df);
    let rel = |c: &Complex| -> f64 {
        let d = Complex::with_val(p, &base - c);
        (mp::log2_abs_c(&d) - mp::log2_abs_c(&df)).exp2()
    };
    Ok(AprimeCheck { rel_displayed: rel(&displayed), rel_residue: rel(&residue), integral, df, displayed, residue })
}

/// Sides of the height shift from A' down to A''.
#[derive(Clone, Debug)]
pub struct ShiftReport {
    pub lhs: Complex,
    pub lower: Complex,
    pub correction: Complex,
    pub residual: f64,
    /// residual / max(|lhs|, |lower|, |correction|).
    pub relative: f64,
}

/// The closed-form residue terms picked up between A' and A''.
pub fn shift_correction(k: i64, m: i64, theta: f64, prec: u32) -> Complex {
    let p = prec;
    let th = Float::with_val(p, theta);
    let s = Float::with_val(p, th.sin_ref());
    let az = Float::with_val(p, 2u32) * &s;
    let az = az.recip(); // |z| = 1/(2 sin theta)
    let s2 = Float::with_val(p, &th * 2u32).sin();
    let pi = mp::pi(p);
    let growth = (Float::with_val(p, &pi * 2u32) * Float::with_val(p, m) * s2).exp();
    let phase = Float::with_val(p, &pi * 4u32) * Float::with_val(p, m) * Float::with_val(p, s.square_ref());
    let ipow = |e: i64| -> Complex {
        match e.rem_euclid(4) {
            0 => Complex::with_val(p, (1, 0)),
            1 => Complex::with_val(p, (0, 1)),
            2 => Complex::with_val(p, (-1, 0)),
            _ => Complex::with_val(p, (0, -1)),
        }
    };
    let c2 = (Float::with_val(p, &th * (k + 2)) + &phase).cos();
    let t1 = ipow(-k - 2)
        * (Float::with_val(p, az.clone().pow(-(k as i32) - 2)) * &growth * c2 * Float::with_val(p, -2 * m));
    let c1 = (Float::with_val(p, &th * (k + 1)) + &phase).cos();
    let t2 = ipow(-k) * (Float::with_val(p, az.pow(-(k as i32) - 1)) * &growth * c1 * Float::with_val(p, k) / pi);
    t1 + t2
}

/// LHS - RHS of the height shift identity.
pub fn height_shift_identity(ctx: &KernelContext, theta: f64, a_prime: f64, a_double: f64) -> Result<ShiftReport> {
    let z = z_of_theta(theta);
    let s2 = (2.0 * theta).sin();
    if !(s2 > 1.0 / 3.0) {
        return Err(Error::InvalidArgument(format!("sin 2 theta = {s2} <= 1/3")));
    }
    if !(a_prime >= 3f64.sqrt() / 2.0 - 1e-12 && a_prime < z.y) {
        return Err(Error::InvalidArgument(format!("A' = {a_prime} outside [sqrt3/2, {})", z.y)));
    }
    if !(a_double > 1.0 / 3.0 && a_double < s2) {
        return Err(Error::InvalidArgument(format!("A'' = {a_double} outside (1/3, {s2})")));
    }
    let zd = ctx.zdata(&ctx.cplx(z))?;
    let lhs = horizontal_integral_zd(ctx, &zd, a_prime, 64, 1e-14)?.value;
    let lower = horizontal_integral_zd(ctx, &zd, a_double, 64, 1e-14)?.value;
    let correction = shift_correction(ctx.k, ctx.m, theta, ctx.prec);
    let p = ctx.prec;
    let rhs = Complex::with_val(p, &lower + &correction);
    let d = Complex::with_val(p, &lhs - &rhs);
    let ld = mp::log2_abs_c(&d);
    let scale = mp::log2_abs_c(&lhs).max(mp::log2_abs_c(&lower)).max(mp::log2_abs_c(&correction));
    Ok(ShiftReport { residual: ld.exp2(), relative: (ld - scale).exp2(), lhs, lower, correction })
}

/// Theta values of the standard height-shift grid.
pub const SHIFT_THETAS: [f64; 5] = [0.40, 0.42, 0.44, 0.46, 0.48];
/// A'' values of the standard height-shift grid (all in (1/3, sin 0.8)).
pub const SHIFT_HEIGHTS: [f64; 5] = [0.40, 0.45, 0.50, 0.55, 0.60];

/// One cell of the height-shift grid.
#[derive(Clone, Debug)]
pub struct ShiftCell {
    pub theta: f64,
    pub a_double: f64,
    pub report: ShiftReport,
}

/// The height shift identity on the 5x5 (theta, A'') grid with A' fixed.
pub fn shift_grid(ctx: &KernelContext, a_prime: f64) -> Result<Vec<ShiftCell>> {
    let mut out = Vec::with_capacity(25);
    for &theta in &SHIFT_THETAS {
        for &a_double in &SHIFT_HEIGHTS {
            let report = height_shift_identity(ctx, theta, a_prime, a_double)?;
            out.push(ShiftCell { theta, a_double, report });
        }
    }
    Ok(out)
}

/// Solutions of j(tau) = j(z) found by sampling |j(tau) - j(z)| on a grid of the
/// box |Re tau| <= 1/2, y_lo <= Im tau <= y_hi and polishing local minima by Newton.
pub fn pole_scan(ctx: &KernelContext, z: HPoint, y_lo: f64, y_hi: f64, nx: usize, ny: usize) -> Result<Vec<HPoint>> {
    let zd = ctx.zdata(&ctx.cplx(z))?;
    let jz = C64::new(zd.j.real().to_f64(), zd.j.imag().to_f64());
    let val = |x: f64, y: f64| -> Result<(C64, C64)> {
        let t = ctx.tdata(&ctx.cplx(HPoint { x, y }))?;
        let j = C64::new(t.j.real().to_f64(), t.j.imag().to_f64());
        let jp = C64::new(t.jp.real().to_f64(), t.jp.imag().to_f64());
        Ok((j - jz, jp))
    };
    let mut grid = vec![vec![0.0f64; ny + 1]; nx + 1];
    for (a, row) in grid.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            let x = -0.5 + a as f64 / nx as f64;
            let y = y_lo + (y_hi - y_lo) * b as f64 / ny as f64;
            *cell = val(x, y)?.0.norm();
        }
    }
    let mut found: Vec<HPoint> = Vec::new();
    for a in 0..=nx {
        for b in 0..=ny {
            let v = grid[a][b];
            let mut is_min = true;
            for (da, db) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1), (-1, -1), (1, 1), (-1, 1), (1, -1)] {
                let (aa, bb) = (a as i64 + da, b as i64 + db);
                if aa < 0 || bb < 0 || aa > nx as i64 || bb > ny as i64 {
                    continue;
                }
                if grid[aa as usize][bb as usize] < v {
                    is_min = false;
                }
            }
            if !is_min {
                continue;
            }
            let mut t = C64::new(-0.5 + a as f64 / nx as f64, y_lo + (y_hi - y_lo) * b as f64 / ny as f64);
            let mut ok = false;
            for _ in 0..60 {
                if t.im < 0.05 {
                    break;
                }
                let (f, fp) = val(t.re, t.im)?;
                let step = f / fp;
                t -= step;
                if step.norm() < 1e-14 {
                    ok = true;
                    break;
                }
            }
            if !ok {
                continue;
            }
            let inside = t.re >= -0.5 - 1e-9 && t.re <= 0.5 + 1e-9 && t.im >= y_lo - 1e-9 && t.im <= y_hi + 1e-9;
            if inside && !found.iter().any(|h| (h.x - t.re).abs() + (h.y - t.im).abs() < 1e-8) {
                found.push(HPoint { x: t.re, y: t.im });
            }
        }
    }
    found.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap_or(std::cmp::Ordering::Equal));
    Ok(found)
}

// ---------------------------------------------------------------------------
// band constants

/// The four band maxima and the grid size that produced them.
#[derive(Clone, Debug)]
pub struct BandBounds {
    /// max |E2(z)|.
    pub e2: f64,
    /// max |E14(tau) E14(z) / (Delta(tau) Delta(z) (j(tau) - j(z))^2)|.
    pub h2_factor: f64,
    /// max |E14(tau) / (Delta(tau) (j(tau) - j(z)))|.
    pub h1_factor: f64,
    /// max |Delta(z) / ((2 sin theta)^12 Delta(tau))|.
    pub delta_ratio: f64,
    pub grid: usize,
    /// Grids tried, with their maxima.
    pub history: Vec<(usize, [f64; 4])>,
    pub stable: bool,
}

impl BandBounds {
    pub fn as_array(&self) -> [f64; 4] {
        [self.e2, self.h2_factor, self.h1_factor, self.delta_ratio]
    }

    /// (2 sin theta_lo)^{-1} b4^ell (ell b1 b3 + b2) < k / pi.
    pub fn assembled(&self, k: i64, ell: i64) -> (f64, f64) {
        assembled_bound(self.as_array(), k, ell)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "e2": self.e2,
            "h2_factor": self.h2_factor,
            "h1_factor": self.h1_factor,
            "delta_ratio": self.delta_ratio,
            "grid": self.grid,
            "stable": self.stable,
            "history": self.history.iter().map(|(n, v)| json!({"grid": n, "maxima": v})).collect::<Vec<_>>(),
        })
    }
}

/// The constants stated for the band.
pub const STATED_BOUNDS: [f64; 4] = [1.15, 0.6, 4.2, 0.99];

/// (lhs, rhs) of the assembled inequality lhs < rhs = k/pi.
pub fn assembled_bound(b: [f64; 4], k: i64, ell: i64) -> (f64, f64) {
    let pre = 1.0 / (2.0 * THETA_LO.sin());
    let lhs = pre * b[3].powi(ell as i32) * (ell as f64 * b[0] * b[2] + b[1]);
    (lhs, k as f64 / PI)
}

fn band_maxima(n: usize, terms: usize, prec: u32) -> Result<[f64; 4]> {
    let ctx = KernelContext::new(12, 0, terms, prec)?;
    let theta_hi = PI / 6.0 - THETA_GAP;
    let mut zs = Vec::with_capacity(n);
    for i in 0..n {
        let th = THETA_LO + (theta_hi - THETA_LO) * i as f64 / (n - 1) as f64;
        let zd = ctx.zdata(&ctx.cplx(z_of_theta(th)))?;
        let q = mp::q_of(&zd.z);
        let d = ctx.val(&ctx.delta, &q)?;
        let c = |v: &Complex| C64::new(v.real().to_f64(), v.imag().to_f64());
        zs.push((th, c(&zd.e2), c(&zd.e14), c(&d), c(&zd.j)));
    }
    let mut taus = Vec::with_capacity(n);
    for i in 0..n {
        let x = -0.5 + i as f64 / (n - 1) as f64;
        let t = ctx.tdata(&ctx.cplx(HPoint { x, y: A_BAND }))?;
        let c = |v: &Complex| C64::new(v.real().to_f64(), v.imag().to_f64());
        taus.push((c(&t.e14), c(&t.delta), c(&t.j)));
    }
    let mut m = [0.0f64; 4];
    for (th, e2, e14z, dz, jz) in &zs {
        m[0] = m[0].max(e2.norm());
        let s12 = (2.0 * th.sin()).powi(12);
        for (e14t, dt, jt) in &taus {
            let diff = jt - jz;
            m[1] = m[1].max((e14t * e14z / (dt * dz * diff * diff)).norm());
            m[2] = m[2].max((e14t / (dt * diff)).norm());
            m[3] = m[3].max((dz / (dt * s12)).norm());
        }
    }
    Ok(m)
}

/// Band maxima over an n x n grid, refined by doubling until they agree to 3 decimals.
pub fn prop53_bounds(grid: usize, max_grid: usize) -> Result<BandBounds> {
    let (terms, prec) = (80, 128);
    let mut n = grid.max(3);
    let mut history = Vec::new();
    let mut prev = band_maxima(n, terms, prec)?;
    history.push((n, prev));
    loop {
        let next_n = 2 * n;
        if next_n > max_grid.max(grid) {
            return Ok(bounds_from(prev, n, history, false));
        }
        let cur = band_maxima(next_n, terms, prec)?;
        history.push((next_n, cur));
        let stable = prev.iter().zip(&cur).all(|(a, b)| (a * 1000.0).round() == (b * 1000.0).round());
        n = next_n;
        if stable {
            return Ok(bounds_from(cur, n, history, true));
        }
        prev = cur;
    }
}

fn bounds_from(m: [f64; 4], grid: usize, history: Vec<(usize, [f64; 4])>, stable: bool) -> BandBounds {
    BandBounds { e2: m[0], h2_factor: m[1], h1_factor: m[2], delta_ratio: m[3], grid, history, stable }
}

/// |z|^{k+1} |integral at A''| against k/pi for one theta (k' = 0, m = 0).
pub fn prop53_direct(k: i64, theta: f64, terms: usize, prec: u32) -> Result<(f64, f64)> {
    let ctx = KernelContext::new(k, 0, terms, prec)?;
    if ctx.kprime != 0 {
        return Err(Error::InvalidArgument(format!("k = {k} is not a multiple of 12")));
    }
    let z = z_of_theta(theta);
    let r = horizontal_integral(&ctx, z, A_BAND, (2 * ctx.ell as usize + 8).max(32), 1e-6)?;
    let l2z = (1.0 / (2.0 * theta.sin())).log2();
    let lhs = (mp::log2_abs_c(&r.value) + (k + 1) as f64 * l2z).exp2();
    Ok((lhs, k as f64 / PI))
}

// ---------------------------------------------------------------------------
// sign pattern

/// Signs of Df_{k,0}(1/2 + i t_j) against (-1)^j.
#[derive(Clone, Debug)]
pub struct SignPatternReport {
    pub k: i64,
    pub j_range: (i64, i64),
    pub js: Vec<i64>,
    pub theta: Vec<f64>,
    pub t: Vec<f64>,
    pub signs: Vec<i32>,
    pub expected: Vec<i32>,
    pub matches: Vec<bool>,
    pub terms: usize,
    pub prec: u32,
}

impl SignPatternReport {
    pub fn all_match(&self) -> bool {
        self.matches.iter().all(|&b| b)
    }

    /// Consecutive pairs (j, j+1) that both match, each giving a sign change.
    pub fn matched_sign_changes(&self) -> usize {
        self.js
            .windows(2)
            .enumerate()
            .filter(|(i, w)| w[1] == w[0] + 1 && self.matches[*i] && self.matches[*i + 1])
            .count()
    }

    /// Matched sign changes divided by the zero count of f_k'.
    pub fn proportion(&self) -> Result<f64> {
        let n = fk_prime_count(self.k)?;
        Ok(self.matched_sign_changes() as f64 / n.to_f64())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "k": self.k,
            "j_range": [self.j_range.0, self.j_range.1],
            "rows": self.js.iter().enumerate().map(|(i, j)| json!({
                "j": j, "theta": self.theta[i], "t": self.t[i],
                "sign": self.signs[i], "expected": self.expected[i], "match": self.matches[i],
            })).collect::<Vec<_>>(),
            "all_match": self.all_match(),
            "matched_sign_changes": self.matched_sign_changes(),
            "terms": self.terms,
            "precision": self.prec,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("j,t_j,sign,expected\n");
        for i in 0..self.js.len() {
            s.push_str(&format!("{},{:.17},{},{}\n", self.js[i], self.t[i], self.signs[i], self.expected[i]));
        }
        s
    }
}

/// Default j range: ceil(19(k+1)/(50 pi)) ..= [k/6] - 1.
pub fn default_j_range(k: i64) -> (i64, i64) {
    let lo = (19.0 * (k + 1) as f64 / (50.0 * PI)).ceil() as i64;
    (lo, k / 6 - 1)
}

/// Stored coefficients needed for Df_{k,0} on Re z = 1/2 down to Im z = y_min.
pub fn sign_pattern_terms(k: i64, y_min: f64) -> usize {
    let ell = k / 12;
    // coefficients of f_{k,0} grow roughly like exp(4 pi sqrt(ell n)); the tail is
    // pushed below the value scale |z|^{-k} by a generous margin
    let lq = 2.0 * PI * y_min;
    let mut n = ell as f64 + 10.0;
    loop {
        let growth = 4.0 * PI * ((ell.max(1) as f64) * n).sqrt();
        if n * lq - growth > (k as f64) * 0.5 + 200.0 {
            break;
        }
        n += 10.0;
    }
    n as usize + 10
}

/// Signs of Df_{k,0} at 1/2 + i t_j for j in [j_lo, j_hi].
pub fn sign_pattern(k: i64, j_lo: Option<i64>, j_hi: Option<i64>, terms: Option<usize>) -> Result<SignPatternReport> {
    if k % 12 != 0 || k < 12 {
        return Err(Error::InvalidArgument(format!("k = {k} must be a positive multiple of 12")));
    }
    let (dlo, dhi) = default_j_range(k);
    let j_lo = j_lo.unwrap_or(dlo).max(1);
    let j_hi = j_hi.unwrap_or(dhi).min(k / 6 - 1);
    if j_lo > j_hi {
        return Err(Error::InvalidArgument(format!("empty j range [{j_lo}, {j_hi}]")));
    }
    let theta_of = |j: i64| j as f64 * PI / (k + 1) as f64;
    let y_min = 0.5 / theta_of(j_hi).tan();
    let terms = terms.unwrap_or_else(|| sign_pattern_terms(k, y_min));
    let g = gap_form(k, 0, terms)?;
    let df = g.series.d_operator(1);
    // dynamic range of |z|^{-k-1} plus the cancellation in the sum
    let th_lo = theta_of(j_lo);
    let range = (k as f64) * (1.0 / (2.0 * th_lo.sin())).log2().abs();
    let ev = Evaluator::new(&df.truncate(df.len()), 53);
    let scale = ev.log2_abs_sum(y_min).max(0.0);
    let prec = (range + scale + 64.0).ceil() as u32;
    let mut rep = SignPatternReport {
        k,
        j_range: (j_lo, j_hi),
        js: Vec::new(),
        theta: Vec::new(),
        t: Vec::new(),
        signs: Vec::new(),
        expected: Vec::new(),
        matches: Vec::new(),
        terms,
        prec,
    };
    for j in j_lo..=j_hi {
        let th = theta_of(j);
        // t_j = cot(theta_j)/2 at working precision
        let thf = Float::with_val(prec, j) * mp::pi(prec) / Float::with_val(prec, k + 1);
        let t = Float::with_val(prec, thf.tan_ref()).recip() / 2u32;
        let s = delta2_sign(&df, &t, prec)?;
        let e = if j % 2 == 0 { 1 } else { -1 };
        rep.js.push(j);
        rep.theta.push(th);
        rep.t.push(t.to_f64());
        rep.signs.push(s);
        rep.expected.push(e);
        rep.matches.push(s == e);
    }
    Ok(rep)
}

fn delta2_sign(df: &QSeries, t: &Float, prec: u32) -> Result<i32> {
    let mut p = prec;
    for _ in 0..3 {
        let ev = Evaluator::new(df, p);
        let z = Complex::with_val(p, (Float::with_val(p, 0.5), Float::with_val(p, t)));
        let r = ev.eval(&z)?;
        let u = r.log2_uncertainty();
        let (re, im) = r.value.into_real_imag();
        let s = Sample { value: re, log2_uncertainty: u, log2_imag: log2_abs(&im) };
        if let Some(v) = s.sign() {
            if s.log2_imag > log2_add(u, log2_abs(&s.value) - p as f64 + 16.0) + 4.0 {
                return Err(Error::NonReal(format!("Df on Re z = 1/2 at t = {}", t.to_f64())));
            }
            return Ok(v);
        }
        p *= 2;
    }
    Err(Error::Indeterminate(format!("sign at t = {}", t.to_f64())))
}
