//! Small helpers over `rug` floats and complexes.

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Complex, Float};

/// Default working precision in bits.
pub const DEFAULT_PREC: u32 = 128;

pub fn pi(prec: u32) -> Float {
    Float::with_val(prec, Constant::Pi)
}

pub fn real(prec: u32, x: f64) -> Float {
    Float::with_val(prec, x)
}

pub fn cplx(prec: u32, re: f64, im: f64) -> Complex {
    Complex::with_val(prec, (re, im))
}

/// q = exp(2 pi i z).
pub fn q_of(z: &Complex) -> Complex {
    let prec = z.prec().0;
    let two_pi = pi(prec) * 2u32;
    let arg = Complex::with_val(prec, z * Complex::with_val(prec, (0, 1))) * two_pi;
    arg.exp()
}

/// log2 |x|, -inf for zero. Safe far outside the f64 exponent range.
pub fn log2_abs(x: &Float) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    if !x.is_finite() {
        return f64::INFINITY;
    }
    let (m, e) = x.to_f64_exp();
    m.abs().log2() + e as f64
}

pub fn log2_abs_c(z: &Complex) -> f64 {
    let a = Float::with_val(z.prec().0, z.abs_ref());
    log2_abs(&a)
}

pub fn abs_c(z: &Complex) -> Float {
    Float::with_val(z.prec().0, z.abs_ref())
}

pub fn to_c64(z: &Complex) -> (f64, f64) {
    (z.real().to_f64(), z.imag().to_f64())
}

/// Sign of a real float: -1, 0 or 1.
pub fn sign(x: &Float) -> i32 {
    if x.is_zero() {
        0
    } else if x.is_sign_negative() {
        -1
    } else {
        1
    }
}

/// 2^e as an f64-free Float (exponent may be huge).
pub fn pow2(prec: u32, e: i64) -> Float {
    Float::with_val(prec, 2u32).pow(e as i32)
}

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton at full precision.
pub fn gauss_legendre(n: usize, prec: u32) -> (Vec<Float>, Vec<Float>) {
    let wp = prec + 32;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let pi_f = std::f64::consts::PI;
    for i in 0..n {
        let guess = (pi_f * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut x = Float::with_val(wp, guess);
        let mut dp = Float::new(wp);
        for _ in 0..200 {
            let (p, d) = legendre_pair(n, &x);
            let step = Float::with_val(wp, &p / &d);
            x -= &step;
            dp = d;
            if step.is_zero() || log2_abs(&step) < -(wp as f64) + 4.0 {
                let (_, d) = legendre_pair(n, &x);
                dp = d;
                break;
            }
        }
        let one_minus = Float::with_val(wp, 1u32) - Float::with_val(wp, x.square_ref());
        let w = Float::with_val(wp, 2u32) / (one_minus * Float::with_val(wp, dp.square_ref()));
        nodes.push(Float::with_val(prec, &x));
        weights.push(Float::with_val(prec, &w));
    }
    (nodes, weights)
}

fn legendre_pair(n: usize, x: &Float) -> (Float, Float) {
    let wp = x.prec();
    let mut p0 = Float::with_val(wp, 1u32);
    let mut p1 = x.clone();
    for k in 2..=n {
        let kf = k as u32;
        let t = Float::with_val(wp, x * &p1) * (2 * kf - 1);
        let p2 = (t - Float::with_val(wp, &p0 * (kf - 1))) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (Float::with_val(wp, 1u32), Float::new(wp));
    }
    let num = Float::with_val(wp, x * &p1) - &p0;
    let den = Float::with_val(wp, x.square_ref()) - 1u32;
    let d = num * (n as u32) / den;
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8, 128);
        let mut s = Float::new(128);
        for (xi, wi) in x.iter().zip(&w) {
            s += Float::with_val(128, xi.pow(14u32)) * wi;
        }
        let exact = Float::with_val(128, 2u32) / 15u32;
        assert!(log2_abs(&(s - exact)) < -110.0);
    }

    #[test]
    fn log2_handles_huge_exponents() {
        let x = pow2(64, 5000);
        assert!((log2_abs(&x) - 5000.0).abs() < 1e-9);
    }

    #[test]
    fn q_of_imaginary_point_is_real() {
        let z = cplx(128, 0.0, 1.0);
        let q = q_of(&z);
        assert!((q.real().to_f64() - (-2.0 * std::f64::consts::PI).exp()).abs() < 1e-18);
        assert!(q.imag().to_f64().abs() < 1e-30);
    }
}
