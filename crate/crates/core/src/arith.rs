//! Divisor sums, tau convolutions, D'Arcais polynomials and related sign checks.

use std::sync::{Mutex, OnceLock};

use rug::ops::Pow;
use rug::{Integer, Rational};
use serde::Serialize;

use std::f64::consts::PI;

use rug::Float;

use crate::error::{Error, Result};
use crate::eval::{auto_precision, log2_add, terms_for_height, Evaluator, LineFn, RealFunction, Segment};
use crate::forms::{delta, eisenstein};
use crate::mp;
use crate::qseries::QSeries;
use crate::zeros::{monomial_basis, real_zeros_on_segment, RealRoot};

/// sigma_r(n) = sum of d^r over divisors d of n (n >= 1).
pub fn sigma(r: u32, n: u64) -> Integer {
    let mut s = Integer::new();
    let mut d = 1u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            s += Integer::from(d).pow(r);
            let e = n / d;
            if e != d {
                s += Integer::from(e).pow(r);
            }
        }
        d += 1;
    }
    s
}

/// Number of divisors of n.
pub fn divisor_count(n: u64) -> u64 {
    let mut c = 0;
    let mut d = 1u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            c += if d * d == n { 1 } else { 2 };
        }
        d += 1;
    }
    c
}

/// tau(1..=n_max), index 0 holds tau(1).
///
/// Built from Delta = q prod (1 - q^n)^24 with Jacobi's identity
/// prod (1 - q^n)^3 = sum (-1)^m (2m + 1) q^{m(m+1)/2}, whose sparsity makes the
/// eighth power cheap.
pub fn tau_values(n_max: usize) -> Vec<Integer> {
    if n_max == 0 {
        return Vec::new();
    }
    let len = n_max; // coefficients of prod (1 - q^n)^24 up to q^{n_max - 1}
    let mut jacobi = Vec::new();
    let mut m = 0usize;
    while m * (m + 1) / 2 < len {
        let c = (2 * m + 1) as i64 * if m.is_multiple_of(2) { 1 } else { -1 };
        jacobi.push((m * (m + 1) / 2, c));
        m += 1;
    }
    let mut cur = vec![Integer::new(); len];
    for &(e, c) in &jacobi {
        cur[e] = Integer::from(c);
    }
    for _ in 1..8 {
        let mut next = vec![Integer::new(); len];
        for (i, a) in cur.iter().enumerate() {
            if *a == 0 {
                continue;
            }
            for &(e, c) in &jacobi {
                if i + e >= len {
                    break;
                }
                next[i + e] += Integer::from(a * c);
            }
        }
        cur = next;
    }
    cur
}

/// tau_m(n) for m <= n <= n_max, the coefficients of Delta^m.
pub fn tau_convolution(m: u32, n_max: usize) -> Result<Vec<Integer>> {
    if m == 0 || (n_max as u64) < m as u64 {
        return Err(Error::InvalidArgument(format!("need 1 <= m <= n_max, got m = {m}, n_max = {n_max}")));
    }
    let len = n_max - m as usize + 1;
    let d = delta(len);
    let p = d.pow(m as i64)?;
    (m as i64..=n_max as i64).map(|n| p.integer(n)).collect()
}

/// tau_m(n) by repeated convolution of tau (independent of the series power).
pub fn tau_convolution_direct(m: u32, n_max: usize) -> Vec<Integer> {
    let t = tau_values(n_max);
    // cur[n] = tau_j(n) for n in 0..=n_max
    let mut cur = vec![Integer::new(); n_max + 1];
    cur[1..].clone_from_slice(&t[..n_max]);
    for _ in 1..m {
        let mut next = vec![Integer::new(); n_max + 1];
        for a in 1..=n_max {
            if cur[a] == 0 {
                continue;
            }
            for b in 1..=n_max - a {
                next[a + b] += Integer::from(&cur[a] * &t[b - 1]);
            }
        }
        cur = next;
    }
    cur.into_iter().skip(m as usize).collect()
}

/// Exact polynomial with ascending rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DPoly {
    pub coeffs: Vec<Rational>,
}

impl DPoly {
    pub fn new(mut coeffs: Vec<Rational>) -> DPoly {
        while coeffs.len() > 1 && coeffs.last().map(|c| *c == 0).unwrap_or(false) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(Rational::new());
        }
        DPoly { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        let mut s = Rational::new();
        for c in self.coeffs.iter().rev() {
            s *= x;
            s += c;
        }
        s
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |s, c| s * x + c.to_f64())
    }

    pub fn derivative(&self) -> DPoly {
        if self.degree() == 0 {
            return DPoly::new(vec![Rational::new()]);
        }
        DPoly::new(self.coeffs.iter().enumerate().skip(1).map(|(i, c)| Rational::from(c * i as u32)).collect())
    }

    /// Remainder of self divided by d.
    pub fn rem(&self, d: &DPoly) -> DPoly {
        let mut r = self.coeffs.clone();
        let dd = d.degree();
        let lead = d.coeffs[dd].clone();
        while r.len() > dd && !(r.len() == 1 && r[0] == 0) {
            let top = r.len() - 1;
            let c = Rational::from(&r[top] / &lead);
            let shift = top - dd;
            for (i, dc) in d.coeffs.iter().enumerate() {
                r[shift + i] -= Rational::from(&c * dc);
            }
            r.pop();
            while r.len() > 1 && r.last().map(|v| *v == 0).unwrap_or(false) {
                r.pop();
            }
            if r.is_empty() {
                break;
            }
        }
        DPoly::new(r)
    }

    fn neg(&self) -> DPoly {
        DPoly::new(self.coeffs.iter().map(|c| Rational::from(-c)).collect())
    }

    /// Positive multiple with coprime integer coefficients; signs are unchanged.
    pub fn primitive(&self) -> DPoly {
        if self.is_zero() {
            return self.clone();
        }
        let mut den = Integer::from(1);
        for c in &self.coeffs {
            den.lcm_mut(c.denom());
        }
        let ints: Vec<Integer> = self.coeffs.iter().map(|c| c.numer() * Integer::from(&den / c.denom())).collect();
        let mut g = Integer::new();
        for c in &ints {
            g.gcd_mut(c);
        }
        DPoly::new(ints.into_iter().map(|c| Rational::from(c / &g)).collect())
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.coeffs.iter().map(|c| c.to_string()).collect()
    }
}

fn sign_q(r: &Rational) -> i32 {
    match r.cmp0() {
        std::cmp::Ordering::Less => -1,
        std::cmp::Ordering::Equal => 0,
        std::cmp::Ordering::Greater => 1,
    }
}

/// Sturm chain p, p', -rem(...), ..., each scaled to a primitive integer polynomial.
pub fn sturm_chain(p: &DPoly) -> Vec<DPoly> {
    let mut chain = vec![p.primitive(), p.derivative().primitive()];
    loop {
        let n = chain.len();
        if chain[n - 1].is_zero() {
            chain.pop();
            break;
        }
        if chain[n - 1].degree() == 0 {
            break;
        }
        let r = chain[n - 2].rem(&chain[n - 1]).neg().primitive();
        if r.is_zero() {
            break;
        }
        chain.push(r);
    }
    chain
}

/// Sign of p(a/b) from the integer b^d p(a/b) (b > 0), avoiding rational reductions.
fn sign_at(p: &DPoly, x: &Rational) -> i32 {
    if p.coeffs.iter().any(|c| *c.denom() != 1) {
        return sign_q(&p.eval(x));
    }
    let (a, b) = (x.numer(), x.denom());
    let d = p.degree();
    let mut s = p.coeffs[d].numer().clone();
    let mut bp = Integer::from(1);
    for i in (0..d).rev() {
        bp *= b;
        s *= a;
        s += Integer::from(p.coeffs[i].numer() * &bp);
    }
    match s.cmp0() {
        std::cmp::Ordering::Less => -1,
        std::cmp::Ordering::Equal => 0,
        std::cmp::Ordering::Greater => 1,
    }
}

fn sign_variations(chain: &[DPoly], x: &Rational) -> usize {
    let signs: Vec<i32> = chain.iter().map(|p| sign_at(p, x)).filter(|s| *s != 0).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Distinct real roots in (a, b].
pub fn count_roots(chain: &[DPoly], a: &Rational, b: &Rational) -> usize {
    sign_variations(chain, a).saturating_sub(sign_variations(chain, b))
}

/// Cauchy bound: every root has |x| < 1 + max |c_i / c_n|.
pub fn root_bound(p: &DPoly) -> Rational {
    let n = p.degree();
    let lead = Rational::from(p.coeffs[n].abs_ref());
    let mut m = Rational::new();
    for c in &p.coeffs[..n] {
        let v = Rational::from(c.abs_ref()) / &lead;
        if v > m {
            m = v;
        }
    }
    m + 1u32
}

/// Isolating intervals (lo, hi] for the distinct real roots, bisected to width <= tol.
pub fn isolate_roots(p: &DPoly, tol: &Rational) -> Vec<(Rational, Rational)> {
    if p.degree() == 0 {
        return Vec::new();
    }
    isolate_with(p, &sturm_chain(p), tol)
}

fn isolate_with(p: &DPoly, chain: &[DPoly], tol: &Rational) -> Vec<(Rational, Rational)> {
    let chain = chain.to_vec();
    let b = root_bound(p);
    let mut out = Vec::new();
    let mut stack = vec![(Rational::from(-&b), b)];
    while let Some((lo, hi)) = stack.pop() {
        let c = count_roots(&chain, &lo, &hi);
        if c == 0 {
            continue;
        }
        let w = Rational::from(&hi - &lo);
        if c == 1 && w <= *tol {
            out.push((lo, hi));
            continue;
        }
        let mid = Rational::from(&lo + &hi) / 2u32;
        stack.push((mid.clone(), hi));
        stack.push((lo, mid));
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

fn darcais_table() -> &'static Mutex<Vec<DPoly>> {
    static T: OnceLock<Mutex<Vec<DPoly>>> = OnceLock::new();
    T.get_or_init(|| Mutex::new(vec![DPoly::new(vec![Rational::from(1)])]))
}

/// P_n(x) = (x/n) sum_{j=1}^n sigma_1(j) P_{n-j}(x), P_0 = 1.
pub fn darcais(n: usize) -> DPoly {
    let mut t = darcais_table().lock().expect("darcais table");
    while t.len() <= n {
        let m = t.len();
        let mut acc = vec![Rational::new(); m + 1];
        for j in 1..=m {
            let s = sigma(1, j as u64);
            for (i, c) in t[m - j].coeffs.iter().enumerate() {
                // multiply by x: shift by one
                acc[i + 1] += Rational::from(c * &s);
            }
        }
        for c in acc.iter_mut() {
            *c /= m as u32;
        }
        t.push(DPoly::new(acc));
    }
    t[n].clone()
}

/// eta_n(r) = P_n(-r) for 0 <= n <= n_max.
pub fn eta_power(r: &Rational, n_max: usize) -> Vec<Rational> {
    let x = Rational::from(-r);
    (0..=n_max).map(|n| darcais(n).eval(&x)).collect()
}

/// Coefficients of prod (1 - q^n)^r for integer r >= 0, by direct multiplication.
pub fn eta_power_product(r: u32, n_max: usize) -> Vec<Integer> {
    let mut c = vec![Integer::new(); n_max + 1];
    c[0] = Integer::from(1);
    for _ in 0..r {
        for n in 1..=n_max {
            // multiply by (1 - q^n): c[i] -= c[i - n], descending
            for i in (n..=n_max).rev() {
                let v = c[i - n].clone();
                c[i] -= v;
            }
        }
    }
    c
}

/// Real-root facts for one P_n.
#[derive(Clone, Debug, Serialize)]
pub struct DarcaisRoots {
    pub n: usize,
    /// Approximate distinct real roots.
    pub roots: Vec<f64>,
    /// deg gcd(P, P') = 0.
    pub squarefree: bool,
    /// Every real root lies in [-15(n-1), 0].
    pub inside: bool,
}

/// Sign law (-1)^{n + r_n} eta_n(r) >= 0 for one r.
#[derive(Clone, Debug, Serialize)]
pub struct SignLaw {
    pub r: String,
    pub n_max: usize,
    pub holds: bool,
    pub failures: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RootFreeReport {
    pub n_max: usize,
    pub polys: Vec<DarcaisRoots>,
    pub sign_laws: Vec<SignLaw>,
    pub passed: bool,
}

/// Isolates the real roots of P_1..P_{n_max} exactly and checks them against
/// [-15(n-1), 0]; then checks the sign law for each r in `rs`.
pub fn darcais_rootfree_check(n_max: usize, rs: &[Rational]) -> RootFreeReport {
    let tol = Rational::from((1, 1 << 20));
    let mut polys = Vec::new();
    let mut passed = true;
    let mut chains = vec![Vec::new()];
    for n in 1..=n_max {
        let p = darcais(n);
        let chain = sturm_chain(&p);
        let squarefree = chain.last().map(|g| g.degree() == 0).unwrap_or(true);
        let iso = isolate_with(&p, &chain, &tol);
        let bound = Rational::from(-15 * (n as i64 - 1));
        // exact: no root in (-inf, bound) and none in (0, inf)
        let big = root_bound(&p);
        let below = if bound > Rational::from(-&big) {
            count_roots(&chain, &Rational::from(-&big), &bound) - usize::from(p.eval(&bound) == 0)
        } else {
            0
        };
        let above = count_roots(&chain, &Rational::new(), &big);
        let inside = below == 0 && above == 0;
        passed &= inside;
        polys.push(DarcaisRoots {
            n,
            roots: iso.iter().map(|(a, b)| (Rational::from(a + b) / 2u32).to_f64()).collect(),
            squarefree,
            inside,
        });
        chains.push(chain);
    }
    let mut sign_laws = Vec::new();
    for r in rs {
        let eta = eta_power(r, n_max);
        let x = Rational::from(-r);
        let mut failures = Vec::new();
        for n in 1..=n_max {
            let p = darcais(n);
            let big = root_bound(&p);
            // r_n: distinct real roots <= -r
            let rn = if x > Rational::from(-&big) { count_roots(&chains[n], &Rational::from(-&big), &x) } else { 0 };
            let s = sign_q(&eta[n]) * if (n + rn) % 2 == 0 { 1 } else { -1 };
            if s < 0 {
                failures.push(n);
            }
        }
        passed &= failures.is_empty();
        sign_laws.push(SignLaw { r: r.to_string(), n_max, holds: failures.is_empty(), failures });
    }
    RootFreeReport { n_max, polys, sign_laws, passed }
}

/// Sign alternation of tau_{k/12}(n) up to N_k.
#[derive(Clone, Debug, Serialize)]
pub struct TauSignReport {
    pub k: i64,
    pub m: i64,
    pub n_k: i64,
    /// (-1)^{n-m} tau_m(n) > 0 for every n in [m, N_k].
    pub alternates: bool,
    pub failures: Vec<i64>,
    /// tau_m(n-1) tau_m(n) < 0 for every n in [m, N_k] read literally;
    /// fails at n = m where tau_m(m-1) = 0.
    pub literal_product_holds: bool,
    pub literal_failures: Vec<i64>,
    pub values: Vec<String>,
}

/// N_k = k/12 + [1 + 2k/15].
pub fn n_k(k: i64) -> i64 {
    k / 12 + (15 + 2 * k).div_euclid(15)
}

pub fn tau_sign_lemma(k: i64) -> Result<TauSignReport> {
    if k <= 0 || k % 12 != 0 {
        return Err(Error::InvalidArgument(format!("k = {k} must be a positive multiple of 12")));
    }
    let m = k / 12;
    let nk = n_k(k);
    let t = tau_convolution(m as u32, nk as usize)?;
    let at = |n: i64| -> Integer {
        if n < m {
            Integer::new()
        } else {
            t[(n - m) as usize].clone()
        }
    };
    let mut failures = Vec::new();
    let mut literal_failures = Vec::new();
    for n in m..=nk {
        let v = at(n);
        let s = if (n - m) % 2 == 0 { v.cmp0() } else { v.cmp0().reverse() };
        if s != std::cmp::Ordering::Greater {
            failures.push(n);
        }
        if Integer::from(&at(n - 1) * &v).cmp0() != std::cmp::Ordering::Less {
            literal_failures.push(n);
        }
    }
    Ok(TauSignReport {
        k,
        m,
        n_k: nk,
        alternates: failures.is_empty(),
        failures,
        literal_product_holds: literal_failures.is_empty(),
        literal_failures,
        values: (m..=nk).map(|n| at(n).to_string()).collect(),
    })
}

/// |tau(n)| <= d(n) n^{11/2} for all n <= n_max; returns the largest ratio seen.
pub fn ramanujan_petersson(n_max: usize) -> (bool, f64) {
    let t = tau_values(n_max);
    let mut worst: f64 = 0.0;
    for (i, v) in t.iter().enumerate() {
        let n = (i + 1) as u64;
        // compare tau(n)^2 <= d(n)^2 n^11 exactly
        let lhs = Integer::from(v.square_ref());
        let rhs = Integer::from(divisor_count(n)).pow(2) * Integer::from(n).pow(11);
        let ratio = (lhs.to_f64() / rhs.to_f64()).sqrt();
        worst = worst.max(ratio);
        if lhs > rhs {
            return (false, worst);
        }
    }
    (true, worst)
}

/// Signs read from the first two nonzero coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EpsilonSigns {
    pub a0: String,
    pub an: String,
    pub n: i64,
    pub eps_prime: i32,
    pub eps: i32,
}

pub fn epsilon_signs(f: &QSeries) -> Result<EpsilonSigns> {
    let c = f.exact_coeffs().ok_or_else(|| Error::InvalidArgument("epsilon signs need exact coefficients".into()))?;
    if f.lowest_order() != 0 || c.is_empty() || c[0] == 0 {
        return Err(Error::InvalidArgument("form is cuspidal or has a pole".into()));
    }
    let n = c
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, v)| **v != 0)
        .map(|(i, _)| i)
        .ok_or_else(|| Error::InsufficientTerms { needed: c.len() + 1, got: c.len() })?;
    let eps_prime = sign_q(&c[0]) * sign_q(&c[n]);
    let eps = if n % 2 == 0 { eps_prime } else { -eps_prime };
    Ok(EpsilonSigns { a0: c[0].to_string(), an: c[n].to_string(), n: n as i64, eps_prime, eps })
}

/// b1 Delta^{k/12} + bk Delta E4^{k/4-3} + E4^{k/4}.
pub fn prop65_build(k: i64, b1: &Rational, bk: &Rational, terms: usize) -> Result<QSeries> {
    if k < 24 || k % 12 != 0 {
        return Err(Error::InvalidArgument(format!("k = {k} must be a multiple of 12 with k >= 24")));
    }
    let d = delta(terms);
    let e4 = eisenstein(4, terms)?;
    let a = d.pow(k / 12)?.truncate_at(terms as i64);
    let b = d.mul(&e4.pow(k / 4 - 3)?).truncate_at(terms as i64);
    let c = e4.pow(k / 4)?;
    Ok(c.add(&a.scale(b1)).add(&b.scale(bk)).truncate_at(terms as i64))
}

/// Outcome of the delta_2 scans for a Prop-6.5 type form.
#[derive(Clone, Debug, Serialize)]
pub struct Prop65Report {
    pub k: i64,
    pub b1: String,
    pub bk: String,
    pub t_range: (f64, f64),
    pub grid: usize,
    pub epsilon: EpsilonSigns,
    /// Order at the cusp of Df.
    pub v_infinity_df: i64,
    pub f_roots: Vec<f64>,
    /// min |f(1/2+it)| over the samples.
    pub min_abs_f: f64,
    pub no_zero: bool,
    /// bk < -60k.
    pub monotonicity_applies: bool,
    /// The inequality checked on every sample.
    pub checked_inequality: String,
    pub df_positive: bool,
    pub df_failures: Vec<f64>,
    /// Finite-difference slope of f(1/2+it) in t is negative on every sample step.
    pub slope_negative: bool,
    /// Df > 0 and a non-negative slope seen at the same place.
    pub direction_mismatch: bool,
    pub passed: bool,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..=n).map(|i| (a + (b - a) * i as f64 / n as f64).exp()).collect()
}

/// Sign of a sample, escalating precision up to 8x.
fn robust_sign(g: &dyn RealFunction, t: f64) -> Result<(i32, Float)> {
    let mut p = g.base_prec();
    for _ in 0..4 {
        let s = g.sample(t, p)?;
        if let Some(sg) = s.sign() {
            return Ok((sg, s.value));
        }
        p *= 2;
    }
    Err(Error::Indeterminate(format!("sign at t = {t} below the uncertainty")))
}

/// Scans f and Df on Re z = 1/2 for t in [t_lo, t_hi].
pub fn prop65_verify(
    k: i64,
    b1: &Rational,
    bk: &Rational,
    t_lo: f64,
    t_hi: f64,
    grid: usize,
    terms: usize,
) -> Result<Prop65Report> {
    let f = prop65_build(k, b1, bk, terms)?;
    let epsilon = epsilon_signs(&f)?;
    let df = f.d_operator(1);
    let v_infinity_df = df.lowest_order();
    let prec = 128 + (k as u32) * 4;
    let gf = LineFn::new(&f, k, Segment::Delta2, false)?.with_prec(prec);
    let gd = LineFn::new(&f, k, Segment::Delta2, true)?.with_prec(prec);
    let roots = real_zeros_on_segment(&gf, t_lo, t_hi, grid, 1e-10)?;
    let ts = log_grid(t_lo, t_hi, grid);
    let mut min_abs_f = f64::INFINITY;
    let mut fvals = Vec::with_capacity(ts.len());
    for &t in &ts {
        let (_, v) = robust_sign(&gf, t)?;
        min_abs_f = min_abs_f.min(v.to_f64().abs());
        fvals.push(v);
    }
    let monotonicity_applies = *bk < -60 * k;
    let mut df_failures = Vec::new();
    let mut dsigns = Vec::with_capacity(ts.len());
    for &t in &ts {
        let (s, _) = robust_sign(&gd, t)?;
        dsigns.push(s);
        if s <= 0 {
            df_failures.push(t);
        }
    }
    let mut slope_negative = true;
    let mut direction_mismatch = false;
    for i in 0..ts.len() - 1 {
        let slope = Float::with_val(prec * 2, &fvals[i + 1] - &fvals[i]);
        if !slope.is_sign_negative() || slope.is_zero() {
            slope_negative = false;
            if dsigns[i] > 0 && dsigns[i + 1] > 0 {
                direction_mismatch = true;
            }
        }
    }
    let df_positive = df_failures.is_empty();
    let no_zero = roots.is_empty() && min_abs_f > 0.0;
    let passed = no_zero && (!monotonicity_applies || df_positive);
    Ok(Prop65Report {
        k,
        b1: b1.to_string(),
        bk: bk.to_string(),
        t_range: (t_lo, t_hi),
        grid,
        epsilon,
        v_infinity_df,
        f_roots: roots.iter().map(|r| r.t).collect(),
        min_abs_f,
        no_zero,
        monotonicity_applies,
        checked_inequality: "Df(1/2+it) > 0, i.e. d/dt f(1/2+it) = -2 pi Df(1/2+it) < 0".into(),
        df_positive,
        df_failures,
        slope_negative,
        direction_mismatch,
        passed,
    })
}

/// Result of the geometric search for b1.
#[derive(Clone, Debug, Serialize)]
pub struct FindBReport {
    pub k: i64,
    pub bk: String,
    /// (b1, passed) for every trial.
    pub trials: Vec<(String, bool)>,
    /// Smallest trial value that passed.
    pub found: Option<String>,
}

/// Doubles b1 from `start` until `prop65_verify` passes or `max_steps` trials are used.
pub fn find_b(
    k: i64,
    bk: &Rational,
    start: &Rational,
    max_steps: usize,
    grid: usize,
    terms: usize,
) -> Result<FindBReport> {
    let mut b1 = start.clone();
    let mut trials = Vec::new();
    let mut found = None;
    for _ in 0..max_steps {
        let ok = match prop65_verify(k, &b1, bk, 0.05, 10.0, grid, terms) {
            Ok(r) => r.passed,
            Err(Error::Indeterminate(_)) => false,
            Err(e) => return Err(e),
        };
        trials.push((b1.to_string(), ok));
        if ok {
            found = Some(b1.to_string());
            break;
        }
        b1 *= 2u32;
    }
    Ok(FindBReport { k, bk: bk.to_string(), trials, found })
}

/// One height of the asymptotic ratio check.
#[derive(Clone, Debug, Serialize)]
pub struct RatioSample {
    pub y: f64,
    pub segment: String,
    /// R(y) - 1 as a float (may overflow to +-inf).
    pub r_minus_1: f64,
    pub log2_abs_r_minus_1: f64,
    pub sign: i32,
}

#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticReport {
    pub weight: i64,
    pub j: u32,
    pub cuspidal: bool,
    pub epsilon: Option<EpsilonSigns>,
    pub terms: usize,
    pub prec: u32,
    pub delta1: Vec<RatioSample>,
    pub delta2: Vec<RatioSample>,
    /// Stated eventual sign of R - 1 on (delta1, delta2): -eps for j = 1 and
    /// (-1)^{j-1} eps for j > 1. None for cusp forms.
    pub predicted: Option<(i32, i32)>,
    /// Sign from the leading f-term of the transformation law, (-1)^j eps for every j.
    pub corrected: Option<(i32, i32)>,
    /// Sign at the smallest y agrees with `predicted` (or |R - 1| decreases for cusp forms).
    pub delta1_ok: bool,
    pub delta2_ok: bool,
    pub delta1_matches_corrected: bool,
    pub delta2_matches_corrected: bool,
}

/// R(y) = D^j f(x+iy) / [(i/sy)^{k+2j} D^j f(x + i/(s^2 y))] with both sides summed from the series.
///
/// The near point is summed directly, with enough terms for the smallest y.
pub fn asymptotic_ratio_check(f: &QSeries, weight: i64, j: u32, ys: &[f64]) -> Result<AsymptoticReport> {
    if j == 0 {
        return Err(Error::InvalidArgument("j must be positive".into()));
    }
    if ys.iter().any(|y| !(*y > 0.0 && *y <= 0.5)) {
        return Err(Error::InvalidArgument("heights must lie in (0, 1/2]".into()));
    }
    let cuspidal = f.lowest_order() > 0;
    let epsilon = if cuspidal { None } else { Some(epsilon_signs(f)?) };
    let y_min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let w = weight + 2 * j as i64;
    let base_terms = f.len();
    let terms = terms_for_height(w, y_min, 200.0);
    if base_terms < terms {
        return Err(Error::InsufficientTerms { needed: terms, got: base_terms });
    }
    let g = f.truncate(terms).d_operator(j);
    let prec = auto_precision(&g, y_min, 96);
    let ev = Evaluator::new(&g, prec);
    let mut out = [Vec::new(), Vec::new()];
    for (idx, (x, s)) in [(0.0, 1.0), (0.5, 2.0)].into_iter().enumerate() {
        for &y in ys {
            let near = ev.eval(&mp::cplx(prec, x, y))?;
            let far = ev.eval(&mp::cplx(prec, x, 1.0 / (s * s * y)))?;
            // coefficient sizes fluctuate (tau-like), so bound the tail by the largest
            // of the last stored terms over 1 - |q|
            let prof = ev.term_profile(y);
            let lq = (-2.0 * PI * y).exp();
            let tail = prof[prof.len().saturating_sub(16)..].iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - (1.0 - lq).log2();
            if tail > near.log2_abs() - 32.0 {
                return Err(Error::TailTooLarge { bound: tail.exp2(), tol: near.log2_abs().exp2() });
            }
            let nv = near.value.real().clone();
            let fv = far.value.real().clone();
            // (i/sy)^w is real since w is even
            let sgn = if w.rem_euclid(4) == 0 { 1 } else { -1 };
            let fac: Float = Float::with_val(prec, Float::with_val(prec, s * y).pow(-(w as i32))) * sgn;
            let den = Float::with_val(prec, &fv * &fac);
            if den.is_zero() {
                return Err(Error::Indeterminate(format!("D^{j} f vanishes at the far point for y = {y}")));
            }
            let rm1 = Float::with_val(prec, &nv / &den) - 1u32;
            let unc = log2_add(log2_add(tail, near.log2_rounding), far.log2_uncertainty() - w as f64 * (s * y).log2())
                - mp::log2_abs(&den);
            let l = mp::log2_abs(&rm1);
            let sign = if l > unc + 2.0 { mp::sign(&rm1) } else { 0 };
            out[idx].push(RatioSample {
                y,
                segment: if idx == 0 { "delta1" } else { "delta2" }.into(),
                r_minus_1: rm1.to_f64(),
                log2_abs_r_minus_1: l,
                sign,
            });
        }
    }
    let predicted = epsilon.as_ref().map(|e| {
        if j == 1 {
            (-e.eps_prime, -e.eps)
        } else {
            let s = if (j - 1).is_multiple_of(2) { 1 } else { -1 };
            (s * e.eps_prime, s * e.eps)
        }
    });
    let order: Vec<usize> = {
        let mut v: Vec<usize> = (0..ys.len()).collect();
        v.sort_by(|a, b| ys[*b].partial_cmp(&ys[*a]).expect("finite"));
        v
    };
    let check = |samples: &[RatioSample], want: Option<i32>| -> bool {
        let last = &samples[*order.last().expect("non-empty")];
        match want {
            Some(s) => last.sign == s,
            None => order.windows(2).all(|w| samples[w[1]].log2_abs_r_minus_1 < samples[w[0]].log2_abs_r_minus_1),
        }
    };
    // D^j f(g z) = ... + c^j (k)_j / (2 pi i)^j (cz+d)^{k+j} f(z) dominates as y -> 0
    let corrected = epsilon.as_ref().map(|e| {
        let s = if j.is_multiple_of(2) { 1 } else { -1 };
        (s * e.eps_prime, s * e.eps)
    });
    let delta1_ok = check(&out[0], predicted.map(|p| p.0));
    let delta2_ok = check(&out[1], predicted.map(|p| p.1));
    let delta1_matches_corrected = check(&out[0], corrected.map(|p| p.0));
    let delta2_matches_corrected = check(&out[1], corrected.map(|p| p.1));
    let [delta1, delta2] = out;
    Ok(AsymptoticReport {
        weight,
        j,
        cuspidal,
        epsilon,
        terms,
        prec,
        delta1,
        delta2,
        predicted,
        corrected,
        delta1_ok,
        delta2_ok,
        delta1_matches_corrected,
        delta2_matches_corrected,
    })
}

/// Delta times the E4^a E6^b monomials of weight k - 12.
pub fn cusp_basis(k: i64, terms: usize) -> Result<Vec<QSeries>> {
    if k < 12 || k % 2 != 0 {
        return Err(Error::InvalidArgument(format!("no cusp forms of weight {k}")));
    }
    let d = delta(terms);
    let rest = if k == 12 { vec![QSeries::one(terms)] } else { monomial_basis(k - 12, terms)? };
    Ok(rest.iter().map(|g| d.mul(g)).collect())
}

/// Real zeros of f (or Df) on the full line Re z = 0 or 1/2 for t in [t_lo, t_hi].
pub fn line_zeros(
    f: &QSeries,
    weight: i64,
    segment: Segment,
    derivative: bool,
    t_lo: f64,
    t_hi: f64,
    grid: usize,
) -> Result<Vec<RealRoot>> {
    let prec = 128 + 4 * weight.max(0) as u32;
    let g = LineFn::new(f, weight, segment, derivative)?.with_prec(prec);
    real_zeros_on_segment(&g, t_lo, t_hi, grid, 1e-10)
}
