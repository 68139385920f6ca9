//! Property tests for the algebraic and analytic invariants.

use proptest::prelude::*;
use quasizeros::arith::{self, cusp_basis, line_zeros};
use quasizeros::contour::{self, KernelContext};
use quasizeros::eval::{Evaluator, Segment};
use quasizeros::forms::{classical_form, delta, eisenstein, gap_form, weight_split, ClassicalForm, QuasiForm};
use quasizeros::mp;
use quasizeros::zeros::{domain_census, CensusOptions, LocationClass};
use quasizeros::QSeries;
use rug::{Complex, Float, Rational};

/// Coefficients agree wherever both series are known.
fn agree(a: &QSeries, b: &QSeries) -> bool {
    let lo = a.lowest_order().min(b.lowest_order());
    let hi = a.end().min(b.end());
    (lo..hi).all(|n| a.rational(n).unwrap() == b.rational(n).unwrap())
}

fn series(len: std::ops::Range<usize>, lowest: std::ops::RangeInclusive<i64>) -> impl Strategy<Value = QSeries> {
    (lowest, prop::collection::vec(-20i64..=20, len)).prop_map(|(lo, c)| QSeries::from_i64(lo, &c))
}

fn unit_series() -> impl Strategy<Value = QSeries> {
    (-2i64..=2, prop_oneof![-5i64..=-1, 1i64..=5], prop::collection::vec(-20i64..=20, 3..10)).prop_map(
        |(lo, lead, rest)| {
            let mut c = vec![lead];
            c.extend(rest);
            QSeries::from_i64(lo, &c)
        },
    )
}

/// First nonzero exponent of an exact series.
fn order(f: &QSeries) -> Option<i64> {
    (f.lowest_order()..f.end()).find(|&n| f.rational(n).unwrap() != 0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn multiplication_commutes_and_associates(a in series(1..12, -2..=2), b in series(1..12, -2..=2), c in series(1..12, -2..=2)) {
        prop_assert!(agree(&a.mul(&b), &b.mul(&a)));
        prop_assert!(agree(&a.mul(&b).mul(&c), &a.mul(&b.mul(&c))));
    }

    #[test]
    fn addition_commutes_and_distributes(a in series(1..12, -2..=2), b in series(1..12, -2..=2), c in series(1..12, -2..=2)) {
        prop_assert!(agree(&a.add(&b), &b.add(&a)));
        prop_assert!(agree(&a.mul(&b.add(&c)), &a.mul(&b).add(&a.mul(&c))));
        prop_assert!(a.sub(&a).is_zero());
    }

    #[test]
    fn division_inverts_multiplication(a in series(3..12, -2..=2), b in unit_series()) {
        let q = a.div(&b).unwrap();
        prop_assert!(agree(&q.mul(&b), &a));
    }

    #[test]
    fn d_is_a_derivation(a in series(1..12, -2..=3), b in series(1..12, -2..=3)) {
        let lhs = a.mul(&b).d_operator(1);
        let rhs = a.d_operator(1).mul(&b).add(&a.mul(&b.d_operator(1)));
        prop_assert!(agree(&lhs, &rhs));
    }

    #[test]
    fn exact_and_float_products_agree(a in series(2..14, -1..=1), b in series(2..14, -1..=1), prec in 64u32..256) {
        let exact = a.mul(&b).to_float(prec);
        let float = a.to_float(prec).mul(&b.to_float(prec));
        let tol = (-((prec - 8) as f64)).exp2();
        let scale = exact.float_coeffs().unwrap().iter().map(|c| c.to_f64().abs()).fold(1.0, f64::max);
        for n in exact.lowest_order()..exact.end().min(float.end()) {
            let d = exact.coeff_f64(n).unwrap() - float.coeff_f64(n).unwrap();
            prop_assert!(d.abs() <= tol * scale, "q^{n}: {d}");
        }
    }

    #[test]
    fn gap_forms_are_integral(k in (2i64..=40).prop_map(|h| 2 * h), m_off in 0i64..8) {
        let (ell, _) = weight_split(k).unwrap();
        let m = -ell + m_off;
        let g = gap_form(k, m, (ell + m + 15) as usize).unwrap();
        prop_assert!(g.series.is_integral());
        prop_assert_eq!(g.series.integer(-m).unwrap(), 1);
        for n in (-m + 1)..=ell {
            prop_assert_eq!(g.series.integer(n).unwrap(), 0);
        }
    }

    #[test]
    fn cusp_form_order_survives_d(k in prop::sample::select(vec![12i64, 16, 18, 20, 22, 24, 26, 28, 30, 32]), seed in prop::collection::vec(-9i64..=9, 3)) {
        let basis = cusp_basis(k, 20).unwrap();
        let mut f = QSeries::zero(1, 20);
        for (b, c) in basis.iter().zip(seed.iter().cycle()) {
            f = f.add(&b.scale_i64(*c));
        }
        prop_assume!(!f.is_zero());
        prop_assert_eq!(order(&f), order(&f.d_operator(1)));
    }

    #[test]
    fn tau_power_matches_convolution(m in 1u32..5, extra in 0usize..30) {
        let n_max = m as usize + extra;
        prop_assert_eq!(arith::tau_convolution(m, n_max).unwrap(), arith::tau_convolution_direct(m, n_max));
    }

    #[test]
    fn darcais_at_minus_24_is_tau(n in 0usize..60) {
        let t = arith::tau_values(n + 1);
        prop_assert_eq!(arith::darcais(n).eval(&Rational::from(-24)), Rational::from(&t[n]));
    }
}

#[test]
fn d_delta_and_d_j() {
    let n = 40;
    let d = delta(n);
    let e2 = eisenstein(2, n).unwrap();
    assert!(agree(&d.d_operator(1), &e2.mul(&d)));
    let j = classical_form(ClassicalForm::J, n).unwrap();
    let e14 = eisenstein(14, n).unwrap();
    assert!(agree(&j.d_operator(1), &e14.div(&d).unwrap().neg()));
}

fn at(f: &QSeries, z: &Complex) -> Complex {
    Evaluator::new(f, 128).eval(z).unwrap().value
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn e4_is_modular(x in -0.5f64..0.5, r in 1.0f64..1.15, phi in 0.0f64..1.0) {
        // z near the unit circle so that -1/z stays high enough for the series
        let y = (r * r - x * x).max(0.5);
        let z = mp::cplx(128, x * phi, y.sqrt());
        let e4 = eisenstein(4, 80).unwrap();
        let w = Complex::with_val(128, -Complex::with_val(128, z.recip_ref()));
        let lhs = at(&e4, &w);
        let rhs = Complex::with_val(128, at(&e4, &z) * Complex::with_val(128, z.clone().square().square()));
        let d = Complex::with_val(128, &lhs - &rhs);
        prop_assert!(mp::log2_abs_c(&d) - mp::log2_abs_c(&rhs) < -15.0 * 3.33);
    }

    #[test]
    fn e2_is_quasimodular(x in -0.5f64..0.5, y in 0.9f64..1.3) {
        let z = mp::cplx(128, x, y);
        let e2 = eisenstein(2, 100).unwrap();
        let w = Complex::with_val(128, -Complex::with_val(128, z.recip_ref()));
        let lhs = at(&e2, &w);
        // z^2 E2(z) + 12 z / (2 pi i) = z^2 E2(z) - 6 i z / pi
        let corr = Complex::with_val(128, &z * mp::cplx(128, 0.0, -6.0)) / mp::pi(128);
        let rhs = Complex::with_val(128, at(&e2, &z) * Complex::with_val(128, z.clone().square())) + corr;
        let d = Complex::with_val(128, &lhs - &rhs);
        prop_assert!(mp::log2_abs_c(&d) - mp::log2_abs_c(&rhs) < -50.0);
    }

    #[test]
    fn real_forms_are_real_on_delta2(t in 0.3f64..10.0, k in prop::sample::select(vec![4u32, 6, 12, 16, 26])) {
        let f = eisenstein(k, 80).unwrap();
        let r = Evaluator::new(&f, 128).eval(&mp::cplx(128, 0.5, t)).unwrap();
        let im = r.value.imag().to_f64().abs();
        let bound = r.tail_bound + (r.log2_rounding).exp2();
        prop_assert!(im <= bound, "Im = {im}, bound {bound}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn census_zeros_pair_under_reflection(a in -50i64..=50, b in -50i64..=50) {
        // a E4^6 + b E4^3 Delta + Delta^2, weight 24
        let n = 160;
        let e4 = eisenstein(4, n).unwrap();
        let d = delta(n);
        let f = e4.pow(6).unwrap().scale_i64(a).add(&e4.pow(3).unwrap().mul(&d).scale_i64(b)).add(&d.mul(&d));
        let c = domain_census(&QuasiForm::modular(24, f), &CensusOptions::default()).unwrap();
        // arc zeros are identified with their mirror image, interior ones are not
        for z in c.zeros.iter().filter(|z| z.location_class == LocationClass::Interior) {
            let twin = c.zeros.iter().any(|w| (w.position.x - (1.0 - z.position.x)).abs() < 1e-8 && (w.position.y - z.position.y).abs() < 1e-8);
            prop_assert!(twin, "no partner for {:?}", z.position);
        }
    }

    #[test]
    fn cusp_form_derivatives_have_zeros_on_both_lines(k in prop::sample::select(vec![12i64, 16, 18, 20, 24, 26, 28, 30, 36, 40]), seed in prop::collection::vec(-9i64..=9, 4)) {
        let n = 160;
        let basis = cusp_basis(k, n).unwrap();
        let mut f = QSeries::zero(1, n);
        for (b, c) in basis.iter().zip(seed.iter().cycle()) {
            f = f.add(&b.scale_i64(*c));
        }
        prop_assume!(!f.is_zero());
        prop_assert!(!line_zeros(&f, k, Segment::Delta1, true, 0.01, 10.0, 800).unwrap().is_empty());
        prop_assert!(!line_zeros(&f, k, Segment::Delta2, true, 0.01, 10.0, 800).unwrap().is_empty());
    }

    #[test]
    fn noncuspidal_weight_2_mod_4_forms_have_zeros_on_both_lines(k in prop::sample::select(vec![6i64, 10, 14, 18, 22, 26, 30]), c in -20i64..=20) {
        // E_k plus a multiple of the first cusp form when there is one
        let n = 160;
        let mut f = eisenstein(k as u32, n).unwrap();
        if let Some(g) = cusp_basis(k, n).unwrap_or_default().first() {
            f = f.add(&g.scale_i64(c));
        }
        prop_assert!(!line_zeros(&f, k, Segment::Delta1, false, 0.02, 10.0, 400).unwrap().is_empty());
        prop_assert!(!line_zeros(&f, k, Segment::Delta2, false, 0.02, 10.0, 400).unwrap().is_empty());
    }

    #[test]
    fn horizontal_integral_does_not_depend_on_height(k in prop::sample::select(vec![12i64, 24]), m in 0i64..=2, theta in 0.40f64..0.50) {
        let ctx = KernelContext::new(k, m, 160, 192).unwrap();
        let z = contour::z_of_theta(theta);
        let a = contour::horizontal_integral(&ctx, z, 2.5, 64, 1e-14).unwrap().value;
        let b = contour::horizontal_integral(&ctx, z, 3.5, 64, 1e-14).unwrap().value;
        let d = Complex::with_val(192, &a - &b);
        prop_assert!((mp::log2_abs_c(&d) - mp::log2_abs_c(&b)).exp2() <= 1e-10);
    }
}

#[test]
fn float_coefficients_keep_precision() {
    let f = eisenstein(4, 10).unwrap().to_float(200);
    assert!(f.float_coeffs().unwrap().iter().all(|c: &Float| c.prec() == 200));
}
