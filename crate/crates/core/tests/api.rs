//! Public API behaviour: error paths and a few fixed data points.

use quasizeros::eval::{terms_for_height, Evaluator};
use quasizeros::forms::{eisenstein, gap_form, QuasiForm};
use quasizeros::mp;
use quasizeros::zeros::{domain_census, n_infty, CensusOptions, LocationClass};
use quasizeros::{Error, QSeries};
use rug::Rational;

fn e(k: u32, n: usize) -> QSeries {
    eisenstein(k, n).unwrap()
}

#[test]
fn coefficient_range() {
    let f = QSeries::from_i64(-1, &[1, 2, 3]);
    assert_eq!(f.rational(-5).unwrap(), 0);
    assert_eq!(f.rational(1).unwrap(), 3);
    assert!(matches!(f.coefficient(2), Err(Error::OutOfRange { n: 2, lo: -1, hi: 2 })));
}

#[test]
fn division_by_zero_series() {
    let f = QSeries::from_i64(0, &[1, 2, 3]);
    let z = QSeries::zero(0, 3);
    assert_eq!(f.div(&z).unwrap_err(), Error::DivisionByZero);
}

#[test]
fn bad_weights_are_rejected() {
    assert!(eisenstein(3, 10).is_err());
    assert!(eisenstein(7, 10).is_err());
    assert_eq!(eisenstein(0, 10).unwrap(), QSeries::one(10));
    assert!(gap_form(5, 0, 10).is_err());
    assert!(QuasiForm::new(12, vec![]).is_err());
}

#[test]
fn evaluation_needs_a_convergent_point() {
    let f = e(4, 20);
    let ev = Evaluator::new(&f, 128);
    assert!(ev.eval(&mp::cplx(128, 0.0, 0.0)).is_err());
    assert!(ev.eval(&mp::cplx(128, 0.0, -1.0)).is_err());
}

#[test]
fn census_of_zero_form_is_an_error() {
    let f = QuasiForm::modular(12, QSeries::zero(1, 20));
    assert!(domain_census(&f, &CensusOptions::default()).is_err());
}

#[test]
fn valence_needs_a_depth_one_part() {
    let n = 40;
    let r = n_infty(&e(4, n), &QSeries::zero(0, n), 4, &CensusOptions::default());
    assert!(matches!(r, Err(Error::InvalidArgument(_))));
}

#[test]
fn valence_rejects_shared_zero_at_rho() {
    // f0 = E4 E6, f1 = E4^2 vanish together at rho
    let n = 120;
    let r = n_infty(&e(4, n).mul(&e(6, n)), &e(4, n).mul(&e(4, n)), 10, &CensusOptions::default());
    assert!(matches!(r, Err(Error::CommonZero(_))), "{r:?}");
}

fn rho_order(k: u32) -> (u32, Rational) {
    let n = terms_for_height(k as i64, 0.75, 160.0).max(60);
    let c = domain_census(&QuasiForm::modular(k as i64, e(k, n)), &CensusOptions::default()).unwrap();
    let at_rho: u32 =
        c.zeros.iter().filter(|z| z.location_class == LocationClass::EllipticRho).map(|z| z.multiplicity).sum();
    (at_rho, c.total)
}

#[test]
fn e8_and_e26_vanish_twice_at_rho() {
    assert_eq!(rho_order(8), (2, Rational::from((2, 3))));
    assert_eq!(rho_order(26), (2, Rational::from((13, 6))));
}

/// f = E4^3 E6^3 - 3 E6^5 + E2 (-4 E4^7 + 2 E4^4 E6^2) of weight 30.
///
/// Here f1 vanishes to order 4 at rho, the four arc terms cancel and the
/// depth-one count gives 5/2, while the form has two zeros in F and none at
/// i or rho. The record pins that disagreement.
#[test]
fn valence_count_with_fourfold_rho_zero_of_f1() {
    let n = terms_for_height(32, 0.75, 160.0).max(60);
    let (e4, e6) = (e(4, n), e(6, n));
    let p = |s: &QSeries, k: i64| s.pow(k).unwrap();
    let f0 = p(&e4, 3).mul(&p(&e6, 3)).sub(&p(&e6, 5).scale_i64(3));
    let f1 = p(&e4, 7).scale_i64(-4).add(&p(&e4, 4).mul(&p(&e6, 2)).scale_i64(2));
    let r = n_infty(&f0, &f1, 30, &CensusOptions::default()).unwrap();
    assert_eq!(r.v_rho_f1, 4);
    assert_eq!(r.n_infty, Rational::from((5, 2)));
    assert_eq!(r.census_total, 2);

    let f = QuasiForm::new(30, vec![f0, f1]).unwrap();
    let c = domain_census(&f, &CensusOptions::default()).unwrap();
    assert!(c.zeros.iter().all(|z| !matches!(z.location_class, LocationClass::EllipticI | LocationClass::EllipticRho)));
}
