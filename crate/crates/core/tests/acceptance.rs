//! Acceptance criteria 1-14, one PASS/FAIL line each with the data behind it.
//!
//! Run with `cargo test --offline -p quasizeros-core --test acceptance`.
//! Set `QUASIZEROS_SLOW=1` to add the k = 1116 full sign pattern and
//! `QUASIZEROS_STRICT=1` to exit nonzero when any criterion fails.
//! Criterion numbers given as arguments restrict the run.

use std::time::Instant;

use quasizeros::arith::{self, cusp_basis, line_zeros};
use quasizeros::contour::{self, KernelContext, STATED_BOUNDS};
use quasizeros::eval::{terms_for_height, HPoint, Segment};
use quasizeros::forms::{derivative_quasiform, eisenstein, gap_form, weight_split, QuasiForm};
use quasizeros::mp;
use quasizeros::zeros::{
    depth_one_basis, domain_census, fk_prime_count, n_infty, perturbation_experiment, Census, CensusOptions,
    LocationClass,
};
use quasizeros::{Error, QSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::{Complex, Rational};

type Outcome = (bool, String);

fn terms(weight: i64) -> usize {
    terms_for_height(weight + 2, 0.75, 160.0).max(60)
}

fn d_of(f: &QuasiForm) -> QuasiForm {
    derivative_quasiform(f).expect("derivative")
}

fn gap(k: i64, m: i64, n: usize) -> QuasiForm {
    gap_form(k, m, n).expect("gap form").as_quasiform()
}

fn eis(k: i64, n: usize) -> QuasiForm {
    QuasiForm::modular(k, eisenstein(k as u32, n).expect("eisenstein"))
}

fn class_table(c: &Census) -> String {
    c.by_class()
        .iter()
        .map(|(cls, (n, mult, w))| format!("{}:{}x{}={}", cls.name(), n, mult, w))
        .collect::<Vec<_>>()
        .join(" ")
}

fn c1() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    let mut bad = Vec::new();
    for k in (4..=60).step_by(2) {
        let (ell, _) = weight_split(k).unwrap();
        for m in -ell..=3 {
            let g = gap_form(k, m, (ell + m + 10) as usize).unwrap();
            let s = &g.series;
            let ok = s.is_exact()
                && s.is_integral()
                && s.lowest_order() == -m
                && s.integer(-m).unwrap() == 1
                && (-m + 1..=ell).all(|n| s.integer(n).unwrap() == 0);
            if !ok {
                bad.push(format!("({k},{m})"));
            }
            checked += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (bad.is_empty() && secs < 10.0, format!("{checked} forms, failures [{}], {secs:.2}s", bad.join(" ")))
}

fn c2() -> Outcome {
    let start = Instant::now();
    let mut forms: Vec<(String, QuasiForm)> = Vec::new();
    for k in (4..=60).step_by(2) {
        forms.push((format!("E{k}"), eis(k, terms(k))));
        forms.push((format!("f_{{{k},0}}"), gap(k, 0, terms(k))));
    }
    for p in 1..=5 {
        let n = terms(12 * p);
        let d = quasizeros::forms::delta(n).pow(p).unwrap().truncate(n);
        forms.push((format!("Delta^{p}"), QuasiForm::modular(12 * p, d)));
    }
    let mut bad = Vec::new();
    for (name, f) in &forms {
        match domain_census(f, &CensusOptions::default()) {
            Ok(c) => {
                let want = Rational::from((f.weight(), 12));
                if c.total_with_cusp() != want {
                    bad.push(format!("{name}: {} != {want}", c.total_with_cusp()));
                }
            }
            Err(e) => bad.push(format!("{name}: {e}")),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (bad.is_empty() && secs < 300.0, format!("{} forms, failures [{}], {secs:.1}s", forms.len(), bad.join("; ")))
}

fn valence_row(f: &QuasiForm) -> Result<bool, Error> {
    let c = f.components();
    n_infty(&c[0], &c[1], f.weight(), &CensusOptions::default()).map(|r| r.agrees)
}

fn c3() -> Outcome {
    let mut bad = Vec::new();
    let mut skipped = Vec::new();
    let mut ok = 0;
    for k in (4..=48).step_by(2) {
        let n = terms(k + 2);
        for (name, f0) in [(format!("DE{k}"), eis(k, n)), (format!("Df_{{{k},0}}"), gap(k, 0, n))] {
            match valence_row(&d_of(&f0)) {
                Ok(true) => ok += 1,
                Ok(false) => bad.push(name),
                Err(Error::CommonZero(_)) => skipped.push(name),
                Err(e) => bad.push(format!("{name}: {e}")),
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut random_ok, mut attempts) = (0, 0);
    while random_ok < 20 && attempts < 200 {
        attempts += 1;
        let k = 2 * rng.gen_range(2..=14);
        let n = terms(k + 2);
        let basis = depth_one_basis(k, n).unwrap();
        // real coefficients in [-10, 10] on a grid of 1/100, kept exact
        let coeffs: Vec<i64> = basis.iter().map(|_| rng.gen_range(-1000..=1000)).collect();
        let mut f: Option<QuasiForm> = None;
        for (c, g) in coeffs.iter().zip(&basis) {
            let t = g.scale(&Rational::from((*c, 100)));
            f = Some(match f {
                Some(acc) => acc.add(&t).unwrap(),
                None => t,
            });
        }
        let f = f.unwrap();
        if f.depth() != 1 || f.components()[1].is_zero() {
            continue;
        }
        match valence_row(&f) {
            Ok(true) => random_ok += 1,
            Ok(false) => bad.push(format!("random weight {} {coeffs:?}", k + 2)),
            Err(Error::CommonZero(_)) => skipped.push(format!("random weight {}", k + 2)),
            Err(e) => bad.push(format!("random weight {}: {e}", k + 2)),
        }
    }
    (
        bad.is_empty() && random_ok >= 20,
        format!(
            "{ok} agree for DE_k/Df_{{k,0}}, {random_ok} random agree, skipped common zero [{}], failures [{}]",
            skipped.join(" "),
            bad.join("; ")
        ),
    )
}

fn c4() -> Outcome {
    let mut pass = true;
    let mut rows = Vec::new();
    for k in [8, 12, 16, 20, 26] {
        let f = d_of(&eis(k, terms(k + 2)));
        let c = domain_census(&f, &CensusOptions::default()).unwrap();
        let want = (k - 4) / 6 + if k % 6 == 2 { 1 } else { 0 };
        // rho is the lower end of delta2
        let all_d2 =
            c.zeros.iter().all(|z| matches!(z.location_class, LocationClass::Delta2 | LocationClass::EllipticRho));
        let count: u32 = c.zeros.iter().map(|z| z.multiplicity).sum();
        let c2 = domain_census(&f, &CensusOptions { prec: Some(2 * c.prec), ..Default::default() }).unwrap();
        let drift = c
            .zeros
            .iter()
            .map(|z| c2.zeros.iter().map(|w| z.position.dist(&w.position)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max);
        let ok = count as i64 == want && all_d2 && c2.zeros.len() == c.zeros.len() && drift <= 1e-8;
        pass &= ok;
        rows.push(format!("k={k}: {count}/{want} zeros, all delta2 {all_d2}, drift {drift:.1e}"));
    }
    (pass, rows.join("; "))
}

fn c5() -> Outcome {
    let f96 = d_of(&gap(96, 0, terms(98)));
    let c = domain_census(&f96, &CensusOptions::default()).unwrap();
    let d2 = c.count(LocationClass::Delta2);
    let interior: Vec<&HPoint> =
        c.zeros.iter().filter(|z| z.location_class == LocationClass::Interior).map(|z| &z.position).collect();
    let pair_ok = interior.len() == 2
        && interior.iter().any(|p| (p.x - 0.44).abs() <= 0.01)
        && interior.iter().any(|p| (p.x - 0.56).abs() <= 0.01);
    let ok96 = d2 == 4 && pair_ok;
    let f86 = d_of(&gap(86, 0, terms(88)));
    let c86 = domain_census(&f86, &CensusOptions::default()).unwrap();
    let in_band = c86
        .zeros
        .iter()
        .filter(|z| {
            z.location_class == LocationClass::Delta2 && z.position.y > 1.2518 - 1e-3 && z.position.y < 1.8660 + 1e-3
        })
        .map(|z| z.multiplicity)
        .sum::<u32>();
    let int86 = c86.count(LocationClass::Interior);
    let ok86 = in_band == 4 && int86 == 2;
    (
        ok96 && ok86,
        format!(
            "k=96: {d2} delta2, interior {:?} [{}] total {}; k=86: {in_band} delta2 in band, {int86} interior [{}] total {}",
            interior.iter().map(|p| (p.x, p.y)).collect::<Vec<_>>(),
            class_table(&c),
            c.total_with_cusp(),
            class_table(&c86),
            c86.total_with_cusp()
        ),
    )
}

fn rel(a: &Complex, b: &Complex) -> f64 {
    let d = Complex::with_val(a.prec().0, a - b);
    (mp::log2_abs_c(&d) - mp::log2_abs_c(b)).exp2()
}

fn c6() -> Outcome {
    let (tol, n, prec) = (1e-9, 160, 192);
    let mut worst_direct: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    let mut pass = true;
    for k in [12, 24] {
        for m in [0, 1, 2] {
            let ctx = KernelContext::new(k, m, n, prec).unwrap();
            for theta in [0.42, 0.48] {
                let z = contour::z_of_theta(theta);
                let i = contour::horizontal_integral(&ctx, z, 3.0, 64, 1e-14).unwrap();
                let df = contour::df_direct(k, m, z, n, prec).unwrap();
                worst_direct = worst_direct.max(rel(&i.value, &df));
                let a = contour::aprime_identity(&ctx, theta, 0.9, n).unwrap();
                worst_res = worst_res.max(a.rel_residue);
            }
        }
    }
    pass &= worst_direct <= tol && worst_res <= tol;
    // k' = 14 with the displayed g_{k'}
    let mut worst_g14: f64 = 0.0;
    for m in [0, 1] {
        let ctx = KernelContext::new(26, m, n, prec).unwrap();
        for theta in [0.42, 0.48] {
            let a = contour::aprime_identity(&ctx, theta, 0.9, n).unwrap();
            worst_g14 = worst_g14.max(a.rel_displayed);
        }
    }
    pass &= worst_g14 <= tol;
    (
        pass,
        format!(
            "A=3 worst {worst_direct:.2e}; A'=0.9 with m e^{{-2 pi i m z}} worst {worst_res:.2e}; k=26 displayed g14 worst {worst_g14:.3}"
        ),
    )
}

fn c7() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in [12, 24] {
        for m in [0, 1] {
            let ctx = KernelContext::new(k, m, 160, 192).unwrap();
            for c in contour::shift_grid(&ctx, 0.9).unwrap() {
                worst = worst.max(c.report.relative);
            }
        }
    }
    (worst <= 1e-8, format!("worst relative residual {worst:.2e} over 4 x 25 cells"))
}

fn c8() -> Outcome {
    let start = Instant::now();
    let b = contour::prop53_bounds(200, 1600).unwrap();
    let m = b.as_array();
    let below = m.iter().zip(STATED_BOUNDS).all(|(a, s)| *a < s);
    let (lhs, rhs) = b.assembled(1116, 93);
    let (slhs, srhs) = contour::assembled_bound(STATED_BOUNDS, 1116, 93);
    let secs = start.elapsed().as_secs_f64();
    (
        below && b.stable && lhs < rhs && slhs < srhs && secs < 600.0,
        format!(
            "maxima {:?} at grid {} (stable {}); assembled {lhs:.1} < {rhs:.1}, with stated constants {slhs:.1} < {srhs:.1}; {secs:.1}s",
            m, b.grid, b.stable
        ),
    )
}

fn c9() -> Outcome {
    let mut rows = Vec::new();
    let mut pass = true;
    let mut ks = vec![120, 240, 360];
    if std::env::var("QUASIZEROS_SLOW").is_ok_and(|v| v == "1") {
        ks.push(1116);
    }
    for k in ks {
        match contour::sign_pattern(k, None, None, None) {
            Ok(r) => {
                let matched = r.matches.iter().filter(|&&b| b).count();
                // a full match is only guaranteed from k = 1116 on
                if k >= 1116 {
                    pass &= r.all_match();
                }
                rows.push(format!("k={k}: {matched}/{} match over j in {:?}", r.js.len(), r.j_range));
            }
            Err(e) => {
                pass = false;
                rows.push(format!("k={k}: {e}"));
            }
        }
    }
    (pass, rows.join("; "))
}

fn c10() -> Outcome {
    let k = 1200;
    let n = fk_prime_count(k).unwrap().to_f64();
    let full = contour::sign_pattern(k, Some(1), None, None).unwrap();
    let p = full.matched_sign_changes() as f64 / n;
    let guaranteed = contour::sign_pattern(k, None, None, None).unwrap();
    (
        p >= 0.274,
        format!(
            "{} matched sign changes over j in {:?} / {n} = {p:.4}; in the guaranteed range {:?}: {} ({:.4})",
            full.matched_sign_changes(),
            full.j_range,
            guaranteed.j_range,
            guaranteed.matched_sign_changes(),
            guaranteed.matched_sign_changes() as f64 / n
        ),
    )
}

fn c11() -> Outcome {
    let tau = arith::tau_values(41);
    let pn = (1..=40).all(|n| arith::darcais(n).eval(&Rational::from(-24)) == tau[n]);
    let rf = arith::darcais_rootfree_check(30, &[Rational::from(1), Rational::from(2), Rational::from(24)]);
    let lemma: Vec<i64> = (12..=240).step_by(12).filter(|&k| !arith::tau_sign_lemma(k).unwrap().alternates).collect();
    let (rp, worst) = arith::ramanujan_petersson(10_000);
    (
        pn && rf.passed && lemma.is_empty() && rp,
        format!(
            "P_n(-24) = tau(n+1) for n <= 40: {pn}; root-free n <= 30: {}; tau sign lemma failures {lemma:?}; Ramanujan-Petersson n <= 1e4: {rp} (worst ratio {worst:.4})",
            rf.passed
        ),
    )
}

fn c12() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let weights: Vec<i64> = (12..=40).step_by(2).filter(|&k| k != 14).collect();
    let mut bad = Vec::new();
    for _ in 0..50 {
        let k = weights[rng.gen_range(0..weights.len())];
        let n = terms_for_height(k + 2, 0.5, 200.0).max(80);
        let basis = cusp_basis(k, n).unwrap();
        let mut g = QSeries::zero(1, n);
        let mut cs = Vec::new();
        for b in &basis {
            let c: i64 = rng.gen_range(-100..=100);
            cs.push(c);
            g = g.add(&b.scale(&Rational::from((c, 10))));
        }
        if g.is_zero() {
            continue;
        }
        let d1 = line_zeros(&g, k, Segment::Delta1, true, 0.01, 10.0, 800).map(|r| r.len());
        let d2 = line_zeros(&g, k, Segment::Delta2, true, 0.01, 10.0, 800).map(|r| r.len());
        match (d1, d2) {
            (Ok(a), Ok(b)) if a >= 1 && b >= 1 => {}
            (a, b) => bad.push(format!("k={k} {cs:?}: delta1 {a:?} delta2 {b:?}")),
        }
    }
    (bad.is_empty(), format!("50 forms, failures [{}]", bad.join("; ")))
}

fn c13() -> Outcome {
    let r = arith::prop65_verify(24, &Rational::from(9953280), &Rational::from(-2880), 0.05, 10.0, 400, 400).unwrap();
    (
        r.no_zero && r.df_positive && r.slope_negative && r.passed,
        format!(
            "delta2 zeros {}, min |f| {:.3e}, Df > 0 {}, slope negative {}, eps {:?}",
            r.f_roots.len(),
            r.min_abs_f,
            r.df_positive,
            r.slope_negative,
            (r.epsilon.eps_prime, r.epsilon.eps)
        ),
    )
}

fn perturb_round(dirs: &[Vec<f64>], eps: f64, n: usize, stop_early: bool) -> (usize, usize, usize) {
    let (mut all, mut others, mut runs) = (0, 0, 0);
    for d in dirs {
        let a: Vec<f64> = d.iter().map(|c| c * eps).collect();
        let r = perturbation_experiment(16, &a, n, &CensusOptions::default()).unwrap();
        runs += 1;
        all += r.all_delta2 as usize;
        others += r.others_delta2 as usize;
        if stop_early && !r.others_delta2 {
            break;
        }
    }
    (all, others, runs)
}

fn c14() -> Outcome {
    let n = terms(18);
    let size = depth_one_basis(16, n).unwrap().len();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let dirs: Vec<Vec<f64>> = (0..20).map(|_| (0..size).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect();
    let (all, others, _) = perturb_round(&dirs, 1e-6, n, false);
    // geometric search on the zeros other than the one leaving the cusp
    let mut eps = 1e-6;
    let mut largest = None;
    if others == dirs.len() {
        largest = Some(eps);
        for _ in 0..20 {
            eps *= 2.0;
            let (_, o, runs) = perturb_round(&dirs, eps, n, true);
            if o < runs || runs < dirs.len() {
                break;
            }
            largest = Some(eps);
        }
    }
    (
        all == dirs.len(),
        format!(
            "eps=1e-6: {all}/20 draws with every zero on delta2, {others}/20 with every zero but the one born at the cusp on delta2; largest eps keeping the latter {largest:?} (first failure {eps:e})"
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 14] = [
        ("gap forms", c1),
        ("classical valence", c2),
        ("depth-one valence", c3),
        ("zeros of DE_k", c4),
        ("zeros of f96' and f86'", c5),
        ("horizontal integral", c6),
        ("height shift", c7),
        ("band constants", c8),
        ("sign pattern", c9),
        ("sign change proportion", c10),
        ("combinatorics", c11),
        ("cusp form derivatives", c12),
        ("k=24 example", c13),
        ("perturbation", c14),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = match std::panic::catch_unwind(f) {
            Ok(r) => r,
            Err(_) => (false, "panicked".to_string()),
        };
        failed += !ok as usize;
        println!(
            "{} criterion {id:2} ({name}): {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("{failed} criteria failed");
    // known failures are reported, not fatal, unless asked
    if failed > 0 && std::env::var("QUASIZEROS_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
