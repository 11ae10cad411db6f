mod common;

use common::*;
use phenofront::coeffs::{ModelConfig, ThetaBasis, XBasis};
use phenofront::discretize::assemble_theta;
use phenofront::eigen::principal_eigenpair;
use phenofront::speed::{fg_speed, k_lambda_curve, sweep_l, sweep_m};

fn speeds(rec: &phenofront::speed::SweepRecord<f64>) -> Vec<f64> {
    rec.points.iter().map(|(_, s)| s.c.expect("persistent")).collect()
}

#[test]
fn x_independent_growth_slows_with_mutation() {
    let r = one().with(0.5, XBasis::One, ThetaBasis::NCos(1));
    let cfg = ModelConfig::new(one(), one(), r, 1.0, 1.0).unwrap();
    let ms = [0.01, 0.1, 1.0, 10.0, 100.0];
    let rec = sweep_m(&cfg, &ms, false).unwrap();
    let c = speeds(&rec);
    assert!(c.windows(2).all(|w| w[1] <= w[0] + 1e-8), "{c:?}");
    let best = rec.argmax.unwrap();
    assert_eq!(best.value, 0.01);
    assert!(!best.refined);

    // c = 2 sqrt(H_m) with H_m the phenotype eigenvalue
    for (&m, &cm) in ms.iter().zip(&c) {
        let zero = |_: f64| 0.0;
        let h = principal_eigenpair(
            &assemble_theta(&one().theta_slice(0.0), &cfg.r.theta_slice(0.0), m, &zero, cfg.grid.ntheta).unwrap(),
            1e-13,
            500,
        )
        .unwrap()
        .k;
        assert!((cm - 2.0 * h.sqrt()).abs() <= 1e-5, "m = {m}: {cm} vs {}", 2.0 * h.sqrt());
    }
}

#[test]
fn theta_independent_growth_ignores_mutation() {
    let r = one().with(0.5, XBasis::Cos(1), ThetaBasis::One);
    let cfg = ModelConfig::new(one(), one(), r, 1.0, 2.0).unwrap();
    let c = speeds(&sweep_m(&cfg, &[0.01, 1.0, 100.0], false).unwrap());
    assert!(c.iter().all(|&x| (x - c[0]).abs() <= 1e-8), "{c:?}");
    assert!(c[0] >= 2.0);
}

#[test]
fn constant_coefficients_ignore_period() {
    let cfg = ModelConfig::new(one(), one(), one(), 0.7, 1.0).unwrap();
    for c in speeds(&sweep_l(&cfg, &[0.1, 1.0, 10.0]).unwrap()) {
        assert!((c - 2.0).abs() <= 1e-6, "{c}");
    }
}

#[test]
fn speed_nondecreasing_in_period() {
    let cfg = c5();
    let rec = sweep_l(&cfg, &[0.25, 0.5, 1.0, 2.0, 4.0]).unwrap();
    let c = speeds(&rec);
    let slack = 2.0 * cfg.tol.lambda;
    assert!(c.windows(2).all(|w| w[0] <= w[1] + slack), "{c:?}");
    assert!(c[4] > c[0] + 1e-3, "heterogeneity should help at larger periods: {c:?}");
}

#[test]
fn ratio_identity_and_infimum() {
    let cfg = c5();
    let s = fg_speed(&cfg).unwrap();
    let (c, lam, k) = (s.c.unwrap(), s.lambda_star.unwrap(), s.k_at_lambda_star.unwrap());
    assert!((c * lam - k).abs() <= cfg.tol.lambda * k.abs());
    let lams: Vec<f64> = (1..=30).map(|i| 0.1 * i as f64).collect();
    for (l, k) in k_lambda_curve(&cfg, &lams).unwrap() {
        assert!(c <= k / l + 1e-9, "c = {c} > k({l}) / {l} = {}", k / l);
    }
}

#[test]
fn crossing_selection_has_an_interior_optimal_mutation() {
    // r = 1 + 0.8 cos(2 pi x) cos(pi theta): the favoured phenotype alternates in x, so
    // moderate mutation beats both very slow and very fast mutation at large periods.
    let r = one().with(0.8, XBasis::Cos(1), ThetaBasis::NCos(1));
    let cfg = ModelConfig::new(one(), one(), r, 1.0, 30.0).unwrap().with_grid(resolved_nx(30.0), 32);
    let rec = sweep_m(&cfg, &[1e-3, 0.1, 1e3], false).unwrap();
    let c = speeds(&rec);
    assert!(c[1] > c[0].max(c[2]) + 1e-3, "{c:?}");
    assert_eq!(rec.argmax.unwrap().value, 0.1);
}
