mod common;

use common::*;
use phenofront::asymptotics::{
    harmonic_speed, homogenized_speed_l0, local_eig_curve, mutation_gap, speed_l_inf, speed_m_0, speed_m_inf,
    JProfile,
};
use phenofront::coeffs::{ModelConfig, ThetaBasis, XBasis};
use phenofront::speed::fg_speed;
use phenofront::Error;

fn speed(cfg: &ModelConfig<f64>) -> f64 {
    fg_speed(cfg).unwrap().c.unwrap()
}

#[test]
fn small_period_chain_approaches_homogenized_speed() {
    let cfg = c5();
    let c0 = homogenized_speed_l0(&cfg).unwrap().c.unwrap();
    let gaps: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&l| (speed(&cfg.with_l(l)) - c0).abs()).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[2] <= 0.02 * c0, "{gaps:?}");
}

#[test]
fn local_eigenvalue_tends_to_max_growth_as_mutation_vanishes() {
    let r = one()
        .with(0.5, XBasis::Cos(1), ThetaBasis::One)
        .with(0.1, XBasis::One, ThetaBasis::NCos(1));
    let cfg = ModelConfig::new(one(), one(), r, 1e-4, 1.0).unwrap().with_grid(64, 64);
    let curve = local_eig_curve(&cfg, 64).unwrap();
    let coarse = local_eig_curve(&cfg.with_m(1e-2), 64).unwrap();
    let mut worst: f64 = 0.0;
    let mut worst_coarse: f64 = 0.0;
    for ((&x, &h), &hc) in curve.x.iter().zip(&curve.h).zip(&coarse.h) {
        let (top, _) = cfg.r.max_over_theta(x, 1025);
        assert!(h <= top + 1e-10, "H_m exceeds max_theta r at x = {x}");
        worst = worst.max(top - h);
        worst_coarse = worst_coarse.max(top - hc);
    }
    assert!(worst <= 1e-2, "{worst}");
    assert!(worst < 0.5 * worst_coarse, "{worst} vs {worst_coarse}");
}

#[test]
fn limits_nonincreasing_in_mutation() {
    let cfg = c5();
    let ms = [0.25, 1.0, 4.0];
    let inf: Vec<f64> = ms.iter().map(|&m| speed_l_inf(&cfg.with_m(m)).unwrap()).collect();
    let zero: Vec<f64> = ms
        .iter()
        .map(|&m| homogenized_speed_l0(&cfg.with_m(m)).unwrap().c.unwrap())
        .collect();
    for v in [&inf, &zero] {
        assert!(v.windows(2).all(|w| w[1] < w[0] - 1e-8), "strictly decreasing expected: {v:?}");
    }
}

#[test]
fn j_profile_is_monotone() {
    let cfg = c5();
    let curve = local_eig_curve(&cfg, 4096).unwrap();
    let jp = JProfile::new(curve.h.clone(), vec![1.0; curve.h.len()]);
    let m = jp.domain_min();
    let ks: Vec<f64> = (0..50).map(|i| m + 0.05 * i as f64).collect();
    let js: Vec<f64> = ks.iter().map(|&k| jp.j(k)).collect();
    assert!(js.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn tail_problem_ordering_with_theta_free_surrogate() {
    // H = r = 1 + 0.5 cos(2 pi x): c_H < 2 sqrt(mean H) = 2 <= c(L -> inf)
    let r = one().with(0.5, XBasis::Cos(1), ThetaBasis::One);
    let cfg = ModelConfig::new(one(), one(), r, 1.0, 1.0).unwrap();
    let c_h = harmonic_speed(&cfg).unwrap();
    let c_inf = speed_l_inf(&cfg).unwrap();
    assert!(c_h < 2.0 - 1e-3, "{c_h}");
    assert!(c_inf >= 2.0, "{c_inf}");
    // the large-period chain from below
    let c30 = speed(&cfg.with_l(30.0).with_grid(resolved_nx(30.0), 8));
    assert!(c30 <= c_inf + 1e-6 && c30 > 0.98 * c_inf, "{c30} vs {c_inf}");
}

#[test]
fn mutation_limits_reduce_to_one_dimensional_problems() {
    // theta-independent growth: both limits agree with the full speed
    let r = one().with(0.5, XBasis::Cos(1), ThetaBasis::One);
    let cfg = ModelConfig::new(one(), one(), r, 1.0, 1.0).unwrap();
    let c = speed(&cfg);
    assert!((speed_m_inf(&cfg).unwrap() - c).abs() <= 1e-6);
    assert!((speed_m_0(&cfg, 9).unwrap().0 - c).abs() <= 1e-6);

    // growth improving uniformly towards theta = 0
    let r = one()
        .with(0.5, XBasis::Cos(1), ThetaBasis::One)
        .with(0.3, XBasis::One, ThetaBasis::NCos(1));
    let cfg = ModelConfig::new(one(), one(), r, 1.0, 1.0).unwrap();
    let (c0, theta) = speed_m_0(&cfg, 33).unwrap();
    assert_eq!(theta, 0.0);
    assert!(speed_m_inf(&cfg).unwrap() <= c0 + 1e-8);
    let big = speed(&cfg.with_m(1e3));
    assert!((big - speed_m_inf(&cfg).unwrap()).abs() <= 1e-2);
}

#[test]
fn mutation_gap_needs_crossing_selection() {
    let r = one().with(0.5, XBasis::Cos(1), ThetaBasis::One);
    let flat = ModelConfig::new(one(), one(), r, 1.0, 1.0).unwrap();
    assert!(matches!(mutation_gap(&flat), Err(Error::AssumptionViolated(_))));
    assert!(matches!(mutation_gap(&c5()), Err(Error::AssumptionViolated(_))));
    let g = mutation_gap(&crossing_selection()).unwrap();
    assert!(g.gamma > 0.0, "{g:?}");
    assert!(g.small_m_then_large_l > g.large_l_then_small_m);
}
