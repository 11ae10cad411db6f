//! The same pipeline in single precision.

use phenofront::asymptotics::homogenized_speed_l0;
use phenofront::coeffs::{CoefficientField, ThetaBasis, XBasis};
use phenofront::speed::fg_speed;
use phenofront::{ModelConfig32, ModelConfig64};

fn c5_32() -> ModelConfig32 {
    let one = CoefficientField::<f32>::constant(1.0);
    let r = one
        .clone()
        .with(0.5, XBasis::Cos(1), ThetaBasis::One)
        .with(0.4, XBasis::One, ThetaBasis::NCos(1))
        .with(0.3, XBasis::Cos(1), ThetaBasis::NCos(1));
    let mut cfg = ModelConfig32::new(one.clone(), one, r, 1.0, 1.0).unwrap().with_grid(32, 16);
    cfg.tol.eigen = 1e-5;
    cfg.tol.lambda = 1e-4;
    cfg
}

#[test]
fn kpp_speed_in_f32() {
    let one = CoefficientField::<f32>::constant(1.0);
    let mut cfg = ModelConfig32::new(one.clone(), one.clone(), one, 1.0, 1.0).unwrap().with_grid(32, 16);
    cfg.tol.eigen = 1e-5;
    cfg.tol.lambda = 1e-4;
    let s = fg_speed(&cfg).unwrap();
    assert!((s.c.unwrap() - 2.0).abs() <= 1e-3, "{:?}", s.c);
    assert!((s.lambda_star.unwrap() - 1.0).abs() <= 2e-2);
}

#[test]
fn f32_and_f64_agree_on_mixed_config() {
    let cfg32 = c5_32();
    let cfg64 = ModelConfig64::parse(&cfg32.to_text()).unwrap();
    let c32 = fg_speed(&cfg32).unwrap().c.unwrap() as f64;
    let c64 = fg_speed(&cfg64).unwrap().c.unwrap();
    assert!((c32 - c64).abs() <= 1e-3, "{c32} vs {c64}");
    let h32 = homogenized_speed_l0(&cfg32).unwrap().c.unwrap() as f64;
    let h64 = homogenized_speed_l0(&cfg64).unwrap().c.unwrap();
    assert!((h32 - h64).abs() <= 1e-3, "{h32} vs {h64}");
}
