mod common;

use common::*;
use phenofront::coeffs::ModelConfig;
use phenofront::simulate::{read_u_binary, run_front, write_u_binary, InitialData, SimSpec, Simulator};

fn kpp() -> ModelConfig<f64> {
    ModelConfig::new(one(), one(), one(), 1.0, 1.0).unwrap().with_grid(64, 8)
}

fn small_spec(cfg: &ModelConfig<f64>, nx: usize, dt: f64) -> SimSpec<f64> {
    let mut spec = SimSpec::for_config(cfg, 2.0, 10.0);
    spec.x_max = 40.0;
    spec.nx = nx;
    spec.ntheta = 8;
    spec.dt = dt;
    spec
}

#[test]
fn front_speed_converges_under_refinement() {
    let cfg = kpp();
    let coarse = run_front(&cfg, small_spec(&cfg, 401, 0.04)).unwrap().c_hat;
    let mid = run_front(&cfg, small_spec(&cfg, 801, 0.02)).unwrap().c_hat;
    let fine = run_front(&cfg, small_spec(&cfg, 1601, 0.01)).unwrap().c_hat;
    let (d1, d2) = ((mid - coarse).abs(), (fine - mid).abs());
    assert!(d2 < d1, "{coarse} {mid} {fine}");
    assert!(d2 < 5e-3, "{d2}");
    // the front at finite times lags the asymptotic speed 2 by O(1/t)
    assert!(fine < 2.0 && fine > 1.8, "{fine}");
}

#[test]
fn uniform_state_follows_logistic_growth() {
    let cfg = kpp();
    let mut spec = small_spec(&cfg, 65, 0.01);
    spec.x_max = spec.x_min + 10.0;
    spec.t_final = 3.0;
    spec.initial = InitialData::Uniform(0.1);
    let sim = Simulator::new(&cfg, spec).unwrap();
    let (state, _) = sim.run().unwrap();
    let exact = 1.0 / (1.0 + 9.0 * (-3.0f64).exp());
    for rho in state.rho() {
        assert!((rho - exact).abs() <= 1e-3, "{rho} vs {exact}");
    }
}

#[test]
fn solution_stays_nonnegative_and_bounded() {
    let cfg = c5().with_grid(64, 16);
    let mut spec = SimSpec::for_config(&cfg, 2.0, 6.0);
    spec.x_max = spec.x_min + 30.0;
    spec.nx = 601;
    spec.ntheta = 16;
    let sim = Simulator::new(&cfg, spec).unwrap();
    let (state, records) = sim.run().unwrap();
    assert!(state.u.iter().all(|&u| u >= 0.0));
    assert!(state.clipped_relative <= 1e-10);
    let r_max = cfg.r_max();
    for (_, rho) in &records {
        assert!(rho.iter().all(|&p| p <= r_max + 1e-6), "density above the carrying bound");
    }

    let path = std::env::temp_dir().join(format!("phenofront-sim-{}.bin", std::process::id()));
    write_u_binary(&state, &path).unwrap();
    let (nx, nt, t, x0, x1, u) = read_u_binary(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert_eq!((nx, nt), (601, 16));
    assert_eq!((t, x0, x1), (state.t, state.x[0], state.x[600]));
    assert_eq!(u, state.u);
}
