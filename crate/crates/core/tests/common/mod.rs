#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use phenofront::coeffs::{CoefficientField, ModelConfig, ThetaBasis, XBasis};
use phenofront::discretize::CellOperator;
use rand::Rng;

pub type Field = CoefficientField<f64>;

pub fn one() -> Field {
    CoefficientField::constant(1.0)
}

/// `a = mu = 1`, `r = 1 + 0.5 cos(2 pi x) + 0.4 cos(pi theta) + 0.3 cos(2 pi x) cos(pi theta)`.
pub fn c5() -> ModelConfig<f64> {
    let r = one()
        .with(0.5, XBasis::Cos(1), ThetaBasis::One)
        .with(0.4, XBasis::One, ThetaBasis::NCos(1))
        .with(0.3, XBasis::Cos(1), ThetaBasis::NCos(1));
    ModelConfig::new(one(), one(), r, 1.0, 1.0).unwrap()
}

/// `r = 1 + 0.5 cos(2 pi x) cos(pi theta)`: no phenotype slice dominates.
pub fn crossing_selection() -> ModelConfig<f64> {
    let r = one().with(0.5, XBasis::Cos(1), ThetaBasis::NCos(1));
    ModelConfig::new(one(), one(), r, 1.0, 1.0).unwrap()
}

/// Smooth random coefficients with `a, mu >= 0.4` and positive mean growth.
pub fn random_config(rng: &mut impl Rng, nx: usize, ntheta: usize) -> ModelConfig<f64> {
    let a = CoefficientField::constant(1.0)
        .with(rng.gen_range(-0.3..0.3), XBasis::Cos(1), ThetaBasis::One)
        .with(rng.gen_range(-0.2..0.2), XBasis::Sin(1), ThetaBasis::NCos(1))
        .with(rng.gen_range(-0.1..0.1), XBasis::Cos(2), ThetaBasis::One);
    let mu = CoefficientField::constant(rng.gen_range(0.8..1.5))
        .with(rng.gen_range(-0.3..0.3), XBasis::Cos(1), ThetaBasis::NCos(1));
    let r = CoefficientField::constant(rng.gen_range(0.6..1.5))
        .with(rng.gen_range(-0.6..0.6), XBasis::Cos(1), ThetaBasis::One)
        .with(rng.gen_range(-0.6..0.6), XBasis::One, ThetaBasis::NCos(1))
        .with(rng.gen_range(-0.4..0.4), XBasis::Sin(1), ThetaBasis::NCos(2))
        .with(rng.gen_range(-0.3..0.3), XBasis::Cos(2), ThetaBasis::NCos(1));
    ModelConfig::new(a, mu, r, rng.gen_range(0.2..2.0), rng.gen_range(0.5..3.0))
        .unwrap()
        .with_grid(nx, ntheta)
}

/// Random coefficients with `mu` depending on `theta` only.
pub fn random_homogenizable(rng: &mut impl Rng) -> ModelConfig<f64> {
    let a = CoefficientField::constant(1.0)
        .with(rng.gen_range(-0.5..0.5), XBasis::Cos(1), ThetaBasis::One)
        .with(rng.gen_range(-0.3..0.3), XBasis::Sin(1), ThetaBasis::NCos(1));
    let mu = CoefficientField::constant(1.0).with(rng.gen_range(-0.3..0.3), XBasis::One, ThetaBasis::NCos(1));
    let r = CoefficientField::constant(rng.gen_range(0.8..1.5))
        .with(rng.gen_range(-0.5..0.5), XBasis::Cos(1), ThetaBasis::One)
        .with(rng.gen_range(-0.6..0.6), XBasis::One, ThetaBasis::NCos(1))
        .with(rng.gen_range(-0.3..0.3), XBasis::One, ThetaBasis::NCos(2));
    ModelConfig::new(a, mu, r, rng.gen_range(0.3..2.0), 1.0).unwrap()
}

/// Largest real part over the full dense spectrum.
pub fn dense_max_real(op: &CellOperator<f64>) -> f64 {
    let n = op.dim();
    let d = op.matrix.to_dense();
    DMatrix::from_fn(n, n, |i, j| d[i][j])
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest eigenvalue of a weighted-self-adjoint operator through `W^{1/2} A W^{-1/2}`.
pub fn dense_sym_max(op: &CellOperator<f64>) -> f64 {
    let n = op.dim();
    let w = op.weights();
    let m = DMatrix::from_fn(n, n, |i, j| w[i].sqrt() * op.matrix.get(i, j) / w[j].sqrt());
    SymmetricEigen::new((&m + m.transpose()) * 0.5).eigenvalues.max()
}

/// Cell nodes keeping the physical mesh `L / nx` at or below 0.4.
pub fn resolved_nx(l: f64) -> usize {
    (64.0 * (l / 25.6).ceil()).max(64.0) as usize
}
