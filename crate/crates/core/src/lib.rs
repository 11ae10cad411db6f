//! Spreading speeds of a Fisher-KPP population structured in space and phenotype.
//!
//! The population density `u(t, x, theta)` on `R x [0,1]` solves
//!
//! ```text
//! u_t = d_x(a_L u_x) + m d_theta(mu_L u_theta) + r_L u - rho u,   rho = int u dtheta
//! ```
//!
//! with `L`-periodic coefficients and Neumann conditions in `theta`. The spreading
//! speed is `c = inf_{lambda > 0} k(lambda) / lambda` where `k(lambda)` is the principal
//! eigenvalue of the exponentially tilted periodic operator ([`speed::fg_speed`]).
//! [`asymptotics`] evaluates the closed-form limits in the period and the mutation
//! coefficient, and [`simulate`] integrates the nonlinear equation directly.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the `*64` aliases below
//! name the double-precision instances used by the command-line tool.

pub mod asymptotics;
pub mod coeffs;
pub mod discretize;
pub mod eigen;
pub mod error;
pub mod linalg;
pub mod optimize;
pub mod scalar;
pub mod simulate;
pub mod speed;

pub use error::{Error, Result};
pub use scalar::Real;

pub type CoefficientField64 = coeffs::CoefficientField<f64>;
pub type ModelConfig64 = coeffs::ModelConfig<f64>;
pub type CellOperator64 = discretize::CellOperator<f64>;
pub type EigenPair64 = eigen::EigenPair<f64>;
pub type SpeedResult64 = speed::SpeedResult<f64>;
pub type SweepRecord64 = speed::SweepRecord<f64>;
pub type FrontTrace64 = simulate::FrontTrace<f64>;

pub type ModelConfig32 = coeffs::ModelConfig<f32>;
pub type SpeedResult32 = speed::SpeedResult<f32>;
