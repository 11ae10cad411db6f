//! Limits of the spreading speed in the period `L` and the mutation coefficient `m`.
//!
//! Large periods are governed by the local eigenvalue `H_m(x)` of the frozen
//! phenotype problem `m (mu psi')' + r(x, .) psi = H_m(x) psi` through
//! `j(k) = int sqrt((k - H) / a)`; small periods by the homogenized phenotype problem
//! with harmonic-mean diffusion and arithmetic-mean growth.

use rayon::prelude::*;

use crate::coeffs::{ModelConfig, Profile, HARMONIC_QUAD_POINTS};
use crate::discretize::assemble_theta;
use crate::eigen::{principal_eigenpair, solve, EigenOptions};
use crate::error::{Error, Result};
use crate::optimize::{golden_section, parabola_vertex};
use crate::scalar::{c, max_of, Real};
use crate::speed::{minimize_ratio, speed_1d, Tilted};

/// Midpoint nodes of the `j` quadrature.
pub const J_QUAD_POINTS: usize = 4096;
/// Grid of the dominance check `r(x, sigma) > r(x, theta)`.
pub const HETERO_GRID: (usize, usize) = (128, 64);
pub const HETERO_MARGIN: f64 = 1e-12;
pub const VARIATIONAL_ITERATIONS: usize = 200;

fn require(cond: bool, reason: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::AssumptionViolated(reason.into()))
    }
}

fn midpoints<T: Real>(n: usize) -> Vec<T> {
    (0..n)
        .map(|i| (T::from_usize_lossy(i) + c(0.5)) / T::from_usize_lossy(n))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalEigCurve<T> {
    pub x: Vec<T>,
    pub h: Vec<T>,
    /// `M = max_x H_m(x)` over the samples.
    pub max: T,
    pub m: T,
}

/// `H_m` at the midpoints of `x_samples` equal cells.
pub fn local_eig_curve<T: Real>(cfg: &ModelConfig<T>, x_samples: usize) -> Result<LocalEigCurve<T>> {
    require(!cfg.mu.depends_on_x(), "mu depends on x")?;
    let x = midpoints::<T>(x_samples);
    let zero = |_: T| T::zero();
    let h = x
        .par_iter()
        .map(|&xi| {
            let op = assemble_theta(
                &cfg.mu.theta_slice(xi),
                &cfg.r.theta_slice(xi),
                cfg.m,
                &zero,
                cfg.grid.ntheta,
            )?;
            Ok(principal_eigenpair(&op, cfg.tol.eigen, cfg.tol.max_iter)?.k)
        })
        .collect::<Result<Vec<T>>>()?;
    let max = max_of(h.iter().copied());
    Ok(LocalEigCurve { x, h, max, m: cfg.m })
}

/// `j(k) = int_0^1 sqrt((k - H(x)) / a(x)) dx` by the midpoint rule on the samples of `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct JProfile<T> {
    h: Vec<T>,
    a: Vec<T>,
    max: T,
}

impl<T: Real> JProfile<T> {
    /// `h` and `a` sampled at the same equally spaced midpoints.
    pub fn new(h: Vec<T>, a: Vec<T>) -> Self {
        assert_eq!(h.len(), a.len());
        assert!(!h.is_empty());
        let max = max_of(h.iter().copied());
        Self { h, a, max }
    }

    /// Lower end `M` of the domain of `j`.
    pub fn domain_min(&self) -> T {
        self.max
    }

    pub fn j(&self, k: T) -> T {
        assert!(k >= self.max, "j is defined for k >= M");
        let s: T = self
            .h
            .iter()
            .zip(&self.a)
            .map(|(&h, &a)| ((k - h).max(T::zero()) / a).sqrt())
            .sum();
        s / T::from_usize_lossy(self.h.len())
    }

    /// `(k*, inf_{k >= M} k / j(k))`; requires `M > 0`.
    pub fn min_ratio(&self) -> Result<(T, T)> {
        let m = self.max;
        if m <= T::zero() {
            return Err(Error::NotPersistent { k0: m.as_f64() });
        }
        let ratio = |s: T| {
            let j = self.j(m + s);
            if j > T::zero() {
                (m + s) / j
            } else {
                T::infinity()
            }
        };
        // k/j(k) -> infinity as k -> infinity; grow until the ratio turns upward
        let mut hi = m;
        let mut prev = ratio(hi);
        for _ in 0..200 {
            let next = ratio(hi * c(2.0));
            hi = hi * c(2.0);
            if next > prev {
                break;
            }
            prev = next;
        }
        let width = c::<T>(1e-10) * m.max(T::one());
        let best = golden_section(ratio, T::zero(), hi, width, 400);
        Ok((m + best.x, best.value))
    }
}

fn theta_independent_a<T: Real>(cfg: &ModelConfig<T>) -> Result<Vec<T>> {
    require(!cfg.a.depends_on_theta(), "a depends on theta")?;
    Ok(midpoints::<T>(J_QUAD_POINTS)
        .into_iter()
        .map(|x| cfg.a.eval(x, T::zero()))
        .collect())
}

/// `lim_{L -> inf} c = inf_{k >= M} k / j(k)` with `j` built from `H_m`.
pub fn speed_l_inf<T: Real>(cfg: &ModelConfig<T>) -> Result<T> {
    let a = theta_independent_a(cfg)?;
    let curve = local_eig_curve(cfg, J_QUAD_POINTS)?;
    Ok(JProfile::new(curve.h, a).min_ratio()?.1)
}

/// Harmonic mean of the local speeds `2 sqrt(a H_m)`.
pub fn harmonic_speed<T: Real>(cfg: &ModelConfig<T>) -> Result<T> {
    let a = theta_independent_a(cfg)?;
    let curve = local_eig_curve(cfg, J_QUAD_POINTS)?;
    harmonic_speed_of(&curve, &a)
}

fn harmonic_speed_of<T: Real>(curve: &LocalEigCurve<T>, a: &[T]) -> Result<T> {
    if let Some(i) = curve.h.iter().position(|&h| h <= T::zero()) {
        return Err(Error::UndefinedSpeed(format!(
            "H_m({}) = {} is not positive",
            curve.x[i],
            curve.h[i]
        )));
    }
    let s: T = curve
        .h
        .iter()
        .zip(a)
        .map(|(&h, &a)| T::one() / (c::<T>(2.0) * (a * h).sqrt()))
        .sum();
    Ok(T::from_usize_lossy(curve.h.len()) / s)
}

/// `2 sqrt(mean_x H_m)`, which lies between `c_H` and the large-period limit when `a = 1`.
pub fn jensen_bound<T: Real>(cfg: &ModelConfig<T>) -> Result<T> {
    require(
        !cfg.a.depends_on_x() && !cfg.a.depends_on_theta(),
        "a is not constant",
    )?;
    let curve = local_eig_curve(cfg, J_QUAD_POINTS)?;
    let mean = curve.h.iter().copied().sum::<T>() / T::from_usize_lossy(curve.h.len());
    if mean <= T::zero() {
        return Err(Error::UndefinedSpeed(format!("mean of H_m is {mean}")));
    }
    Ok(c::<T>(2.0) * mean.sqrt())
}

/// Bounds `(c_H, 2 sqrt(mean H), lim_{L->inf} c)` from one local-eigenvalue curve.
pub fn tail_bounds<T: Real>(cfg: &ModelConfig<T>) -> Result<(T, T, T)> {
    let a = theta_independent_a(cfg)?;
    require(!cfg.a.depends_on_x(), "a is not constant")?;
    let curve = local_eig_curve(cfg, J_QUAD_POINTS)?;
    let c_h = harmonic_speed_of(&curve, &a)?;
    let mean = curve.h.iter().copied().sum::<T>() / T::from_usize_lossy(curve.h.len());
    let jensen = c::<T>(2.0) * mean.max(T::zero()).sqrt();
    let c_inf = JProfile::new(curve.h, a).min_ratio()?.1;
    Ok((c_h, jensen, c_inf))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogenizedSpeed<T> {
    /// `inf_lambda k~(lambda) / lambda`; `None` when `k~(0) <= 0`.
    pub c: Option<T>,
    /// `sup_psi 2 sqrt(A_psi R_psi)` by projected gradient ascent.
    pub via_variational: Option<T>,
    pub k0: T,
    pub persistent: bool,
}

/// `lim_{L -> 0} c` from the homogenized phenotype problem, by the eigenvalue and
/// the variational route.
pub fn homogenized_speed_l0<T: Real>(cfg: &ModelConfig<T>) -> Result<HomogenizedSpeed<T>> {
    let a_h = cfg.a.mean_x_harm(HARMONIC_QUAD_POINTS)?;
    let mu_a = cfg.mu.mean_x_arith();
    let r_a = cfg.r.mean_x_arith();
    let mu_s = mu_a.theta_slice(T::zero());
    let r_s = r_a.theta_slice(T::zero());
    let nt = cfg.grid.ntheta;
    let a_nodes: Vec<T> = (0..nt)
        .map(|j| a_h.at(T::from_usize_lossy(j) / T::from_usize_lossy(nt - 1)))
        .collect();
    let node = |t: T| -> usize {
        (t * T::from_usize_lossy(nt - 1)).round().to_usize().unwrap_or(0).min(nt - 1)
    };

    let mut ev = Tilted {
        assemble: |lam: T| {
            let extra = |t: T| lam * lam * a_nodes[node(t)];
            assemble_theta(&mu_s, &r_s, cfg.m, &extra, nt)
        },
        tol: &cfg.tol,
        last: None,
        evals: 0,
    };
    let k0 = ev.k(T::zero())?;
    if k0 <= T::zero() {
        return Ok(HomogenizedSpeed {
            c: None,
            via_variational: None,
            k0,
            persistent: false,
        });
    }
    let a_max = max_of(a_nodes.iter().copied());
    let r_max = max_of((0..nt).map(|j| r_s.at(T::from_usize_lossy(j) / T::from_usize_lossy(nt - 1))));
    let c_upper = c::<T>(2.0) * (a_max * r_max.max(k0)).sqrt();
    let res = minimize_ratio(&mut ev, k0, a_max, c_upper)?;
    let lam = res.lambda_star.expect("persistent");

    let zero = |_: T| T::zero();
    let base = assemble_theta(&mu_s, &r_s, cfg.m, &zero, nt)?;
    let tilted = (ev.assemble)(lam)?;
    let start = solve(&tilted, EigenOptions::new(cfg.tol.eigen, cfg.tol.max_iter), None)?.phi;
    let var = variational_ascent(&base, &a_nodes, start, VARIATIONAL_ITERATIONS);
    Ok(HomogenizedSpeed {
        c: res.c,
        via_variational: Some(var),
        k0,
        persistent: true,
    })
}

/// Maximizes `2 sqrt(A R)` over `||psi||_W = 1`, where `R = <psi, T psi>_W` and
/// `A = <psi, a psi>_W`; returns the best value seen (never below the start).
fn variational_ascent<T: Real>(
    op: &crate::discretize::CellOperator<T>,
    a: &[T],
    start: Vec<T>,
    iterations: usize,
) -> T {
    let w = op.weights();
    let h = op.grid.htheta::<T>();
    let inner = |u: &[T], v: &[T]| -> T { h * u.iter().zip(v).zip(&w).map(|((&x, &y), &wi)| wi * x * y).sum::<T>() };
    let normalize = |mut v: Vec<T>| {
        let n = inner(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= n);
        v
    };
    let objective = |psi: &[T]| -> (T, T, Vec<T>) {
        let tpsi = op.apply(psi);
        let r = inner(psi, &tpsi);
        let apsi: Vec<T> = psi.iter().zip(a).map(|(&p, &ai)| p * ai).collect();
        let aa = inner(psi, &apsi);
        (aa, r, tpsi)
    };
    let value = |aa: T, r: T| {
        if r > T::zero() && aa > T::zero() {
            c::<T>(2.0) * (aa * r).sqrt()
        } else {
            T::neg_infinity()
        }
    };
    let mut psi = normalize(start);
    let (mut aa, mut r, mut tpsi) = objective(&psi);
    let mut best = value(aa, r);
    let mut step = c::<T>(0.5) * r.abs().max(c(1e-3)) / op.matrix.norm_inf();
    for it in 0..iterations {
        if !(r > T::zero()) {
            break;
        }
        // W-gradient of ln A + ln R, projected onto the tangent space of the sphere
        let mut g: Vec<T> = psi
            .iter()
            .zip(a)
            .zip(&tpsi)
            .map(|((&p, &ai), &tp)| c::<T>(2.0) * (ai * p / aa + tp / r))
            .collect();
        let along = inner(&g, &psi);
        g.iter_mut().zip(&psi).for_each(|(gi, &p)| *gi -= along * p);
        let decay = T::one() / (T::one() + T::from_usize_lossy(it) / c(50.0));
        let trial = normalize(psi.iter().zip(&g).map(|(&p, &gi)| p + step * decay * gi).collect());
        let (ta, tr, tt) = objective(&trial);
        let tv = value(ta, tr);
        if tv >= best {
            best = tv;
            psi = trial;
            aa = ta;
            r = tr;
            tpsi = tt;
        } else {
            step = step * c(0.5);
        }
    }
    best
}

/// `lim_{m -> inf} c = c^1(a, r_bar)` with `r_bar` the phenotype mean of `r`.
pub fn speed_m_inf<T: Real>(cfg: &ModelConfig<T>) -> Result<T> {
    require(!cfg.a.depends_on_theta(), "a depends on theta")?;
    require(!cfg.mu.depends_on_theta(), "mu depends on theta")?;
    let r_bar = cfg.r.mean_theta_arith();
    let s = speed_1d(
        &cfg.a.x_slice(T::zero()),
        &r_bar.x_slice(T::zero()),
        cfg.l,
        cfg.grid.nx,
        &cfg.tol,
    )?;
    s.c.ok_or(Error::NotPersistent { k0: s.k0.as_f64() })
}

/// Max over `theta_samples` equally spaced slices of `values(theta)`, with parabolic
/// refinement of an interior argmax. `None` entries are skipped.
fn scan_theta<T: Real>(
    samples: usize,
    f: impl Fn(T) -> Result<Option<T>> + Sync,
) -> Result<Option<(T, T)>> {
    assert!(samples >= 3);
    let ths: Vec<T> = (0..samples)
        .map(|j| T::from_usize_lossy(j) / T::from_usize_lossy(samples - 1))
        .collect();
    let vals = ths.par_iter().map(|&t| f(t)).collect::<Result<Vec<Option<T>>>>()?;
    let mut best: Option<(usize, T)> = None;
    for (j, v) in vals.iter().enumerate() {
        if let Some(v) = *v {
            if best.map_or(true, |(_, b)| v > b) {
                best = Some((j, v));
            }
        }
    }
    let Some((j, v)) = best else { return Ok(None) };
    if j > 0 && j + 1 < samples {
        if let (Some(vl), Some(vr)) = (vals[j - 1], vals[j + 1]) {
            if let Some(t) = parabola_vertex([(ths[j - 1], vl), (ths[j], v), (ths[j + 1], vr)]) {
                let t = t.max(ths[j - 1]).min(ths[j + 1]);
                if let Some(vt) = f(t)? {
                    if vt > v {
                        return Ok(Some((vt, t)));
                    }
                }
            }
        }
    }
    Ok(Some((v, ths[j])))
}

/// `lim_{m -> 0} c = max_theta c^1(a, r(., theta))` over persistent slices; returns `(c, theta)`.
pub fn speed_m_0<T: Real>(cfg: &ModelConfig<T>, theta_samples: usize) -> Result<(T, T)> {
    require(!cfg.a.depends_on_theta(), "a depends on theta")?;
    require(!cfg.mu.depends_on_x(), "mu depends on x")?;
    let a = cfg.a.x_slice(T::zero());
    let found = scan_theta(theta_samples, |t| {
        Ok(speed_1d(&a, &cfg.r.x_slice(t), cfg.l, cfg.grid.nx, &cfg.tol)?.c)
    })?;
    found.ok_or(Error::NotPersistent {
        k0: cfg.r_max().as_f64(),
    })
}

/// Slices `theta` for which `r(., theta) >= r(., sigma)` everywhere (up to the margin).
pub fn dominating_slices<T: Real>(cfg: &ModelConfig<T>) -> Vec<T> {
    let (nx, nt) = HETERO_GRID;
    let margin = c::<T>(HETERO_MARGIN);
    let xs: Vec<T> = (0..nx).map(|i| T::from_usize_lossy(i) / T::from_usize_lossy(nx)).collect();
    let ths: Vec<T> = (0..nt).map(|j| T::from_usize_lossy(j) / T::from_usize_lossy(nt - 1)).collect();
    let col_max: Vec<T> = xs
        .iter()
        .map(|&x| max_of(ths.iter().map(|&s| cfg.r.eval(x, s))))
        .collect();
    ths.iter()
        .copied()
        .filter(|&t| xs.iter().zip(&col_max).all(|(&x, &mx)| !(mx > cfg.r.eval(x, t) + margin)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MutationGap<T> {
    /// `inf_k k / j_0(k)` with `j_0` built from `max_theta r`.
    pub small_m_then_large_l: T,
    /// `max_theta inf_k k / j_theta(k)`.
    pub large_l_then_small_m: T,
    pub theta_argmax: T,
    pub gamma: T,
}

/// Gap between the two iterated limits `m -> 0`, `L -> inf`; positive under the
/// non-dominance assumption, which is checked first.
pub fn mutation_gap<T: Real>(cfg: &ModelConfig<T>) -> Result<MutationGap<T>> {
    let a = theta_independent_a(cfg)?;
    require(!cfg.mu.depends_on_x(), "mu depends on x")?;
    if let Some(&t) = dominating_slices(cfg).first() {
        return Err(Error::AssumptionViolated(format!(
            "the slice theta = {t} dominates r at every x"
        )));
    }
    let xs = midpoints::<T>(J_QUAD_POINTS);
    let h0: Vec<T> = xs.par_iter().map(|&x| cfg.r.max_over_theta(x, 65).0).collect();
    let first = JProfile::new(h0, a.clone()).min_ratio()?.1;
    let (second, theta) = scan_theta(65, |t| {
        let h: Vec<T> = xs.iter().map(|&x| cfg.r.eval(x, t)).collect();
        match JProfile::new(h, a.clone()).min_ratio() {
            Ok((_, v)) => Ok(Some(v)),
            Err(Error::NotPersistent { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    })?
    .ok_or(Error::NotPersistent {
        k0: cfg.r_max().as_f64(),
    })?;
    let gamma = first - second;
    if !(gamma > T::zero()) {
        return Err(Error::AssumptionViolated(format!(
            "mutation gap {gamma} is not positive"
        )));
    }
    Ok(MutationGap {
        small_m_then_large_l: first,
        large_l_then_small_m: second,
        theta_argmax: theta,
        gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{CoefficientField, ThetaBasis, XBasis};
    use nalgebra::{DMatrix, SymmetricEigen};

    fn cfg(a: CoefficientField<f64>, r: CoefficientField<f64>) -> ModelConfig<f64> {
        ModelConfig::new(a, CoefficientField::constant(1.0), r, 1.0, 1.0)
            .unwrap()
            .with_grid(32, 32)
    }

    fn one() -> CoefficientField<f64> {
        CoefficientField::constant(1.0)
    }

    #[test]
    fn j_profile_constant() {
        let p = JProfile::new(vec![1.5; 64], vec![2.0; 64]);
        let (k, v) = p.min_ratio().unwrap();
        assert!((v - 2.0 * 3.0f64.sqrt()).abs() < 1e-9);
        assert!((k - 3.0).abs() < 1e-4);
        assert!(p.j(2.0) < p.j(2.5));
    }

    #[test]
    fn theta_independent_local_curve() {
        let r = one().with(0.5, XBasis::Cos(1), ThetaBasis::One);
        let c = local_eig_curve(&cfg(one(), r.clone()).with_m(7.0), 16).unwrap();
        for (x, h) in c.x.iter().zip(&c.h) {
            assert!((h - r.eval(*x, 0.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn local_curve_matches_dense_oracle() {
        let r = one().with(0.5, XBasis::One, ThetaBasis::NCos(1));
        let cfg = cfg(one(), r);
        let c = local_eig_curve(&cfg, 4).unwrap();
        let zero = |_: f64| 0.0;
        let op = assemble_theta(&cfg.mu.theta_slice(0.3), &cfg.r.theta_slice(0.3), 1.0, &zero, 32).unwrap();
        let w = op.weights();
        let n = op.dim();
        let m = DMatrix::from_fn(n, n, |i, j| w[i].sqrt() * op.matrix.get(i, j) / w[j].sqrt());
        let sym = (&m + m.transpose()) * 0.5;
        let oracle = SymmetricEigen::new(sym).eigenvalues.max();
        assert!(c.h.iter().all(|h| (h - oracle).abs() < 1e-10));
        let big = local_eig_curve(&cfg.with_m(1e3), 4).unwrap();
        // constant psi in the Rayleigh quotient gives H_m >= mean r: the limit is approached from above
        assert!(big.h.iter().all(|&h| h >= 1.0 - 1e-12 && h - 1.0 < 1e-2));
    }

    #[test]
    fn constant_limits() {
        let c = cfg(one(), CoefficientField::constant(1.0));
        assert!((speed_l_inf(&c).unwrap() - 2.0).abs() < 1e-8);
        assert!((harmonic_speed(&c).unwrap() - 2.0).abs() < 1e-12);
        let h = homogenized_speed_l0(&c).unwrap();
        assert!((h.c.unwrap() - 2.0).abs() < 1e-9);
        assert!((h.via_variational.unwrap() - 2.0).abs() < 1e-9);
        assert!((speed_m_inf(&c).unwrap() - 2.0).abs() < 1e-9);
        assert!((speed_m_0(&c, 9).unwrap().0 - 2.0).abs() < 1e-9);
    }

    #[test]
    fn homogenized_harmonic_diffusion() {
        let a = one().with(0.5, XBasis::Cos(1), ThetaBasis::One);
        let h = homogenized_speed_l0(&cfg(a, one())).unwrap();
        let expected = 2.0 * 0.75f64.sqrt().sqrt();
        assert!((h.c.unwrap() - expected).abs() < 1e-8, "{:?}", h);
        assert!((h.via_variational.unwrap() - h.c.unwrap()).abs() < 1e-4 * expected);
    }

    #[test]
    fn mutation_limits_phenotype_mean() {
        let r = one().with(0.5, XBasis::One, ThetaBasis::NCos(1));
        assert!((speed_m_inf(&cfg(one(), r.clone())).unwrap() - 2.0).abs() < 1e-9);
        let mu_x = one().with(0.2, XBasis::Cos(1), ThetaBasis::One);
        let c = ModelConfig::new(one(), mu_x, r, 1.0, 1.0).unwrap();
        assert_eq!(
            speed_m_0(&c, 9),
            Err(Error::AssumptionViolated("mu depends on x".into()))
        );
    }

    #[test]
    fn slice_ordering_selects_theta_zero() {
        let r = one()
            .with(0.5, XBasis::Cos(1), ThetaBasis::One)
            .with(1.0, XBasis::One, ThetaBasis::NCos(1));
        let (_, t) = speed_m_0(&cfg(one(), r), 17).unwrap();
        assert!(t.abs() < 1e-12);
    }

    #[test]
    fn tail_ordering() {
        let r = one().with(0.5, XBasis::Cos(1), ThetaBasis::One);
        let (c_h, jensen, c_inf) = tail_bounds(&cfg(one(), r)).unwrap();
        assert!((jensen - 2.0).abs() < 1e-9);
        assert!(c_h < jensen && jensen < c_inf);
    }

    #[test]
    fn gap_requires_non_dominance() {
        let r = one().with(0.5, XBasis::Cos(1), ThetaBasis::One);
        assert!(matches!(
            mutation_gap(&cfg(one(), r)),
            Err(Error::AssumptionViolated(_))
        ));
        let r = one().with(0.5, XBasis::Cos(1), ThetaBasis::NCos(1));
        let g = mutation_gap(&cfg(one(), r)).unwrap();
        assert!(g.gamma > 0.0);
    }
}
