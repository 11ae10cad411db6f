//! Spreading speeds `c = inf_{lambda > 0} k(lambda) / lambda` and parameter sweeps.

use rayon::prelude::*;

use crate::coeffs::{ModelConfig, Profile, Tolerances};
use crate::discretize::{assemble_cell, assemble_x, CellOperator};
use crate::eigen::{solve, EigenOptions, EigenPair};
use crate::error::Result;
use crate::optimize::try_golden_section;
use crate::scalar::{c, max_of, Real};

const MAX_BRACKET_STEPS: usize = 60;
const GOLDEN_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedResult<T> {
    /// `None` when the population is not persistent.
    pub c: Option<T>,
    pub lambda_star: Option<T>,
    pub k_at_lambda_star: Option<T>,
    /// Principal eigenvalue at `lambda = 0`.
    pub k0: T,
    pub persistent: bool,
    /// Final golden-section interval `(lambda_lo, lambda_hi)`.
    pub bracket: Option<(T, T)>,
    /// Number of eigenvalue evaluations.
    pub evals: usize,
}

impl<T: Real> SpeedResult<T> {
    fn extinct(k0: T) -> Self {
        Self {
            c: None,
            lambda_star: None,
            k_at_lambda_star: None,
            k0,
            persistent: false,
            bracket: None,
            evals: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Argmax<T> {
    pub value: T,
    pub c: T,
    /// True when `value` came from local refinement between grid neighbours.
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord<T> {
    pub parameter: String,
    pub points: Vec<(T, SpeedResult<T>)>,
    pub argmax: Option<Argmax<T>>,
}

/// Eigenvalue evaluator with warm starts from the previous eigenvector.
pub(crate) struct Tilted<'a, T, F> {
    pub assemble: F,
    pub tol: &'a Tolerances<T>,
    pub last: Option<Vec<T>>,
    pub evals: usize,
}

impl<T: Real, F: FnMut(T) -> Result<CellOperator<T>>> Tilted<'_, T, F> {
    pub fn eigen(&mut self, lambda: T) -> Result<EigenPair<T>> {
        let op = (self.assemble)(lambda)?;
        let ep = solve(
            &op,
            EigenOptions::new(self.tol.eigen, self.tol.max_iter),
            self.last.as_deref(),
        )?;
        self.evals += 1;
        self.last = Some(ep.phi.clone());
        Ok(ep)
    }

    pub fn k(&mut self, lambda: T) -> Result<T> {
        Ok(self.eigen(lambda)?.k)
    }
}

/// Minimizes `k(lambda)/lambda` given `k0 > 0`, `a_max` and the upper speed bound `c_upper`.
pub(crate) fn minimize_ratio<T: Real, F>(
    ev: &mut Tilted<'_, T, F>,
    k0: T,
    a_max: T,
    c_upper: T,
) -> Result<SpeedResult<T>>
where
    F: FnMut(T) -> Result<CellOperator<T>>,
{
    let lam_lo = c::<T>(1e-3).min(k0 / (c::<T>(10.0) * c_upper));
    let two = c::<T>(2.0);
    let four = c::<T>(4.0);
    let g = |ev: &mut Tilted<'_, T, F>, l: T| -> Result<T> { Ok(ev.k(l)? / l) };

    // bracket [hi/4, hi] with g(hi) > g(hi/2) <= g(hi/4)
    let mut hi = (k0 / a_max).sqrt().max(two * lam_lo);
    let mut g_hi = g(ev, hi)?;
    let mut g_half = g(ev, hi / two)?;
    let mut steps = 0;
    let (lo, hi) = if g_hi > g_half {
        loop {
            let q = hi / four;
            if q <= lam_lo || steps >= MAX_BRACKET_STEPS {
                break (lam_lo, hi);
            }
            let g_q = g(ev, q)?;
            if g_q >= g_half {
                break (q, hi);
            }
            hi = hi / two;
            g_half = g_q;
            steps += 1;
        }
    } else {
        loop {
            let next = hi * two;
            let g_next = g(ev, next)?;
            hi = next;
            if g_next > g_hi || steps >= MAX_BRACKET_STEPS {
                break ((hi / four).max(lam_lo), hi);
            }
            g_hi = g_next;
            steps += 1;
        }
    };

    let tol_lambda = ev.tol.lambda;
    let best = try_golden_section(|l| g(ev, l), lo, hi, tol_lambda, GOLDEN_MAX_ITER)?;
    Ok(SpeedResult {
        c: Some(best.value),
        lambda_star: Some(best.x),
        k_at_lambda_star: Some(best.value * best.x),
        k0,
        persistent: true,
        bracket: Some((best.lo, best.hi)),
        evals: ev.evals,
    })
}

/// Freidlin-Gartner speed of the full model.
pub fn fg_speed<T: Real>(cfg: &ModelConfig<T>) -> Result<SpeedResult<T>> {
    let mut ev = Tilted {
        assemble: |l| assemble_cell(cfg, l),
        tol: &cfg.tol,
        last: None,
        evals: 0,
    };
    let k0 = ev.k(T::zero())?;
    if k0 <= T::zero() {
        return Ok(SpeedResult::extinct(k0));
    }
    let a_max = cfg.a_max();
    let r_max = cfg.r_max().max(k0);
    let c_upper = c::<T>(2.0) * (a_max * r_max).sqrt() + cfg.a_dx_max() / cfg.l;
    minimize_ratio(&mut ev, k0, a_max, c_upper)
}

/// One-dimensional speed `c^1(A, R)` of the period-`l` problem, on `nx` cell nodes.
pub fn speed_1d<T: Real>(
    a: &impl Profile<T>,
    r: &impl Profile<T>,
    l: T,
    nx: usize,
    tol: &Tolerances<T>,
) -> Result<SpeedResult<T>> {
    let mut ev = Tilted {
        assemble: |lam| assemble_x(a, r, lam, l, nx),
        tol,
        last: None,
        evals: 0,
    };
    let k0 = ev.k(T::zero())?;
    if k0 <= T::zero() {
        return Ok(SpeedResult::extinct(k0));
    }
    let n = 4 * nx;
    let h = T::one() / T::from_usize_lossy(n);
    let xs = (0..n).map(|i| T::from_usize_lossy(i) * h);
    let a_max = max_of(xs.clone().map(|x| a.at(x)));
    let r_max = max_of(xs.clone().map(|x| r.at(x))).max(k0);
    let da = max_of(xs.map(|x| ((a.at(x + h) - a.at(x - h)) / (c::<T>(2.0) * h)).abs()));
    let c_upper = c::<T>(2.0) * (a_max * r_max).sqrt() + da / l;
    minimize_ratio(&mut ev, k0, a_max, c_upper)
}

/// `(lambda, k(lambda))` at each requested `lambda`.
pub fn k_lambda_curve<T: Real>(cfg: &ModelConfig<T>, lambdas: &[T]) -> Result<Vec<(T, T)>> {
    lambdas
        .par_iter()
        .map(|&l| {
            let op = assemble_cell(cfg, l)?;
            let ep = solve(&op, EigenOptions::new(cfg.tol.eigen, cfg.tol.max_iter), None)?;
            Ok((l, ep.k))
        })
        .collect()
}

fn check_increasing<T: Real>(values: &[T]) {
    assert!(
        values.windows(2).all(|w| w[0] < w[1]),
        "parameter values must be strictly increasing"
    );
}

fn grid_argmax<T: Real>(points: &[(T, SpeedResult<T>)]) -> Option<(usize, T)> {
    points
        .iter()
        .enumerate()
        .filter_map(|(i, (_, s))| s.c.map(|c| (i, c)))
        .fold(None, |best, (i, c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((i, c)),
        })
}

/// Speed at each mutation coefficient; the grid argmax is refined by a golden search
/// in `ln m` between its neighbours when it is interior.
pub fn sweep_m<T: Real>(cfg: &ModelConfig<T>, m_values: &[T], refine: bool) -> Result<SweepRecord<T>> {
    check_increasing(m_values);
    assert!(m_values[0] > T::zero(), "m must be positive");
    let points: Vec<(T, SpeedResult<T>)> = m_values
        .par_iter()
        .map(|&m| Ok((m, fg_speed(&cfg.with_m(m))?)))
        .collect::<Result<_>>()?;
    let mut argmax = grid_argmax(&points).map(|(i, c)| (i, Argmax { value: points[i].0, c, refined: false }));
    if let (true, Some((i, best))) = (refine, argmax) {
        if i > 0 && i + 1 < points.len() {
            let lo = points[i - 1].0.ln();
            let hi = points[i + 1].0.ln();
            let neg_c = |s: T| -> Result<T> {
                let r = fg_speed(&cfg.with_m(s.exp()))?;
                Ok(-r.c.unwrap_or(T::neg_infinity()))
            };
            let found = try_golden_section(neg_c, lo, hi, c(1e-3), GOLDEN_MAX_ITER)?;
            if -found.value > best.c {
                argmax = Some((
                    i,
                    Argmax {
                        value: found.x.exp(),
                        c: -found.value,
                        refined: true,
                    },
                ));
            }
        }
    }
    Ok(SweepRecord {
        parameter: "m".into(),
        points,
        argmax: argmax.map(|(_, a)| a),
    })
}

/// Speed at each period.
pub fn sweep_l<T: Real>(cfg: &ModelConfig<T>, l_values: &[T]) -> Result<SweepRecord<T>> {
    check_increasing(l_values);
    assert!(l_values[0] > T::zero(), "L must be positive");
    let points: Vec<(T, SpeedResult<T>)> = l_values
        .par_iter()
        .map(|&l| Ok((l, fg_speed(&cfg.with_l(l))?)))
        .collect::<Result<_>>()?;
    let argmax = grid_argmax(&points).map(|(i, c)| Argmax {
        value: points[i].0,
        c,
        refined: false,
    });
    Ok(SweepRecord {
        parameter: "L".into(),
        points,
        argmax,
    })
}
