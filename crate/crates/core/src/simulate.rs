//! Direct integration of `u_t = d_x(a_L u_x) + m d_theta(mu_L u_theta) + u (r_L - rho)`
//! on a truncated physical domain `[x_min, x_max] x [0, 1]`, with front tracking.
//!
//! Diffusion is Crank-Nicolson with a banded LU factored once; the reaction is
//! explicit (second-order Adams-Bashforth after a forward-Euler first step).
//! Neumann conditions at both `x` ends and in `theta`.
//!
//! Binary snapshots ([`write_u_binary`]) are little-endian: `u64 nx`, `u64 ntheta`,
//! `f64 t`, `f64 x_min`, `f64 x_max`, then `nx * ntheta` values of `u` as `f64`,
//! row-major with `theta` fastest.

use std::io::{self, Write};
use std::path::Path;

use crate::coeffs::ModelConfig;
use crate::discretize::theta_stencil;
use crate::error::{Error, Result};
use crate::linalg::BandLu;
use crate::scalar::{c, max_of, Real};

/// Blow-up guard: `max u <= BLOWUP_FACTOR (1 + max r)`.
pub const BLOWUP_FACTOR: f64 = 10.0;
/// Relative tolerance on the mass removed by clipping negative values.
pub const CLIP_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialData<T> {
    Zero,
    /// `u0 = value` everywhere.
    Uniform(T),
    /// Smooth bump `height * cos^2(pi (x - x_min) / (2 width))` on `[x_min, x_min + width]`,
    /// uniform in `theta`.
    Bump { width: T, height: T },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec<T> {
    pub x_min: T,
    pub x_max: T,
    pub nx: usize,
    pub ntheta: usize,
    pub dt: T,
    pub t_final: T,
    pub record_every: T,
    pub initial: InitialData<T>,
    /// Front level as a fraction of `max_x rho(t_final / 2)`.
    pub delta_fraction: T,
}

impl<T: Real> SimSpec<T> {
    /// Domain of length `1.5 c T` plus the initial bump, at least 32 points per period
    /// and 2048 in total. The step is 0.8 of the reaction bound with `max rho` estimated
    /// by `max r`, capped at 0.04.
    pub fn for_config(cfg: &ModelConfig<T>, c_predicted: T, t_final: T) -> Self {
        let width = c::<T>(5.0);
        let r_max = cfg.r_max().max(T::zero());
        let dt = (c::<T>(0.2) / (c::<T>(2.0) * r_max + T::one())).min(c(0.04));
        let length = c::<T>(1.5) * c_predicted * t_final + c::<T>(2.0) * width;
        let nx = (length / cfg.l * c::<T>(32.0)).ceil().to_usize().unwrap_or(0).max(2048);
        Self {
            x_min: T::zero(),
            x_max: length,
            nx,
            ntheta: cfg.grid.ntheta,
            dt,
            t_final,
            record_every: c(0.25),
            initial: InitialData::Bump {
                width,
                height: c(0.5),
            },
            delta_fraction: c(0.01),
        }
    }

    pub fn hx(&self) -> T {
        (self.x_max - self.x_min) / T::from_usize_lossy(self.nx - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState<T> {
    pub x: Vec<T>,
    pub ntheta: usize,
    /// `u[i * ntheta + j]`.
    pub u: Vec<T>,
    pub t: T,
    pub dt: T,
    /// Total mass removed by clipping, relative to the mass at that step.
    pub clipped_relative: T,
    prev_reaction: Option<Vec<T>>,
}

impl<T: Real> SimState<T> {
    /// `rho(x_i) = int u dtheta` by the trapezoid rule.
    pub fn rho(&self) -> Vec<T> {
        let nt = self.ntheta;
        let h = T::one() / T::from_usize_lossy(nt - 1);
        self.u
            .chunks(nt)
            .map(|row| {
                let inner: T = row.iter().copied().sum();
                h * (inner - c::<T>(0.5) * (row[0] + row[nt - 1]))
            })
            .collect()
    }

    /// Total mass `int rho dx` (trapezoid).
    pub fn mass(&self) -> T {
        trapezoid(&self.rho(), self.x[1] - self.x[0])
    }

    pub fn front_position(&self, delta: T) -> Result<T> {
        front_position(&self.x, &self.rho(), delta)
    }
}

fn trapezoid<T: Real>(f: &[T], h: T) -> T {
    let s: T = f.iter().copied().sum();
    h * (s - c::<T>(0.5) * (f[0] + f[f.len() - 1]))
}

/// Rightmost `x` with `rho >= delta`, linearly interpolated towards the next node.
pub fn front_position<T: Real>(x: &[T], rho: &[T], delta: T) -> Result<T> {
    let i = rho.iter().rposition(|&r| r >= delta).ok_or(Error::NoFront)?;
    if i + 1 == rho.len() {
        return Ok(x[i]);
    }
    let s = (rho[i] - delta) / (rho[i] - rho[i + 1]);
    Ok(x[i] + s * (x[i + 1] - x[i]))
}

/// Time stepper holding the factored Crank-Nicolson matrices.
pub struct Simulator<'a, T> {
    cfg: &'a ModelConfig<T>,
    spec: SimSpec<T>,
    x: Vec<T>,
    /// Rows of the explicit half `I + dt/2 D`.
    explicit: Vec<Vec<(usize, T)>>,
    implicit: BandLu<T>,
    r: Vec<T>,
    r_max: T,
}

impl<'a, T: Real> Simulator<'a, T> {
    pub fn new(cfg: &'a ModelConfig<T>, spec: SimSpec<T>) -> Result<Self> {
        cfg.validate()?;
        assert!(spec.nx >= 3 && spec.ntheta >= 3);
        let (nx, nt) = (spec.nx, spec.ntheta);
        let hx = spec.hx();
        let ht = T::one() / T::from_usize_lossy(nt - 1);
        let half = c::<T>(0.5);
        let l = cfg.l;
        let x: Vec<T> = (0..nx)
            .map(|i| spec.x_min + T::from_usize_lossy(i) * hx)
            .collect();
        let theta = |j: usize| T::from_usize_lossy(j) * ht;
        // physical coefficients a_L(x, theta) = a(x / L, theta)
        let a_at = |x: T, t: T| cfg.a.eval(x / l, t);
        let mu_at = |x: T, t: T| cfg.mu.eval(x / l, t);
        let cx = T::one() / (hx * hx);
        let ct = cfg.m / (ht * ht);
        let k = half * spec.dt;

        let mut d_rows = Vec::with_capacity(nx * nt);
        let mut r = Vec::with_capacity(nx * nt);
        for i in 0..nx {
            let xi = x[i];
            let faces: Vec<T> = (0..nt - 1)
                .map(|j| mu_at(xi, (theta(j) + theta(j + 1)) * half))
                .collect();
            for j in 0..nt {
                let tj = theta(j);
                let id = i * nt + j;
                let mut row = Vec::with_capacity(5);
                // ghost reflection at both x ends
                let right = (i + 1 < nx).then(|| cx * a_at(xi + half * hx, tj));
                let left = (i > 0).then(|| cx * a_at(xi - half * hx, tj));
                let (west, east) = match (left, right) {
                    (Some(lw), Some(re)) => (lw, re),
                    (None, Some(re)) => (T::zero(), c::<T>(2.0) * re),
                    (Some(lw), None) => (c::<T>(2.0) * lw, T::zero()),
                    (None, None) => unreachable!(),
                };
                if i > 0 {
                    row.push((id - nt, west));
                }
                if i + 1 < nx {
                    row.push((id + nt, east));
                }
                let (tm, tp) = theta_stencil(|jj| faces[jj], j, nt, ct);
                if j > 0 {
                    row.push((id - 1, tm));
                }
                if j + 1 < nt {
                    row.push((id + 1, tp));
                }
                row.push((id, -(west + east + tm + tp)));
                d_rows.push(row);
                r.push(cfg.r.eval(xi / l, tj));
            }
        }
        let explicit: Vec<Vec<(usize, T)>> = d_rows
            .iter()
            .enumerate()
            .map(|(id, row)| {
                row.iter()
                    .map(|&(j, v)| (j, if j == id { T::one() + k * v } else { k * v }))
                    .collect()
            })
            .collect();
        let entries = d_rows.iter().enumerate().flat_map(|(id, row)| {
            row.iter()
                .map(move |&(j, v)| (id, j, if j == id { T::one() - k * v } else { -k * v }))
        });
        let implicit = BandLu::factor(nx * nt, nt, nt, entries)
            .map_err(|_| Error::Validation("singular Crank-Nicolson matrix".into()))?;
        let r_max = max_of(r.iter().copied());
        Ok(Self {
            cfg,
            spec,
            x,
            explicit,
            implicit,
            r,
            r_max,
        })
    }

    pub fn spec(&self) -> &SimSpec<T> {
        &self.spec
    }

    pub fn initial_state(&self) -> SimState<T> {
        let nt = self.spec.ntheta;
        let u = self
            .x
            .iter()
            .flat_map(|&x| {
                let v = match self.spec.initial {
                    InitialData::Zero => T::zero(),
                    InitialData::Uniform(v) => v,
                    InitialData::Bump { width, height } => {
                        let s = x - self.spec.x_min;
                        if s < width {
                            let cs = (T::PI() * s / (c::<T>(2.0) * width)).cos();
                            height * cs * cs
                        } else {
                            T::zero()
                        }
                    }
                };
                std::iter::repeat(v).take(nt)
            })
            .collect();
        SimState {
            x: self.x.clone(),
            ntheta: nt,
            u,
            t: T::zero(),
            dt: self.spec.dt,
            clipped_relative: T::zero(),
            prev_reaction: None,
        }
    }

    /// One IMEX step; `rho` is taken from the state before the step.
    pub fn step(&self, state: &mut SimState<T>) -> Result<()> {
        let nt = self.spec.ntheta;
        let dt = state.dt;
        let rho = state.rho();
        let rho_max = max_of(rho.iter().copied());
        let bound = c::<T>(0.25) / (self.r_max.max(T::zero()) + rho_max + T::one());
        if dt > bound {
            return Err(Error::StabilityViolation {
                dt: dt.as_f64(),
                bound: bound.as_f64(),
            });
        }
        let reaction: Vec<T> = state
            .u
            .iter()
            .zip(&self.r)
            .enumerate()
            .map(|(id, (&u, &r))| u * (r - rho[id / nt]))
            .collect();
        let mut rhs: Vec<T> = self
            .explicit
            .iter()
            .map(|row| row.iter().map(|&(j, v)| v * state.u[j]).sum())
            .collect();
        match &state.prev_reaction {
            None => rhs.iter_mut().zip(&reaction).for_each(|(b, &f)| *b += dt * f),
            Some(prev) => rhs
                .iter_mut()
                .zip(reaction.iter().zip(prev))
                .for_each(|(b, (&f, &p))| *b += dt * (c::<T>(1.5) * f - c::<T>(0.5) * p)),
        }
        self.implicit.solve_in_place(&mut rhs);

        let mut clipped = T::zero();
        let mut total = T::zero();
        for v in rhs.iter_mut() {
            if *v < T::zero() {
                clipped -= *v;
                *v = T::zero();
            }
            total += *v;
        }
        let max_u = max_of(rhs.iter().copied());
        state.u = rhs;
        state.t += dt;
        state.prev_reaction = Some(reaction);
        if total > T::zero() {
            state.clipped_relative = state.clipped_relative.max(clipped / total);
        }
        let guard = c::<T>(BLOWUP_FACTOR) * (T::one() + self.r_max.max(T::zero()));
        if !(max_u <= guard) {
            return Err(Error::BlowUp {
                t: state.t.as_f64(),
                max_u: max_u.as_f64(),
            });
        }
        Ok(())
    }

    /// Integrates to `t_final`, recording `rho` every `record_every`.
    pub fn run(&self) -> Result<(SimState<T>, Vec<(T, Vec<T>)>)> {
        self.run_guarded(false)
    }

    /// As [`Simulator::run`]; with `edge_guard`, fails with `FrontEscaped` as soon as the
    /// density near `x_max` exceeds the front fraction of its peak.
    pub fn run_guarded(&self, edge_guard: bool) -> Result<(SimState<T>, Vec<(T, Vec<T>)>)> {
        let mut state = self.initial_state();
        let steps = (self.spec.t_final / self.spec.dt).round().to_usize().unwrap_or(0);
        let every = (self.spec.record_every / self.spec.dt).round().to_usize().unwrap_or(1).max(1);
        let mut records = vec![(state.t, state.rho())];
        let edge = self.x.len().saturating_sub(11);
        for n in 1..=steps {
            self.step(&mut state)?;
            if n % every == 0 || n == steps {
                let rho = state.rho();
                let peak = max_of(rho.iter().copied());
                if edge_guard && peak > T::zero() && rho[edge] >= self.spec.delta_fraction * peak {
                    return Err(Error::FrontEscaped {
                        t: state.t.as_f64(),
                        x: self.x[edge].as_f64(),
                    });
                }
                records.push((state.t, rho));
            }
        }
        Ok((state, records))
    }

    pub fn config(&self) -> &ModelConfig<T> {
        self.cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontTrace<T> {
    /// `(t, X(t), rho at the last node above the level)`.
    pub points: Vec<(T, T, T)>,
    pub delta: T,
    /// Least-squares slope of `X` over `[T/2, T]`.
    pub c_hat: T,
    pub r_squared: T,
    pub fit_window: (T, T),
    pub clipped_relative: T,
    /// `(t, x, rho)` snapshots at every record time.
    pub snapshots: Vec<(T, Vec<T>)>,
    pub x: Vec<T>,
}

/// Runs the simulation and fits the front speed over the second half of the run.
pub fn run_front<T: Real>(cfg: &ModelConfig<T>, spec: SimSpec<T>) -> Result<FrontTrace<T>> {
    let sim = Simulator::new(cfg, spec)?;
    let (state, records) = sim.run_guarded(true)?;
    let spec = sim.spec();
    let half_t = c::<T>(0.5) * spec.t_final;
    let (_, mid) = records
        .iter()
        .min_by(|a, b| {
            (a.0 - half_t)
                .abs()
                .partial_cmp(&(b.0 - half_t).abs())
                .expect("finite times")
        })
        .expect("records");
    let delta = spec.delta_fraction * max_of(mid.iter().copied());
    if !(delta > T::zero()) {
        return Err(Error::NoFront);
    }
    let x = state.x.clone();
    let hx = spec.hx();
    let x_limit = spec.x_max - c::<T>(10.0) * hx;
    let mut points = Vec::with_capacity(records.len());
    for (t, rho) in &records {
        let pos = match front_position(&x, rho, delta) {
            Ok(p) => p,
            Err(Error::NoFront) if *t < half_t => continue,
            Err(e) => return Err(e),
        };
        if pos >= x_limit {
            return Err(Error::FrontEscaped {
                t: t.as_f64(),
                x: pos.as_f64(),
            });
        }
        let i = rho.iter().rposition(|&r| r >= delta).expect("front exists");
        points.push((*t, pos, rho[i]));
    }
    let fit: Vec<(T, T)> = points
        .iter()
        .filter(|p| p.0 >= half_t)
        .map(|p| (p.0, p.1))
        .collect();
    let (c_hat, r_squared) = linear_fit(&fit);
    Ok(FrontTrace {
        points,
        delta,
        c_hat,
        r_squared,
        fit_window: (half_t, spec.t_final),
        clipped_relative: state.clipped_relative,
        snapshots: records,
        x,
    })
}

/// Least-squares slope and `R^2` of `y` against `t`.
pub fn linear_fit<T: Real>(pts: &[(T, T)]) -> (T, T) {
    assert!(pts.len() >= 2, "need two points to fit");
    let n = T::from_usize_lossy(pts.len());
    let mt = pts.iter().map(|p| p.0).sum::<T>() / n;
    let my = pts.iter().map(|p| p.1).sum::<T>() / n;
    let stt: T = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: T = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: T = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sty / stt;
    let r2 = if syy > T::zero() {
        sty * sty / (stt * syy)
    } else {
        T::one()
    };
    (slope, r2)
}

/// `t, x, rho` rows for every snapshot, 10 significant digits.
pub fn write_rho_csv<T: Real>(trace: &FrontTrace<T>, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "t,x,rho")?;
    for (t, rho) in &trace.snapshots {
        for (x, r) in trace.x.iter().zip(rho) {
            writeln!(w, "{:.9e},{:.9e},{:.9e}", t.as_f64(), x.as_f64(), r.as_f64())?;
        }
    }
    Ok(())
}

/// Flat binary dump of `u`; layout in the module docs.
pub fn write_u_binary<T: Real>(state: &SimState<T>, path: &Path) -> io::Result<()> {
    let nx = state.x.len();
    let mut buf = Vec::with_capacity(40 + 8 * state.u.len());
    buf.extend_from_slice(&(nx as u64).to_le_bytes());
    buf.extend_from_slice(&(state.ntheta as u64).to_le_bytes());
    buf.extend_from_slice(&state.t.as_f64().to_le_bytes());
    buf.extend_from_slice(&state.x[0].as_f64().to_le_bytes());
    buf.extend_from_slice(&state.x[nx - 1].as_f64().to_le_bytes());
    for v in &state.u {
        buf.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    std::fs::write(path, buf)
}

/// Reads a file written by [`write_u_binary`]: `(nx, ntheta, t, x_min, x_max, u)`.
pub fn read_u_binary(path: &Path) -> io::Result<(usize, usize, f64, f64, f64, Vec<f64>)> {
    let bytes = std::fs::read(path)?;
    let bad = || io::Error::new(io::ErrorKind::InvalidData, "truncated snapshot");
    let word = |k: usize| -> io::Result<[u8; 8]> {
        bytes
            .get(8 * k..8 * k + 8)
            .and_then(|s| s.try_into().ok())
            .ok_or_else(bad)
    };
    let nx = u64::from_le_bytes(word(0)?) as usize;
    let nt = u64::from_le_bytes(word(1)?) as usize;
    let t = f64::from_le_bytes(word(2)?);
    let x0 = f64::from_le_bytes(word(3)?);
    let x1 = f64::from_le_bytes(word(4)?);
    let u = (0..nx * nt)
        .map(|k| word(5 + k).map(f64::from_le_bytes))
        .collect::<io::Result<Vec<f64>>>()?;
    if bytes.len() != 8 * (5 + nx * nt) {
        return Err(bad());
    }
    Ok((nx, nt, t, x0, x1, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{CoefficientField, ThetaBasis, XBasis};

    fn small_spec(initial: InitialData<f64>, t_final: f64) -> SimSpec<f64> {
        SimSpec {
            x_min: 0.0,
            x_max: 10.0,
            nx: 41,
            ntheta: 9,
            dt: 0.02,
            t_final,
            record_every: 0.5,
            initial,
            delta_fraction: 0.01,
        }
    }

    fn unit_cfg(r: CoefficientField<f64>) -> ModelConfig<f64> {
        let one = CoefficientField::constant(1.0);
        ModelConfig::new(one.clone(), one, r, 1.0, 1.0).unwrap()
    }

    #[test]
    fn zero_stays_zero() {
        let cfg = unit_cfg(CoefficientField::constant(1.0));
        let sim = Simulator::new(&cfg, small_spec(InitialData::Zero, 1.0)).unwrap();
        let (state, _) = sim.run().unwrap();
        assert!(state.u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn logistic_oracle() {
        let cfg = unit_cfg(CoefficientField::constant(1.0));
        let u0 = 0.1;
        let sim = Simulator::new(&cfg, small_spec(InitialData::Uniform(u0), 5.0)).unwrap();
        let (state, _) = sim.run().unwrap();
        let exact = 1.0 / (1.0 + (1.0 / u0 - 1.0) * (-5.0f64).exp());
        for r in state.rho() {
            assert!((r - exact).abs() < 1e-3, "{r} vs {exact}");
        }
    }

    #[test]
    fn negative_growth_loses_mass() {
        let r = CoefficientField::constant(-0.5).with(0.3, XBasis::Cos(1), ThetaBasis::NCos(1));
        let cfg = unit_cfg(r);
        let sim = Simulator::new(
            &cfg,
            small_spec(InitialData::Bump { width: 3.0, height: 1.0 }, 2.0),
        )
        .unwrap();
        let mut s = sim.initial_state();
        let mut mass = s.mass();
        for _ in 0..100 {
            sim.step(&mut s).unwrap();
            let m = s.mass();
            assert!(m < mass);
            mass = m;
        }
        assert!(s.u.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn stability_bound_enforced() {
        let cfg = unit_cfg(CoefficientField::constant(1.0));
        let mut spec = small_spec(InitialData::Uniform(0.5), 1.0);
        spec.dt = 0.2;
        let sim = Simulator::new(&cfg, spec).unwrap();
        let mut s = sim.initial_state();
        assert!(matches!(sim.step(&mut s), Err(Error::StabilityViolation { .. })));
    }

    #[test]
    fn front_positions() {
        let x: Vec<f64> = (0..101).map(|i| 0.1 * i as f64).collect();
        let rho: Vec<f64> = x.iter().map(|&x| if x <= 3.2 + 1e-12 { 1.0 } else { 0.0 }).collect();
        assert!((front_position(&x, &rho, 0.5).unwrap() - 3.2).abs() <= 0.1);
        assert_eq!(front_position(&x, &vec![0.0; 101], 0.5), Err(Error::NoFront));
        let two: Vec<f64> = x
            .iter()
            .map(|&x| if x < 2.0 || (5.0..6.0).contains(&x) { 1.0 } else { 0.0 })
            .collect();
        assert!(front_position(&x, &two, 0.5).unwrap() > 5.9);
    }

    #[test]
    fn fit_of_a_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        let (s, r2) = linear_fit(&pts);
        assert!((s - 2.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binary_roundtrip() {
        let cfg = unit_cfg(CoefficientField::constant(1.0));
        let sim = Simulator::new(&cfg, small_spec(InitialData::Uniform(0.3), 0.1)).unwrap();
        let s = sim.initial_state();
        let dir = std::env::temp_dir().join(format!("phenofront-u-{}.bin", std::process::id()));
        write_u_binary(&s, &dir).unwrap();
        let (nx, nt, t, x0, x1, u) = read_u_binary(&dir).unwrap();
        std::fs::remove_file(&dir).ok();
        assert_eq!((nx, nt), (41, 9));
        assert_eq!((t, x0, x1), (0.0, 0.0, 10.0));
        assert_eq!(u, s.u);
    }
}
