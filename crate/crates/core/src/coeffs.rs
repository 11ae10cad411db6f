//! Coefficient fields on the unit cell `[0,1) x [0,1]`.
//!
//! A field is a finite sum of separable terms `w * X(x) * Y(theta)` where
//! `X` is 1-periodic (`1`, `cos 2*pi*n*x`, `sin 2*pi*n*x`) and `Y` is either `1`
//! or the Neumann cosine `cos(pi*n*theta)`. Derivatives in `x` and means in `x` or
//! `theta` are exact; only the harmonic mean needs quadrature.
//!
//! The text format read by [`ModelConfig::parse`] is line oriented:
//!
//! ```text
//! # comment
//! m = 1.0
//! L = 30
//! Nx = 64
//! Ntheta = 32
//! tol_eigen = 1e-10
//! tol_lambda = 1e-6
//! a:
//!   term 1 one one
//! mu:
//!   term 1 one one
//! r:
//!   term 1 one one
//!   term 0.5 cos1 ncos1
//! ```

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::{c, max_of, min_of, Real};

/// Minimum admissible value of `a` and `mu` on the validation grid.
pub const ELLIPTICITY_FLOOR: f64 = 1e-8;
/// Side of the sample grid used for the ellipticity check.
pub const VALIDATION_SAMPLES: usize = 256;
/// Default node count of the harmonic-mean quadrature.
pub const HARMONIC_QUAD_POINTS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum XBasis {
    One,
    Cos(u32),
    Sin(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ThetaBasis {
    One,
    NCos(u32),
}

impl XBasis {
    fn eval<T: Real>(self, x: T) -> T {
        match self {
            XBasis::One => T::one(),
            XBasis::Cos(n) => (T::TAU() * T::from_u32(n).unwrap() * x).cos(),
            XBasis::Sin(n) => (T::TAU() * T::from_u32(n).unwrap() * x).sin(),
        }
    }

    fn eval_dx<T: Real>(self, x: T) -> T {
        match self {
            XBasis::One => T::zero(),
            XBasis::Cos(n) => {
                let w = T::TAU() * T::from_u32(n).unwrap();
                -w * (w * x).sin()
            }
            XBasis::Sin(n) => {
                let w = T::TAU() * T::from_u32(n).unwrap();
                w * (w * x).cos()
            }
        }
    }
}

impl ThetaBasis {
    fn eval<T: Real>(self, theta: T) -> T {
        match self {
            ThetaBasis::One => T::one(),
            ThetaBasis::NCos(n) => (T::PI() * T::from_u32(n).unwrap() * theta).cos(),
        }
    }
}

impl fmt::Display for XBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            XBasis::One => write!(f, "one"),
            XBasis::Cos(n) => write!(f, "cos{n}"),
            XBasis::Sin(n) => write!(f, "sin{n}"),
        }
    }
}

impl fmt::Display for ThetaBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThetaBasis::One => write!(f, "one"),
            ThetaBasis::NCos(n) => write!(f, "ncos{n}"),
        }
    }
}

fn parse_index(s: &str, prefix: &str) -> Option<u32> {
    let n: u32 = s.strip_prefix(prefix)?.parse().ok()?;
    (n >= 1).then_some(n)
}

impl std::str::FromStr for XBasis {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "one" {
            return Ok(XBasis::One);
        }
        if let Some(n) = parse_index(s, "cos") {
            return Ok(XBasis::Cos(n));
        }
        if let Some(n) = parse_index(s, "sin") {
            return Ok(XBasis::Sin(n));
        }
        Err(format!("unknown x basis `{s}` (expected one, cos<n>, sin<n>)"))
    }
}

impl std::str::FromStr for ThetaBasis {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "one" {
            return Ok(ThetaBasis::One);
        }
        if let Some(n) = parse_index(s, "ncos") {
            return Ok(ThetaBasis::NCos(n));
        }
        Err(format!("unknown theta basis `{s}` (expected one, ncos<n>)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparableTerm<T> {
    pub weight: T,
    pub x_basis: XBasis,
    pub theta_basis: ThetaBasis,
}

impl<T: Real> SeparableTerm<T> {
    pub fn new(weight: T, x_basis: XBasis, theta_basis: ThetaBasis) -> Self {
        Self {
            weight,
            x_basis,
            theta_basis,
        }
    }
}

/// `f(x, theta)` as a finite separable sum, 1-periodic in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField<T> {
    terms: Vec<SeparableTerm<T>>,
}

/// Reduce `x` to `[0,1)`.
#[inline]
fn wrap<T: Real>(x: T) -> T {
    let y = x - x.floor();
    if y >= T::one() {
        T::zero()
    } else {
        y
    }
}

impl<T: Real> CoefficientField<T> {
    pub fn new(terms: Vec<SeparableTerm<T>>) -> Self {
        Self { terms }
    }

    pub fn constant(value: T) -> Self {
        Self::new(vec![SeparableTerm::new(value, XBasis::One, ThetaBasis::One)])
    }

    /// Builder-style helper: append one term.
    pub fn with(mut self, weight: f64, x_basis: XBasis, theta_basis: ThetaBasis) -> Self {
        self.terms
            .push(SeparableTerm::new(c(weight), x_basis, theta_basis));
        self
    }

    pub fn terms(&self) -> &[SeparableTerm<T>] {
        &self.terms
    }

    pub fn eval(&self, x: T, theta: T) -> T {
        assert!(
            theta >= T::zero() && theta <= T::one(),
            "theta = {theta} outside [0,1]"
        );
        let x = wrap(x);
        self.terms
            .iter()
            .map(|t| t.weight * t.x_basis.eval(x) * t.theta_basis.eval(theta))
            .sum()
    }

    /// Exact partial derivative in `x`.
    pub fn eval_dx(&self, x: T, theta: T) -> T {
        assert!(
            theta >= T::zero() && theta <= T::one(),
            "theta = {theta} outside [0,1]"
        );
        let x = wrap(x);
        self.terms
            .iter()
            .map(|t| t.weight * t.x_basis.eval_dx(x) * t.theta_basis.eval(theta))
            .sum()
    }

    pub fn depends_on_x(&self) -> bool {
        self.terms
            .iter()
            .any(|t| t.x_basis != XBasis::One && t.weight != T::zero())
    }

    pub fn depends_on_theta(&self) -> bool {
        self.terms
            .iter()
            .any(|t| t.theta_basis != ThetaBasis::One && t.weight != T::zero())
    }

    /// `theta -> int_0^1 f(x, theta) dx`, exact.
    pub fn mean_x_arith(&self) -> CoefficientField<T> {
        CoefficientField::new(
            self.terms
                .iter()
                .filter(|t| t.x_basis == XBasis::One)
                .copied()
                .collect(),
        )
    }

    /// `x -> int_0^1 f(x, theta) dtheta`, exact.
    pub fn mean_theta_arith(&self) -> CoefficientField<T> {
        CoefficientField::new(
            self.terms
                .iter()
                .filter(|t| t.theta_basis == ThetaBasis::One)
                .copied()
                .collect(),
        )
    }

    /// `theta -> (int_0^1 dx / f(x, theta))^{-1}` by the periodic trapezoid rule.
    pub fn mean_x_harm(&self, quad_points: usize) -> Result<HarmonicMeanX<T>> {
        assert!(quad_points >= 2);
        let nt = 65;
        for j in 0..nt {
            let theta = T::from_usize_lossy(j) / T::from_usize_lossy(nt - 1);
            for i in 0..quad_points {
                let x = T::from_usize_lossy(i) / T::from_usize_lossy(quad_points);
                let v = self.eval(x, theta);
                if v <= T::zero() {
                    return Err(Error::NonPositiveField {
                        value: v.as_f64(),
                        x: x.as_f64(),
                        theta: theta.as_f64(),
                    });
                }
            }
        }
        Ok(HarmonicMeanX {
            field: self.clone(),
            quad_points,
        })
    }

    /// Minimum over a `n x n` sample grid of the cell.
    pub fn sampled_min(&self, n: usize) -> (T, T, T) {
        let mut best = (T::infinity(), T::zero(), T::zero());
        for i in 0..n {
            let x = T::from_usize_lossy(i) / T::from_usize_lossy(n);
            for j in 0..n {
                let theta = T::from_usize_lossy(j) / T::from_usize_lossy(n - 1);
                let v = self.eval(x, theta);
                if v < best.0 {
                    best = (v, x, theta);
                }
            }
        }
        best
    }

    /// Sum of absolute weights: an upper bound on `sup |f|`.
    pub fn abs_bound(&self) -> T {
        self.terms.iter().map(|t| t.weight.abs()).sum()
    }

    /// Slice at fixed phenotype, as a function of `x`.
    pub fn x_slice(&self, theta: T) -> XSlice<'_, T> {
        XSlice { field: self, theta }
    }

    /// Slice at fixed position, as a function of `theta`.
    pub fn theta_slice(&self, x: T) -> ThetaSlice<'_, T> {
        ThetaSlice { field: self, x }
    }

    /// Max over `theta` of `f(x, theta)`: grid scan plus golden refinement.
    pub fn max_over_theta(&self, x: T, samples: usize) -> (T, T) {
        let n = samples.max(3);
        let h = T::one() / T::from_usize_lossy(n - 1);
        let mut best_j = 0;
        let mut best = T::neg_infinity();
        for j in 0..n {
            let v = self.eval(x, T::from_usize_lossy(j) * h);
            if v > best {
                best = v;
                best_j = j;
            }
        }
        let lo = (T::from_usize_lossy(best_j) - T::one()).max(T::zero()) * h;
        let hi = (T::from_usize_lossy(best_j + 1) * h).min(T::one());
        let m = crate::optimize::golden_section(|t| -self.eval(x, t), lo, hi, c(1e-12), 200);
        let v = self.eval(x, m.x);
        if v > best {
            (v, m.x)
        } else {
            (best, T::from_usize_lossy(best_j) * h)
        }
    }
}

/// A scalar function of one variable.
pub trait Profile<T>: Sync {
    fn at(&self, s: T) -> T;
}

impl<T, F> Profile<T> for F
where
    F: Fn(T) -> T + Sync,
{
    fn at(&self, s: T) -> T {
        self(s)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct XSlice<'a, T> {
    pub field: &'a CoefficientField<T>,
    pub theta: T,
}

impl<T: Real> XSlice<'_, T> {
    pub fn dx(&self, x: T) -> T {
        self.field.eval_dx(x, self.theta)
    }
}

impl<T: Real> Profile<T> for XSlice<'_, T> {
    fn at(&self, s: T) -> T {
        self.field.eval(s, self.theta)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ThetaSlice<'a, T> {
    pub field: &'a CoefficientField<T>,
    pub x: T,
}

impl<T: Real> Profile<T> for ThetaSlice<'_, T> {
    fn at(&self, s: T) -> T {
        self.field.eval(self.x, s)
    }
}

/// Harmonic mean in `x`, as a function of `theta`.
#[derive(Debug, Clone)]
pub struct HarmonicMeanX<T> {
    field: CoefficientField<T>,
    quad_points: usize,
}

impl<T: Real> Profile<T> for HarmonicMeanX<T> {
    fn at(&self, theta: T) -> T {
        let n = T::from_usize_lossy(self.quad_points);
        let s: T = (0..self.quad_points)
            .map(|i| T::one() / self.field.eval(T::from_usize_lossy(i) / n, theta))
            .sum();
        n / s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub nx: usize,
    pub ntheta: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { nx: 64, ntheta: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<T> {
    /// Eigen residual, relative to the operator's row-sum norm.
    pub eigen: T,
    /// Final bracket width of the lambda search.
    pub lambda: T,
    pub max_iter: usize,
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        Self {
            eigen: c(1e-10),
            lambda: c(1e-6),
            max_iter: 500,
        }
    }
}

/// Coefficients, parameters and discretization of one model instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig<T> {
    pub a: CoefficientField<T>,
    pub mu: CoefficientField<T>,
    pub r: CoefficientField<T>,
    pub m: T,
    pub l: T,
    pub grid: GridSpec,
    pub tol: Tolerances<T>,
}

impl<T: Real> ModelConfig<T> {
    /// Config with default grid and tolerances; validated.
    pub fn new(
        a: CoefficientField<T>,
        mu: CoefficientField<T>,
        r: CoefficientField<T>,
        m: T,
        l: T,
    ) -> Result<Self> {
        let cfg = Self {
            a,
            mu,
            r,
            m,
            l,
            grid: GridSpec::default(),
            tol: Tolerances::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_m(&self, m: T) -> Self {
        Self { m, ..self.clone() }
    }

    pub fn with_l(&self, l: T) -> Self {
        Self { l, ..self.clone() }
    }

    pub fn with_grid(&self, nx: usize, ntheta: usize) -> Self {
        Self {
            grid: GridSpec { nx, ntheta },
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > T::zero()) {
            return Err(Error::Validation(format!("m must be positive (got {})", self.m)));
        }
        if !(self.l > T::zero()) {
            return Err(Error::Validation(format!("L must be positive (got {})", self.l)));
        }
        if self.grid.nx < 8 {
            return Err(Error::Validation(format!("Nx must be >= 8 (got {})", self.grid.nx)));
        }
        if self.grid.ntheta < 4 {
            return Err(Error::Validation(format!(
                "Ntheta must be >= 4 (got {})",
                self.grid.ntheta
            )));
        }
        if !(self.tol.eigen > T::zero()) || !(self.tol.lambda > T::zero()) {
            return Err(Error::Validation("tolerances must be positive".into()));
        }
        for (name, f) in [("a", &self.a), ("mu", &self.mu)] {
            let (v, x, theta) = f.sampled_min(VALIDATION_SAMPLES);
            if v < c(ELLIPTICITY_FLOOR) {
                return Err(Error::Validation(format!(
                    "{name} is not uniformly elliptic: min {v} at (x={x}, theta={theta})"
                )));
            }
        }
        Ok(())
    }

    /// Parse and validate the key/value text format.
    pub fn parse(text: &str) -> Result<Self> {
        #[derive(Clone, Copy, PartialEq)]
        enum Block {
            A,
            Mu,
            R,
        }
        let mut m = None;
        let mut l = None;
        let mut nx = None;
        let mut ntheta = None;
        let mut tol_eigen = None;
        let mut tol_lambda = None;
        let mut blocks: [Option<Vec<SeparableTerm<T>>>; 3] = [None, None, None];
        let mut current: Option<Block> = None;

        let perr = |line: usize, msg: String| Error::Parse { line, msg };

        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("term") {
                if !rest.is_empty() && !rest.starts_with(char::is_whitespace) {
                    return Err(perr(lineno, format!("unrecognized line `{line}`")));
                }
                let Some(block) = current else {
                    return Err(perr(lineno, "term outside of a coefficient block".into()));
                };
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(perr(
                        lineno,
                        "expected `term <weight> <xbasis> <thetabasis>`".into(),
                    ));
                }
                let w: f64 = parts[0]
                    .parse()
                    .map_err(|_| perr(lineno, format!("bad weight `{}`", parts[0])))?;
                if !w.is_finite() {
                    return Err(perr(lineno, format!("non-finite weight `{}`", parts[0])));
                }
                let xb: XBasis = parts[1].parse().map_err(|e| perr(lineno, e))?;
                let tb: ThetaBasis = parts[2].parse().map_err(|e| perr(lineno, e))?;
                blocks[block as usize]
                    .as_mut()
                    .expect("block opened")
                    .push(SeparableTerm::new(c(w), xb, tb));
                continue;
            }
            if let Some(name) = line.strip_suffix(':') {
                let block = match name.trim() {
                    "a" => Block::A,
                    "mu" => Block::Mu,
                    "r" => Block::R,
                    other => return Err(perr(lineno, format!("unknown block `{other}`"))),
                };
                if blocks[block as usize].is_some() {
                    return Err(perr(lineno, format!("duplicate block `{name}`")));
                }
                blocks[block as usize] = Some(Vec::new());
                current = Some(block);
                continue;
            }
            let (key, value) = match line.split_once('=') {
                Some((k, v)) => (k.trim(), v.trim()),
                None => return Err(perr(lineno, format!("expected `key = value`, got `{line}`"))),
            };
            current = None;
            let num = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| perr(lineno, format!("bad number `{v}` for `{key}`")))
            };
            let int = |v: &str| -> Result<usize> {
                v.parse::<usize>()
                    .map_err(|_| perr(lineno, format!("bad integer `{v}` for `{key}`")))
            };
            let slot_f = match key {
                "m" => Some(&mut m),
                "L" => Some(&mut l),
                "tol_eigen" => Some(&mut tol_eigen),
                "tol_lambda" => Some(&mut tol_lambda),
                _ => None,
            };
            if let Some(slot) = slot_f {
                if slot.is_some() {
                    return Err(perr(lineno, format!("duplicate key `{key}`")));
                }
                *slot = Some(num(value)?);
                continue;
            }
            let slot_i = match key {
                "Nx" => &mut nx,
                "Ntheta" => &mut ntheta,
                other => return Err(perr(lineno, format!("unknown key `{other}`"))),
            };
            if slot_i.is_some() {
                return Err(perr(lineno, format!("duplicate key `{key}`")));
            }
            *slot_i = Some(int(value)?);
        }

        let end = text.lines().count().max(1);
        let missing = |k: &str| perr(end, format!("missing required key `{k}`"));
        let m = m.ok_or_else(|| missing("m"))?;
        let l = l.ok_or_else(|| missing("L"))?;
        let [a, mu, r] = blocks;
        let a = a.ok_or_else(|| missing("a"))?;
        let mu = mu.ok_or_else(|| missing("mu"))?;
        let r = r.ok_or_else(|| missing("r"))?;
        let defaults = Tolerances::<T>::default();
        let grid = GridSpec::default();
        let cfg = Self {
            a: CoefficientField::new(a),
            mu: CoefficientField::new(mu),
            r: CoefficientField::new(r),
            m: c(m),
            l: c(l),
            grid: GridSpec {
                nx: nx.unwrap_or(grid.nx),
                ntheta: ntheta.unwrap_or(grid.ntheta),
            },
            tol: Tolerances {
                eigen: tol_eigen.map(c).unwrap_or(defaults.eigen),
                lambda: tol_lambda.map(c).unwrap_or(defaults.lambda),
                max_iter: defaults.max_iter,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serialize back to the text format; `parse(to_text())` reproduces the config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("m = {:?}\n", self.m));
        s.push_str(&format!("L = {:?}\n", self.l));
        s.push_str(&format!("Nx = {}\n", self.grid.nx));
        s.push_str(&format!("Ntheta = {}\n", self.grid.ntheta));
        s.push_str(&format!("tol_eigen = {:?}\n", self.tol.eigen));
        s.push_str(&format!("tol_lambda = {:?}\n", self.tol.lambda));
        for (name, f) in [("a", &self.a), ("mu", &self.mu), ("r", &self.r)] {
            s.push_str(name);
            s.push_str(":\n");
            for t in f.terms() {
                s.push_str(&format!("  term {:?} {} {}\n", t.weight, t.x_basis, t.theta_basis));
            }
        }
        s
    }

    /// Upper bound on `max r` over the cell.
    pub fn r_max(&self) -> T {
        max_grid(&self.r, false)
    }

    pub fn a_min(&self) -> T {
        min_grid(&self.a)
    }

    pub fn a_max(&self) -> T {
        max_grid(&self.a, false)
    }

    /// `max |d_x a|` sampled.
    pub fn a_dx_max(&self) -> T {
        max_grid(&self.a, true)
    }
}

fn grid_values<T: Real>(f: &CoefficientField<T>, dx: bool) -> impl Iterator<Item = T> + '_ {
    let n = 128;
    (0..n).flat_map(move |i| {
        (0..65).map(move |j| {
            let x = T::from_usize_lossy(i) / T::from_usize_lossy(n);
            let t = T::from_usize_lossy(j) / T::from_usize_lossy(64);
            if dx {
                f.eval_dx(x, t).abs()
            } else {
                f.eval(x, t)
            }
        })
    })
}

fn max_grid<T: Real>(f: &CoefficientField<T>, dx: bool) -> T {
    max_of(grid_values(f, dx))
}

fn min_grid<T: Real>(f: &CoefficientField<T>) -> T {
    min_of(grid_values(f, false))
}
