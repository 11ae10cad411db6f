//! Finite-difference discretizations of the tilted cell operator and its 1D reductions.
//!
//! The cell operator acts on `L`-periodic functions rescaled to the unit cell:
//!
//! ```text
//! (1/L^2) d_x(a d_x phi) + m d_theta(mu d_theta phi) - (lambda/L) S phi + (r + lambda^2 a) phi
//! ```
//!
//! where `S phi = a d_x phi + d_x(a phi)` is discretized by centered differences in
//! its skew-adjoint form. This reproduces the drift `-2 lambda a/L d_x` together with
//! the zeroth-order term `-lambda d_x a / L`, and makes the discrete operator at
//! `-lambda` the exact (weighted) adjoint of the operator at `lambda`.
//!
//! Grid: `x_i = i/N_x` (periodic) and `theta_j = j/(N_theta - 1)` (Neumann, ghost
//! reflection). Unknown `(i, j)` sits at index `i*N_theta + j`.

use crate::coeffs::{ModelConfig, Profile};
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::scalar::{c, max_of, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    /// Points on `[0,1)`, periodic. `1` for theta-only operators.
    pub nx: usize,
    /// Points on `[0,1]`, endpoints included. `1` for x-only operators.
    pub ntheta: usize,
}

impl Grid {
    pub fn new(nx: usize, ntheta: usize) -> Self {
        Self { nx, ntheta }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ntheta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.ntheta + j
    }

    pub fn hx<T: Real>(&self) -> T {
        T::one() / T::from_usize_lossy(self.nx)
    }

    pub fn htheta<T: Real>(&self) -> T {
        T::one() / T::from_usize_lossy(self.ntheta - 1)
    }

    pub fn x<T: Real>(&self, i: usize) -> T {
        T::from_usize_lossy(i) / T::from_usize_lossy(self.nx)
    }

    pub fn theta<T: Real>(&self, j: usize) -> T {
        if self.ntheta == 1 {
            T::zero()
        } else {
            T::from_usize_lossy(j) / T::from_usize_lossy(self.ntheta - 1)
        }
    }

    /// Trapezoid weights in theta (unnormalized: 1/2 at the endpoints, 1 inside).
    pub fn theta_weight<T: Real>(&self, j: usize) -> T {
        if self.ntheta > 1 && (j == 0 || j + 1 == self.ntheta) {
            c(0.5)
        } else {
            T::one()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// Full `(x, theta)` cell.
    Cell,
    /// Periodic `x` only.
    XOnly,
    /// Neumann `theta` only.
    ThetaOnly,
}

/// A discretized operator plus the metadata needed to solve its eigenproblem.
#[derive(Debug, Clone)]
pub struct CellOperator<T> {
    pub grid: Grid,
    pub kind: OperatorKind,
    pub m: T,
    pub l: T,
    pub lambda: T,
    pub matrix: CsrMatrix<T>,
    /// Upper bound on the real part of the spectrum.
    pub shift_bound: T,
}

impl<T: Real> CellOperator<T> {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Weight of each unknown in the discrete L2 inner product in which the
    /// `lambda = 0` operator is self-adjoint.
    pub fn weights(&self) -> Vec<T> {
        let g = self.grid;
        (0..g.nx)
            .flat_map(|_| (0..g.ntheta).map(move |j| g.theta_weight::<T>(j)))
            .collect()
    }

    /// `(bandwidth, border)` of the matrix under the natural ordering.
    pub fn band_structure(&self) -> (usize, usize) {
        match self.kind {
            OperatorKind::Cell => (self.grid.ntheta, self.grid.ntheta),
            OperatorKind::XOnly => (1, 1),
            OperatorKind::ThetaOnly => (1, 0),
        }
    }

    pub fn apply(&self, v: &[T]) -> Vec<T> {
        self.matrix.mul_vec(v)
    }
}

fn check_positive<T: Real>(v: T, x: T, theta: T) -> Result<()> {
    if v > T::zero() {
        Ok(())
    } else {
        Err(Error::NonPositiveField {
            value: v.as_f64(),
            x: x.as_f64(),
            theta: theta.as_f64(),
        })
    }
}

/// Theta-direction stencil `m d(mu d psi)` at node `j` with ghost reflection.
/// Returns `(coef of j-1, coef of j+1)`; the center coefficient is minus their sum.
pub(crate) fn theta_stencil<T: Real>(
    mu_face: impl Fn(usize) -> T,
    j: usize,
    nt: usize,
    ct: T,
) -> (T, T) {
    if j == 0 {
        (T::zero(), c::<T>(2.0) * ct * mu_face(0))
    } else if j + 1 == nt {
        (c::<T>(2.0) * ct * mu_face(nt - 2), T::zero())
    } else {
        (ct * mu_face(j - 1), ct * mu_face(j))
    }
}

/// Tilted cell operator at exponent `lambda` (any sign).
pub fn assemble_cell<T: Real>(cfg: &ModelConfig<T>, lambda: T) -> Result<CellOperator<T>> {
    cfg.validate()?;
    let grid = Grid::new(cfg.grid.nx, cfg.grid.ntheta);
    let (nx, nt) = (grid.nx, grid.ntheta);
    let hx: T = grid.hx();
    let ht: T = grid.htheta();
    let half = c::<T>(0.5);
    let l = cfg.l;
    let cx = T::one() / (l * l * hx * hx);
    let ct = cfg.m / (ht * ht);
    let drift = lambda / l / (c::<T>(2.0) * hx);

    let mut rows = Vec::with_capacity(grid.len());
    let mut bound_r = T::neg_infinity();
    let mut bound_a = T::neg_infinity();
    let mut bound_da = T::zero();
    for i in 0..nx {
        let x: T = grid.x(i);
        let ip = (i + 1) % nx;
        let im = (i + nx - 1) % nx;
        let xp = grid.x::<T>(i) + hx;
        let xm = grid.x::<T>(i) - hx;
        for j in 0..nt {
            let th: T = grid.theta(j);
            let a0 = cfg.a.eval(x, th);
            let a_right = cfg.a.eval(x + half * hx, th);
            let a_left = cfg.a.eval(x - half * hx, th);
            let a_next = cfg.a.eval(xp, th);
            let a_prev = cfg.a.eval(xm, th);
            let r0 = cfg.r.eval(x, th);
            bound_r = bound_r.max(r0);
            bound_a = bound_a.max(a0);
            bound_da = bound_da
                .max(cfg.a.eval_dx(x, th).abs())
                .max(((a_next - a_prev) / (c::<T>(2.0) * hx)).abs());

            let mu_face = |jj: usize| {
                let tf = (grid.theta::<T>(jj) + grid.theta::<T>(jj + 1)) * half;
                cfg.mu.eval(x, tf)
            };
            let (tm, tp) = theta_stencil(mu_face, j, nt, ct);

            let p = grid.idx(i, j);
            let mut row = Vec::with_capacity(5);
            row.push((grid.idx(ip, j), cx * a_right - drift * (a0 + a_next)));
            row.push((grid.idx(im, j), cx * a_left + drift * (a0 + a_prev)));
            if j > 0 {
                row.push((p - 1, tm));
            }
            if j + 1 < nt {
                row.push((p + 1, tp));
            }
            let center = -(cx * (a_right + a_left)) - (tm + tp) + r0 + lambda * lambda * a0;
            row.push((p, center));
            rows.push(row);
        }
    }
    let shift_bound = lambda * lambda * bound_a + lambda.abs() * bound_da / l + bound_r + T::one();
    Ok(CellOperator {
        grid,
        kind: OperatorKind::Cell,
        m: cfg.m,
        l,
        lambda,
        matrix: CsrMatrix::from_rows(rows),
        shift_bound,
    })
}

/// Periodic 1D operator `(1/L^2)(A phi')' - (lambda/L) S phi + (R + lambda^2 A) phi` on the unit cell.
pub fn assemble_x<T: Real>(
    a_field: &impl Profile<T>,
    r_field: &impl Profile<T>,
    lambda: T,
    l: T,
    nx: usize,
) -> Result<CellOperator<T>> {
    assert!(nx >= 3, "need at least 3 points");
    let grid = Grid::new(nx, 1);
    let hx: T = grid.hx();
    let half = c::<T>(0.5);
    let cx = T::one() / (l * l * hx * hx);
    let drift = lambda / l / (c::<T>(2.0) * hx);
    let mut rows = Vec::with_capacity(nx);
    let a_nodes: Vec<T> = (0..nx).map(|i| a_field.at(grid.x(i))).collect();
    let mut bound_r = T::neg_infinity();
    let mut bound_da = T::zero();
    for i in 0..nx {
        let x: T = grid.x(i);
        let ip = (i + 1) % nx;
        let im = (i + nx - 1) % nx;
        let a0 = a_nodes[i];
        check_positive(a0, x, T::zero())?;
        let a_right = a_field.at(x + half * hx);
        let a_left = a_field.at(x - half * hx);
        check_positive(a_right, x + half * hx, T::zero())?;
        let r0 = r_field.at(x);
        bound_r = bound_r.max(r0);
        bound_da = bound_da.max(((a_nodes[ip] - a_nodes[im]) / (c::<T>(2.0) * hx)).abs());
        rows.push(vec![
            (ip, cx * a_right - drift * (a0 + a_nodes[ip])),
            (im, cx * a_left + drift * (a0 + a_nodes[im])),
            (i, -(cx * (a_right + a_left)) + r0 + lambda * lambda * a0),
        ]);
    }
    let a_max = max_of(a_nodes.iter().copied());
    let shift_bound = lambda * lambda * a_max + lambda.abs() * bound_da / l + bound_r + T::one();
    Ok(CellOperator {
        grid,
        kind: OperatorKind::XOnly,
        m: T::zero(),
        l,
        lambda,
        matrix: CsrMatrix::from_rows(rows),
        shift_bound,
    })
}

/// Neumann 1D operator `m (mu psi')' + (r + extra) psi` on `[0,1]`.
pub fn assemble_theta<T: Real>(
    mu_slice: &impl Profile<T>,
    r_slice: &impl Profile<T>,
    m: T,
    extra: &impl Profile<T>,
    ntheta: usize,
) -> Result<CellOperator<T>> {
    assert!(ntheta >= 3, "need at least 3 points");
    let grid = Grid::new(1, ntheta);
    let ht: T = grid.htheta();
    let ct = m / (ht * ht);
    let half = c::<T>(0.5);
    let faces: Vec<T> = (0..ntheta - 1)
        .map(|j| mu_slice.at((grid.theta::<T>(j) + grid.theta::<T>(j + 1)) * half))
        .collect();
    for (j, &f) in faces.iter().enumerate() {
        check_positive(f, T::zero(), (grid.theta::<T>(j) + grid.theta::<T>(j + 1)) * half)?;
    }
    let mut rows = Vec::with_capacity(ntheta);
    let mut bound = T::neg_infinity();
    for j in 0..ntheta {
        let th: T = grid.theta(j);
        let (tm, tp) = theta_stencil(|jj| faces[jj], j, ntheta, ct);
        let z = r_slice.at(th) + extra.at(th);
        bound = bound.max(z);
        let mut row = Vec::with_capacity(3);
        if j > 0 {
            row.push((j - 1, tm));
        }
        if j + 1 < ntheta {
            row.push((j + 1, tp));
        }
        row.push((j, z - (tm + tp)));
        rows.push(row);
    }
    Ok(CellOperator {
        grid,
        kind: OperatorKind::ThetaOnly,
        m,
        l: T::one(),
        lambda: T::zero(),
        matrix: CsrMatrix::from_rows(rows),
        shift_bound: bound + T::one(),
    })
}
