//! One-dimensional minimization of quasiconvex functions.

use crate::scalar::{c, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum<T> {
    pub x: T,
    pub value: T,
    /// Final bracket.
    pub lo: T,
    pub hi: T,
    pub evals: usize,
}

/// Golden-section search for a minimizer of `f` on `[lo, hi]`, stopping when the
/// bracket is narrower than `width` (or after `max_iter` reductions).
pub fn golden_section<T: Real>(
    mut f: impl FnMut(T) -> T,
    lo: T,
    hi: T,
    width: T,
    max_iter: usize,
) -> Minimum<T> {
    try_golden_section(|x| Ok::<T, std::convert::Infallible>(f(x)), lo, hi, width, max_iter)
        .unwrap_or_else(|e| match e {})
}

/// Fallible variant of [`golden_section`].
pub fn try_golden_section<T: Real, E>(
    mut f: impl FnMut(T) -> Result<T, E>,
    mut lo: T,
    mut hi: T,
    width: T,
    max_iter: usize,
) -> Result<Minimum<T>, E> {
    let inv_phi = c::<T>(0.5) * (c::<T>(5.0).sqrt() - T::one());
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let mut evals = 2;
    let mut iter = 0;
    while hi - lo > width && iter < max_iter {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2)?;
        }
        evals += 1;
        iter += 1;
    }
    let (x, value) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    Ok(Minimum {
        x,
        value,
        lo,
        hi,
        evals,
    })
}

/// Abscissa of the vertex of the parabola through three points; `None` when they are collinear.
pub fn parabola_vertex<T: Real>(p: [(T, T); 3]) -> Option<T> {
    let [(x0, y0), (x1, y1), (x2, y2)] = p;
    let num = (x1 - x0).powi(2) * (y1 - y2) - (x1 - x2).powi(2) * (y1 - y0);
    let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    if den == T::zero() {
        return None;
    }
    Some(x1 - c::<T>(0.5) * num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_minimum() {
        let m = golden_section(|x: f64| (x - 0.3).powi(2), -2.0, 5.0, 1e-9, 200);
        assert!((m.x - 0.3).abs() < 1e-8);
        assert!(m.value < 1e-15);
        assert!(m.hi - m.lo <= 1e-9);
    }

    #[test]
    fn converges_to_boundary_minimizer() {
        let m = golden_section(|x: f64| x, 1.0, 2.0, 1e-10, 200);
        assert!((m.x - 1.0).abs() < 1e-9);
    }

    #[test]
    fn kpp_ratio() {
        let m = golden_section(|l: f64| (1.0 + l * l) / l, 0.01, 8.0, 1e-10, 200);
        assert!((m.value - 2.0).abs() < 1e-12);
        assert!((m.x - 1.0).abs() < 1e-5);
    }

    #[test]
    fn works_in_f32() {
        let m = golden_section(|x: f32| (x - 2.0).abs(), 0.0, 3.0, 1e-5, 200);
        assert!((m.x - 2.0).abs() < 1e-4);
    }

    #[test]
    fn vertex_of_parabola() {
        let f = |x: f64| -(x - 0.2).powi(2) + 3.0;
        let v = parabola_vertex([(0.0, f(0.0)), (0.1, f(0.1)), (0.5, f(0.5))]).unwrap();
        assert!((v - 0.2).abs() < 1e-12);
        assert!(parabola_vertex([(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)]).is_none());
    }
}
