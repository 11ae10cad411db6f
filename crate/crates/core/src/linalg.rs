//! Sparse storage and direct solvers for the cell operators.
//!
//! The operators assembled in [`crate::discretize`] are banded (bandwidth `N_theta`
//! under the `i*N_theta + j` ordering) except for the periodic wrap in `x`, which
//! couples the first and last blocks of `N_theta` unknowns. [`BorderedBandLu`]
//! factors such matrices by moving the last block into a dense border and
//! eliminating it through a Schur complement.

use crate::scalar::Real;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Build from per-row entry lists; duplicate columns in a row are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, T)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let start = cols.len();
            for (j, v) in row {
                assert!(j < n, "column {j} out of range");
                if cols.len() > start && *cols.last().unwrap() == j {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.row(i)
            .find(|&(c, _)| c == j)
            .map(|(_, v)| v)
            .unwrap_or_else(T::zero)
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn transpose(&self) -> Self {
        let mut rows = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                rows[j].push((i, v));
            }
        }
        Self::from_rows(rows)
    }

    /// `s*I - self`.
    pub fn shifted_negation(&self, s: T) -> Self {
        let rows = (0..self.n)
            .map(|i| {
                let mut row: Vec<(usize, T)> = self.row(i).map(|(j, v)| (j, -v)).collect();
                row.push((i, s));
                row
            })
            .collect();
        Self::from_rows(rows)
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.n]; self.n];
        for (i, di) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                di[j] += v;
            }
        }
        d
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// True when every off-diagonal entry is nonnegative.
    pub fn is_metzler(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| j == i || v >= T::zero()))
    }

    pub fn max_bandwidth_ignoring(&self, border: usize) -> usize {
        let n1 = self.n - border;
        let mut bw = 0;
        for i in 0..n1 {
            for (j, _) in self.row(i) {
                if j < n1 {
                    bw = bw.max(i.abs_diff(j));
                }
            }
        }
        bw
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingularMatrix;

/// Banded LU with partial pivoting (fill grows the upper band to `kl + ku`).
#[derive(Debug, Clone)]
pub struct BandLu<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    ab: Vec<T>,
    piv: Vec<usize>,
    /// No row was swapped: `U` keeps the original upper bandwidth and `L` can be
    /// applied row by row.
    unpivoted: bool,
}

impl<T: Real> BandLu<T> {
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    /// `entries` yields `(i, j, v)` with `|i - j|` within the band.
    pub fn factor(
        n: usize,
        kl: usize,
        ku: usize,
        entries: impl IntoIterator<Item = (usize, usize, T)>,
    ) -> Result<Self, SingularMatrix> {
        let width = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            ab: vec![T::zero(); n * width],
            piv: vec![0; n],
            unpivoted: true,
        };
        for (i, j, v) in entries {
            assert!(
                j + kl >= i && j <= i + ku,
                "entry ({i},{j}) outside band kl={kl} ku={ku}"
            );
            let k = lu.idx(i, j);
            lu.ab[k] += v;
        }
        let uw = kl + ku;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.ab[lu.idx(k, k)].abs();
            for i in k + 1..=last {
                let v = lu.ab[lu.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(SingularMatrix);
            }
            lu.piv[k] = p;
            lu.unpivoted &= p == k;
            let jmax = (k + uw).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (a, b) = (lu.idx(k, j), lu.idx(p, j));
                    lu.ab.swap(a, b);
                }
            }
            let pivot = lu.ab[lu.idx(k, k)];
            let len = jmax - k;
            let (head, tail) = lu.ab.split_at_mut((k + 1) * width);
            // row k from column k+1; row-major storage keeps both rows contiguous in j
            let krow = &head[k * width + kl + 1..k * width + kl + 1 + len];
            for i in k + 1..=last {
                let base = (i - k - 1) * width;
                let ik = base + (k + kl - i);
                let l = tail[ik] / pivot;
                tail[ik] = l;
                if l != T::zero() {
                    let irow = &mut tail[ik + 1..ik + 1 + len];
                    for (x, &u) in irow.iter_mut().zip(krow) {
                        *x -= l * u;
                    }
                }
            }
        }
        Ok(lu)
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        if self.unpivoted {
            let (kl, w) = (self.kl, self.width);
            for i in 1..n {
                let k0 = i.saturating_sub(kl);
                let row = &self.ab[i * w + (k0 + kl - i)..i * w + kl];
                let s: T = row.iter().zip(&b[k0..i]).map(|(&l, &y)| l * y).sum();
                b[i] -= s;
            }
            for i in (0..n).rev() {
                let j1 = (i + self.ku).min(n - 1);
                let row = &self.ab[i * w + kl..=i * w + kl + (j1 - i)];
                let s: T = row[1..].iter().zip(&b[i + 1..=j1]).map(|(&u, &x)| u * x).sum();
                b[i] = (b[i] - s) / row[0];
            }
            return;
        }
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != T::zero() {
                for i in k + 1..=(k + self.kl).min(n - 1) {
                    b[i] -= self.ab[self.idx(i, k)] * bk;
                }
            }
        }
        let uw = self.kl + self.ku;
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + uw).min(n - 1) {
                s -= self.ab[self.idx(i, j)] * b[j];
            }
            b[i] = s / self.ab[self.idx(i, i)];
        }
    }
}

/// Dense LU with partial pivoting, row-major.
#[derive(Debug, Clone)]
pub struct DenseLu<T> {
    n: usize,
    a: Vec<T>,
    piv: Vec<usize>,
}

impl<T: Real> DenseLu<T> {
    pub fn factor(n: usize, mut a: Vec<T>) -> Result<Self, SingularMatrix> {
        assert_eq!(a.len(), n * n);
        let mut piv = vec![0; n];
        for k in 0..n {
            let (mut p, mut best) = (k, a[k * n + k].abs());
            for i in k + 1..n {
                if a[i * n + k].abs() > best {
                    best = a[i * n + k].abs();
                    p = i;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(SingularMatrix);
            }
            piv[k] = p;
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let l = a[i * n + k] / pivot;
                a[i * n + k] = l;
                for j in k + 1..n {
                    let v = a[k * n + j];
                    a[i * n + j] -= l * v;
                }
            }
        }
        Ok(Self { n, a, piv })
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        for k in 0..n {
            b.swap(k, self.piv[k]);
        }
        for i in 0..n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.a[i * n + j] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= self.a[i * n + j] * b[j];
            }
            b[i] = s / self.a[i * n + i];
        }
    }
}

/// LU of a matrix that is banded except for its last `border` rows and columns.
#[derive(Debug, Clone)]
pub struct BorderedBandLu<T> {
    n: usize,
    n1: usize,
    band: BandLu<T>,
    /// `A11^{-1} A12`, column-major (`border` columns of length `n1`).
    y: Vec<T>,
    /// Sparse `A21` rows.
    a21: Vec<Vec<(usize, T)>>,
    schur: Option<DenseLu<T>>,
}

impl<T: Real> BorderedBandLu<T> {
    pub fn factor(m: &CsrMatrix<T>, bandwidth: usize, border: usize) -> Result<Self, SingularMatrix> {
        let n = m.dim();
        assert!(border < n);
        let n1 = n - border;
        let mut band_entries = Vec::with_capacity(m.nnz());
        let mut a12 = vec![T::zero(); n1 * border];
        let mut a21 = vec![Vec::new(); border];
        let mut a22 = vec![T::zero(); border * border];
        for i in 0..n {
            for (j, v) in m.row(i) {
                match (i < n1, j < n1) {
                    (true, true) => band_entries.push((i, j, v)),
                    (true, false) => a12[(j - n1) * n1 + i] += v,
                    (false, true) => a21[i - n1].push((j, v)),
                    (false, false) => a22[(i - n1) * border + (j - n1)] += v,
                }
            }
        }
        let band = BandLu::factor(n1, bandwidth, bandwidth, band_entries)?;
        let mut y = a12;
        for col in y.chunks_mut(n1.max(1)).take(border) {
            band.solve_in_place(col);
        }
        let schur = if border > 0 {
            let mut s = a22;
            for (r, row) in a21.iter().enumerate() {
                for c in 0..border {
                    let yc = &y[c * n1..(c + 1) * n1];
                    let acc: T = row.iter().map(|&(j, v)| v * yc[j]).sum();
                    s[r * border + c] -= acc;
                }
            }
            Some(DenseLu::factor(border, s)?)
        } else {
            None
        };
        Ok(Self {
            n,
            n1,
            band,
            y,
            a21,
            schur,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [T]) {
        assert_eq!(x.len(), self.n);
        let n1 = self.n1;
        let (x1, x2) = x.split_at_mut(n1);
        self.band.solve_in_place(x1);
        if let Some(schur) = &self.schur {
            for (r, row) in self.a21.iter().enumerate() {
                let acc: T = row.iter().map(|&(j, v)| v * x1[j]).sum();
                x2[r] -= acc;
            }
            schur.solve_in_place(x2);
            for (c, &x2c) in x2.iter().enumerate() {
                if x2c != T::zero() {
                    let yc = &self.y[c * n1..(c + 1) * n1];
                    for (xi, &yi) in x1.iter_mut().zip(yc) {
                        *xi -= yi * x2c;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_periodic_banded(nb: usize, bs: usize, rng: &mut ChaCha8Rng) -> CsrMatrix<f64> {
        // block-cyclic tridiagonal matrix with tridiagonal blocks
        let n = nb * bs;
        let mut rows = vec![Vec::new(); n];
        for i in 0..nb {
            for j in 0..bs {
                let p = i * bs + j;
                rows[p].push((p, 4.0 + rng.gen::<f64>()));
                if j > 0 {
                    rows[p].push((p - 1, rng.gen_range(-1.0..1.0)));
                }
                if j + 1 < bs {
                    rows[p].push((p + 1, rng.gen_range(-1.0..1.0)));
                }
                rows[p].push((((i + 1) % nb) * bs + j, rng.gen_range(-1.0..1.0)));
                rows[p].push((((i + nb - 1) % nb) * bs + j, rng.gen_range(-1.0..1.0)));
            }
        }
        CsrMatrix::from_rows(rows)
    }

    #[test]
    fn bordered_solve_matches_matvec() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(nb, bs) in &[(8, 4), (5, 1), (12, 7)] {
            let m = random_periodic_banded(nb, bs, &mut rng);
            let border = if nb > 2 { bs } else { 0 };
            assert!(m.max_bandwidth_ignoring(border) <= bs);
            let lu = BorderedBandLu::factor(&m, bs, border).unwrap();
            let x: Vec<f64> = (0..nb * bs).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b = m.mul_vec(&x);
            let sol = lu.solve(&b);
            let err = sol.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-12, "err {err}");
        }
    }

    #[test]
    fn band_lu_needs_pivoting() {
        // zero leading diagonal forces a row swap
        let entries = vec![
            (0, 0, 0.0),
            (0, 1, 1.0),
            (1, 0, 2.0),
            (1, 1, 1.0),
            (1, 2, 1.0),
            (2, 1, 1.0),
            (2, 2, 3.0),
        ];
        let lu = BandLu::factor(3, 1, 1, entries).unwrap();
        let mut b: Vec<f64> = vec![1.0, 4.0, 7.0];
        lu.solve_in_place(&mut b);
        // x = (0.5, 1, 2)
        for (bi, xi) in b.iter().zip([0.5, 1.0, 2.0]) {
            assert!((bi - xi).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_is_reported() {
        let entries = vec![(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)];
        assert!(BandLu::factor(2, 1, 1, entries).is_err());
    }

    #[test]
    fn dense_lu_roundtrip() {
        let a = vec![2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0f64];
        let lu = DenseLu::factor(3, a).unwrap();
        let mut b = vec![3.0, 5.0, 5.0];
        lu.solve_in_place(&mut b);
        for v in b {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn csr_helpers() {
        let m = CsrMatrix::from_rows(vec![
            vec![(0, 1.0), (1, 2.0), (1, 1.0)],
            vec![(0, -1.0), (1, 4.0)],
        ]);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.transpose().get(1, 0), 3.0);
        assert_eq!(m.norm_inf(), 5.0);
        assert!(!m.is_metzler());
        let s = m.shifted_negation(10.0);
        assert_eq!(s.get(0, 0), 9.0);
        assert_eq!(s.get(1, 0), 1.0);
    }
}
