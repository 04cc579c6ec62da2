//! Compressed sparse row matrices over `Complex64`.
//!
//! All system operators (Hamiltonians, jump operators, observables, the CP
//! permutation) are stored this way; dense products against density matrices
//! are the hot loop of every time evolution.

use ndarray::Array2;
use num_complex::Complex64;

use crate::parallel;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![C64::new(1.0, 0.0); n])
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d: Vec<C64> = diag.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_diagonal(&d)
    }

    /// Build from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
        .pruned(0.0)
    }

    pub fn from_dense(dense: &Array2<C64>, tol: f64) -> Self {
        let (nr, nc) = dense.dim();
        let mut trip = Vec::new();
        for ((i, j), &v) in dense.indexed_iter() {
            if v.norm() > tol {
                trip.push((i, j, v));
            }
        }
        Self::from_triplets(nr, nc, trip)
    }

    /// Drop entries with modulus `<= tol`.
    pub fn pruned(self, tol: f64) -> Self {
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.values[k].norm() > tol {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn dim(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterate over `(col, value)` of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let range = self.indptr[r]..self.indptr[r + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// Iterate over all `(row, col, value)` entries.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let range = self.indptr[r]..self.indptr[r + 1];
        match self.indices[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => ZERO,
        }
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(r, c, _)| r == c)
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut out = Array2::zeros((self.nrows, self.ncols));
        for (r, c, v) in self.triplets() {
            out[[r, c]] += v;
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let trip = self.triplets().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, trip)
    }

    pub fn adjoint(&self) -> Self {
        let trip = self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.ncols, self.nrows, trip)
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = v.conj());
        out
    }

    pub fn scale(&self, alpha: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out.pruned(0.0)
    }

    /// `alpha * self + beta * other`.
    pub fn axpby(&self, alpha: C64, other: &Self, beta: C64) -> Self {
        assert_eq!(self.dim(), other.dim(), "axpby dimension mismatch");
        let trip = self
            .triplets()
            .map(|(r, c, v)| (r, c, alpha * v))
            .chain(other.triplets().map(|(r, c, v)| (r, c, beta * v)))
            .collect();
        Self::from_triplets(self.nrows, self.ncols, trip)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.axpby(C64::new(1.0, 0.0), other, C64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpby(C64::new(1.0, 0.0), other, C64::new(-1.0, 0.0))
    }

    /// Sparse-sparse product `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows, "matmul dimension mismatch");
        let mut trip = Vec::new();
        let mut acc = vec![ZERO; other.ncols];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; other.ncols];
        for r in 0..self.nrows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !mark[c] {
                        mark[c] = true;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            for &c in &touched {
                trip.push((r, c, acc[c]));
                acc[c] = ZERO;
                mark[c] = false;
            }
            touched.clear();
        }
        Self::from_triplets(self.nrows, other.ncols, trip)
    }

    /// `[self, other] = self*other - other*self`.
    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (br, bc) = other.dim();
        let mut trip = Vec::with_capacity(self.nnz() * other.nnz());
        for (r1, c1, v1) in self.triplets() {
            for (r2, c2, v2) in other.triplets() {
                trip.push((r1 * br + r2, c1 * bc + c2, v1 * v2));
            }
        }
        Self::from_triplets(self.nrows * br, self.ncols * bc, trip)
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other)
            .values
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// Maximum absolute row sum, an upper bound on the spectral norm together
    /// with [`CsrMatrix::norm_one`].
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_one(&self) -> f64 {
        let mut cols = vec![0.0; self.ncols];
        for (_, c, v) in self.triplets() {
            cols[c] += v.norm();
        }
        cols.into_iter().fold(0.0, f64::max)
    }

    /// Dense product `self * x` (dispatches to the parallel kernel when the
    /// `parallel` feature is enabled).
    pub fn mul_dense(&self, x: &Array2<C64>) -> Array2<C64> {
        let mut out = Array2::zeros((self.nrows, x.ncols()));
        self.mul_dense_into(x, &mut out, C64::new(1.0, 0.0), false);
        out
    }

    /// `out = alpha * self * x` (or `out += ...` when `accumulate`).
    pub fn mul_dense_into(&self, x: &Array2<C64>, out: &mut Array2<C64>, alpha: C64, accumulate: bool) {
        assert_eq!(self.ncols, x.nrows(), "mul_dense dimension mismatch");
        assert_eq!(out.dim(), (self.nrows, x.ncols()));
        let xs = x.as_standard_layout();
        let xs = xs.as_slice().expect("standard layout");
        let w = x.ncols();
        let out_slice = out.as_slice_mut().expect("output must be in standard layout");
        parallel::for_each_row(out_slice, w, |r, row| self.dense_row_kernel(r, xs, w, row, alpha, accumulate));
    }

    /// Sequential variant of [`CsrMatrix::mul_dense`].
    pub fn mul_dense_seq(&self, x: &Array2<C64>) -> Array2<C64> {
        assert_eq!(self.ncols, x.nrows(), "mul_dense dimension mismatch");
        let mut out = Array2::zeros((self.nrows, x.ncols()));
        let xs = x.as_standard_layout();
        let xs = xs.as_slice().expect("standard layout");
        let w = x.ncols();
        let one = C64::new(1.0, 0.0);
        for (r, row) in out.as_slice_mut().unwrap().chunks_mut(w.max(1)).enumerate() {
            self.dense_row_kernel(r, xs, w, row, one, false);
        }
        out
    }

    #[inline]
    fn dense_row_kernel(&self, r: usize, xs: &[C64], w: usize, row: &mut [C64], alpha: C64, accumulate: bool) {
        if !accumulate {
            row.iter_mut().for_each(|v| *v = ZERO);
        }
        for (k, a) in self.row(r) {
            let a = a * alpha;
            let xrow = &xs[k * w..(k + 1) * w];
            for (o, &xv) in row.iter_mut().zip(xrow) {
                *o += a * xv;
            }
        }
    }

    /// Dense product `x * self`.
    pub fn dense_mul(&self, x: &Array2<C64>) -> Array2<C64> {
        let mut out = Array2::zeros((x.nrows(), self.ncols));
        self.dense_mul_into(x, &mut out, C64::new(1.0, 0.0), false);
        out
    }

    /// `out = alpha * x * self` (or `out += ...` when `accumulate`).
    pub fn dense_mul_into(&self, x: &Array2<C64>, out: &mut Array2<C64>, alpha: C64, accumulate: bool) {
        assert_eq!(x.ncols(), self.nrows, "dense_mul dimension mismatch");
        assert_eq!(out.dim(), (x.nrows(), self.ncols));
        let xs = x.as_standard_layout();
        let xs = xs.as_slice().expect("standard layout");
        let xw = x.ncols();
        let w = self.ncols;
        let out_slice = out.as_slice_mut().expect("output must be in standard layout");
        parallel::for_each_row(out_slice, w, |r, row| {
            if !accumulate {
                row.iter_mut().for_each(|v| *v = ZERO);
            }
            let xrow = &xs[r * xw..(r + 1) * xw];
            for (k, &xv) in xrow.iter().enumerate() {
                if xv == ZERO {
                    continue;
                }
                let xv = xv * alpha;
                for (c, a) in self.row(k) {
                    row[c] += xv * a;
                }
            }
        });
    }
}

/// Column-stacking vectorisation: entry `(i, j)` lands at `i + j * nrows`.
pub fn vec_col(m: &Array2<C64>) -> Vec<C64> {
    let (nr, nc) = m.dim();
    let mut out = vec![ZERO; nr * nc];
    for ((i, j), &v) in m.indexed_iter() {
        out[i + j * nr] = v;
    }
    out
}

/// Inverse of [`vec_col`] for a square `d x d` matrix.
pub fn unvec_col(v: &[C64], d: usize) -> Array2<C64> {
    assert_eq!(v.len(), d * d, "vector length is not d^2");
    Array2::from_shape_fn((d, d), |(i, j)| v[i + j * d])
}

/// Dense helpers shared by the rest of the crate.
pub fn dagger(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|v| v.conj())
}

pub fn trace(m: &Array2<C64>) -> C64 {
    m.diag().iter().sum()
}

pub fn frobenius(m: &Array2<C64>) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &Array2<C64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// `tr(A^† B)`.
pub fn inner(a: &Array2<C64>, b: &Array2<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// `(m + m^†) / 2`.
pub fn hermitize(m: &Array2<C64>) -> Array2<C64> {
    let mut out = m.clone();
    let d = m.nrows();
    for i in 0..d {
        for j in 0..d {
            out[[i, j]] = 0.5 * (m[[i, j]] + m[[j, i]].conj());
        }
    }
    out
}

pub fn matmul(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    a.dot(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(n: usize, m: usize, fill: f64, rng: &mut ChaCha8Rng) -> CsrMatrix {
        let mut trip = Vec::new();
        for i in 0..n {
            for j in 0..m {
                if rng.gen::<f64>() < fill {
                    trip.push((i, j, C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
                }
            }
        }
        CsrMatrix::from_triplets(n, m, trip)
    }

    #[test]
    fn duplicate_triplets_are_summed() {
        let m = CsrMatrix::from_triplets(
            2,
            2,
            vec![(0, 1, C64::new(1.0, 0.0)), (0, 1, C64::new(2.0, 0.0)), (1, 0, C64::new(0.0, 0.0))],
        );
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), C64::new(3.0, 0.0));
        assert_eq!(m.get(1, 0), ZERO);
    }

    #[test]
    fn products_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_sparse(7, 5, 0.4, &mut rng);
        let b = random_sparse(5, 6, 0.4, &mut rng);
        let dense = a.to_dense().dot(&b.to_dense());
        let sparse = a.matmul(&b).to_dense();
        assert!(max_abs(&(dense.clone() - sparse)) < 1e-14);

        let x = Array2::from_shape_fn((5, 4), |(i, j)| C64::new(i as f64 - 1.5, j as f64 * 0.3));
        let y = a.mul_dense(&x);
        assert!(max_abs(&(y.clone() - a.to_dense().dot(&x))) < 1e-13);
        assert!(max_abs(&(y - a.mul_dense_seq(&x))) == 0.0);

        let z = Array2::from_shape_fn((3, 7), |(i, j)| C64::new((i * j) as f64, 1.0));
        assert!(max_abs(&(a.dense_mul(&z) - z.dot(&a.to_dense()))) < 1e-13);
    }

    #[test]
    fn kron_matches_dense_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_sparse(2, 3, 0.7, &mut rng);
        let b = random_sparse(3, 2, 0.7, &mut rng);
        let k = a.kron(&b).to_dense();
        for i in 0..2 {
            for j in 0..3 {
                for p in 0..3 {
                    for q in 0..2 {
                        assert!((k[[i * 3 + p, j * 2 + q]] - a.get(i, j) * b.get(p, q)).norm() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn column_stacking_identity() {
        // vec(A X B) = (B^T ⊗ A) vec(X)
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_sparse(3, 3, 0.6, &mut rng);
        let b = random_sparse(3, 3, 0.6, &mut rng);
        let x = Array2::from_shape_fn((3, 3), |_| C64::new(rng.gen(), rng.gen()));
        let lhs = vec_col(&a.to_dense().dot(&x).dot(&b.to_dense()));
        let rhs = b.transpose().kron(&a).matvec(&vec_col(&x));
        for (l, r) in lhs.iter().zip(&rhs) {
            assert!((l - r).norm() < 1e-13);
        }
        assert_eq!(unvec_col(&vec_col(&x), 3), x);
    }

    #[test]
    fn adjoint_and_hermiticity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_sparse(4, 4, 0.5, &mut rng);
        let h = a.add(&a.adjoint());
        assert!(h.is_hermitian(1e-15));
        assert!(max_abs(&(a.adjoint().to_dense() - dagger(&a.to_dense()))) == 0.0);
    }
}
