//! Dense Liouvillian spectra.
//!
//! A Lindblad generator maps Hermitian operators to Hermitian operators, so
//! in an orthonormal basis of Hermitian matrices it is a *real* `d² x d²`
//! matrix. Diagonalising that real matrix is several times cheaper than the
//! complex problem and makes the conjugation symmetry of the spectrum
//! exact. Left modes come from the inverse of the right eigenvector matrix,
//! which makes the pair biorthogonal even inside degenerate blocks.

use std::cmp::Ordering;
use std::f64::consts::FRAC_1_SQRT_2;

use faer::diag::Diag;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{evd_real, evd_scratch, ComputeEigenvectors};
use faer::linalg::solvers::DenseSolveCore;
use faer::{get_global_parallelism, Mat};
use ndarray::Array2;

use super::generator::{Lindbladian, LiouvillianMatrix};
use crate::error::{invalid, numerical, Result};
use crate::linalg::LinalgError;
use crate::sparse::{hermitize, inner, trace, unvec_col, CsrMatrix, C64};

/// Default upper bound on `d²` for dense diagonalisation.
pub const DEFAULT_DENSE_CAP: usize = 5000;

#[derive(Debug, Clone, Copy)]
pub struct SpectrumOptions {
    /// Steady-state threshold on `|Re λ|`, relative to the largest `|Re λ|`.
    pub steady_rel_tol: f64,
    pub dense_cap: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            steady_rel_tol: 1e-8,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }
}

/// Sector of a right mode under the CP split of the state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    Even,
    Odd,
    Mixed,
}

impl Sector {
    pub fn tag(self) -> &'static str {
        match self {
            Sector::Even => "even",
            Sector::Odd => "odd",
            Sector::Mixed => "mixed",
        }
    }
}

/// Eigenvalue ordering: descending real part, then ascending `|Im|`, then
/// ascending `Im`.
pub fn compare_eigenvalues(a: &C64, b: &C64) -> Ordering {
    b.re.total_cmp(&a.re)
        .then(a.im.abs().total_cmp(&b.im.abs()))
        .then(a.im.total_cmp(&b.im))
}

pub fn sort_eigenvalues(vals: &mut [C64]) {
    vals.sort_by(compare_eigenvalues);
}

/// `Δ₁ = |Re λ₁|`. `Δ₂` is the real part of the next eigenvalue after
/// `λ₁` that is not the complex-conjugate partner of `λ₁`.
pub fn gaps_from_sorted(vals: &[C64]) -> (f64, f64) {
    let d1 = vals.get(1).map_or(0.0, |v| v.re.abs());
    let mut j = 2;
    if let (Some(l1), Some(l2)) = (vals.get(1), vals.get(2)) {
        let scale = l1.norm().max(1e-300);
        if l1.im != 0.0 && (l2 - l1.conj()).norm() <= 1e-9 * scale.max(1.0) {
            j = 3;
        }
    }
    let d2 = vals.get(j).map_or(d1, |v| v.re.abs());
    (d1, d2)
}

/// Indices into an orthonormal Hermitian operator basis: diagonal units
/// `E_ii`, symmetric `(E_ij + E_ji)/√2` and antisymmetric
/// `i(E_ij - E_ji)/√2` for `i < j`.
#[derive(Debug, Clone, Copy)]
pub struct HermitianBasis {
    d: usize,
}

impl HermitianBasis {
    pub fn new(d: usize) -> Self {
        Self { d }
    }

    pub fn len(&self) -> usize {
        self.d * self.d
    }

    pub fn is_empty(&self) -> bool {
        self.d == 0
    }

    pub(crate) fn pairs(&self) -> usize {
        self.d * (self.d - 1) / 2
    }

    fn pair(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        i * self.d - i * (i + 1) / 2 + (j - i - 1)
    }

    pub(crate) fn sym(&self, i: usize, j: usize) -> usize {
        self.d + self.pair(i, j)
    }

    pub(crate) fn anti(&self, i: usize, j: usize) -> usize {
        self.d + self.pairs() + self.pair(i, j)
    }

    /// Dense real representation `M_ab = tr(B_a 𝓛(B_b))`.
    pub fn real_matrix(&self, lm: &LiouvillianMatrix) -> Mat<f64> {
        let d = self.d;
        assert_eq!(lm.system_dim(), d);
        let n = self.len();
        let cols = lm.matrix().transpose();
        let mut m = Mat::<f64>::zeros(n, n);
        let scatter = |m: &mut Mat<f64>, b: usize, factor: C64, col: usize| {
            for (r, v) in cols.row(col) {
                let u = factor * v;
                let (p, q) = (r % d, r / d);
                match p.cmp(&q) {
                    Ordering::Equal => m[(p, b)] += u.re,
                    Ordering::Less => {
                        m[(self.sym(p, q), b)] += u.re * FRAC_1_SQRT_2;
                        m[(self.anti(p, q), b)] += u.im * FRAC_1_SQRT_2;
                    }
                    Ordering::Greater => {
                        m[(self.sym(q, p), b)] += u.re * FRAC_1_SQRT_2;
                        m[(self.anti(q, p), b)] -= u.im * FRAC_1_SQRT_2;
                    }
                }
            }
        };
        let one = C64::new(1.0, 0.0);
        let s = C64::new(FRAC_1_SQRT_2, 0.0);
        let a = C64::new(0.0, FRAC_1_SQRT_2);
        for i in 0..d {
            scatter(&mut m, i, one, i + i * d);
            for j in i + 1..d {
                let (ij, ji) = (i + j * d, j + i * d);
                scatter(&mut m, self.sym(i, j), s, ij);
                scatter(&mut m, self.sym(i, j), s, ji);
                scatter(&mut m, self.anti(i, j), a, ij);
                scatter(&mut m, self.anti(i, j), -a, ji);
            }
        }
        m
    }

    /// Column-stacked operator `Σ_b c_b B_b` from coordinates.
    pub fn to_operator(&self, coords: impl Fn(usize) -> C64) -> Vec<C64> {
        let d = self.d;
        let mut out = vec![C64::new(0.0, 0.0); d * d];
        let i_unit = C64::new(0.0, 1.0);
        for i in 0..d {
            out[i + i * d] = coords(i);
            for j in i + 1..d {
                let s = coords(self.sym(i, j));
                let t = coords(self.anti(i, j));
                out[i + j * d] = (s + i_unit * t) * FRAC_1_SQRT_2;
                out[j + i * d] = (s - i_unit * t) * FRAC_1_SQRT_2;
            }
        }
        out
    }
}

/// Sorted spectrum with biorthogonal modes.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    d: usize,
    pub eigenvalues: Vec<C64>,
    /// Row `j` is `vec(ρ_j^R)`.
    right: Array2<C64>,
    /// Row `j` is `vec(ρ_j^L)`.
    left: Array2<C64>,
    pub steady_indices: Vec<usize>,
    pub sectors: Option<Vec<Sector>>,
}

impl SpectrumResult {
    pub fn system_dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn right_mode(&self, j: usize) -> Array2<C64> {
        unvec_col(&self.right.row(j).to_vec(), self.d)
    }

    pub fn left_mode(&self, j: usize) -> Array2<C64> {
        unvec_col(&self.left.row(j).to_vec(), self.d)
    }

    pub fn gaps(&self) -> (f64, f64) {
        gaps_from_sorted(&self.eigenvalues)
    }

    /// `c_j = ⟨ρ_j^L|ρ⟩ / ⟨ρ_j^L|ρ_j^R⟩`.
    pub fn mode_coefficients(&self, rho: &Array2<C64>) -> Vec<C64> {
        let v = crate::sparse::vec_col(rho);
        (0..self.len())
            .map(|j| {
                let l = self.left.row(j);
                let r = self.right.row(j);
                let num: C64 = l.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                let den: C64 = l.iter().zip(r.iter()).map(|(a, b)| a.conj() * b).sum();
                num / den
            })
            .collect()
    }

    /// `Σ_j c_j e^{λ_j t} ρ_j^R`.
    pub fn evolve(&self, coeffs: &[C64], t: f64) -> Array2<C64> {
        let w: ndarray::Array1<C64> = coeffs
            .iter()
            .zip(&self.eigenvalues)
            .map(|(&c, &lam)| c * (lam * t).exp())
            .collect();
        let v = self.right.t().dot(&w);
        unvec_col(&v.to_vec(), self.d)
    }

    /// Steady modes, normalised to unit trace and Hermitised. With a CP
    /// operator, a degenerate steady space is split into its even and odd
    /// sector states.
    pub fn steady_states(&self, cp: Option<&CsrMatrix>) -> Result<Vec<Array2<C64>>> {
        if self.steady_indices.is_empty() {
            return numerical("no steady state found in the spectrum");
        }
        let modes: Vec<Array2<C64>> = self.steady_indices.iter().map(|&j| hermitize(&self.right_mode(j))).collect();
        if modes.len() == 1 {
            let t = trace(&modes[0]);
            return Ok(vec![modes[0].mapv(|v| v / t)]);
        }
        let Some(cp) = cp else {
            return Ok(modes
                .iter()
                .map(|m| {
                    let t = trace(m);
                    if t.norm() > 1e-12 {
                        m.mapv(|v| v / t)
                    } else {
                        m.clone()
                    }
                })
                .collect());
        };
        let (pe, po) = sector_projectors(cp);
        let mut out = Vec::new();
        for p in [&pe, &po] {
            let best = modes
                .iter()
                .map(|m| hermitize(&p.dot(m).dot(p)))
                .max_by(|a, b| trace(a).norm().total_cmp(&trace(b).norm()))
                .expect("non-empty");
            let t = trace(&best);
            if t.norm() > 1e-10 {
                out.push(best.mapv(|v| v / t));
            }
        }
        Ok(out)
    }
}

/// Dense projectors `(1 ± CP)/2`.
pub fn sector_projectors(cp: &CsrMatrix) -> (Array2<C64>, Array2<C64>) {
    let d = cp.nrows();
    let id = Array2::from_diag_elem(d, C64::new(1.0, 0.0));
    let c = cp.to_dense();
    ((&id + &c).mapv(|v| v * 0.5), (&id - &c).mapv(|v| v * 0.5))
}

fn classify(mode: &Array2<C64>, pe: &Array2<C64>, po: &Array2<C64>) -> Sector {
    let total = inner(mode, mode).re;
    let ee = pe.dot(mode).dot(pe);
    let oo = po.dot(mode).dot(po);
    if inner(&ee, &ee).re >= (1.0 - 1e-8) * total {
        Sector::Even
    } else if inner(&oo, &oo).re >= (1.0 - 1e-8) * total {
        Sector::Odd
    } else {
        Sector::Mixed
    }
}

fn check_cap(lv: &Lindbladian, opts: &SpectrumOptions) -> Result<()> {
    check_cap_dim(lv.dim() * lv.dim(), opts)
}

pub(crate) fn check_cap_dim(n: usize, opts: &SpectrumOptions) -> Result<()> {
    if n > opts.dense_cap {
        return invalid(format!(
            "d² = {n} exceeds the dense solver cap {}; use the iterative solver",
            opts.dense_cap
        ));
    }
    Ok(())
}

/// All eigenvalues, sorted.
pub fn eigenvalues(lv: &Lindbladian, opts: &SpectrumOptions) -> Result<Vec<C64>> {
    check_cap(lv, opts)?;
    let hb = HermitianBasis::new(lv.dim());
    let m = hb.real_matrix(&lv.superoperator());
    let mut vals = m.eigenvalues().map_err(|_| LinalgError::EigenNoConvergence)?;
    sort_eigenvalues(&mut vals);
    Ok(vals)
}

pub fn steady_indices(vals: &[C64], rel_tol: f64) -> Vec<usize> {
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.re.abs()));
    let tol = rel_tol * scale.max(f64::MIN_POSITIVE);
    (0..vals.len()).filter(|&j| vals[j].re.abs() < tol).collect()
}

/// Complete eigendecomposition with left and right modes.
pub fn full_spectrum(lv: &Lindbladian, opts: &SpectrumOptions, cp: Option<&CsrMatrix>) -> Result<SpectrumResult> {
    check_cap(lv, opts)?;
    let d = lv.dim();
    let hb = HermitianBasis::new(d);
    let n = hb.len();
    let m = hb.real_matrix(&lv.superoperator());

    let par = get_global_parallelism();
    let mut s_re = Diag::<f64>::zeros(n);
    let mut s_im = Diag::<f64>::zeros(n);
    let mut u = Mat::<f64>::zeros(n, n);
    {
        let req = evd_scratch::<f64>(n, ComputeEigenvectors::No, ComputeEigenvectors::Yes, par, Default::default());
        let mut buf = MemBuffer::new(req);
        evd_real(
            m.as_ref(),
            s_re.as_mut(),
            s_im.as_mut(),
            None,
            Some(u.as_mut()),
            par,
            MemStack::new(&mut buf),
            Default::default(),
        )
        .map_err(|_| LinalgError::EigenNoConvergence)?;
    }
    drop(m);
    let w = u.partial_piv_lu().inverse();
    if (0..n).any(|i| !w[(i, i)].is_finite()) {
        return Err(LinalgError::Singular.into());
    }

    // Unpack conjugate pairs: columns (x, y) hold v = x + iy and its
    // conjugate; rows (r1, r2) of the inverse give (r1 ∓ i r2)/2.
    let mut vals = Vec::with_capacity(n);
    let mut right_coords: Vec<Box<dyn Fn(usize) -> C64 + '_>> = Vec::new();
    let mut left_coords: Vec<Box<dyn Fn(usize) -> C64 + '_>> = Vec::new();
    let mut j = 0;
    while j < n {
        if s_im[j] == 0.0 {
            vals.push(C64::new(s_re[j], 0.0));
            let (uc, wc) = (&u, &w);
            right_coords.push(Box::new(move |k| C64::new(uc[(k, j)], 0.0)));
            left_coords.push(Box::new(move |k| C64::new(wc[(j, k)], 0.0)));
            j += 1;
        } else {
            vals.push(C64::new(s_re[j], s_im[j]));
            vals.push(C64::new(s_re[j], -s_im[j]));
            let (uc, wc) = (&u, &w);
            right_coords.push(Box::new(move |k| C64::new(uc[(k, j)], uc[(k, j + 1)])));
            right_coords.push(Box::new(move |k| C64::new(uc[(k, j)], -uc[(k, j + 1)])));
            // ℓ = T conj(w) with w = (r1 ∓ i r2)/2
            left_coords.push(Box::new(move |k| C64::new(wc[(j, k)], wc[(j + 1, k)]) * 0.5));
            left_coords.push(Box::new(move |k| C64::new(wc[(j, k)], -wc[(j + 1, k)]) * 0.5));
            j += 2;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| compare_eigenvalues(&vals[a], &vals[b]));
    let sorted: Vec<C64> = order.iter().map(|&k| vals[k]).collect();
    let steady = steady_indices(&sorted, opts.steady_rel_tol);

    let mut right = Array2::<C64>::zeros((n, n));
    let mut left = Array2::<C64>::zeros((n, n));
    for (pos, &k) in order.iter().enumerate() {
        let mut r = hb.to_operator(&right_coords[k]);
        let mut l = hb.to_operator(&left_coords[k]);
        // Normalise: unit trace for steady modes, unit Frobenius norm
        // otherwise; the left mode absorbs the inverse scale.
        let scale = if steady.contains(&pos) {
            let t: C64 = (0..d).map(|i| r[i + i * d]).sum();
            if t.norm() > 1e-12 {
                t
            } else {
                C64::new(r.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt(), 0.0)
            }
        } else {
            C64::new(r.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt(), 0.0)
        };
        r.iter_mut().for_each(|v| *v /= scale);
        l.iter_mut().for_each(|v| *v *= scale.conj());
        right.row_mut(pos).assign(&ndarray::ArrayView1::from(&r));
        left.row_mut(pos).assign(&ndarray::ArrayView1::from(&l));
    }
    drop(right_coords);
    drop(left_coords);

    let sectors = cp.map(|cp| {
        let (pe, po) = sector_projectors(cp);
        (0..n)
            .map(|j| classify(&unvec_col(&right.row(j).to_vec(), d), &pe, &po))
            .collect()
    });

    Ok(SpectrumResult {
        d,
        eigenvalues: sorted,
        right,
        left,
        steady_indices: steady,
        sectors,
    })
}

/// Every value in `a` paired with a distinct value of `b` within `tol`.
#[cfg(test)]
pub(crate) fn assert_same_spectrum(a: &[C64], b: &[C64], tol: f64) {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    for x in a {
        let best = (0..b.len())
            .filter(|&j| !used[j])
            .min_by(|&i, &j| (x - b[i]).norm().total_cmp(&(x - b[j]).norm()))
            .unwrap();
        assert!((x - b[best]).norm() < tol, "{x} has no partner, nearest {}", b[best]);
        used[best] = true;
    }
}
