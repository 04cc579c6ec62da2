//! Dense linear algebra on top of faer.
//!
//! The rest of the crate works with `ndarray::Array2<Complex64>`; this module
//! converts at the boundary. faer's `c64` is `num_complex::Complex64`, so the
//! conversions are plain element copies.

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, MatRef, Side};
use ndarray::Array2;
use thiserror::Error;

use crate::sparse::C64;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("eigendecomposition did not converge")]
    EigenNoConvergence,
    #[error("singular value decomposition did not converge")]
    SvdNoConvergence,
    #[error("matrix is singular or numerically rank deficient")]
    Singular,
}

pub fn to_faer(m: &Array2<C64>) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

pub fn from_faer(m: MatRef<'_, C64>) -> Array2<C64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Eigendecomposition of a Hermitian matrix. Eigenvalues ascending; the
/// columns of the returned matrix are the orthonormal eigenvectors.
pub fn eigh(m: &Array2<C64>) -> Result<(Vec<f64>, Array2<C64>), LinalgError> {
    let fm = to_faer(m);
    let evd = fm
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| LinalgError::EigenNoConvergence)?;
    let vals = (0..m.nrows()).map(|i| evd.S()[i].re).collect();
    Ok((vals, from_faer(evd.U())))
}

pub fn eigvalsh(m: &Array2<C64>) -> Result<Vec<f64>, LinalgError> {
    to_faer(m)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| LinalgError::EigenNoConvergence)
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn eigvalsh_real(m: &Array2<f64>) -> Result<Vec<f64>, LinalgError> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| LinalgError::EigenNoConvergence)
}

/// Eigendecomposition of a real symmetric matrix, eigenvalues ascending.
pub fn eigh_real(m: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>), LinalgError> {
    let fm = Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]]);
    let evd = fm
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| LinalgError::EigenNoConvergence)?;
    let vals = (0..m.nrows()).map(|i| evd.S()[i]).collect();
    let u = evd.U();
    Ok((vals, Array2::from_shape_fn(m.dim(), |(i, j)| u[(i, j)])))
}

/// Right eigenpairs of a general complex matrix (unsorted).
pub fn eig(m: &Array2<C64>) -> Result<(Vec<C64>, Array2<C64>), LinalgError> {
    let fm = to_faer(m);
    let e = fm.eigen().map_err(|_| LinalgError::EigenNoConvergence)?;
    let vals = (0..m.nrows()).map(|i| e.S()[i]).collect();
    Ok((vals, from_faer(e.U())))
}

pub fn eigvals(m: &Array2<C64>) -> Result<Vec<C64>, LinalgError> {
    to_faer(m).eigenvalues().map_err(|_| LinalgError::EigenNoConvergence)
}

/// Eigenvalues of a real general matrix.
pub fn eigvals_real(m: &Mat<f64>) -> Result<Vec<C64>, LinalgError> {
    m.eigenvalues().map_err(|_| LinalgError::EigenNoConvergence)
}

/// Right eigenpairs of a real general matrix (eigenvectors complex).
pub fn eig_real(m: &Mat<f64>) -> Result<(Vec<C64>, Mat<C64>), LinalgError> {
    let e = m.eigen().map_err(|_| LinalgError::EigenNoConvergence)?;
    let vals = (0..m.nrows()).map(|i| e.S()[i]).collect();
    Ok((vals, e.U().to_owned()))
}

/// Inverse via partially pivoted LU. Fails if the result is not finite.
pub fn inverse_faer(m: MatRef<'_, C64>) -> Result<Mat<C64>, LinalgError> {
    let inv = m.partial_piv_lu().inverse();
    let finite = (0..inv.ncols()).all(|j| (0..inv.nrows()).all(|i| inv[(i, j)].re.is_finite() && inv[(i, j)].im.is_finite()));
    if finite {
        Ok(inv)
    } else {
        Err(LinalgError::Singular)
    }
}

pub fn inverse(m: &Array2<C64>) -> Result<Array2<C64>, LinalgError> {
    let inv = inverse_faer(to_faer(m).as_ref())?;
    Ok(from_faer(inv.as_ref()))
}

/// Largest singular value.
pub fn spectral_norm(m: &Array2<C64>) -> Result<f64, LinalgError> {
    if m.is_empty() {
        return Ok(0.0);
    }
    let s = to_faer(m).singular_values().map_err(|_| LinalgError::SvdNoConvergence)?;
    Ok(s.first().copied().unwrap_or(0.0))
}

/// `exp(-i * h * t)` for Hermitian `h`, through its eigendecomposition.
pub fn expm_hermitian(h: &Array2<C64>, t: f64) -> Result<Array2<C64>, LinalgError> {
    let (vals, vecs) = eigh(h)?;
    Ok(spectral_propagator(&vals, &vecs, t))
}

/// `V diag(exp(-i λ t)) V^†` from a precomputed eigendecomposition.
pub fn spectral_propagator(vals: &[f64], vecs: &Array2<C64>, t: f64) -> Array2<C64> {
    let mut scaled = vecs.clone();
    for (j, &l) in vals.iter().enumerate() {
        let phase = C64::from_polar(1.0, -l * t);
        scaled.column_mut(j).mapv_inplace(|v| v * phase);
    }
    scaled.dot(&vecs.t().mapv(|v| v.conj()))
}

/// Orthonormalise `v` against the columns `basis[..]` with two passes of
/// classical Gram-Schmidt. Returns the norm before normalisation.
pub fn orthonormalize_against(v: &mut [C64], basis: &[Vec<C64>]) -> f64 {
    for _ in 0..2 {
        for q in basis {
            let proj: C64 = q.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
            for (x, &qi) in v.iter_mut().zip(q) {
                *x -= proj * qi;
            }
        }
    }
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{dagger, max_abs};

    fn sample_hermitian() -> Array2<C64> {
        let a = Array2::from_shape_fn((5, 5), |(i, j)| C64::new((i as f64 + 1.0) * 0.3 - j as f64 * 0.1, (i * j) as f64 * 0.05));
        &a + &dagger(&a)
    }

    #[test]
    fn eigh_reconstructs() {
        let h = sample_hermitian();
        let (vals, vecs) = eigh(&h).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let mut diag = Array2::<C64>::zeros((5, 5));
        for (i, &v) in vals.iter().enumerate() {
            diag[[i, i]] = C64::new(v, 0.0);
        }
        let rebuilt = vecs.dot(&diag).dot(&dagger(&vecs));
        assert!(max_abs(&(rebuilt - &h)) < 1e-12);
    }

    #[test]
    fn propagator_is_unitary_and_groups() {
        let h = sample_hermitian();
        let u1 = expm_hermitian(&h, 0.3).unwrap();
        let u2 = expm_hermitian(&h, 0.6).unwrap();
        let id = Array2::from_diag_elem(5, C64::new(1.0, 0.0));
        assert!(max_abs(&(u1.dot(&dagger(&u1)) - &id)) < 1e-12);
        assert!(max_abs(&(u1.dot(&u1) - u2)) < 1e-12);
    }

    #[test]
    fn inverse_and_norm() {
        let h = sample_hermitian() + Array2::from_diag_elem(5, C64::new(10.0, 0.0));
        let inv = inverse(&h).unwrap();
        let id = Array2::from_diag_elem(5, C64::new(1.0, 0.0));
        assert!(max_abs(&(inv.dot(&h) - id)) < 1e-12);
        let vals = eigvalsh(&h).unwrap();
        let norm = spectral_norm(&h).unwrap();
        assert!((norm - vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))).abs() < 1e-10);
    }
}
