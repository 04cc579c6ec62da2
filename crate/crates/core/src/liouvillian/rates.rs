//! Momentum-space rate estimates for the dissipator.

use std::f64::consts::PI;

use ndarray::Array2;

use crate::error::{invalid, Result};
use crate::linalg;
use crate::sparse::{dagger, CsrMatrix, C64};

/// Relative spacing below which two energy levels count as degenerate.
const DEGENERACY_TOL: f64 = 1e-9;

/// `L(k) = Σ_n L(n) e^{-2πikn/N_f}`, dense.
pub fn momentum_jumps(jumps: &[CsrMatrix]) -> Vec<Array2<C64>> {
    let n_f = jumps.len();
    let dense: Vec<Array2<C64>> = jumps.iter().map(|l| l.to_dense()).collect();
    (0..n_f)
        .map(|k| {
            let mut acc = Array2::<C64>::zeros(dense[0].dim());
            for (n, l) in dense.iter().enumerate() {
                let phase = C64::from_polar(1.0, -2.0 * PI * (k * n) as f64 / n_f as f64);
                acc.scaled_add(phase, l);
            }
            acc
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct RateEstimate {
    pub gamma: Array2<C64>,
    /// `tr Γ / d`.
    pub mean_diagonal: f64,
    /// Mean-diagonal contribution of each momentum, `k = 0..N_f-1`.
    pub per_k: Vec<f64>,
    /// `Σ_{k≥1}` of `per_k`. The `k = 0` term grows with `D(0) = Σ_x D(x)`,
    /// so only this part falls off as the correlator widens.
    pub nonzero_k_mean: f64,
}

/// `Γ = (a² / 2N_f) Σ_k D(k) L^†(k) L(k)`.
pub fn relaxation_rate_estimate(jumps: &[CsrMatrix], d_k: &[C64], a: f64) -> Result<RateEstimate> {
    if jumps.is_empty() || jumps.len() != d_k.len() {
        return invalid(format!("{} jump operators but {} momenta", jumps.len(), d_k.len()));
    }
    let n_f = jumps.len() as f64;
    let d = jumps[0].nrows();
    let lk = momentum_jumps(jumps);
    let mut gamma = Array2::<C64>::zeros((d, d));
    let mut per_k = Vec::with_capacity(lk.len());
    for (l, &dk) in lk.iter().zip(d_k) {
        let term = dagger(l).dot(l).mapv(|v| v * dk * (a * a / (2.0 * n_f)));
        per_k.push((0..d).map(|i| term[(i, i)].re).sum::<f64>() / d as f64);
        gamma += &term;
    }
    let mean_diagonal = (0..d).map(|i| gamma[(i, i)].re).sum::<f64>() / d as f64;
    let nonzero_k_mean = per_k[1..].iter().sum();
    Ok(RateEstimate {
        gamma,
        mean_diagonal,
        per_k,
        nonzero_k_mean,
    })
}

#[derive(Debug, Clone)]
pub struct EigenstateRate {
    pub energy: f64,
    pub rate: f64,
    /// The level shares its energy with another eigenstate, so the
    /// nondegenerate formula is only indicative.
    pub degenerate: bool,
}

/// `Γ_n = (a² / N_f) Σ_{k≥1} D(k) Σ_{m≠n} |⟨E_m|L(k)|E_n⟩|²` for every
/// eigenstate of `H`, in ascending energy order. The `k = 0` mode is left
/// out of the sum.
pub fn eigenstate_dissipation_rates(
    h: &CsrMatrix,
    jumps: &[CsrMatrix],
    d_k: &[C64],
    a: f64,
) -> Result<Vec<EigenstateRate>> {
    if jumps.is_empty() || jumps.len() != d_k.len() {
        return invalid(format!("{} jump operators but {} momenta", jumps.len(), d_k.len()));
    }
    let n_f = jumps.len() as f64;
    let (energies, u) = linalg::eigh(&h.to_dense())?;
    let d = energies.len();
    let ud = dagger(&u);
    let scale = energies.iter().fold(1.0f64, |m, e| m.max(e.abs()));
    let rotated: Vec<Array2<C64>> = momentum_jumps(jumps).iter().map(|l| ud.dot(l).dot(&u)).collect();
    Ok((0..d)
        .map(|n| {
            let mut rate = 0.0;
            for (l, dk) in rotated.iter().zip(d_k).skip(1) {
                let s: f64 = (0..d).filter(|&m| m != n).map(|m| l[(m, n)].norm_sqr()).sum();
                rate += dk.re * s;
            }
            let degenerate = (0..d).any(|m| m != n && (energies[m] - energies[n]).abs() <= DEGENERACY_TOL * scale);
            EigenstateRate {
                energy: energies[n],
                rate: rate * a * a / n_f,
                degenerate,
            }
        })
        .collect())
}

/// Rate of a single eigenstate, indexed in ascending energy order.
pub fn eigenstate_dissipation_rate(
    n: usize,
    h: &CsrMatrix,
    jumps: &[CsrMatrix],
    d_k: &[C64],
    a: f64,
) -> Result<EigenstateRate> {
    if n >= h.nrows() {
        return invalid(format!("eigenstate {n} out of range for dimension {}", h.nrows()));
    }
    Ok(eigenstate_dissipation_rates(h, jumps, d_k, a)?.swap_remove(n))
}
