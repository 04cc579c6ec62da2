//! System operators on a [`PhysicalBasis`].

use ndarray::Array2;

use crate::error::{invalid, Result};
use crate::model::{vacuum_bits, BasisMode, ModelParams, PhysicalBasis};
use crate::sparse::{CsrMatrix, C64};

fn check_basis(basis: &PhysicalBasis, params: &ModelParams) -> Result<()> {
    if basis.n_fermion_sites() != params.n_fermion_sites() {
        return invalid(format!(
            "basis has {} fermion sites but parameters describe {}",
            basis.n_fermion_sites(),
            params.n_fermion_sites()
        ));
    }
    Ok(())
}

/// Off-diagonal hopping triplets: amplitude `1/(2a)` between configurations
/// that differ by creating or annihilating a pair on a nearest-neighbour
/// bond. Targets outside the basis (flux above the cap) are dropped.
fn hopping_triplets(basis: &PhysicalBasis, a: f64) -> Vec<(usize, usize, C64)> {
    let n_f = basis.n_fermion_sites();
    let amp = C64::new(1.0 / (2.0 * a), 0.0);
    let mut trip = Vec::new();
    for (col, c) in basis.configurations().iter().enumerate() {
        for n in 0..n_f - 1 {
            if c.occupied(n) != c.occupied(n + 1) {
                if let Some(row) = basis.index_of(c.bits ^ (0b11 << n)) {
                    trip.push((row, col, amp));
                }
            }
        }
    }
    trip
}

fn mass_diagonal(basis: &PhysicalBasis, m: f64) -> Vec<f64> {
    let n_f = basis.n_fermion_sites();
    basis
        .configurations()
        .iter()
        .map(|c| {
            let s: f64 = (0..n_f)
                .map(|n| if n % 2 == 0 { c.sigma_z(n) } else { -c.sigma_z(n) })
                .sum();
            0.5 * m * s
        })
        .collect()
}

/// Lattice Schwinger Hamiltonian with hopping, electric and staggered mass
/// terms.
pub fn hamiltonian(basis: &PhysicalBasis, params: &ModelParams) -> Result<CsrMatrix> {
    check_basis(basis, params)?;
    if basis.mode() != BasisMode::Constrained {
        return invalid("the Schwinger Hamiltonian needs the flux-truncated basis");
    }
    let a = params.lattice_spacing;
    let e2 = params.coupling * params.coupling;
    let mut trip = hopping_triplets(basis, a);
    let mass = mass_diagonal(basis, params.mass);
    for (i, c) in basis.configurations().iter().enumerate() {
        let electric: f64 = c.fluxes.iter().map(|&l| (l * l) as f64).sum();
        trip.push((i, i, C64::new(mass[i] + 0.5 * a * e2 * electric, 0.0)));
    }
    Ok(CsrMatrix::from_triplets(basis.dim(), basis.dim(), trip))
}

/// Free-fermion Hamiltonian (hopping and mass only) on either basis mode.
pub fn free_fermion_hamiltonian(basis: &PhysicalBasis, params: &ModelParams) -> Result<CsrMatrix> {
    check_basis(basis, params)?;
    let mut trip = hopping_triplets(basis, params.lattice_spacing);
    for (i, m) in mass_diagonal(basis, params.mass).into_iter().enumerate() {
        trip.push((i, i, C64::new(m, 0.0)));
    }
    Ok(CsrMatrix::from_triplets(basis.dim(), basis.dim(), trip))
}

/// `O(n) = (-1)^n (σ_z(n) + 1) / (2a)` for every site.
pub fn charge_operators(basis: &PhysicalBasis, params: &ModelParams) -> Result<Vec<CsrMatrix>> {
    check_basis(basis, params)?;
    let a = params.lattice_spacing;
    Ok((0..basis.n_fermion_sites())
        .map(|n| {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let diag: Vec<f64> = basis
                .configurations()
                .iter()
                .map(|c| sign * (c.sigma_z(n) + 1.0) / (2.0 * a))
                .collect();
            CsrMatrix::from_real_diagonal(&diag)
        })
        .collect())
}

/// `L(n) = O(n) - (β/4)[H, O(n)]`.
pub fn lindblad_operators(h: &CsrMatrix, charges: &[CsrMatrix], beta: f64) -> Result<Vec<CsrMatrix>> {
    if !(beta > 0.0 && beta.is_finite()) {
        return invalid(format!("beta must be positive, got {beta}"));
    }
    for o in charges {
        if o.dim() != h.dim() {
            return invalid("charge operator and Hamiltonian dimensions differ");
        }
    }
    let s = C64::new(-0.25 * beta, 0.0);
    Ok(charges
        .iter()
        .map(|o| o.axpby(C64::new(1.0, 0.0), &h.commutator(o), s))
        .collect())
}

/// Net charge `N_p - N_e`, which equals the flux past the last site. It is
/// zero on the whole physical basis and commutes with every Hamiltonian
/// built here.
pub fn total_charge(basis: &PhysicalBasis) -> CsrMatrix {
    let n_f = basis.n_fermion_sites();
    let diag: Vec<f64> = basis
        .configurations()
        .iter()
        .map(|c| c.positrons(n_f) as f64 - c.electrons(n_f) as f64)
        .collect();
    CsrMatrix::from_real_diagonal(&diag)
}

/// Image of each basis state under CP: reflect `n -> N_f - 1 - n` and
/// invert every occupation bit.
pub fn cp_permutation(basis: &PhysicalBasis) -> Result<Vec<usize>> {
    let n_f = basis.n_fermion_sites();
    basis
        .configurations()
        .iter()
        .map(|c| {
            let mapped = (0..n_f)
                .filter(|&n| !c.occupied(n_f - 1 - n))
                .fold(0u32, |acc, n| acc | 1 << n);
            basis.index_of(mapped).ok_or_else(|| {
                crate::error::Error::Validation(format!(
                    "CP image {mapped:#b} of {:#b} is missing from the basis",
                    c.bits
                ))
            })
        })
        .collect()
}

pub fn cp_operator(basis: &PhysicalBasis) -> Result<CsrMatrix> {
    let perm = cp_permutation(basis)?;
    let d = basis.dim();
    let trip = perm
        .into_iter()
        .enumerate()
        .map(|(col, row)| (row, col, C64::new(1.0, 0.0)))
        .collect();
    Ok(CsrMatrix::from_triplets(d, d, trip))
}

/// Diagonal link operators with the integer flux of each configuration.
pub fn electric_fields(basis: &PhysicalBasis) -> Vec<CsrMatrix> {
    let links = basis.n_fermion_sites() - 1;
    (0..links)
        .map(|k| {
            let diag: Vec<f64> = basis.configurations().iter().map(|c| c.fluxes[k] as f64).collect();
            CsrMatrix::from_real_diagonal(&diag)
        })
        .collect()
}

/// Initial configurations used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialState {
    BareVacuum,
    /// Electron on the even site `left`, positron on the odd site `right`.
    String { left: usize, right: usize },
}

pub fn initial_bits(n_f: usize, kind: InitialState) -> Result<u32> {
    match kind {
        InitialState::BareVacuum => Ok(vacuum_bits(n_f)),
        InitialState::String { left, right } => {
            if left % 2 != 0 || right % 2 != 1 || right <= left || right >= n_f {
                return invalid(format!(
                    "string endpoints must be an even left site and a larger odd right site below {n_f}, got ({left}, {right})"
                ));
            }
            Ok((vacuum_bits(n_f) | 1 << left) & !(1 << right))
        }
    }
}

pub fn basis_index(basis: &PhysicalBasis, kind: InitialState) -> Result<usize> {
    let bits = initial_bits(basis.n_fermion_sites(), kind)?;
    match basis.index_of(bits) {
        Some(i) => Ok(i),
        None => invalid(format!("requested configuration {kind:?} is not in the basis")),
    }
}

/// Rank-one projector onto a basis configuration.
pub fn prepare_state(basis: &PhysicalBasis, kind: InitialState) -> Result<Array2<C64>> {
    let i = basis_index(basis, kind)?;
    let mut rho = Array2::zeros((basis.dim(), basis.dim()));
    rho[[i, i]] = C64::new(1.0, 0.0);
    Ok(rho)
}

/// `|ψ⟩⟨ψ|` for a normalised state vector.
pub fn pure_density(psi: &[C64]) -> Array2<C64> {
    let d = psi.len();
    Array2::from_shape_fn((d, d), |(i, j)| psi[i] * psi[j].conj())
}
