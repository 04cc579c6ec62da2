//! Lattice parameters and the Gauss-law constrained basis.
//!
//! A configuration is stored as the occupation bits of the `N_f = 2N`
//! staggered sites (bit `n` set means `σ_z(n) = +1`). On even sites a set
//! bit is an electron; on odd sites a *cleared* bit is a positron. Link
//! fluxes follow from the bits by accumulating the staggered charge from
//! the left boundary, so they are never stored independently of the bits.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Largest number of physical sites accepted. The enumeration walks all
/// `2^{N_f}` bit patterns.
pub const MAX_SITES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_sites: usize,
    pub lattice_spacing: f64,
    pub mass: f64,
    pub coupling: f64,
}

impl ModelParams {
    pub const FLUX_MAX: i32 = 1;

    pub fn new(n_sites: usize, lattice_spacing: f64, mass: f64, coupling: f64) -> Result<Self> {
        let p = Self {
            n_sites,
            lattice_spacing,
            mass,
            coupling,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 || self.n_sites > MAX_SITES {
            return invalid(format!("n_sites must be in 1..={MAX_SITES}, got {}", self.n_sites));
        }
        if !(self.lattice_spacing > 0.0 && self.lattice_spacing.is_finite()) {
            return invalid(format!("lattice spacing must be positive, got {}", self.lattice_spacing));
        }
        if !(self.mass >= 0.0 && self.mass.is_finite()) {
            return invalid(format!("mass must be non-negative, got {}", self.mass));
        }
        if !(self.coupling >= 0.0 && self.coupling.is_finite()) {
            return invalid(format!("coupling must be non-negative, got {}", self.coupling));
        }
        Ok(())
    }

    /// `N_f = 2N`.
    pub fn n_fermion_sites(&self) -> usize {
        2 * self.n_sites
    }

    pub fn n_links(&self) -> usize {
        self.n_fermion_sites() - 1
    }
}

/// Which occupation patterns make up the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisMode {
    /// Zero net charge and `|ℓ| ≤ 1` on every link.
    Constrained,
    /// Zero net charge only (equal electron and positron numbers).
    FullZeroCharge,
}

/// Staggered charge on site `n` for occupation bit `b`: `-1` for an
/// electron, `+1` for a positron, `0` otherwise.
#[inline]
pub fn site_charge(n: usize, occupied: bool) -> i32 {
    match (n.is_multiple_of(2), occupied) {
        (true, true) => -1,
        (false, false) => 1,
        _ => 0,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub bits: u32,
    /// `fluxes[k]` lives on the link between sites `k` and `k + 1`.
    pub fluxes: Vec<i32>,
}

impl Configuration {
    pub fn from_bits(bits: u32, n_f: usize) -> Self {
        let (fluxes, _) = flux_path(bits, n_f);
        Self { bits, fluxes }
    }

    pub fn occupied(&self, n: usize) -> bool {
        self.bits >> n & 1 == 1
    }

    /// `σ_z(n)` as `±1`.
    pub fn sigma_z(&self, n: usize) -> f64 {
        if self.occupied(n) {
            1.0
        } else {
            -1.0
        }
    }

    pub fn electrons(&self, n_f: usize) -> usize {
        (0..n_f).step_by(2).filter(|&n| self.occupied(n)).count()
    }

    pub fn positrons(&self, n_f: usize) -> usize {
        (1..n_f).step_by(2).filter(|&n| !self.occupied(n)).count()
    }

    pub fn bit_string(&self, n_f: usize) -> String {
        (0..n_f).map(|n| if self.occupied(n) { '1' } else { '0' }).collect()
    }
}

/// Link fluxes and the total charge (the flux that would sit past the last
/// site) for an occupation pattern.
pub fn flux_path(bits: u32, n_f: usize) -> (Vec<i32>, i32) {
    let mut fluxes = Vec::with_capacity(n_f.saturating_sub(1));
    let mut ell = 0;
    for n in 0..n_f {
        ell += site_charge(n, bits >> n & 1 == 1);
        if n + 1 < n_f {
            fluxes.push(ell);
        }
    }
    (fluxes, ell)
}

/// Bits of the bare vacuum: even sites empty, odd sites set.
pub fn vacuum_bits(n_f: usize) -> u32 {
    (0..n_f).filter(|n| n % 2 == 1).fold(0, |acc, n| acc | 1 << n)
}

#[derive(Debug, Clone)]
pub struct PhysicalBasis {
    n_f: usize,
    mode: BasisMode,
    configurations: Vec<Configuration>,
    lookup: HashMap<u32, usize>,
}

impl PhysicalBasis {
    /// Gauss-law basis with flux truncation.
    pub fn enumerate(params: &ModelParams) -> Self {
        Self::enumerate_mode(params, BasisMode::Constrained)
    }

    pub fn enumerate_mode(params: &ModelParams, mode: BasisMode) -> Self {
        let n_f = params.n_fermion_sites();
        let mut configurations = Vec::new();
        for bits in 0u32..(1u32 << n_f) {
            let (fluxes, total) = flux_path(bits, n_f);
            if total != 0 {
                continue;
            }
            if mode == BasisMode::Constrained && fluxes.iter().any(|l| l.abs() > ModelParams::FLUX_MAX) {
                continue;
            }
            configurations.push(Configuration { bits, fluxes });
        }
        let lookup = configurations.iter().enumerate().map(|(i, c)| (c.bits, i)).collect();
        Self {
            n_f,
            mode,
            configurations,
            lookup,
        }
    }

    pub fn n_fermion_sites(&self) -> usize {
        self.n_f
    }

    pub fn mode(&self) -> BasisMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.configurations.len()
    }

    pub fn configurations(&self) -> &[Configuration] {
        &self.configurations
    }

    pub fn config(&self, i: usize) -> &Configuration {
        &self.configurations[i]
    }

    pub fn index_of(&self, bits: u32) -> Option<usize> {
        self.lookup.get(&bits).copied()
    }

    pub fn vacuum_index(&self) -> usize {
        self.index_of(vacuum_bits(self.n_f)).expect("bare vacuum is always in the basis")
    }

    /// Debug dump: `index,occupation_bits,flux_vector`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,occupation_bits,flux_vector\n");
        for (i, c) in self.configurations.iter().enumerate() {
            let fluxes: Vec<String> = c.fluxes.iter().map(|l| l.to_string()).collect();
            let _ = writeln!(out, "{i},{},{}", c.bit_string(self.n_f), fluxes.join(" "));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(n: usize) -> ModelParams {
        ModelParams::new(n, 1.0, 0.5, 0.8).unwrap()
    }

    /// Independent filter: count electrons/positrons and walk the Gauss law
    /// with the bit formula written out directly.
    fn brute_force_dim(n_f: usize) -> usize {
        (0u32..1 << n_f)
            .filter(|&bits| {
                let mut ell: i32 = 0;
                for n in 0..n_f {
                    let s = if bits >> n & 1 == 1 { 1 } else { -1 };
                    let pm = if n % 2 == 0 { 1 } else { -1 };
                    // ℓ_{n+1} - ℓ_n = -(σ_z + 1)/2 - ((-1)^n - 1)/2
                    ell += -(s + 1) / 2 - (pm - 1) / 2;
                    if ell.abs() > 1 {
                        return false;
                    }
                }
                ell == 0
            })
            .count()
    }

    #[test]
    fn dimension_sequence() {
        let dims: Vec<usize> = (1..=6).map(|n| PhysicalBasis::enumerate(&params(n)).dim()).collect();
        assert_eq!(dims, vec![2, 6, 19, 61, 197, 638]);
        for n in 1..=6 {
            assert_eq!(dims[n - 1], brute_force_dim(2 * n));
        }
    }

    #[test]
    fn vacuum_and_string_fluxes() {
        let b = PhysicalBasis::enumerate(&params(2));
        let vac = b.config(b.vacuum_index());
        assert_eq!(vac.fluxes, vec![0, 0, 0]);
        // electron at 0, positron at 3
        let bits = vacuum_bits(4) | 1;
        let bits = bits & !(1 << 3);
        let i = b.index_of(bits).unwrap();
        assert_eq!(b.config(i).fluxes, vec![-1, -1, -1]);
    }

    #[test]
    fn ordering_is_ascending() {
        let b = PhysicalBasis::enumerate(&params(3));
        assert!(b.configurations().windows(2).all(|w| w[0].bits < w[1].bits));
    }

    #[test]
    fn full_mode_contains_long_range_pairs() {
        // |e⁻,0,e⁻,e⁺,0,e⁺⟩ on six sites: electrons at 0 and 2, positrons at 3 and 5.
        let p = params(3);
        let bits = 0b000111u32;
        let constrained = PhysicalBasis::enumerate(&p);
        let full = PhysicalBasis::enumerate_mode(&p, BasisMode::FullZeroCharge);
        assert_eq!(flux_path(bits, 6).1, 0);
        assert!(constrained.index_of(bits).is_none());
        assert!(full.index_of(bits).is_some());
        assert_eq!(full.dim(), 20);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(ModelParams::new(0, 1.0, 0.5, 0.8).is_err());
        assert!(ModelParams::new(2, 0.0, 0.5, 0.8).is_err());
        assert!(ModelParams::new(2, 1.0, -0.1, 0.8).is_err());
    }

    proptest! {
        #[test]
        fn gauss_law_holds(n in 1usize..=5) {
            let b = PhysicalBasis::enumerate(&params(n));
            let n_f = 2 * n;
            for c in b.configurations() {
                let mut prev = 0;
                for site in 0..n_f {
                    let next = if site + 1 < n_f { c.fluxes[site] } else { 0 };
                    let sz = c.sigma_z(site) as i32;
                    let pm = if site % 2 == 0 { 1 } else { -1 };
                    prop_assert_eq!(next - prev, -(sz + 1) / 2 - (pm - 1) / 2);
                    prop_assert!(next.abs() <= ModelParams::FLUX_MAX);
                    prev = next;
                }
                prop_assert_eq!(c.electrons(n_f), c.positrons(n_f));
            }
        }
    }
}
