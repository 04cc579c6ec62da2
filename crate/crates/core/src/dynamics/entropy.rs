//! Entropy curves from the spectral decomposition of the generator.

use ndarray::Array2;

use crate::error::{invalid, Result};
use crate::liouvillian::SpectrumResult;
use crate::sparse::{hermitize, C64};

use super::observables::von_neumann_entropy;

/// `ρ(t) = Σ_j c_j e^{λ_j t} ρ_j^R` for a fixed initial state.
pub struct SpectralEvolution<'a> {
    spec: &'a SpectrumResult,
    coeffs: Vec<C64>,
}

impl<'a> SpectralEvolution<'a> {
    pub fn new(spec: &'a SpectrumResult, rho0: &Array2<C64>) -> Result<Self> {
        let d = spec.system_dim();
        if rho0.dim() != (d, d) {
            return invalid("initial state dimension differs from the spectrum");
        }
        Ok(Self {
            spec,
            coeffs: spec.mode_coefficients(rho0),
        })
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn state(&self, t: f64) -> Array2<C64> {
        hermitize(&self.spec.evolve(&self.coeffs, t))
    }

    pub fn entropy(&self, t: f64) -> Result<f64> {
        von_neumann_entropy(&self.state(t))
    }

    /// Projection onto the steady modes.
    pub fn asymptotic_state(&self) -> Array2<C64> {
        let d = self.spec.system_dim();
        let mut out = Array2::<C64>::zeros((d, d));
        for &j in &self.spec.steady_indices {
            out.scaled_add(self.coeffs[j], &self.spec.right_mode(j));
        }
        hermitize(&out)
    }

    pub fn asymptotic_entropy(&self) -> Result<f64> {
        von_neumann_entropy(&self.asymptotic_state())
    }

    /// First time the entropy reaches `fraction` of its asymptote, located on
    /// a logarithmic grid over `[t_min, t_max]` and refined by bisection.
    pub fn time_to_fraction(&self, fraction: f64, t_min: f64, t_max: f64) -> Result<Option<f64>> {
        if !(t_min > 0.0 && t_max > t_min) {
            return invalid(format!("bad search window [{t_min}, {t_max}]"));
        }
        let target = fraction * self.asymptotic_entropy()?;
        if self.entropy(0.0)? >= target {
            return Ok(Some(0.0));
        }
        let n = 400;
        let ratio = (t_max / t_min).powf(1.0 / n as f64);
        let mut lo = 0.0;
        let mut t = t_min;
        for _ in 0..=n {
            if self.entropy(t)? >= target {
                let mut hi = t;
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if self.entropy(mid)? >= target {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Ok(Some(hi));
            }
            lo = t;
            t *= ratio;
        }
        Ok(None)
    }
}
