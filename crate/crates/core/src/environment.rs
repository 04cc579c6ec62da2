//! Environment correlators `D(x)` in position and momentum space.

use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::sparse::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelatorKind {
    Delta,
    Gaussian,
    Constant,
}

impl CorrelatorKind {
    pub fn tag(self) -> &'static str {
        match self {
            CorrelatorKind::Delta => "delta",
            CorrelatorKind::Gaussian => "gaussian",
            CorrelatorKind::Constant => "constant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvCorrelator {
    pub kind: CorrelatorKind,
    #[serde(rename = "D0")]
    pub d0: f64,
    pub sigma: f64,
    pub beta: f64,
}

impl EnvCorrelator {
    pub fn new(kind: CorrelatorKind, d0: f64, sigma: f64, beta: f64) -> Result<Self> {
        let env = Self { kind, d0, sigma, beta };
        env.validate()?;
        Ok(env)
    }

    pub fn delta(d0: f64, beta: f64) -> Result<Self> {
        Self::new(CorrelatorKind::Delta, d0, 1.0, beta)
    }

    pub fn gaussian(d0: f64, sigma: f64, beta: f64) -> Result<Self> {
        Self::new(CorrelatorKind::Gaussian, d0, sigma, beta)
    }

    pub fn constant(d0: f64, beta: f64) -> Result<Self> {
        Self::new(CorrelatorKind::Constant, d0, 1.0, beta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d0 >= 0.0 && self.d0.is_finite()) {
            return invalid(format!("D0 must be non-negative, got {}", self.d0));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return invalid(format!("beta must be positive, got {}", self.beta));
        }
        if self.kind == CorrelatorKind::Gaussian && !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return invalid(format!("sigma must be positive, got {}", self.sigma));
        }
        Ok(())
    }

    /// Short label used in output files, e.g. `gaussian(1)`.
    pub fn tag(&self) -> String {
        match self.kind {
            CorrelatorKind::Gaussian => format!("gaussian({})", self.sigma),
            k => k.tag().to_string(),
        }
    }

    /// `D(x)` at integer displacement `x`.
    pub fn value(&self, x: i64) -> f64 {
        match self.kind {
            CorrelatorKind::Delta => {
                if x == 0 {
                    self.d0
                } else {
                    0.0
                }
            }
            CorrelatorKind::Gaussian => {
                let x = x as f64;
                self.d0 * (-x * x / (2.0 * self.sigma * self.sigma)).exp()
            }
            CorrelatorKind::Constant => self.d0,
        }
    }

    /// `D(n1 - n2)` for all site pairs.
    pub fn matrix(&self, n_f: usize) -> Array2<f64> {
        Array2::from_shape_fn((n_f, n_f), |(i, j)| self.value(i as i64 - j as i64))
    }

    /// Periodic transform `D(k) = Σ_x D(x) exp(-2πikx/N_f)`, with `D`
    /// evaluated at the minimal signed displacement of `x` on the ring.
    pub fn fourier(&self, n_f: usize) -> Vec<C64> {
        let samples: Vec<f64> = (0..n_f).map(|x| self.value(ring_displacement(x, n_f))).collect();
        dft(&samples, n_f)
    }
}

/// Minimal signed displacement of `x` on a ring of `n` sites.
pub fn ring_displacement(x: usize, n: usize) -> i64 {
    let x = x as i64;
    let n = n as i64;
    if 2 * x <= n {
        x
    } else {
        x - n
    }
}

fn dft(samples: &[f64], n: usize) -> Vec<C64> {
    (0..n)
        .map(|k| {
            samples
                .iter()
                .enumerate()
                .map(|(x, &v)| v * C64::from_polar(1.0, -2.0 * PI * (k * x) as f64 / n as f64))
                .sum()
        })
        .collect()
}

/// Inverse of [`EnvCorrelator::fourier`]: `D(x) = (1/N_f) Σ_k D(k) e^{2πikx/N_f}`.
pub fn inverse_fourier(dk: &[C64]) -> Vec<C64> {
    let n = dk.len();
    (0..n)
        .map(|x| {
            dk.iter()
                .enumerate()
                .map(|(k, &v)| v * C64::from_polar(1.0, 2.0 * PI * (k * x) as f64 / n as f64))
                .sum::<C64>()
                / n as f64
        })
        .collect()
}
