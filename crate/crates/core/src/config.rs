//! Experiment configuration: per-figure defaults, TOML files and `--set`
//! overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::PhaseMode;
use crate::environment::{CorrelatorKind, EnvCorrelator};
use crate::error::{invalid, Error, Result};
use crate::model::{BasisMode, ModelParams, PhysicalBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Spectrum,
    GapsVsSigma,
    #[serde(rename = "gaps-vs-N", alias = "gaps-vs-n")]
    #[value(name = "gaps-vs-N", alias = "gaps-vs-n")]
    GapsVsN,
    Entropy,
    StringVacuum,
    StringMedium,
    Tstar,
    PhaseDiagram,
    Dilation,
    TrotterClosed,
    Rates,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::GapsVsSigma => "gaps-vs-sigma",
            ExperimentKind::GapsVsN => "gaps-vs-N",
            ExperimentKind::Entropy => "entropy",
            ExperimentKind::StringVacuum => "string-vacuum",
            ExperimentKind::StringMedium => "string-medium",
            ExperimentKind::Tstar => "tstar",
            ExperimentKind::PhaseDiagram => "phase-diagram",
            ExperimentKind::Dilation => "dilation",
            ExperimentKind::TrotterClosed => "trotter-closed",
            ExperimentKind::Rates => "rates",
        }
    }

    /// Experiment behind a figure id such as `fig9`.
    pub fn from_figure(id: &str) -> Result<Self> {
        Ok(match id {
            "fig3" => ExperimentKind::Spectrum,
            "fig4" => ExperimentKind::GapsVsSigma,
            "fig5" => ExperimentKind::GapsVsN,
            "fig6" => ExperimentKind::Entropy,
            "fig7" => ExperimentKind::StringVacuum,
            "fig8" => ExperimentKind::StringMedium,
            "fig9" => ExperimentKind::Tstar,
            "fig10" | "fig11" => ExperimentKind::PhaseDiagram,
            "fig13" | "fig15" => ExperimentKind::Dilation,
            "fig14" => ExperimentKind::TrotterClosed,
            other => return invalid(format!("unknown figure id {other:?}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n_sites: usize,
    pub lattice_spacing: f64,
    pub mass: f64,
    pub coupling: f64,
    pub flux_max: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub correlator: CorrelatorKind,
    #[serde(rename = "D0")]
    pub d0: f64,
    pub sigma: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub t_final: f64,
    pub dt: f64,
    pub snapshot_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub dense_cap: usize,
    /// Allow the iterative solver when `d²` exceeds `dense_cap`.
    pub iterative: bool,
    /// Eigenvalues requested from the iterative solver.
    pub n_eigen: usize,
    pub correlators: Vec<CorrelatorKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub sigmas: Vec<f64>,
    pub n_values: Vec<usize>,
    pub couplings: Vec<f64>,
    #[serde(rename = "D0_values")]
    pub d0_values: Vec<f64>,
    pub masses: Vec<f64>,
    pub modes: Vec<PhaseMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StringConfig {
    /// Even site of the electron; the central string when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub left: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub right: Option<usize>,
    pub t1: f64,
    pub t2: f64,
    pub t_max: f64,
    /// Sites reported in t* summaries.
    pub report_sites: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DilationConfig {
    pub n_cyl: Vec<usize>,
    /// Trotter steps for the closed comparison.
    pub r_values: Vec<usize>,
    /// Paired `(r_H, r_J)` runs at `trotter_n_cyl` cycles; 0 keeps the exact
    /// exponential.
    pub r_h: Vec<usize>,
    pub r_j: Vec<usize>,
    pub trotter_n_cyl: usize,
    pub t_step: f64,
    /// Time step of the RK4 reference.
    pub reference_dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub model: ModelConfig,
    pub environment: EnvironmentConfig,
    pub evolution: EvolutionConfig,
    pub spectrum: SpectrumConfig,
    pub sweep: SweepConfig,
    pub string: StringConfig,
    pub entropy: EntropyConfig,
    pub dilation: DilationConfig,
    pub seed: u64,
    /// Worker threads; 0 uses every available processor.
    pub threads: usize,
}

impl ExperimentConfig {
    /// Defaults reproducing the parameters of the figure behind `kind`.
    pub fn defaults(kind: ExperimentKind) -> Self {
        use ExperimentKind::*;
        let mut c = ExperimentConfig {
            kind,
            model: ModelConfig {
                n_sites: 4,
                lattice_spacing: 1.0,
                mass: 0.5,
                coupling: 0.8,
                flux_max: ModelParams::FLUX_MAX,
            },
            environment: EnvironmentConfig {
                correlator: CorrelatorKind::Delta,
                d0: 1.0,
                sigma: 1.0,
                beta: 0.1,
            },
            evolution: EvolutionConfig {
                t_final: 10.0,
                dt: 0.01,
                snapshot_stride: 50,
            },
            spectrum: SpectrumConfig {
                dense_cap: crate::liouvillian::spectrum::DEFAULT_DENSE_CAP,
                iterative: false,
                n_eigen: 6,
                correlators: vec![CorrelatorKind::Delta, CorrelatorKind::Gaussian, CorrelatorKind::Constant],
            },
            sweep: SweepConfig {
                sigmas: vec![0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0],
                n_values: vec![2, 3, 4, 5],
                couplings: vec![0.8, 0.4, 0.1],
                d0_values: vec![0.01, 0.15, 0.3],
                masses: vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
                modes: vec![PhaseMode::Vacuum, PhaseMode::Medium],
            },
            string: StringConfig {
                left: None,
                right: None,
                t1: 3.0,
                t2: 4.0,
                t_max: 6.0,
                report_sites: vec![0, 1, 2, 3],
            },
            entropy: EntropyConfig {
                t_min: 1e-2,
                t_max: 1e4,
                points: 241,
                fraction: 0.9,
            },
            dilation: DilationConfig {
                n_cyl: vec![1, 2, 3, 4],
                r_values: vec![3, 5, 10],
                r_h: vec![1, 0, 1, 2],
                r_j: vec![0, 1, 1, 2],
                trotter_n_cyl: 4,
                t_step: 0.1,
                reference_dt: 1e-3,
            },
            seed: 7,
            threads: 0,
        };
        match kind {
            Spectrum | Rates => {}
            GapsVsSigma => c.spectrum.correlators = vec![CorrelatorKind::Delta, CorrelatorKind::Constant],
            GapsVsN => c.spectrum.iterative = true,
            Entropy => c.sweep.sigmas = vec![0.1, 1.0, 100.0],
            StringVacuum | StringMedium | Tstar | PhaseDiagram => {
                c.model.n_sites = 6;
                c.model.mass = 0.0;
                c.model.coupling = 0.5;
                c.environment.d0 = 0.15;
                c.evolution.t_final = if kind == StringVacuum { 10.0 } else { 6.0 };
                if kind == PhaseDiagram {
                    c.sweep.couplings = vec![0.2, 0.4, 0.6, 0.8, 1.0];
                    c.evolution.t_final = c.string.t2;
                }
            }
            Dilation | TrotterClosed => {
                c.model.n_sites = 2;
                c.evolution.t_final = 5.0;
            }
        }
        c
    }

    /// Defaults for `kind`, then the TOML file, then `key=value` overrides.
    pub fn resolve(kind: ExperimentKind, file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let toml::Value::Table(mut value) = toml::Value::try_from(Self::defaults(kind)).map_err(|e| Error::Validation(e.to_string()))? else {
            unreachable!("configuration serialises to a table")
        };
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Validation(format!("cannot read config {}: {e}", path.display())))?;
            let table: toml::Table = text
                .parse()
                .map_err(|e| Error::Validation(format!("config {}: {e}", path.display())))?;
            if let Some(k) = table.get("kind") {
                if k.as_str() != Some(kind.name()) && k.as_str() != Some(&kind.name().to_lowercase()) {
                    return invalid(format!("config file declares kind {k} but {} was requested", kind.name()));
                }
            }
            merge(&mut value, table, "")?;
        }
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: Self = toml::Value::Table(value)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Validation(e.message().to_string()))?;
        Ok(cfg)
    }

    pub fn params(&self) -> Result<ModelParams> {
        let m = &self.model;
        ModelParams::new(m.n_sites, m.lattice_spacing, m.mass, m.coupling)
    }

    pub fn correlator(&self, kind: CorrelatorKind) -> Result<EnvCorrelator> {
        let e = &self.environment;
        EnvCorrelator::new(kind, e.d0, e.sigma, e.beta)
    }

    pub fn env(&self) -> Result<EnvCorrelator> {
        self.correlator(self.environment.correlator)
    }

    /// All violations; empty when the configuration can run.
    pub fn validate(&self) -> Vec<String> {
        use ExperimentKind::*;
        let mut v = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                v.push(msg);
            }
        };
        let m = &self.model;
        let e = &self.environment;
        if let Err(err) = self.params() {
            check(false, err.to_string());
        }
        check(m.flux_max == ModelParams::FLUX_MAX, format!("flux_max must be 1, got {}", m.flux_max));
        check(e.beta > 0.0, format!("beta must be positive, got {}", e.beta));
        check(e.d0 >= 0.0, format!("D0 must be non-negative, got {}", e.d0));
        check(e.sigma > 0.0, format!("sigma must be positive, got {}", e.sigma));
        check(self.evolution.dt > 0.0, format!("dt must be positive, got {}", self.evolution.dt));
        check(
            self.evolution.t_final >= self.evolution.dt,
            format!("t_final = {} is shorter than dt", self.evolution.t_final),
        );
        let n_f = 2 * m.n_sites;
        let nonempty = |name: &str, len: usize| (len > 0, format!("{name} grid is empty"));

        match self.kind {
            Spectrum | Rates | Entropy => {
                if self.kind != Rates {
                    self.check_dense(m.n_sites, BasisMode::Constrained, &mut v);
                }
                if self.kind == Spectrum {
                    let (ok, msg) = nonempty("spectrum.correlators", self.spectrum.correlators.len());
                    check_into(&mut v, ok, msg);
                }
                if self.kind == Entropy {
                    let en = &self.entropy;
                    check_into(&mut v, en.t_min > 0.0 && en.t_max > en.t_min, "entropy window must satisfy 0 < t_min < t_max".into());
                    check_into(&mut v, en.points >= 2, "entropy.points must be at least 2".into());
                    check_into(&mut v, en.fraction > 0.0 && en.fraction < 1.0, "entropy.fraction must lie in (0, 1)".into());
                }
            }
            GapsVsSigma => {
                let (ok, msg) = nonempty("sweep.sigmas", self.sweep.sigmas.len());
                check_into(&mut v, ok, msg);
                check_into(&mut v, self.sweep.sigmas.iter().all(|&s| s > 0.0), "all sigmas must be positive".into());
                self.check_dense(m.n_sites, BasisMode::Constrained, &mut v);
            }
            GapsVsN => {
                let (ok, msg) = nonempty("sweep.n_values", self.sweep.n_values.len());
                check_into(&mut v, ok, msg);
                let (ok, msg) = nonempty("sweep.couplings", self.sweep.couplings.len());
                check_into(&mut v, ok, msg);
                for &n in &self.sweep.n_values {
                    if n == 0 || n > 8 {
                        v.push(format!("gaps-vs-N supports 1 <= N <= 8, got {n}"));
                    } else {
                        self.check_dense(n, BasisMode::FullZeroCharge, &mut v);
                    }
                }
            }
            StringVacuum | StringMedium | Tstar | PhaseDiagram => {
                let (left, right) = self.string_endpoints();
                check_into(
                    &mut v,
                    left % 2 == 0 && right % 2 == 1 && left < right && right < n_f,
                    format!("string links ({left}, {right}) must be an even and a larger odd site within 0..{}", n_f.saturating_sub(1)),
                );
                let s = &self.string;
                check_into(&mut v, s.t2 > s.t1 && s.t1 >= 0.0, format!("window [{}, {}] is empty", s.t1, s.t2));
                check_into(&mut v, s.report_sites.iter().all(|&x| x + 1 < n_f), "report_sites must be links below N_f - 1".into());
                match self.kind {
                    Tstar | StringMedium | StringVacuum => {
                        check_into(&mut v, s.t_max <= self.evolution.t_final + 1e-9, "string.t_max exceeds evolution.t_final".into());
                        if self.kind == Tstar {
                            let (ok, msg) = nonempty("sweep.D0_values", self.sweep.d0_values.len());
                            check_into(&mut v, ok, msg);
                            check_into(&mut v, self.sweep.d0_values.iter().all(|&d| d >= 0.0), "D0 values must be non-negative".into());
                        }
                    }
                    PhaseDiagram => {
                        check_into(&mut v, s.t2 <= self.evolution.t_final + 1e-9, "string.t2 exceeds evolution.t_final".into());
                        let (ok, msg) = nonempty("phase (sweep.masses x sweep.couplings)", self.sweep.masses.len() * self.sweep.couplings.len());
                        check_into(&mut v, ok, msg);
                        let (ok, msg) = nonempty("sweep.modes", self.sweep.modes.len());
                        check_into(&mut v, ok, msg);
                    }
                    _ => {}
                }
            }
            Dilation | TrotterClosed => {
                let dl = &self.dilation;
                check_into(&mut v, dl.t_step > 0.0, "dilation.t_step must be positive".into());
                check_into(&mut v, m.n_sites <= 3, "dilation runs are limited to N <= 3".into());
                if self.kind == Dilation {
                    check_into(&mut v, !dl.n_cyl.is_empty() && dl.n_cyl.iter().all(|&n| n > 0), "dilation.n_cyl must be a nonempty list of positive counts".into());
                    check_into(&mut v, dl.r_h.len() == dl.r_j.len(), "dilation.r_h and dilation.r_j must pair up".into());
                    check_into(&mut v, dl.trotter_n_cyl > 0, "dilation.trotter_n_cyl must be positive".into());
                    check_into(&mut v, dl.reference_dt > 0.0 && dl.reference_dt <= dl.t_step, "dilation.reference_dt must lie in (0, t_step]".into());
                } else {
                    check_into(&mut v, !dl.r_values.is_empty() && dl.r_values.iter().all(|&r| r > 0), "dilation.r_values must be a nonempty list of positive counts".into());
                }
            }
        }
        v
    }

    fn check_dense(&self, n_sites: usize, mode: BasisMode, v: &mut Vec<String>) {
        let Ok(params) = ModelParams::new(n_sites, self.model.lattice_spacing, self.model.mass, self.model.coupling) else {
            return;
        };
        let d = PhysicalBasis::enumerate_mode(&params, mode).dim();
        if d * d > self.spectrum.dense_cap && !self.spectrum.iterative {
            v.push(format!(
                "N = {n_sites}: d² = {} exceeds the dense cap {}; set spectrum.iterative = true",
                d * d,
                self.spectrum.dense_cap
            ));
        }
    }

    /// `(left, right)` of the initial string.
    pub fn string_endpoints(&self) -> (usize, usize) {
        let n_f = 2 * self.model.n_sites;
        let left = self.string.left.unwrap_or_else(|| {
            let l = n_f.saturating_sub(4) / 2;
            l - l % 2
        });
        let right = self.string.right.unwrap_or(left + 3);
        (left, right)
    }
}

fn check_into(v: &mut Vec<String>, ok: bool, msg: String) {
    if !ok {
        v.push(msg);
    }
}

fn merge(base: &mut toml::Table, update: toml::Table, prefix: &str) -> Result<()> {
    for (k, val) in update {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match (base.get_mut(&k), val) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => merge(b, u, &path)?,
            (Some(slot), val) => *slot = val,
            // Optional keys are absent from the defaults.
            (None, val) if is_optional(&path) => {
                base.insert(k, val);
            }
            (None, _) => return invalid(format!("unknown config key {path:?}")),
        }
    }
    Ok(())
}

fn is_optional(path: &str) -> bool {
    matches!(path, "string.left" | "string.right")
}

/// `a.b.c=value`, where `value` is parsed as TOML and falls back to a
/// plain string.
fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let Some((key, raw)) = item.split_once('=') else {
        return invalid(format!("override {item:?} is not key=value"));
    };
    let key = key.trim();
    let value: toml::Value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| Error::Validation(format!("empty key in {item:?}")))?;
    let mut update = toml::Table::new();
    update.insert(last.to_string(), value);
    for p in parts.into_iter().rev() {
        let mut t = toml::Table::new();
        t.insert(p.to_string(), toml::Value::Table(update));
        update = t;
    }
    merge(table, update, "")
}
