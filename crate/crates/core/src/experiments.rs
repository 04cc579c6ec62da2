//! Experiment runners behind the CLI. Each writes its CSV files into an
//! [`OutputDir`] and returns a JSON summary for the manifest.

use ndarray::Array2;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::dilation::{compare_closed_trotter, dilation_curve, DilationSetup};
use crate::dynamics::{
    rk4_evolve, string_peak_time, subtracted_string_fields, phase_diagram, EvolveOptions, PhaseOptions, Series,
    SpectralEvolution, StringSetup,
};
use crate::environment::{CorrelatorKind, EnvCorrelator};
use crate::error::{Error, Result};
use crate::liouvillian::{
    cp_sector_analysis, eigenstate_dissipation_rates, eigenvalues, full_spectrum, leading_spectrum,
    relaxation_rate_estimate, LeadingOptions, Lindbladian, SpectrumOptions, SpectrumResult,
};
use crate::liouvillian::spectrum::gaps_from_sorted;
use crate::model::{BasisMode, ModelParams, PhysicalBasis};
use crate::operators::{self, InitialState};
use crate::output::{steps_cell, Cell, OutputDir};
use crate::parallel;
use crate::row;
use crate::sparse::{CsrMatrix, C64};

/// Hamiltonian, Lindblad operators and basis of one parameter point.
pub struct OpenModel {
    pub params: ModelParams,
    pub basis: PhysicalBasis,
    pub h: CsrMatrix,
    pub jumps: Vec<CsrMatrix>,
}

/// Which Hamiltonian and basis a model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelVariant {
    Schwinger,
    /// Free fermions on the Gauss-law basis.
    FreeConstrained,
    /// Free fermions on every zero-charge configuration.
    FreeFull,
}

impl ModelVariant {
    pub fn tag(self) -> &'static str {
        match self {
            ModelVariant::Schwinger => "schwinger",
            ModelVariant::FreeConstrained => "free_constrained",
            ModelVariant::FreeFull => "free_full",
        }
    }
}

impl OpenModel {
    pub fn build(params: ModelParams, beta: f64, variant: ModelVariant) -> Result<Self> {
        let mode = match variant {
            ModelVariant::FreeFull => BasisMode::FullZeroCharge,
            _ => BasisMode::Constrained,
        };
        let basis = PhysicalBasis::enumerate_mode(&params, mode);
        let h = match variant {
            ModelVariant::Schwinger => operators::hamiltonian(&basis, &params)?,
            _ => operators::free_fermion_hamiltonian(&basis, &params)?,
        };
        let os = operators::charge_operators(&basis, &params)?;
        let jumps = operators::lindblad_operators(&h, &os, beta)?;
        Ok(Self { params, basis, h, jumps })
    }

    pub fn lindbladian(&self, env: &EnvCorrelator) -> Result<Lindbladian> {
        Lindbladian::new(&self.h, &self.jumps, &env.matrix(self.params.n_fermion_sites()), self.params.lattice_spacing)
    }
}

/// File-name form of a correlator tag: `gaussian(0.1)` becomes `gaussian_0.1`.
pub fn file_tag(env: &EnvCorrelator) -> String {
    env.tag().replace('(', "_").replace(')', "")
}

/// Least-squares slope and intercept of `ln y` against `ln x`.
pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return Err(Error::Numerical("power-law fit needs at least two positive points".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Uniform grid `0, step, ..., t_final`.
pub fn time_grid(t_final: f64, step: f64) -> Vec<f64> {
    let n = (t_final / step + 1e-9).floor() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

/// Logarithmic grid of `points` values over `[t_min, t_max]`.
pub fn log_grid(t_min: f64, t_max: f64, points: usize) -> Vec<f64> {
    let r = (t_max / t_min).ln() / (points - 1) as f64;
    (0..points).map(|i| t_min * (r * i as f64).exp()).collect()
}

fn spectrum_options(cfg: &ExperimentConfig) -> SpectrumOptions {
    SpectrumOptions {
        dense_cap: cfg.spectrum.dense_cap,
        ..SpectrumOptions::default()
    }
}

fn leading_options(cfg: &ExperimentConfig) -> LeadingOptions {
    LeadingOptions {
        seed: cfg.seed,
        ..LeadingOptions::default()
    }
}

/// `(Δ₁, Δ₂, solver)` from the dense spectrum, or the iterative solver when
/// `d²` exceeds the cap and the configuration allows it.
pub fn gaps(lv: &Lindbladian, cfg: &ExperimentConfig) -> Result<(f64, f64, &'static str)> {
    let d = lv.dim();
    if d * d <= cfg.spectrum.dense_cap {
        let vals = eigenvalues(lv, &spectrum_options(cfg))?;
        let (a, b) = gaps_from_sorted(&vals);
        Ok((a, b, "dense"))
    } else if cfg.spectrum.iterative {
        let k = cfg.spectrum.n_eigen.max(4);
        let r = leading_spectrum(lv, k, &leading_options(cfg))?;
        let (a, b) = gaps_from_sorted(&r.eigenvalues);
        Ok((a, b, "iterative"))
    } else {
        Err(Error::Validation(format!(
            "d² = {} exceeds the dense cap {}; set spectrum.iterative = true",
            d * d,
            cfg.spectrum.dense_cap
        )))
    }
}

/// Total electric field `Σ_n E_n`.
fn total_field(basis: &PhysicalBasis) -> CsrMatrix {
    operators::electric_fields(basis)
        .iter()
        .fold(CsrMatrix::zeros(basis.dim(), basis.dim()), |acc, f| acc.add(f))
}

pub fn run(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value> {
    let violations = cfg.validate();
    if !violations.is_empty() {
        return Err(Error::Validation(violations.join("; ")));
    }
    use ExperimentKind::*;
    match cfg.kind {
        Spectrum => spectrum(cfg, out),
        GapsVsSigma => gaps_vs_sigma(cfg, out),
        GapsVsN => gaps_vs_n(cfg, out),
        Entropy => entropy(cfg, out),
        StringVacuum | StringMedium => string_run(cfg, out),
        Tstar => tstar(cfg, out),
        PhaseDiagram => phase(cfg, out),
        Dilation => dilation(cfg, out),
        TrotterClosed => trotter_closed(cfg, out),
        Rates => rates(cfg, out),
    }
}

fn spectrum(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value> {
    let p = cfg.params()?;
    let model = OpenModel::build(p, cfg.environment.beta, ModelVariant::Schwinger)?;
    let cp = operators::cp_operator(&model.basis)?;
    let d = model.basis.dim();
    let mut gap_rows = Vec::new();
    let mut summary = Vec::new();
    for &kind in &cfg.spectrum.correlators {
        let env = cfg.correlator(kind)?;
        let lv = model.lindbladian(&env)?;
        let tag = file_tag(&env);
        let mut rows = Vec::new();
        let (d1, d2, n_steady, cross) = if d * d <= cfg.spectrum.dense_cap {
            let spec = full_spectrum(&lv, &spectrum_options(cfg), Some(&cp))?;
            for (j, lam) in spec.eigenvalues.iter().enumerate() {
                let tr = crate::sparse::trace(&spec.right_mode(j));
                let sector = spec.sectors.as_ref().map_or("na", |s| s[j].tag());
                rows.push(row![j, lam.re, lam.im, tr.re, sector]);
            }
            let cross = cp_sector_analysis(&lv, &cp, &spectrum_options(cfg), false, 1e-12)?.cross_block_norm;
            let (d1, d2) = spec.gaps();
            (d1, d2, spec.steady_indices.len(), cross)
        } else {
            let r = leading_spectrum(&lv, cfg.spectrum.n_eigen.max(4), &leading_options(cfg))?;
            for (j, lam) in r.eigenvalues.iter().enumerate() {
                rows.push(row![j, lam.re, lam.im, f64::NAN, "na"]);
            }
            let (d1, d2) = gaps_from_sorted(&r.eigenvalues);
            let tol = 1e-8 * r.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.re.abs()));
            (d1, d2, r.eigenvalues.iter().filter(|v| v.re.abs() < tol).count(), f64::NAN)
        };
        out.write_csv(
            &format!("spectrum_{tag}.csv"),
            &["j", "re_lambda", "im_lambda", "trace_of_mode", "cp_sector"],
            &rows,
        )?;
        gap_rows.push(row![env.tag(), p.n_sites, p.coupling, p.mass, env.d0, env.beta, d1, d2, n_steady, cross]);
        summary.push(json!({"correlator": env.tag(), "delta1": d1, "delta2": d2, "steady_states": n_steady, "cross_block_norm": cross}));
    }
    out.write_csv(
        "gaps.csv",
        &["correlator", "N", "e", "m", "D0", "beta", "delta1", "delta2", "n_steady", "cross_block_norm"],
        &gap_rows,
    )?;
    Ok(json!({"dim": d, "correlators": summary}))
}

fn gaps_vs_sigma(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value> {
    let p = cfg.params()?;
    let model = OpenModel::build(p, cfg.environment.beta, ModelVariant::Schwinger)?;
    let e = &cfg.environment;
    let mut envs = Vec::new();
    for &s in &cfg.sweep.sigmas {
        envs.push(EnvCorrelator::gaussian(e.d0, s, e.beta)?);
    }
    for &k in &cfg.spectrum.correlators {
        if k != CorrelatorKind::Gaussian {
            envs.push(cfg.correlator(k)?);
        }
    }
    let n_f = p.n_fermion_sites();
    let results = parallel::map(&envs, |env| -> Result<(f64, f64, f64, f64)> {
        let lv = model.lindbladian(env)?;
        let (d1, d2, _) = gaps(&lv, cfg)?;
        let g = relaxation_rate_estimate(&model.jumps, &env.fourier(n_f), p.lattice_spacing)?;
        Ok((d1, d2, g.mean_diagonal, g.nonzero_k_mean))
    });
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (env, r) in envs.iter().zip(results) {
        let (d1, d2, gm, gk) = r?;
        let sigma = if env.kind == CorrelatorKind::Gaussian { Cell::F(env.sigma) } else { Cell::S("na".into()) };
        rows.push(vec![
            Cell::from(env.tag()),
            sigma,
            Cell::from(p.n_sites),
            Cell::from(p.coupling),
            Cell::from(p.mass),
            Cell::from(env.d0),
            Cell::from(env.beta),
            Cell::from(d1),
            Cell::from(d2),
            Cell::from(gm),
            Cell::from(gk),
        ]);
        summary.push(json!({"correlator": env.tag(), "delta1": d1, "delta2": d2, "gamma_mean_diag": gm, "gamma_nonzero_k": gk}));
    }
    out.write_csv(
        "gaps.csv",
        &["correlator", "sigma", "N", "e", "m", "D0", "beta", "delta1", "delta2", "gamma_mean_diag", "gamma_nonzero_k"],
        &rows,
    )?;
    Ok(json!({ "points": summary }))
}

/// One `(variant, e, N)` point of the gap-versus-size sweep.
#[derive(Debug, Clone)]
pub struct SizeGap {
    pub variant: ModelVariant,
    pub coupling: f64,
    pub n_sites: usize,
    pub dim: usize,
    pub delta1: f64,
    pub delta2: f64,
    pub solver: &'static str,
}

pub fn size_gaps(cfg: &ExperimentConfig) -> Result<Vec<SizeGap>> {
    let m = &cfg.model;
    let env = EnvCorrelator::delta(cfg.environment.d0, cfg.environment.beta)?;
    let mut jobs = Vec::new();
    for variant in [ModelVariant::FreeConstrained, ModelVariant::FreeFull] {
        for &n in &cfg.sweep.n_values {
            jobs.push((variant, m.coupling, n));
        }
    }
    for &e in &cfg.sweep.couplings {
        for &n in &cfg.sweep.n_values {
            jobs.push((ModelVariant::Schwinger, e, n));
        }
    }
    parallel::map(&jobs, |&(variant, e, n)| -> Result<SizeGap> {
        let p = ModelParams::new(n, m.lattice_spacing, m.mass, e)?;
        let model = OpenModel::build(p, env.beta, variant)?;
        let lv = model.lindbladian(&env)?;
        let (delta1, delta2, solver) = gaps(&lv, cfg)?;
        Ok(SizeGap {
            variant,
            coupling: e,
            n_sites: n,
            dim: model.basis.dim(),
            delta1,
            delta2,
            solver,
        })
    })
    .into_iter()
    .collect()
}

fn gaps_vs_n(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value> {
    let pts = size_gaps(cfg)?;
    let coupling_cell = |g: &SizeGap| {
        if g.variant == ModelVariant::Schwinger {
            Cell::F(g.coupling)
        } else {
            Cell::S("na".into())
        }
    };
    let rows: Vec<Vec<Cell>> = pts
        .iter()
        .map(|g| {
            vec![
                Cell::from(g.variant.tag()),
                Cell::from(g.n_sites),
                coupling_cell(g),
                Cell::from(g.dim),
                Cell::from(g.delta1),
                Cell::from(g.delta2),
                Cell::from(g.solver),
            ]
        })
        .collect();
    out.write_csv("gaps.csv", &["model", "N", "e", "dim", "delta1", "delta2", "solver"], &rows)?;

    let mut fits = Vec::new();
    let mut summary = Vec::new();
    let mut groups: Vec<(ModelVariant, f64)> = Vec::new();
    for g in &pts {
        if !groups.iter().any(|&(v, e)| v == g.variant && e == g.coupling) {
            groups.push((g.variant, g.coupling));
        }
    }
    for (v, e) in groups {
        let sel: Vec<&SizeGap> = pts.iter().filter(|g| g.variant == v && g.coupling == e).collect();
        let x: Vec<f64> = sel.iter().map(|g| g.n_sites as f64).collect();
        let y: Vec<f64> = sel.iter().map(|g| g.delta1).collect();
        let Ok((slope, intercept)) = fit_power_law(&x, &y) else {
            continue;
        };
        let e_cell = if v == ModelVariant::Schwinger { Cell::F(e) } else { Cell::S("na".into()) };
        fits.push(vec![Cell::from(v.tag()), e_cell, Cell::from(-slope), Cell::from(intercept.exp())]);
        summary.push(json!({"model": v.tag(), "e": e, "alpha": -slope}));
    }
    out.write_csv("fits.csv", &["model", "e", "alpha", "prefactor"], &fits)?;
    Ok(json!({ "fits": summary }))
}

/// Pure states `(|v⟩ ± CP|v⟩)/√2` on the first configuration not fixed by CP.
pub fn sector_states(basis: &PhysicalBasis) -> Result<(Vec<C64>, Vec<C64>)> {
    let perm = operators::cp_permutation(basis)?;
    let Some(i) = (0..perm.len()).find(|&i| perm[i] != i) else {
        return Err(Error::Numerical("every configuration is CP invariant".into()));
    };
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut even = vec![C64::new(0.0, 0.0); basis.dim()];
    let mut odd = even.clone();
    even[i] = C64::new(s, 0.0);
    even[perm[i]] = C64::new(s, 0.0);
    odd[i] = C64::new(s, 0.0);
    odd[perm[i]] = C64::new(-s, 0.0);
    Ok((even, odd))
}

/// Entropy curve of one initial state under one generator.
#[derive(Debug, Clone)]
pub struct EntropyCurve {
    pub correlator: String,
    pub sector: String,
    pub times: Vec<f64>,
    pub entropy: Vec<f64>,
    pub asymptote: f64,
    pub t_fraction: Option<f64>,
}

pub fn entropy_curves(cfg: &ExperimentConfig) -> Result<Vec<EntropyCurve>> {
    let p = cfg.params()?;
    let e = &cfg.environment;
    let model = OpenModel::build(p, e.beta, ModelVariant::Schwinger)?;
    let en = &cfg.entropy;
    let mut times = vec![0.0];
    times.extend(log_grid(en.t_min, en.t_max, en.points));

    let mut envs = vec![EnvCorrelator::delta(e.d0, e.beta)?];
    for &s in &cfg.sweep.sigmas {
        envs.push(EnvCorrelator::gaussian(e.d0, s, e.beta)?);
    }
    envs.push(EnvCorrelator::constant(e.d0, e.beta)?);

    let vacuum = operators::prepare_state(&model.basis, InitialState::BareVacuum)?;
    let (even, odd) = sector_states(&model.basis)?;
    let rho_e = operators::pure_density(&even);
    let rho_o = operators::pure_density(&odd);
    let mix = (&rho_e + &rho_o).mapv(|v| v * 0.5);

    let curve = |env: &EnvCorrelator, spec: &SpectrumResult, rho0: &Array2<C64>, sector: &str| -> Result<EntropyCurve> {
        let ev = SpectralEvolution::new(spec, rho0)?;
        let entropy = times.iter().map(|&t| ev.entropy(t)).collect::<Result<Vec<_>>>()?;
        Ok(EntropyCurve {
            correlator: env.tag(),
            sector: sector.to_string(),
            times: times.clone(),
            entropy,
            asymptote: ev.asymptotic_entropy()?,
            t_fraction: ev.time_to_fraction(en.fraction, en.t_min, en.t_max)?,
        })
    };
    // One decomposition per correlator; the constant one (last) also drives the sector runs.
    let last = envs.len() - 1;
    let groups: Vec<Vec<(&Array2<C64>, &str)>> = (0..envs.len())
        .map(|i| {
            let mut g = vec![(&vacuum, "full")];
            if i == last {
                g.extend([(&rho_e, "even"), (&rho_o, "odd"), (&mix, "mixture")]);
            }
            g
        })
        .collect();
    let per_env = parallel::map(&(0..envs.len()).collect::<Vec<_>>(), |&i| -> Result<Vec<EntropyCurve>> {
        let spec = full_spectrum(&model.lindbladian(&envs[i])?, &spectrum_options(cfg), None)?;
        groups[i].iter().map(|(rho, sector)| curve(&envs[i], &spec, rho, sector)).collect()
    });
    let mut curves = Vec::new();
    for c in per_env {
        curves.extend(c?);
    }
    Ok(curves)
}

fn entropy(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value> {
    let curves = entropy_curves(cfg)?;
    let mut rows = Vec::new();
    let mut summary_rows = Vec::new();
    for c in &curves {
        for (t, s) in c.times.iter().zip(&c.entropy) {
            rows.push(row![*t, *s, c.correlator.clone(), c.sector.clone()]);
        }
        summary_rows.push(row![c.correlator.clone(), c.sector.clone(), c.asymptote, c.t_fraction.unwrap_or(f64::NAN)]);
    }
    out.write_csv("entropy.csv", &["t", "S", "correlator_tag", "sector_tag"], &rows)?;
    out.write_csv("entropy_summary.csv", &["correlator_tag", "sector_tag", "S_inf", "t_fraction"], &summary_rows)?;
    let find = |s: &str| curves.iter().find(|c| c.sector == s).map(|c| c.asymptote);
    let predicted = match (find("even"), find("odd")) {
        (Some(a), Some(b)) => 0.5 * (a + b) + std::f64::consts::LN_2,
        _ => f64::NAN,
    };
    Ok(json!({
        "fraction": cfg.entropy.fraction,
        "mixture_asymptote": find("mixture"),
        "mixture_predicted": predicted,
    }))
}

fn string_setup(cfg: &ExperimentConfig, env: Option<EnvCorrelator>) -> Result<StringSetup> {
    let (left, right) = cfg.string_endpoints();
    Ok(StringSetup {
        params: cfg.params()?,
        env,
        left,
        right,
        t_final: cfg.evolution.t_final,
        dt: cfg.evolution.dt,
    })
}

fn traj_rows(fields: &Series, stride: usize) -> Vec<Vec<Cell>> {
    let mut rows = Vec::new();
    for i in (0..fields.len()).step_by(stride.max(1)) {
        for (link, v) in fields.values[i].iter().enumerate() {
            rows.push(row![fields.times[i], link, *v, 1usize]);
        }
    }
    rows
}

fn string_run(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value> {
    let env = match cfg.kind {
        ExperimentKind::StringVacuum => None,
        _ => Some(cfg.env()?),
    };
    let setup = string_setup(cfg, env)?;
    let fields = subtracted_string_fields(&setup)?;
    // one sample per 0.1 time units
    let stride = ((0.1 / cfg.evolution.dt).round() as usize).max(1);
    out.write_csv("traj.csv", &["t", "link", "E_in_units_of_e", "subtracted_flag"], &traj_rows(&fields, stride))?;
    let tstar = string_peak_time(&fields, cfg.string.t_max)?;
    let d0 = env.map_or(0.0, |e| e.d0);
    let rows: Vec<Vec<Cell>> = tstar.iter().enumerate().map(|(x, &t)| row![x, t, d0]).collect();
    out.write_csv("tstar.csv", &["site", "t_star", "D0"], &rows)?;
    Ok(json!({
        "string": [setup.left, setup.right],
        "D0": d0,
        "t_star": tstar,
    }))
}

/// `t*` per link for the vacuum and every configured `D₀`, vacuum first.
pub fn tstar_sweep(cfg: &ExperimentConfig) -> Result<Vec<(f64, Vec<f64>)>> {
    let mut d0s = vec![0.0];
    d0s.extend(cfg.sweep.d0_values.iter().copied().filter(|&d| d > 0.0));
    let base = cfg.env()?;
    parallel::map(&d0s, |&d0| -> Result<(f64, Vec<f64>)> {
        let env = (d0 > 0.0).then_some(EnvCorrelator { d0, ..base });
        let setup = string_setup(cfg, env)?;
        let fields = subtracted_string_fields(&setup)?;
        Ok((d0, string_peak_time(&fields, cfg.string.t_max)?))
    })
    .into_iter()
    .collect()
}

fn tstar(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value> {
    let sweep = tstar_sweep(cfg)?;
    let mut rows = Vec::new();
    for (d0, ts) in &sweep {
        for (x, t) in ts.iter().enumerate() {
            rows.push(row![x, *t, *d0]);
        }
    }
    out.write_csv("tstar.csv", &["site", "t_star", "D0"], &rows)?;
    let reported: Vec<Value> = sweep
        .iter()
        .map(|(d0, ts)| json!({"D0": d0, "t_star": cfg.string.report_sites.iter().map(|&x| ts[x]).collect::<Vec<_>>()}))
        .collect();
    Ok(json!({"report_sites": cfg.string.report_sites, "curves": reported}))
}

fn phase(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value> {
    let opts = PhaseOptions {
        n_sites: cfg.model.n_sites,
        lattice_spacing: cfg.model.lattice_spacing,
        env: cfg.env()?,
        dt: cfg.evolution.dt,
        t1: cfg.string.t1,
        t2: cfg.string.t2,
    };
    let grid: Vec<(f64, f64)> = cfg
        .sweep
        .masses
        .iter()
        .flat_map(|&m| cfg.sweep.couplings.iter().map(move |&e| (m, e)))
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &mode in &cfg.sweep.modes {
        for pt in phase_diagram(&grid, mode, &opts)? {
            let ebar = match &pt.ebar {
                Ok(v) => *v,
                Err(msg) => {
                    failures.push(json!({"m": pt.mass, "e": pt.coupling, "mode": mode.tag(), "error": msg}));
                    f64::NAN
                }
            };
            rows.push(row![pt.mass, pt.coupling, mode.tag(), ebar]);
        }
    }
    out.write_csv("phase.csv", &["m", "e", "mode", "Ebar"], &rows)?;
    Ok(json!({"points": rows.len(), "failures": failures}))
}

fn steps(r: usize) -> Option<usize> {
    (r > 0).then_some(r)
}

/// Dense N = 2 style setup for the dilation runs: delta correlator, bare
/// vacuum start, `Σ_n E_n` observable.
pub struct DilationProblem {
    pub model: OpenModel,
    pub setup: DilationSetup,
    pub lv: Lindbladian,
    pub rho0: Array2<C64>,
    pub observable: CsrMatrix,
}

impl DilationProblem {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let e = &cfg.environment;
        let env = EnvCorrelator::delta(e.d0, e.beta)?;
        let model = OpenModel::build(cfg.params()?, e.beta, ModelVariant::Schwinger)?;
        let setup = DilationSetup::delta(&model.h, &model.jumps, env.d0, model.params.lattice_spacing)?;
        let lv = model.lindbladian(&env)?;
        let rho0 = operators::prepare_state(&model.basis, InitialState::BareVacuum)?;
        let observable = total_field(&model.basis);
        Ok(Self {
            model,
            setup,
            lv,
            rho0,
            observable,
        })
    }

    /// RK4 values of the observable at every grid time.
    pub fn reference(&self, times: &[f64], dt: f64) -> Result<Vec<f64>> {
        let t_final = *times.last().expect("non-empty grid");
        let opts = EvolveOptions::new(t_final, dt);
        let traj = rk4_evolve(&self.rho0, &self.lv, std::slice::from_ref(&self.observable), &opts)?;
        let s = &traj.observables;
        times
            .iter()
            .map(|&t| {
                let i = (t / dt).round() as usize;
                s.values.get(i).map(|v| v[0]).ok_or_else(|| Error::Numerical(format!("reference misses t = {t}")))
            })
            .collect()
    }

    pub fn curve(&self, times: &[f64], n_cyl: usize, r_h: Option<usize>, r_j: Option<usize>) -> Result<Vec<f64>> {
        dilation_curve(&self.rho0, &self.setup, times, n_cyl, r_h, r_j, &self.observable.to_dense())
    }
}

fn dilation(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value> {
    let dl = &cfg.dilation;
    let prob = DilationProblem::new(cfg)?;
    let times = time_grid(cfg.evolution.t_final, dl.t_step);
    let reference = prob.reference(&times, dl.reference_dt)?;

    let mut jobs: Vec<(usize, Option<usize>, Option<usize>)> = dl.n_cyl.iter().map(|&n| (n, None, None)).collect();
    for (&rh, &rj) in dl.r_h.iter().zip(&dl.r_j) {
        jobs.push((dl.trotter_n_cyl, steps(rh), steps(rj)));
    }
    let mut rows: Vec<Vec<Cell>> = times.iter().zip(&reference).map(|(&t, &v)| row![t, "rk4", "inf", "inf", v, 0.0]).collect();
    let mut curves = Vec::new();
    for &(n, rh, rj) in &jobs {
        let vals = prob.curve(&times, n, rh, rj)?;
        let mut max_err = 0.0f64;
        for ((&t, &v), &r) in times.iter().zip(&vals).zip(&reference) {
            let err = (v - r).abs();
            max_err = max_err.max(err);
            rows.push(vec![Cell::F(t), Cell::from(n), steps_cell(rh), steps_cell(rj), Cell::F(v), Cell::F(err)]);
        }
        curves.push((n, rh, rj, max_err));
    }
    out.write_csv("dilation.csv", &["t", "n_cyl", "r_H", "r_J", "observable_sum_E", "error_vs_rk4"], &rows)?;

    let exact: Vec<(usize, f64)> = curves.iter().filter(|c| c.1.is_none() && c.2.is_none()).map(|c| (c.0, c.3)).collect();
    let slope = if exact.len() >= 2 {
        let dts: Vec<f64> = exact.iter().map(|&(n, _)| cfg.evolution.t_final / n as f64).collect();
        let errs: Vec<f64> = exact.iter().map(|&(_, e)| e).collect();
        fit_power_law(&dts, &errs).map(|f| f.0).ok()
    } else {
        None
    };
    Ok(json!({
        "system_qubits": prob.setup.system_qubits,
        "ancilla_qubits": prob.setup.ancilla_qubits,
        "max_errors": curves.iter().map(|(n, rh, rj, e)| json!({"n_cyl": n, "r_H": rh, "r_J": rj, "max_error": e})).collect::<Vec<_>>(),
        "cycle_convergence_slope": slope,
    }))
}

fn trotter_closed(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value> {
    let p = cfg.params()?;
    let basis = PhysicalBasis::enumerate(&p);
    let h = operators::hamiltonian(&basis, &p)?.to_dense();
    let obs = total_field(&basis).to_dense();
    let mut psi = vec![C64::new(0.0, 0.0); basis.dim()];
    psi[operators::basis_index(&basis, InitialState::BareVacuum)?] = C64::new(1.0, 0.0);
    let times = time_grid(cfg.evolution.t_final, cfg.dilation.t_step);
    let cmp = compare_closed_trotter(&psi, &h, &obs, &times, &cfg.dilation.r_values)?;

    let mut rows: Vec<Vec<Cell>> = times.iter().zip(&cmp.exact).map(|(&t, &v)| row![t, "inf", v, 0.0]).collect();
    let mut bounds = Vec::new();
    let mut summary = Vec::new();
    for c in &cmp.curves {
        for (i, &t) in times.iter().enumerate() {
            rows.push(row![t, c.r, c.values[i], c.errors[i]]);
            bounds.push(row![c.r, t, c.bounds[i], c.norm_errors[i]]);
        }
        let violated = c.bounds.iter().zip(&c.norm_errors).any(|(b, m)| m > &(b + 1e-12));
        summary.push(json!({
            "r": c.r,
            "max_error": c.errors.iter().cloned().fold(0.0, f64::max),
            "bound_holds": !violated,
        }));
    }
    out.write_csv("trotter.csv", &["t", "r", "observable_sum_E", "error"], &rows)?;
    out.write_csv("bounds.csv", &["r", "t", "bound", "measured_norm_error"], &bounds)?;
    Ok(json!({ "curves": summary }))
}

fn rates(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value> {
    let p = cfg.params()?;
    let model = OpenModel::build(p, cfg.environment.beta, ModelVariant::Schwinger)?;
    let env = cfg.env()?;
    let d_k = env.fourier(p.n_fermion_sites());
    let est = relaxation_rate_estimate(&model.jumps, &d_k, p.lattice_spacing)?;
    let rows: Vec<Vec<Cell>> = d_k.iter().zip(&est.per_k).enumerate().map(|(k, (dk, g))| row![k, dk.re, *g]).collect();
    out.write_csv("rates.csv", &["k", "D_k", "gamma_diag_mean"], &rows)?;
    let levels = eigenstate_dissipation_rates(&model.h, &model.jumps, &d_k, p.lattice_spacing)?;
    let rows: Vec<Vec<Cell>> = levels
        .iter()
        .enumerate()
        .map(|(n, l)| row![n, l.energy, l.rate, if l.degenerate { 1usize } else { 0usize }])
        .collect();
    out.write_csv("eigenstate_rates.csv", &["n", "energy", "gamma_n", "degenerate"], &rows)?;
    Ok(json!({
        "correlator": env.tag(),
        "gamma_mean_diag": est.mean_diagonal,
        "gamma_nonzero_k": est.nonzero_k_mean,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_fit() {
        let x = [2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|n: &f64| 0.7 * n.powf(-1.5)).collect();
        let (s, c) = fit_power_law(&x, &y).unwrap();
        assert!((s + 1.5).abs() < 1e-12 && (c.exp() - 0.7).abs() < 1e-12);
        assert!(fit_power_law(&[1.0], &[1.0]).is_err());
        assert!(fit_power_law(&[1.0, 2.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn grids() {
        let g = time_grid(5.0, 0.1);
        assert_eq!(g.len(), 51);
        assert!((g[50] - 5.0).abs() < 1e-12);
        let l = log_grid(1e-2, 1e4, 241);
        assert!((l[0] - 1e-2).abs() < 1e-15 && (l[240] / 1e4 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sector_states_have_definite_parity() {
        let p = ModelParams::new(2, 1.0, 0.5, 0.8).unwrap();
        let b = PhysicalBasis::enumerate(&p);
        let cp = operators::cp_operator(&b).unwrap();
        let (e, o) = sector_states(&b).unwrap();
        let ce = cp.matvec(&e);
        let co = cp.matvec(&o);
        for i in 0..e.len() {
            assert!((ce[i] - e[i]).norm() < 1e-15);
            assert!((co[i] + o[i]).norm() < 1e-15);
        }
    }

    #[test]
    fn file_tags() {
        let g = EnvCorrelator::gaussian(1.0, 0.1, 0.1).unwrap();
        assert_eq!(file_tag(&g), "gaussian_0.1");
        assert_eq!(file_tag(&EnvCorrelator::delta(1.0, 0.1).unwrap()), "delta");
    }
}
