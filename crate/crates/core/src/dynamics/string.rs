//! String-breaking runs in vacuum and in the medium.

use serde::{Deserialize, Serialize};

use crate::environment::EnvCorrelator;
use crate::error::{invalid, Result};
use crate::liouvillian::Lindbladian;
use crate::model::{ModelParams, PhysicalBasis};
use crate::operators::{self, InitialState};
use crate::parallel;
use crate::sparse::C64;

use super::evolve::{diagonals, rk4_evolve, ClosedEvolution, EvolveOptions, Series};
use super::observables::{string_metric, vacuum_subtracted_fields};

#[derive(Debug, Clone, Copy)]
pub struct StringSetup {
    pub params: ModelParams,
    /// `None` (or `D0 = 0`) evolves the closed system.
    pub env: Option<EnvCorrelator>,
    pub left: usize,
    pub right: usize,
    pub t_final: f64,
    pub dt: f64,
}

impl StringSetup {
    /// Central string spanning three links, e.g. sites 4 and 7 for `N_f = 12`.
    pub fn central(params: ModelParams, env: Option<EnvCorrelator>, t_final: f64, dt: f64) -> Result<Self> {
        let n_f = params.n_fermion_sites();
        if n_f < 4 {
            return invalid("a three-link string needs at least four fermion sites");
        }
        let left = (n_f - 4) / 2;
        let left = left - left % 2;
        Ok(Self {
            params,
            env,
            left,
            right: left + 3,
            t_final,
            dt,
        })
    }

    pub fn string_links(&self) -> Vec<usize> {
        (self.left..self.right).collect()
    }

    pub fn is_closed(&self) -> bool {
        self.env.is_none_or(|e| e.d0 == 0.0)
    }
}

fn unit_vector(d: usize, i: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); d];
    v[i] = C64::new(1.0, 0.0);
    v
}

/// Vacuum-subtracted link fields `⟨E_n⟩_string - ⟨E_n⟩_vacuum`.
///
/// Closed runs use the exact propagator. Open runs evolve the difference
/// `ρ_string - ρ_vacuum` once; the generator is linear, so this equals the
/// difference of the two trajectories.
pub fn subtracted_string_fields(setup: &StringSetup) -> Result<Series> {
    let params = setup.params;
    params.validate()?;
    let basis = PhysicalBasis::enumerate(&params);
    let string = InitialState::String {
        left: setup.left,
        right: setup.right,
    };
    let i_s = operators::basis_index(&basis, string)?;
    let i_v = operators::basis_index(&basis, InitialState::BareVacuum)?;
    let h = operators::hamiltonian(&basis, &params)?;
    let fields = operators::electric_fields(&basis);
    let opts = EvolveOptions::new(setup.t_final, setup.dt);

    if setup.is_closed() {
        let steps = (setup.t_final / setup.dt).round() as usize;
        if !(setup.dt > 0.0) || steps == 0 {
            return invalid(format!("invalid time grid t_final = {}, dt = {}", setup.t_final, setup.dt));
        }
        let ce = ClosedEvolution::new(&h)?;
        let diag = diagonals(&fields);
        let s = ce.diagonal_series(&unit_vector(basis.dim(), i_s), &diag, setup.dt, steps);
        let v = ce.diagonal_series(&unit_vector(basis.dim(), i_v), &diag, setup.dt, steps);
        return vacuum_subtracted_fields(&s, &v);
    }

    let env = setup.env.expect("open run has an environment");
    env.validate()?;
    let os = operators::charge_operators(&basis, &params)?;
    let ls = operators::lindblad_operators(&h, &os, env.beta)?;
    let lv = Lindbladian::new(&h, &ls, &env.matrix(params.n_fermion_sites()), params.lattice_spacing)?;
    let mut rho = ndarray::Array2::<C64>::zeros((basis.dim(), basis.dim()));
    rho[[i_s, i_s]] = C64::new(1.0, 0.0);
    rho[[i_v, i_v]] = C64::new(-1.0, 0.0);
    Ok(rk4_evolve(&rho, &lv, &fields, &opts)?.observables)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseMode {
    Vacuum,
    Medium,
}

impl PhaseMode {
    pub fn tag(self) -> &'static str {
        match self {
            PhaseMode::Vacuum => "vacuum",
            PhaseMode::Medium => "medium",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhasePoint {
    pub mass: f64,
    pub coupling: f64,
    pub mode: PhaseMode,
    /// `Ē`, or the failure message for this point.
    pub ebar: std::result::Result<f64, String>,
}

#[derive(Debug, Clone, Copy)]
pub struct PhaseOptions {
    pub n_sites: usize,
    pub lattice_spacing: f64,
    pub env: EnvCorrelator,
    pub dt: f64,
    pub t1: f64,
    pub t2: f64,
}

/// `Ē` of the vacuum-subtracted central string over a grid of `(m, e)`.
/// Points are independent; a failing point is recorded and the sweep
/// continues.
pub fn phase_diagram(grid: &[(f64, f64)], mode: PhaseMode, opts: &PhaseOptions) -> Result<Vec<PhasePoint>> {
    if grid.is_empty() {
        return invalid("phase diagram grid is empty");
    }
    Ok(parallel::map(grid, |&(m, e)| {
        let ebar = phase_point(m, e, mode, opts).map_err(|err| err.to_string());
        PhasePoint {
            mass: m,
            coupling: e,
            mode,
            ebar,
        }
    }))
}

pub fn phase_point(m: f64, e: f64, mode: PhaseMode, opts: &PhaseOptions) -> Result<f64> {
    let params = ModelParams::new(opts.n_sites, opts.lattice_spacing, m, e)?;
    let env = match mode {
        PhaseMode::Vacuum => None,
        PhaseMode::Medium => Some(opts.env),
    };
    let setup = StringSetup::central(params, env, opts.t2, opts.dt)?;
    let fields = subtracted_string_fields(&setup)?;
    string_metric(&fields, opts.t1, opts.t2, &setup.string_links())
}
