//! Time evolution of density matrices and pure states.

use ndarray::Array2;

use crate::error::{invalid, numerical, Result};
use crate::linalg;
use crate::liouvillian::Lindbladian;
use crate::sparse::{dagger, trace, CsrMatrix, C64};

use super::observables::von_neumann_entropy;

/// Sampled observable values on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub times: Vec<f64>,
    /// `values[t][k]` is observable `k` at `times[t]`.
    pub values: Vec<Vec<f64>>,
}

impl Series {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn channel(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[k]).collect()
    }

    pub fn dt(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    pub dt: f64,
    pub t_final: f64,
    /// Keep every `n`-th density matrix; 0 keeps none.
    pub snapshot_stride: usize,
    pub entropy: bool,
    /// Abort when `|tr ρ(t) - tr ρ(0)|` exceeds this.
    pub trace_tol: f64,
}

impl EvolveOptions {
    pub fn new(t_final: f64, dt: f64) -> Self {
        Self {
            dt,
            t_final,
            snapshot_stride: 0,
            entropy: false,
            trace_tol: 1e-6,
        }
    }

    fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_final >= self.dt) {
            return invalid(format!("t_final = {} is shorter than dt = {}", self.t_final, self.dt));
        }
        Ok((self.t_final / self.dt).round() as usize)
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Expectation values `Re tr(O_k ρ(t))`.
    pub observables: Series,
    /// Empty unless requested.
    pub entropy: Vec<f64>,
    pub trace_residual: Vec<f64>,
    /// `max |ρ - ρ^†|` before each re-Hermitisation.
    pub hermiticity_residual: Vec<f64>,
    pub snapshots: Vec<(f64, Array2<C64>)>,
    pub final_state: Array2<C64>,
}

/// `Re tr(O ρ)` for sparse `O`.
pub fn expectation(op: &CsrMatrix, rho: &Array2<C64>) -> f64 {
    op.triplets().map(|(i, j, v)| (v * rho[[j, i]]).re).sum()
}

fn hermitize_in_place(rho: &mut Array2<C64>) -> f64 {
    let d = rho.nrows();
    let mut defect = 0.0f64;
    for i in 0..d {
        defect = defect.max(2.0 * rho[[i, i]].im.abs());
        rho[[i, i]].im = 0.0;
        for j in i + 1..d {
            let a = rho[[i, j]];
            let b = rho[[j, i]].conj();
            defect = defect.max((a - b).norm());
            let m = (a + b) * 0.5;
            rho[[i, j]] = m;
            rho[[j, i]] = m.conj();
        }
    }
    defect
}

/// Classic fourth-order Runge-Kutta on `dρ/dt = 𝓛ρ`.
pub fn rk4_evolve(rho0: &Array2<C64>, lv: &Lindbladian, observables: &[CsrMatrix], opts: &EvolveOptions) -> Result<Trajectory> {
    let d = lv.dim();
    if rho0.dim() != (d, d) {
        return invalid("initial state dimension differs from the generator");
    }
    let steps = opts.steps()?;
    let dt = opts.dt;
    let tr0 = trace(rho0).re;

    let mut rho = rho0.clone();
    let z = || Array2::<C64>::zeros((d, d));
    let (mut k1, mut k2, mut k3, mut k4, mut tmp, mut scratch) = (z(), z(), z(), z(), z(), z());

    let mut times = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    let mut entropy = Vec::new();
    let mut trace_residual = Vec::with_capacity(steps + 1);
    let mut hermiticity_residual = Vec::with_capacity(steps + 1);
    let mut snapshots = Vec::new();

    let mut record = |step: usize, rho: &Array2<C64>, herm: f64| -> Result<()> {
        let t = step as f64 * dt;
        times.push(t);
        values.push(observables.iter().map(|o| expectation(o, rho)).collect());
        if opts.entropy {
            entropy.push(von_neumann_entropy(rho)?);
        }
        trace_residual.push((trace(rho).re - tr0).abs());
        hermiticity_residual.push(herm);
        if opts.snapshot_stride > 0 && step.is_multiple_of(opts.snapshot_stride) {
            snapshots.push((t, rho.clone()));
        }
        Ok(())
    };
    record(0, &rho, 0.0)?;

    let half = C64::new(0.5 * dt, 0.0);
    let full = C64::new(dt, 0.0);
    let sixth = C64::new(dt / 6.0, 0.0);
    let third = C64::new(dt / 3.0, 0.0);
    for step in 1..=steps {
        lv.apply_into(&rho, &mut k1, &mut scratch);
        tmp.assign(&rho);
        tmp.scaled_add(half, &k1);
        lv.apply_into(&tmp, &mut k2, &mut scratch);
        tmp.assign(&rho);
        tmp.scaled_add(half, &k2);
        lv.apply_into(&tmp, &mut k3, &mut scratch);
        tmp.assign(&rho);
        tmp.scaled_add(full, &k3);
        lv.apply_into(&tmp, &mut k4, &mut scratch);
        rho.scaled_add(sixth, &k1);
        rho.scaled_add(third, &k2);
        rho.scaled_add(third, &k3);
        rho.scaled_add(sixth, &k4);
        let herm = hermitize_in_place(&mut rho);
        let drift = (trace(&rho).re - tr0).abs();
        if !(drift <= opts.trace_tol) {
            return numerical(format!(
                "trace drift {drift:.3e} at t = {:.4} exceeds {:.1e}; reduce dt (currently {dt})",
                step as f64 * dt,
                opts.trace_tol
            ));
        }
        record(step, &rho, herm)?;
    }

    Ok(Trajectory {
        observables: Series { times, values },
        entropy,
        trace_residual,
        hermiticity_residual,
        snapshots,
        final_state: rho,
    })
}

/// Unitary evolution of pure states through the eigendecomposition of `H`.
#[derive(Debug, Clone)]
pub struct ClosedEvolution {
    energies: Vec<f64>,
    vecs: Array2<C64>,
}

impl ClosedEvolution {
    pub fn new(h: &CsrMatrix) -> Result<Self> {
        let (energies, vecs) = linalg::eigh(&h.to_dense())?;
        Ok(Self { energies, vecs })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Amplitudes of `ψ` in the energy eigenbasis.
    pub fn coefficients(&self, psi: &[C64]) -> Vec<C64> {
        let v = ndarray::ArrayView1::from(psi);
        dagger(&self.vecs).dot(&v).to_vec()
    }

    pub fn state_at(&self, coeffs: &[C64], t: f64) -> Vec<C64> {
        let w: ndarray::Array1<C64> = coeffs
            .iter()
            .zip(&self.energies)
            .map(|(&c, &e)| c * C64::from_polar(1.0, -e * t))
            .collect();
        self.vecs.dot(&w).to_vec()
    }

    /// Expectation values of diagonal observables (given by their diagonals)
    /// on the grid `t = i dt`, `i = 0..=steps`.
    pub fn diagonal_series(&self, psi0: &[C64], diagonals: &[Vec<f64>], dt: f64, steps: usize) -> Series {
        let c = self.coefficients(psi0);
        let mut times = Vec::with_capacity(steps + 1);
        let mut values = Vec::with_capacity(steps + 1);
        for i in 0..=steps {
            let t = i as f64 * dt;
            let psi = self.state_at(&c, t);
            let probs: Vec<f64> = psi.iter().map(|a| a.norm_sqr()).collect();
            times.push(t);
            values.push(diagonals.iter().map(|dg| dg.iter().zip(&probs).map(|(a, b)| a * b).sum()).collect());
        }
        Series { times, values }
    }
}

/// Diagonals of diagonal sparse operators, e.g. electric fields.
pub fn diagonals(ops: &[CsrMatrix]) -> Vec<Vec<f64>> {
    ops.iter().map(|o| o.diagonal().iter().map(|v| v.re).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::EnvCorrelator;
    use crate::liouvillian::{full_spectrum, SpectrumOptions};
    use crate::model::{ModelParams, PhysicalBasis};
    use crate::operators::{self, InitialState};
    use crate::sparse::frobenius;

    fn system(d0: f64) -> (PhysicalBasis, CsrMatrix, Lindbladian) {
        let p = ModelParams::new(2, 1.0, 0.5, 0.8).unwrap();
        let b = PhysicalBasis::enumerate(&p);
        let h = operators::hamiltonian(&b, &p).unwrap();
        let os = operators::charge_operators(&b, &p).unwrap();
        let ls = operators::lindblad_operators(&h, &os, 0.1).unwrap();
        let env = EnvCorrelator::delta(d0, 0.1).unwrap();
        let lv = Lindbladian::new(&h, &ls, &env.matrix(4), 1.0).unwrap();
        (b, h, lv)
    }

    #[test]
    fn closed_energy_is_conserved() {
        let (b, h, _) = system(0.0);
        let lv = Lindbladian::closed(&h).unwrap();
        let rho0 = operators::prepare_state(&b, InitialState::String { left: 0, right: 3 }).unwrap();
        let traj = rk4_evolve(&rho0, &lv, std::slice::from_ref(&h), &EvolveOptions::new(10.0, 0.01)).unwrap();
        let e = traj.observables.channel(0);
        assert!(e.iter().all(|v| (v - e[0]).abs() < 1e-8));
        assert_eq!(traj.observables.len(), 1001);
        // closed RK4 agrees with the exact propagator
        let ce = ClosedEvolution::new(&h).unwrap();
        let i0 = operators::basis_index(&b, InitialState::String { left: 0, right: 3 }).unwrap();
        let mut psi = vec![C64::new(0.0, 0.0); b.dim()];
        psi[i0] = C64::new(1.0, 0.0);
        let fields = diagonals(&operators::electric_fields(&b));
        let exact = ce.diagonal_series(&psi, &fields, 0.01, 1000);
        let ops = operators::electric_fields(&b);
        let rk = rk4_evolve(&rho0, &lv, &ops, &EvolveOptions::new(10.0, 0.01)).unwrap();
        for (a, b) in exact.values.iter().zip(&rk.observables.values) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let (b, _, lv) = system(1.0);
        let rho0 = operators::prepare_state(&b, InitialState::BareVacuum).unwrap();
        let run = |dt: f64| rk4_evolve(&rho0, &lv, &[], &EvolveOptions::new(1.0, dt)).unwrap().final_state;
        let reference = run(0.1 / 8.0);
        let e1 = frobenius(&(&run(0.1) - &reference));
        let e2 = frobenius(&(&run(0.05) - &reference));
        let ratio = e1 / e2;
        assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn steady_state_is_fixed_and_spectral_evolution_agrees() {
        let (b, _, lv) = system(1.0);
        let spec = full_spectrum(&lv, &SpectrumOptions::default(), None).unwrap();
        let rho_ss = spec.steady_states(None).unwrap().remove(0);
        let traj = rk4_evolve(&rho_ss, &lv, &[], &EvolveOptions::new(5.0, 0.01)).unwrap();
        assert!(frobenius(&(&traj.final_state - &rho_ss)) <= 1e-7);

        let rho0 = operators::prepare_state(&b, InitialState::String { left: 0, right: 3 }).unwrap();
        let fields = operators::electric_fields(&b);
        let total = fields.iter().skip(1).fold(fields[0].clone(), |acc, f| acc.add(f));
        let traj = rk4_evolve(&rho0, &lv, std::slice::from_ref(&total), &EvolveOptions::new(1.0, 0.01)).unwrap();
        let c = spec.mode_coefficients(&rho0);
        let rho1 = spec.evolve(&c, 1.0);
        assert!(frobenius(&(&traj.final_state - &rho1)) < 1e-6);
        for (i, t) in traj.observables.times.iter().enumerate().step_by(10) {
            let s = expectation(&total, &spec.evolve(&c, *t));
            assert!((s - traj.observables.values[i][0]).abs() < 1e-5);
        }
        assert!(traj.trace_residual.iter().all(|&r| r < 1e-9));
    }

    #[test]
    fn rejects_bad_steps() {
        let (b, _, lv) = system(1.0);
        let rho0 = operators::prepare_state(&b, InitialState::BareVacuum).unwrap();
        assert!(rk4_evolve(&rho0, &lv, &[], &EvolveOptions::new(1.0, 0.0)).unwrap_err().is_validation());
        assert!(rk4_evolve(&rho0, &lv, &[], &EvolveOptions::new(0.001, 0.01)).is_err());
    }
}
