//! Dilation cycles: system step, ancilla coupling, ancilla reset.

use ndarray::{s, Array2};

use crate::error::{invalid, Result};
use crate::linalg;
use crate::parallel;
use crate::sparse::{dagger, trace, CsrMatrix, C64};

use super::pauli::{pad, pauli_decompose, qubits_for, PauliTermList};
use super::trotter::trotter_unitary;

/// `J` with `L_k†` in the first block row and `L_k` in the first block
/// column; block `k` is ancilla level `k`.
pub fn build_j(jumps: &[Array2<C64>]) -> Result<Array2<C64>> {
    let Some(first) = jumps.first() else {
        return invalid("J needs at least one Lindblad operator");
    };
    let d = first.nrows();
    if jumps.iter().any(|l| l.dim() != (d, d)) {
        return invalid("Lindblad operators differ in dimension");
    }
    let n = (jumps.len() + 1) * d;
    let mut j = Array2::zeros((n, n));
    for (k, l) in jumps.iter().enumerate() {
        let o = (k + 1) * d;
        j.slice_mut(s![o..o + d, ..d]).assign(l);
        j.slice_mut(s![..d, o..o + d]).assign(&dagger(l));
    }
    Ok(j)
}

fn check_step(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return invalid(format!("cycle length must be positive, got {dt}"));
    }
    Ok(())
}

/// Blocks `(k, 0)` of a unitary on `levels x d`: the Kraus operators of
/// coupling to a fresh ancilla and tracing it out.
fn kraus_from_unitary(u: &Array2<C64>, d: usize) -> Vec<Array2<C64>> {
    (0..u.nrows() / d)
        .map(|k| u.slice(s![k * d..(k + 1) * d, ..d]).to_owned())
        .collect()
}

fn apply_channel(rho: &Array2<C64>, u_h: &Array2<C64>, kraus: &[Array2<C64>]) -> Array2<C64> {
    let sigma = u_h.dot(rho).dot(&dagger(u_h));
    let mut out = Array2::zeros(rho.dim());
    for k in kraus {
        out += &k.dot(&sigma).dot(&dagger(k));
    }
    out
}

/// `Tr_anc[U_J (|0⟩⟨0| ⊗ U_H ρ U_H†) U_J†]` with `U_H = e^{-iHδt}` and
/// `U_J = e^{-iJ√δt}`.
pub fn dilation_cycle(rho: &Array2<C64>, h: &Array2<C64>, j: &Array2<C64>, dt: f64) -> Result<Array2<C64>> {
    check_step(dt)?;
    let d = h.nrows();
    if rho.dim() != (d, d) || !j.nrows().is_multiple_of(d) || j.nrows() != j.ncols() {
        return invalid("ρ, H and J dimensions are inconsistent");
    }
    let u_h = linalg::expm_hermitian(h, dt)?;
    let u_j = linalg::expm_hermitian(j, dt.sqrt())?;
    Ok(apply_channel(rho, &u_h, &kraus_from_unitary(&u_j, d)))
}

/// System, jumps and `J` for the delta correlator, with every operator
/// embedded in qubit registers.
#[derive(Debug, Clone)]
pub struct DilationSetup {
    pub d: usize,
    /// `L_n a √D0`.
    pub jumps: Vec<Array2<C64>>,
    pub h: Array2<C64>,
    pub j: Array2<C64>,
    pub system_qubits: usize,
    pub ancilla_qubits: usize,
    h_terms: PauliTermList,
    j_terms: PauliTermList,
}

impl DilationSetup {
    pub fn delta(h: &CsrMatrix, jumps: &[CsrMatrix], d0: f64, a: f64) -> Result<Self> {
        if !(d0 >= 0.0) {
            return invalid(format!("D0 must be non-negative, got {d0}"));
        }
        let scale = C64::new(a * d0.sqrt(), 0.0);
        let scaled: Vec<Array2<C64>> = jumps.iter().map(|l| l.to_dense().mapv(|v| v * scale)).collect();
        Self::new(&h.to_dense(), scaled)
    }

    pub fn new(h: &Array2<C64>, jumps: Vec<Array2<C64>>) -> Result<Self> {
        let d = h.nrows();
        let j = build_j(&jumps)?;
        if j.nrows() != (jumps.len() + 1) * d {
            return invalid("Lindblad operators differ in dimension from H");
        }
        let system_qubits = qubits_for(d);
        let ancilla_qubits = qubits_for(jumps.len() + 1);
        let h_terms = pauli_decompose(h)?;
        let j_terms = pauli_decompose(&register_j(&jumps, 1 << system_qubits, 1 << ancilla_qubits))?;
        Ok(Self {
            d,
            jumps,
            h: h.clone(),
            j,
            system_qubits,
            ancilla_qubits,
            h_terms,
            j_terms,
        })
    }

    pub fn padded_system_dim(&self) -> usize {
        1 << self.system_qubits
    }

    pub fn register_dim(&self) -> usize {
        1 << (self.system_qubits + self.ancilla_qubits)
    }

    pub fn h_terms(&self) -> &PauliTermList {
        &self.h_terms
    }

    pub fn j_terms(&self) -> &PauliTermList {
        &self.j_terms
    }

    /// `U_H` and the Kraus set for one cycle, on the padded system space.
    /// `None` keeps the exact exponential.
    pub fn cycle_operators(&self, dt: f64, r_h: Option<usize>, r_j: Option<usize>) -> Result<(Array2<C64>, Vec<Array2<C64>>)> {
        check_step(dt)?;
        let n = self.padded_system_dim();
        let u_h = match r_h {
            None => embed_unitary(&linalg::expm_hermitian(&self.h, dt)?, n),
            Some(r) => trotter_unitary(&self.h_terms, dt, r)?,
        };
        let kraus = match r_j {
            None => {
                let u_j = linalg::expm_hermitian(&self.j, dt.sqrt())?;
                let mut k = kraus_from_unitary(&u_j, self.d);
                k[0] = embed_unitary(&k[0], n);
                for x in &mut k[1..] {
                    *x = pad(x, n);
                }
                k
            }
            Some(r) => kraus_from_unitary(&trotter_unitary(&self.j_terms, dt.sqrt(), r)?, n),
        };
        Ok((u_h, kraus))
    }
}

/// Block `u` with the identity on the padding.
fn embed_unitary(u: &Array2<C64>, n: usize) -> Array2<C64> {
    let mut out = Array2::from_diag_elem(n, C64::new(1.0, 0.0));
    let d = u.nrows();
    out.slice_mut(s![..d, ..d]).assign(u);
    out
}

/// `J` on the register: ancilla level `a` and padded system state `s` at
/// index `a · n_sys + s`.
fn register_j(jumps: &[Array2<C64>], n_sys: usize, n_anc: usize) -> Array2<C64> {
    let n = n_sys * n_anc;
    let mut j = Array2::zeros((n, n));
    for (k, l) in jumps.iter().enumerate() {
        let d = l.nrows();
        let o = (k + 1) * n_sys;
        j.slice_mut(s![o..o + d, ..d]).assign(l);
        j.slice_mut(s![..d, o..o + d]).assign(&dagger(l));
    }
    j
}

#[derive(Debug, Clone)]
pub struct DilatedRun {
    /// `k δt` for `k = 0..=N_cyl`.
    pub times: Vec<f64>,
    /// `values[k][i]` for observable `i` after `k` cycles.
    pub values: Vec<Vec<f64>>,
    /// Population outside the physical states after each cycle.
    pub leakage: Vec<f64>,
    /// Padded density matrix after the last cycle.
    pub final_state: Array2<C64>,
}

/// `N_cyl` cycles of length `t / N_cyl` starting from the physical `ρ0`.
/// Observables are physical `d x d` matrices.
pub fn dilated_evolve(
    rho0: &Array2<C64>,
    setup: &DilationSetup,
    t: f64,
    n_cyl: usize,
    r_h: Option<usize>,
    r_j: Option<usize>,
    observables: &[Array2<C64>],
) -> Result<DilatedRun> {
    let d = setup.d;
    if rho0.dim() != (d, d) || observables.iter().any(|o| o.dim() != (d, d)) {
        return invalid("initial state or observable dimension differs from the system");
    }
    if n_cyl == 0 {
        return invalid("at least one cycle is needed");
    }
    let dt = t / n_cyl as f64;
    let (u_h, kraus) = setup.cycle_operators(dt, r_h, r_j)?;
    let n = setup.padded_system_dim();
    let ops: Vec<Array2<C64>> = observables.iter().map(|o| pad(o, n)).collect();
    let measure = |rho: &Array2<C64>| -> (Vec<f64>, f64) {
        let vals = ops.iter().map(|o| trace(&o.dot(rho)).re).collect();
        let leak = (d..n).map(|i| rho[(i, i)].re).sum::<f64>();
        (vals, leak)
    };
    let mut rho = pad(rho0, n);
    let mut run = DilatedRun {
        times: vec![0.0],
        values: Vec::with_capacity(n_cyl + 1),
        leakage: Vec::with_capacity(n_cyl + 1),
        final_state: Array2::zeros((n, n)),
    };
    let (v, l) = measure(&rho);
    run.values.push(v);
    run.leakage.push(l);
    for k in 1..=n_cyl {
        rho = apply_channel(&rho, &u_h, &kraus);
        let (v, l) = measure(&rho);
        run.times.push(k as f64 * dt);
        run.values.push(v);
        run.leakage.push(l);
    }
    run.final_state = rho;
    Ok(run)
}

/// Terminal value of one observable after `N_cyl` cycles spanning each `t`.
pub fn dilation_curve(
    rho0: &Array2<C64>,
    setup: &DilationSetup,
    times: &[f64],
    n_cyl: usize,
    r_h: Option<usize>,
    r_j: Option<usize>,
    observable: &Array2<C64>,
) -> Result<Vec<f64>> {
    let obs = std::slice::from_ref(observable);
    parallel::map(times, |&t| {
        if t == 0.0 {
            return Ok(trace(&observable.dot(rho0)).re);
        }
        let run = dilated_evolve(rho0, setup, t, n_cyl, r_h, r_j, obs)?;
        Ok(run.values[n_cyl][0])
    })
    .into_iter()
    .collect()
}
