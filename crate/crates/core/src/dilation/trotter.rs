//! First-order Trotter products of Pauli-term exponentials.

use ndarray::Array2;

use crate::error::{invalid, Result};
use crate::linalg;
use crate::parallel;
use crate::sparse::{dagger, C64};

use super::pauli::{pad, pauli_decompose, PauliTerm, PauliTermList};

/// `u ← u · exp(-i a P τ) = cos(aτ) u - i sin(aτ) u P`.
fn right_multiply_term(u: &mut Array2<C64>, term: &PauliTerm, tau: f64) {
    let n = u.nrows();
    let (s, c) = (term.coeff * tau).sin_cos();
    let old = u.clone();
    // (u P)_{:, y} = u_{:, x} P_{x, y} with P|y⟩ = v|x⟩
    for y in 0..n {
        let (x, v) = term.string.apply_basis(y);
        let f = C64::new(0.0, -s) * v;
        for i in 0..n {
            u[(i, y)] = old[(i, y)] * c + old[(i, x)] * f;
        }
    }
}

/// `Π_j exp(-i a_j P_j τ)`, first term leftmost.
pub fn trotter_step(terms: &PauliTermList, tau: f64) -> Array2<C64> {
    let mut u = Array2::from_diag_elem(terms.dim(), C64::new(1.0, 0.0));
    for t in &terms.terms {
        right_multiply_term(&mut u, t, tau);
    }
    u
}

/// `U_1(t/r)^r`.
pub fn trotter_unitary(terms: &PauliTermList, t: f64, r: usize) -> Result<Array2<C64>> {
    if r == 0 {
        return invalid("Trotter step count must be at least 1");
    }
    let step = trotter_step(terms, t / r as f64);
    let mut u = step.clone();
    for _ in 1..r {
        u = u.dot(&step);
    }
    Ok(u)
}

/// `(1/2) Σ_{j>k} ‖[H_j, H_k]‖ t² / r`. Pauli strings either commute or
/// anticommute, and anticommuting pairs have `‖[a P, b Q]‖ = 2|ab|`.
pub fn trotter_error_bound(terms: &PauliTermList, t: f64, r: usize) -> Result<f64> {
    if r == 0 {
        return invalid("Trotter step count must be at least 1");
    }
    let ts = &terms.terms;
    let mut sum = 0.0;
    for j in 0..ts.len() {
        for k in 0..j {
            if !ts[j].string.commutes_with(&ts[k].string) {
                sum += 2.0 * (ts[j].coeff * ts[k].coeff).abs();
            }
        }
    }
    Ok(0.5 * sum * t * t / r as f64)
}

fn expectation(obs: &Array2<C64>, psi: &ndarray::Array1<C64>) -> f64 {
    psi.iter().zip(obs.dot(psi).iter()).map(|(a, b)| (a.conj() * b).re).sum()
}

#[derive(Debug, Clone)]
pub struct TrotterCurve {
    pub r: usize,
    pub values: Vec<f64>,
    /// `|value - exact|` per time.
    pub errors: Vec<f64>,
    pub bounds: Vec<f64>,
    /// `‖e^{-iHt} - U_1(t/r)^r‖` on the padded space.
    pub norm_errors: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ClosedTrotterComparison {
    pub times: Vec<f64>,
    pub exact: Vec<f64>,
    pub curves: Vec<TrotterCurve>,
}

/// Observable curves of a pure state under `e^{-iHt}` and its Trotter
/// products for every `r` in `r_set`. `psi0` and `obs` live in the physical
/// space; both are zero-padded to the qubit register.
pub fn compare_closed_trotter(
    psi0: &[C64],
    h: &Array2<C64>,
    obs: &Array2<C64>,
    times: &[f64],
    r_set: &[usize],
) -> Result<ClosedTrotterComparison> {
    let d = h.nrows();
    if psi0.len() != d || obs.dim() != (d, d) {
        return invalid("state, Hamiltonian and observable dimensions differ");
    }
    if times.is_empty() || r_set.is_empty() {
        return invalid("empty time grid or Trotter step set");
    }
    let terms = pauli_decompose(h)?;
    let n = terms.dim();
    let hp = pad(h, n);
    let op = pad(obs, n);
    let mut psi = ndarray::Array1::<C64>::zeros(n);
    psi.slice_mut(ndarray::s![..d]).assign(&ndarray::ArrayView1::from(psi0));
    let (vals, vecs) = linalg::eigh(&hp)?;

    let exact_u: Vec<Array2<C64>> = times
        .iter()
        .map(|&t| {
            if t == 0.0 {
                Array2::from_diag_elem(n, C64::new(1.0, 0.0))
            } else {
                linalg::spectral_propagator(&vals, &vecs, t)
            }
        })
        .collect();
    let exact: Vec<f64> = exact_u.iter().map(|u| expectation(&op, &u.dot(&psi))).collect();
    let curves = parallel::map(r_set, |&r| -> Result<TrotterCurve> {
        let mut c = TrotterCurve {
            r,
            values: Vec::with_capacity(times.len()),
            errors: Vec::with_capacity(times.len()),
            bounds: Vec::with_capacity(times.len()),
            norm_errors: Vec::with_capacity(times.len()),
        };
        for (i, &t) in times.iter().enumerate() {
            let u = trotter_unitary(&terms, t, r)?;
            let v = expectation(&op, &u.dot(&psi));
            c.values.push(v);
            c.errors.push((v - exact[i]).abs());
            c.bounds.push(trotter_error_bound(&terms, t, r)?);
            c.norm_errors.push(linalg::spectral_norm(&(&u - &exact_u[i]))?);
        }
        Ok(c)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(ClosedTrotterComparison {
        times: times.to_vec(),
        exact,
        curves,
    })
}

/// `‖U†U - 1‖_max`.
pub fn unitarity_defect(u: &Array2<C64>) -> f64 {
    let id = Array2::from_diag_elem(u.nrows(), C64::new(1.0, 0.0));
    crate::sparse::max_abs(&(dagger(u).dot(u) - id))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dilation::pauli::{Pauli, PauliString};
    use crate::model::{ModelParams, PhysicalBasis};
    use crate::operators::{self, InitialState};

    fn terms(list: &[(f64, &[Pauli])]) -> PauliTermList {
        let q = list[0].1.len();
        PauliTermList {
            qubits: q,
            terms: list
                .iter()
                .map(|(c, s)| PauliTerm {
                    coeff: *c,
                    string: PauliString(s.to_vec()),
                })
                .collect(),
        }
    }

    fn exact(t: &PauliTermList, time: f64) -> Array2<C64> {
        linalg::expm_hermitian(&t.to_matrix(), time).unwrap()
    }

    #[test]
    fn commuting_terms_are_exact() {
        use Pauli::*;
        let t = terms(&[(0.4, &[I, I]), (-0.7, &[X, X]), (1.1, &[Y, Y]), (0.3, &[Z, Z])]);
        let u = trotter_unitary(&t, 1.3, 1).unwrap();
        assert!(linalg::spectral_norm(&(&u - &exact(&t, 1.3))).unwrap() <= 1e-12);
        assert!(unitarity_defect(&u) <= 1e-12);
        assert_eq!(trotter_error_bound(&t, 1.3, 1).unwrap(), 0.0);
    }

    #[test]
    fn x_plus_z_bound() {
        use Pauli::*;
        let t = terms(&[(1.0, &[X]), (1.0, &[Z])]);
        let bound = trotter_error_bound(&t, 1.0, 1).unwrap();
        assert!((bound - 1.0).abs() < 1e-15);
        let u = trotter_unitary(&t, 1.0, 1).unwrap();
        let err = linalg::spectral_norm(&(&u - &exact(&t, 1.0))).unwrap();
        assert!(err <= bound && err > 0.1, "{err}");
        assert!(unitarity_defect(&u) <= 1e-12);
        let b10 = trotter_error_bound(&t, 1.0, 10).unwrap();
        assert!((b10 - bound / 10.0).abs() < 1e-15);
        assert!(trotter_unitary(&t, 1.0, 0).is_err());
    }

    #[test]
    fn closed_schwinger_comparison() {
        let p = ModelParams::new(2, 1.0, 0.5, 0.8).unwrap();
        let b = PhysicalBasis::enumerate(&p);
        let h = operators::hamiltonian(&b, &p).unwrap().to_dense();
        let fields = operators::electric_fields(&b);
        let mut obs = Array2::<C64>::zeros(h.dim());
        for f in &fields {
            obs += &f.to_dense();
        }
        let mut psi = vec![C64::new(0.0, 0.0); b.dim()];
        psi[operators::basis_index(&b, InitialState::BareVacuum).unwrap()] = C64::new(1.0, 0.0);
        let times: Vec<f64> = (0..=50).map(|i| i as f64 * 0.1).collect();
        let cmp = compare_closed_trotter(&psi, &h, &obs, &times, &[3, 5, 10]).unwrap();
        let max_err: Vec<f64> = cmp.curves.iter().map(|c| c.errors.iter().cloned().fold(0.0, f64::max)).collect();
        assert!(max_err[2] <= max_err[1] && max_err[1] <= max_err[0], "{max_err:?}");
        for c in &cmp.curves {
            assert_eq!(c.errors[0], 0.0);
            for (b, m) in c.bounds.iter().zip(&c.norm_errors) {
                assert!(m <= &(b + 1e-12), "r = {}: {m} > {b}", c.r);
            }
        }
        // r = ∞ against the pure-state propagator used elsewhere
        let ce = crate::dynamics::ClosedEvolution::new(&operators::hamiltonian(&b, &p).unwrap()).unwrap();
        let diag: Vec<f64> = (0..b.dim()).map(|i| obs[(i, i)].re).collect();
        let s = ce.diagonal_series(&psi, &[diag], 0.1, 50);
        for (a, row) in cmp.exact.iter().zip(&s.values) {
            assert!((a - row[0]).abs() < 1e-8);
        }
    }
}
