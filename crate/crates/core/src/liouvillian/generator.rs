//! The Lindblad generator, both matrix-free and as an explicit superoperator.
//!
//! Vectorisation is column stacking throughout: entry `(i, j)` of a `d x d`
//! operator sits at position `i + j d`, so `vec(A X B) = (B^T ⊗ A) vec(X)`.

use ndarray::Array2;

use crate::error::{invalid, Result};
use crate::linalg;
use crate::sparse::{CsrMatrix, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Relative cutoff below which eigen-channels of the coefficient matrix
/// are discarded. The constant correlator has rank one; its other
/// eigenvalues come back at rounding level.
const CHANNEL_CUTOFF: f64 = 1e-13;

/// One dissipative channel `w M ρ M^†`.
#[derive(Debug, Clone)]
struct Channel {
    weight: f64,
    op: CsrMatrix,
    op_adj: CsrMatrix,
}

/// `𝓛ρ = -i[H, ρ] + Σ_{n1,n2} c(n1,n2) (L_{n2} ρ L_{n1}^† - ½{L_{n1}^† L_{n2}, ρ})`
/// with `c = a² D`.
///
/// Internally the real symmetric coefficient matrix is diagonalised so the
/// jump term becomes a sum of `N_f` rank-one channels; for a diagonal `c`
/// the channels are the jump operators themselves.
#[derive(Debug, Clone)]
pub struct Lindbladian {
    d: usize,
    h: CsrMatrix,
    jumps: Vec<CsrMatrix>,
    coeff: Array2<f64>,
    channels: Vec<Channel>,
    k: CsrMatrix,
    k_adj: CsrMatrix,
}

impl Lindbladian {
    /// `corr` is the `N_f x N_f` correlator matrix `D(n1 - n2)`; the `a²`
    /// prefactor is applied here.
    pub fn new(h: &CsrMatrix, jumps: &[CsrMatrix], corr: &Array2<f64>, a: f64) -> Result<Self> {
        let d = h.nrows();
        if !h.is_square() {
            return invalid("Hamiltonian is not square");
        }
        if jumps.iter().any(|l| l.dim() != (d, d)) {
            return invalid("jump operator dimension differs from the Hamiltonian");
        }
        if corr.dim() != (jumps.len(), jumps.len()) {
            return invalid(format!(
                "correlator matrix is {:?} but there are {} jump operators",
                corr.dim(),
                jumps.len()
            ));
        }
        let coeff = corr.mapv(|v| a * a * v);
        let channels = channels_from(&coeff, jumps)?;
        let mut g = CsrMatrix::zeros(d, d);
        for ch in &channels {
            g = g.add(&ch.op_adj.matmul(&ch.op).scale(C64::new(ch.weight, 0.0)));
        }
        let k = h.axpby(C64::new(1.0, 0.0), &g, C64::new(0.0, -0.5));
        let k_adj = k.adjoint();
        Ok(Self {
            d,
            h: h.clone(),
            jumps: jumps.to_vec(),
            coeff,
            channels,
            k,
            k_adj,
        })
    }

    /// Closed-system generator `-i[H, ·]`.
    pub fn closed(h: &CsrMatrix) -> Result<Self> {
        Self::new(h, &[], &Array2::zeros((0, 0)), 1.0)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn hamiltonian(&self) -> &CsrMatrix {
        &self.h
    }

    pub fn jumps(&self) -> &[CsrMatrix] {
        &self.jumps
    }

    /// `a² D(n1 - n2)`.
    pub fn coefficients(&self) -> &Array2<f64> {
        &self.coeff
    }

    pub fn is_closed(&self) -> bool {
        self.channels.is_empty()
    }

    /// Matrix-free application to any (not necessarily Hermitian) operator.
    pub fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        let mut out = Array2::zeros((self.d, self.d));
        let mut scratch = Array2::zeros((self.d, self.d));
        self.apply_into(rho, &mut out, &mut scratch);
        out
    }

    /// `out = 𝓛ρ`, using `scratch` as workspace.
    pub fn apply_into(&self, rho: &Array2<C64>, out: &mut Array2<C64>, scratch: &mut Array2<C64>) {
        assert_eq!(rho.dim(), (self.d, self.d), "density matrix dimension mismatch");
        self.k.mul_dense_into(rho, out, -I, false);
        self.k_adj.dense_mul_into(rho, out, I, true);
        for ch in &self.channels {
            ch.op.mul_dense_into(rho, scratch, C64::new(1.0, 0.0), false);
            ch.op_adj.dense_mul_into(scratch, out, C64::new(ch.weight, 0.0), true);
        }
    }

    /// Rough upper bound on the spectral radius, used to pick filter steps.
    pub fn norm_bound(&self) -> f64 {
        let norm = |m: &CsrMatrix| (m.norm_one() * m.norm_inf()).sqrt();
        2.0 * norm(&self.k) + self.channels.iter().map(|c| c.weight.abs() * norm(&c.op).powi(2)).sum::<f64>()
    }

    /// Explicit `d² x d²` superoperator.
    ///
    /// Assembled column by column from `𝓛(E_ij)`, which is a handful of
    /// sparse outer products.
    pub fn superoperator(&self) -> LiouvillianMatrix {
        let d = self.d;
        // Row r of a transpose is column r of the original.
        let k_cols = self.k.transpose();
        let ch_cols: Vec<CsrMatrix> = self.channels.iter().map(|c| c.op.transpose()).collect();
        // Triplets of the transpose, so each column lands contiguously.
        let mut trip = Vec::new();
        for j in 0..d {
            for i in 0..d {
                let col = i + j * d;
                // -i K E_ij: entries (p, j) = -i K[p, i]
                for (p, v) in k_cols.row(i) {
                    trip.push((col, p + j * d, -I * v));
                }
                // +i E_ij K^†: entries (i, q) = i conj(K[q, j])
                for (q, v) in k_cols.row(j) {
                    trip.push((col, i + q * d, I * v.conj()));
                }
                for (ch, cols) in self.channels.iter().zip(&ch_cols) {
                    let w = ch.weight;
                    for (p, vp) in cols.row(i) {
                        for (q, vq) in cols.row(j) {
                            trip.push((col, p + q * d, w * vp * vq.conj()));
                        }
                    }
                }
            }
        }
        let transposed = CsrMatrix::from_triplets(d * d, d * d, trip);
        LiouvillianMatrix {
            d,
            matrix: transposed.transpose(),
        }
    }

    /// Superoperator from the literal Kronecker formula, summing every
    /// `(n1, n2)` pair. Slow; kept to pin down the convention.
    pub fn superoperator_kron(&self) -> LiouvillianMatrix {
        let d = self.d;
        let id = CsrMatrix::identity(d);
        let mut total = id
            .kron(&self.h)
            .sub(&self.h.transpose().kron(&id))
            .scale(-I);
        for (n1, l1) in self.jumps.iter().enumerate() {
            let l1_adj = l1.adjoint();
            let l1_conj = l1.conj();
            for (n2, l2) in self.jumps.iter().enumerate() {
                let c = self.coeff[[n1, n2]];
                if c == 0.0 {
                    continue;
                }
                let prod = l1_adj.matmul(l2);
                let term = l1_conj
                    .kron(l2)
                    .axpby(C64::new(1.0, 0.0), &id.kron(&prod), C64::new(-0.5, 0.0))
                    .axpby(C64::new(1.0, 0.0), &prod.transpose().kron(&id), C64::new(-0.5, 0.0));
                total = total.axpby(C64::new(1.0, 0.0), &term, C64::new(c, 0.0));
            }
        }
        LiouvillianMatrix { d, matrix: total }
    }
}

fn channels_from(coeff: &Array2<f64>, jumps: &[CsrMatrix]) -> Result<Vec<Channel>> {
    let n = jumps.len();
    let make = |weight: f64, op: CsrMatrix| Channel {
        weight,
        op_adj: op.adjoint(),
        op,
    };
    if n > 0 && coeff.iter().all(|&v| v == coeff[[0, 0]]) {
        // Constant coefficients: a single channel built from Σ L, which
        // keeps symmetries of the sum exact.
        if coeff[[0, 0]] == 0.0 {
            return Ok(Vec::new());
        }
        let mut sum = CsrMatrix::zeros(jumps[0].nrows(), jumps[0].ncols());
        for l in jumps {
            sum = sum.add(l);
        }
        return Ok(vec![make(coeff[[0, 0]], sum)]);
    }
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || coeff[[i, j]] == 0.0));
    if diagonal {
        return Ok((0..n)
            .filter(|&i| coeff[[i, i]] != 0.0)
            .map(|i| make(coeff[[i, i]], jumps[i].clone()))
            .collect());
    }
    let (vals, vecs) = linalg::eigh_real(coeff)?;
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = Vec::new();
    for (k, &w) in vals.iter().enumerate() {
        if w.abs() <= CHANNEL_CUTOFF * scale {
            continue;
        }
        let mut op = CsrMatrix::zeros(jumps[0].nrows(), jumps[0].ncols());
        for (nidx, l) in jumps.iter().enumerate() {
            let u = vecs[[nidx, k]];
            if u != 0.0 {
                op = op.axpby(C64::new(1.0, 0.0), l, C64::new(u, 0.0));
            }
        }
        out.push(make(w, op));
    }
    Ok(out)
}

/// Explicit superoperator in the column-stacking convention.
#[derive(Debug, Clone)]
pub struct LiouvillianMatrix {
    d: usize,
    matrix: CsrMatrix,
}

impl LiouvillianMatrix {
    pub const VECTORIZATION: &'static str = "column-stacking";

    pub fn system_dim(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        let v = self.matrix.matvec(&crate::sparse::vec_col(rho));
        crate::sparse::unvec_col(&v, self.d)
    }

    /// Largest `|Σ_p S[(p,p), col]|` over all columns: zero for a
    /// trace-preserving generator.
    pub fn trace_defect(&self) -> f64 {
        let d = self.d;
        let mut sums = vec![C64::new(0.0, 0.0); d * d];
        for (r, c, v) in self.matrix.triplets() {
            if r % (d + 1) == 0 {
                sums[c] += v;
            }
        }
        sums.into_iter().map(|s| s.norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::EnvCorrelator;
    use crate::model::{ModelParams, PhysicalBasis};
    use crate::operators;
    use crate::sparse::{dagger, max_abs, trace};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn build(n: usize, env: EnvCorrelator) -> Lindbladian {
        let p = ModelParams::new(n, 1.0, 0.5, 0.8).unwrap();
        let b = PhysicalBasis::enumerate(&p);
        let h = operators::hamiltonian(&b, &p).unwrap();
        let os = operators::charge_operators(&b, &p).unwrap();
        let ls = operators::lindblad_operators(&h, &os, env.beta).unwrap();
        Lindbladian::new(&h, &ls, &env.matrix(p.n_fermion_sites()), p.lattice_spacing).unwrap()
    }

    fn random_matrix(d: usize, rng: &mut ChaCha8Rng) -> Array2<C64> {
        Array2::from_shape_fn((d, d), |_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn envs() -> Vec<EnvCorrelator> {
        vec![
            EnvCorrelator::delta(1.0, 0.1).unwrap(),
            EnvCorrelator::gaussian(1.0, 1.0, 0.1).unwrap(),
            EnvCorrelator::constant(1.0, 0.1).unwrap(),
        ]
    }

    #[test]
    fn paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for env in envs() {
            let lv = build(2, env);
            let kron = lv.superoperator_kron();
            let cols = lv.superoperator();
            assert!(kron.matrix().max_abs_diff(cols.matrix()) < 1e-13, "{:?}", env.kind);
            for _ in 0..10 {
                let rho = random_matrix(lv.dim(), &mut rng);
                let a = lv.apply(&rho);
                assert!(max_abs(&(a.clone() - kron.apply(&rho))) < 1e-12);
                assert!(trace(&a).norm() < 1e-12);
                // Hermiticity preservation
                let lhs = dagger(&a);
                let rhs = lv.apply(&dagger(&rho));
                assert!(max_abs(&(lhs - rhs)) < 1e-12);
            }
            assert!(cols.trace_defect() < 1e-13);
        }
    }

    #[test]
    fn linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let lv = build(2, envs()[1]);
        let x = random_matrix(6, &mut rng);
        let y = random_matrix(6, &mut rng);
        let (a, b) = (C64::new(0.3, -1.2), C64::new(2.0, 0.5));
        let lhs = lv.apply(&(x.mapv(|v| v * a) + y.mapv(|v| v * b)));
        let rhs = lv.apply(&x).mapv(|v| v * a) + lv.apply(&y).mapv(|v| v * b);
        assert!(max_abs(&(lhs - rhs)) < 1e-12);
    }

    #[test]
    fn closed_generator_is_commutator() {
        let lv = build(2, envs()[0]);
        let closed = Lindbladian::closed(lv.hamiltonian()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_matrix(6, &mut rng);
        let h = lv.hamiltonian().to_dense();
        let expect = (h.dot(&rho) - rho.dot(&h)).mapv(|v| -I * v);
        assert!(max_abs(&(closed.apply(&rho) - expect)) < 1e-13);
        assert!(closed.is_closed());
    }

    #[test]
    fn dimension_checks() {
        let h = CsrMatrix::identity(3);
        let l = CsrMatrix::identity(2);
        assert!(Lindbladian::new(&h, &[l], &Array2::ones((1, 1)), 1.0).is_err());
        assert!(Lindbladian::new(&h, std::slice::from_ref(&h), &Array2::ones((2, 2)), 1.0).is_err());
    }
}
