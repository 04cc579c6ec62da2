//! Iterative solver for the slowest-decaying Liouvillian modes.
//!
//! Restarted Arnoldi on the filter `P = R(h𝓛)^s`, with `R` the RK4 stability
//! polynomial. `P` maps the rightmost eigenvalues of `𝓛` to the largest in
//! modulus, so plain Arnoldi on `P` converges to them. Eigenvalues are then
//! extracted by a Rayleigh-Ritz step with `𝓛` itself and accepted on their
//! true residual.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::generator::Lindbladian;
use super::spectrum::{compare_eigenvalues, sort_eigenvalues};
use crate::error::{invalid, numerical, Result};
use crate::linalg::{self, orthonormalize_against};
use crate::sparse::C64;

#[derive(Debug, Clone, Copy)]
pub struct LeadingOptions {
    /// Krylov subspace size; raised to at least `2k + 8`.
    pub subspace: usize,
    /// Filter time `τ = s h`.
    pub filter_time: f64,
    /// Residual tolerance relative to the operator norm bound.
    pub tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for LeadingOptions {
    fn default() -> Self {
        Self {
            subspace: 40,
            filter_time: 1.0,
            tol: 1e-10,
            max_restarts: 400,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LeadingResult {
    /// Sorted by descending real part.
    pub eigenvalues: Vec<C64>,
    /// `‖𝓛x - λx‖` per eigenvalue, unit-norm `x`.
    pub residuals: Vec<f64>,
    pub restarts: usize,
    pub applications: usize,
}

struct Filter<'a> {
    lv: &'a Lindbladian,
    h: f64,
    steps: usize,
    applications: usize,
    k: [Array2<C64>; 4],
    tmp: Array2<C64>,
    scratch: Array2<C64>,
}

impl<'a> Filter<'a> {
    fn new(lv: &'a Lindbladian, tau: f64) -> Self {
        let d = lv.dim();
        // Keep |hλ| ≤ 1/2, where the RK4 polynomial tracks e^{hλ} closely
        // enough that the ordering by modulus matches the ordering by Re λ.
        let h_max = 0.5 / lv.norm_bound().max(1e-300);
        let steps = (tau / h_max).ceil().max(1.0) as usize;
        let z = || Array2::<C64>::zeros((d, d));
        Self {
            lv,
            h: tau / steps as f64,
            steps,
            applications: 0,
            k: [z(), z(), z(), z()],
            tmp: z(),
            scratch: z(),
        }
    }

    fn apply_l(&mut self, x: &Array2<C64>) -> Array2<C64> {
        self.applications += 1;
        let mut out = Array2::zeros(x.dim());
        self.lv.apply_into(x, &mut out, &mut self.scratch);
        out
    }

    fn apply(&mut self, x: &Array2<C64>) -> Array2<C64> {
        let h = self.h;
        let mut y = x.clone();
        for _ in 0..self.steps {
            let [k1, k2, k3, k4] = &mut self.k;
            self.lv.apply_into(&y, k1, &mut self.scratch);
            self.tmp.assign(&y);
            self.tmp.scaled_add(C64::new(0.5 * h, 0.0), k1);
            self.lv.apply_into(&self.tmp, k2, &mut self.scratch);
            self.tmp.assign(&y);
            self.tmp.scaled_add(C64::new(0.5 * h, 0.0), k2);
            self.lv.apply_into(&self.tmp, k3, &mut self.scratch);
            self.tmp.assign(&y);
            self.tmp.scaled_add(C64::new(h, 0.0), k3);
            self.lv.apply_into(&self.tmp, k4, &mut self.scratch);
            let c = C64::new(h / 6.0, 0.0);
            y.scaled_add(c, k1);
            y.scaled_add(c * 2.0, k2);
            y.scaled_add(c * 2.0, k3);
            y.scaled_add(c, k4);
            self.applications += 4;
        }
        y
    }
}

fn flat(m: Array2<C64>) -> Vec<C64> {
    m.as_standard_layout().iter().copied().collect()
}

fn shaped(v: &[C64], d: usize) -> Array2<C64> {
    Array2::from_shape_vec((d, d), v.to_vec()).expect("length d²")
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `Σ_j X_j c_jl` for each column `l` of `c`.
fn combine(xs: &[Vec<C64>], c: &Array2<C64>) -> Vec<Vec<C64>> {
    let n = xs[0].len();
    (0..c.ncols())
        .map(|l| {
            let mut out = vec![C64::new(0.0, 0.0); n];
            for (j, x) in xs.iter().enumerate() {
                let w = c[(j, l)];
                if w != C64::new(0.0, 0.0) {
                    out.iter_mut().zip(x).for_each(|(o, &v)| *o += w * v);
                }
            }
            out
        })
        .collect()
}

fn projected(v: &[Vec<C64>], w: &[Vec<C64>]) -> Array2<C64> {
    Array2::from_shape_fn((v.len(), w.len()), |(i, j)| dot(&v[i], &w[j]))
}

/// Orthonormal basis for the span of the columns of `y` (small, dense).
fn orthonormal_columns(y: &Array2<C64>) -> Array2<C64> {
    let mut cols: Vec<Vec<C64>> = Vec::new();
    for j in 0..y.ncols() {
        let mut c = y.column(j).to_vec();
        if orthonormalize_against(&mut c, &cols) > 1e-10 {
            cols.push(c);
        }
    }
    Array2::from_shape_fn((y.nrows(), cols.len()), |(i, j)| cols[j][i])
}

/// The `k` eigenvalues of `𝓛` with the largest real parts.
pub fn leading_spectrum(lv: &Lindbladian, k: usize, opts: &LeadingOptions) -> Result<LeadingResult> {
    let d = lv.dim();
    let n = d * d;
    if k == 0 || k > n {
        return invalid(format!("requested {k} eigenvalues of a {n}-dimensional generator"));
    }
    let m = opts.subspace.max(2 * k + 8).min(n);
    let keep = (m / 2).max(k + 2).min(m - 1).max(k.min(m));
    let scale = lv.norm_bound().max(1e-300);
    let mut filter = Filter::new(lv, opts.filter_time);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v0: Vec<C64> = (0..n).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
    let nv = norm(&v0);
    v0.iter_mut().for_each(|x| *x /= nv);

    let mut vs: Vec<Vec<C64>> = vec![v0];
    let mut ws: Vec<Vec<C64>> = vec![flat(filter.apply(&shaped(&vs[0], d)))];
    let mut next: Option<Vec<C64>> = None;

    for restart in 0..=opts.max_restarts {
        // Expand to m vectors; an invariant subspace stops the expansion.
        let mut invariant = false;
        while vs.len() < m {
            let mut cand = next.take().unwrap_or_else(|| ws.last().expect("non-empty").clone());
            if orthonormalize_against(&mut cand, &vs) <= 1e-12 {
                invariant = true;
                break;
            }
            let w = flat(filter.apply(&shaped(&cand, d)));
            vs.push(cand);
            ws.push(w);
        }

        // Rayleigh-Ritz with 𝓛.
        let lvs: Vec<Vec<C64>> = vs.iter().map(|v| flat(filter.apply_l(&shaped(v, d)))).collect();
        let a = projected(&vs, &lvs);
        let (lam, z) = linalg::eig(&a)?;
        let mut order: Vec<usize> = (0..lam.len()).collect();
        order.sort_by(|&x, &y| compare_eigenvalues(&lam[x], &lam[y]));
        let top: Vec<usize> = order.iter().take(k).copied().collect();
        let mut residuals = Vec::with_capacity(k);
        for &j in &top {
            let zj = z.column(j).to_owned().insert_axis(ndarray::Axis(1));
            let x = combine(&vs, &zj).pop().expect("one column");
            let lx = combine(&lvs, &zj).pop().expect("one column");
            let nx = norm(&x);
            let r: Vec<C64> = lx.iter().zip(&x).map(|(a, b)| a - lam[j] * b).collect();
            residuals.push(norm(&r) / nx);
        }
        if top.len() == k && residuals.iter().all(|&r| r <= opts.tol * scale) {
            let mut eigenvalues: Vec<C64> = top.iter().map(|&j| lam[j]).collect();
            let mut idx: Vec<usize> = (0..k).collect();
            idx.sort_by(|&x, &y| compare_eigenvalues(&eigenvalues[x], &eigenvalues[y]));
            residuals = idx.iter().map(|&i| residuals[i]).collect();
            sort_eigenvalues(&mut eigenvalues);
            return Ok(LeadingResult {
                eigenvalues,
                residuals,
                restarts: restart,
                applications: filter.applications,
            });
        }
        if invariant && vs.len() == n {
            return numerical("leading spectrum: full space spanned without convergence");
        }

        // Restart on the dominant Ritz vectors of P.
        let hp = projected(&vs, &ws);
        let (mu, y) = linalg::eig(&hp)?;
        let mut by_mod: Vec<usize> = (0..mu.len()).collect();
        by_mod.sort_by(|&x, &y| mu[y].norm().total_cmp(&mu[x].norm()));
        let sel: Vec<usize> = by_mod.into_iter().take(keep).collect();
        let ysel = Array2::from_shape_fn((y.nrows(), sel.len()), |(i, j)| y[(i, sel[j])]);
        let q = orthonormal_columns(&ysel);
        let new_w = combine(&ws, &q);
        vs = combine(&vs, &q);
        ws = new_w;
        // Continue the Krylov sequence along the largest residual direction.
        let mut best: Option<(f64, Vec<C64>)> = None;
        for w in &ws {
            let mut c = w.clone();
            let r = orthonormalize_against(&mut c, &vs);
            if best.as_ref().is_none_or(|(b, _)| r > *b) {
                best = Some((r, c));
            }
        }
        next = best.and_then(|(r, c)| (r > 1e-12).then_some(c));
        if next.is_none() {
            // Exhausted direction: perturb with a fresh random vector.
            next = Some((0..n).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect());
        }
    }
    numerical(format!(
        "leading spectrum did not converge after {} restarts",
        opts.max_restarts
    ))
}
