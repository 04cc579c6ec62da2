//! CP block structure of the Liouvillian.
//!
//! CP splits the state space into even and odd sectors, and operator space
//! into the four blocks `P_a ρ P_b`. The generator keeps the two sectors
//! apart when every block is invariant; then the even-even, odd-odd and
//! coherence blocks have separate spectra. A weaker property, `𝒞𝓛 = 𝓛𝒞`
//! with `𝒞(ρ) = CP ρ CP`, only says that operator parity is conserved.

use faer::Mat;

use super::generator::Lindbladian;
use super::spectrum::{check_cap_dim, sort_eigenvalues, HermitianBasis, SpectrumOptions};
use crate::error::{invalid, Result};
use crate::linalg;
use crate::sparse::{CsrMatrix, C64};

#[derive(Debug, Clone)]
pub struct SectorSpectra {
    pub even: Vec<C64>,
    pub odd: Vec<C64>,
    /// Even-odd coherences together with their adjoints.
    pub coherence: Vec<C64>,
}

#[derive(Debug, Clone)]
pub struct CpSectorReport {
    /// Frobenius norm of all parts of `𝓛` that couple different blocks
    /// `P_a ρ P_b`.
    pub cross_block_norm: f64,
    /// `‖𝒞𝓛 - 𝓛𝒞‖_F`.
    pub parity_commutator_norm: f64,
    /// `(d_even, d_odd)` of the state space.
    pub state_dims: (usize, usize),
    /// Dimensions of the `±1` eigenspaces of `𝒞`.
    pub parity_dims: (usize, usize),
    /// Present when requested and the cross blocks vanish.
    pub spectra: Option<SectorSpectra>,
}

/// Real orthogonal change of basis to CP eigenstates, even states first.
fn sector_rotation(cp: &CsrMatrix) -> Result<(CsrMatrix, usize)> {
    let d = cp.nrows();
    let mut perm = vec![usize::MAX; d];
    for (r, c, v) in cp.triplets() {
        if v != C64::new(1.0, 0.0) || perm[c] != usize::MAX {
            return invalid("CP operator is not a permutation matrix");
        }
        perm[c] = r;
    }
    if perm.contains(&usize::MAX) || (0..d).any(|i| perm[perm[i]] != i) {
        return invalid("CP operator is not an involutive permutation");
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut even: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut odd: Vec<Vec<(usize, f64)>> = Vec::new();
    for (i, &j) in perm.iter().enumerate() {
        if j == i {
            even.push(vec![(i, 1.0)]);
        } else if i < j {
            even.push(vec![(i, r), (j, r)]);
            odd.push(vec![(i, r), (j, -r)]);
        }
    }
    let d_even = even.len();
    let trip = even
        .iter()
        .chain(&odd)
        .enumerate()
        .flat_map(|(col, v)| v.iter().map(move |&(row, x)| (row, col, C64::new(x, 0.0))))
        .collect();
    Ok((CsrMatrix::from_triplets(d, d, trip), d_even))
}

fn rotate(q: &CsrMatrix, qt: &CsrMatrix, a: &CsrMatrix) -> CsrMatrix {
    qt.matmul(a).matmul(q).pruned(0.0)
}

fn restrict(m: &Mat<f64>, idx: &[usize]) -> Mat<f64> {
    Mat::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

/// Split the generator by CP sector.
pub fn cp_sector_analysis(
    lv: &Lindbladian,
    cp: &CsrMatrix,
    opts: &SpectrumOptions,
    with_spectra: bool,
    block_tol: f64,
) -> Result<CpSectorReport> {
    let d = lv.dim();
    if cp.dim() != (d, d) {
        return invalid("CP operator dimension differs from the generator");
    }
    let (q, d_even) = sector_rotation(cp)?;
    let d_odd = d - d_even;
    let qt = q.transpose();
    let h = rotate(&q, &qt, lv.hamiltonian());
    let jumps: Vec<CsrMatrix> = lv.jumps().iter().map(|l| rotate(&q, &qt, l)).collect();
    let rotated = Lindbladian::new(&h, &jumps, lv.coefficients(), 1.0)?;
    let s = rotated.superoperator();

    // Entry r = i + j d of vec(ρ) sits in block (i even?, j even?).
    let block = |r: usize| ((r % d) < d_even, (r / d) < d_even);
    let parity = |r: usize| {
        let (a, b) = block(r);
        a == b
    };
    let mut cross = 0.0;
    let mut commutator = 0.0;
    for (r, c, v) in s.matrix().triplets() {
        if block(r) != block(c) {
            cross += v.norm_sqr();
        }
        if parity(r) != parity(c) {
            commutator += 4.0 * v.norm_sqr();
        }
    }
    let cross = cross.sqrt();

    let spectra = if with_spectra && cross <= block_tol {
        check_cap_dim(d * d, opts)?;
        let hb = HermitianBasis::new(d);
        let m = hb.real_matrix(&s);
        let (mut ee, mut oo, mut eo) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..d {
            if i < d_even {
                ee.push(i);
            } else {
                oo.push(i);
            }
            for j in i + 1..d {
                let group = match (i < d_even, j < d_even) {
                    (true, true) => &mut ee,
                    (false, false) => &mut oo,
                    _ => &mut eo,
                };
                group.push(hb.sym(i, j));
                group.push(hb.anti(i, j));
            }
        }
        let solve = |idx: &[usize]| -> Result<Vec<C64>> {
            if idx.is_empty() {
                return Ok(Vec::new());
            }
            let mut vals = linalg::eigvals_real(&restrict(&m, idx))?;
            sort_eigenvalues(&mut vals);
            Ok(vals)
        };
        Some(SectorSpectra {
            even: solve(&ee)?,
            odd: solve(&oo)?,
            coherence: solve(&eo)?,
        })
    } else {
        None
    };

    Ok(CpSectorReport {
        cross_block_norm: cross,
        parity_commutator_norm: commutator.sqrt(),
        state_dims: (d_even, d_odd),
        parity_dims: (d_even * d_even + d_odd * d_odd, 2 * d_even * d_odd),
        spectra,
    })
}
