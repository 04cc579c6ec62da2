//! Pauli-string expansion of Hermitian matrices.

use std::fmt;

use ndarray::Array2;

use crate::error::{invalid, Result};
use crate::sparse::C64;

/// Coefficients below this are dropped.
pub const DROP_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    fn flips(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    /// `⟨out|P|bit⟩` for the single nonzero `out`.
    fn amplitude(self, bit: bool) -> C64 {
        match (self, bit) {
            (Pauli::I, _) | (Pauli::X, _) | (Pauli::Z, false) => C64::new(1.0, 0.0),
            (Pauli::Z, true) => C64::new(-1.0, 0.0),
            (Pauli::Y, false) => C64::new(0.0, 1.0),
            (Pauli::Y, true) => C64::new(0.0, -1.0),
        }
    }

    fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product `P_0 ⊗ P_1 ⊗ ...`; qubit 0 is the most significant bit
/// of the basis index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString(pub Vec<Pauli>);

impl PauliString {
    /// String with base-4 digits `code`, qubit 0 most significant.
    pub fn from_code(mut code: usize, qubits: usize) -> Self {
        let mut s = vec![Pauli::I; qubits];
        for k in (0..qubits).rev() {
            s[k] = Pauli::ALL[code % 4];
            code /= 4;
        }
        PauliString(s)
    }

    pub fn qubits(&self) -> usize {
        self.0.len()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&p| p == Pauli::I)
    }

    pub fn flip_mask(&self) -> usize {
        let q = self.qubits();
        self.0
            .iter()
            .enumerate()
            .filter(|(_, p)| p.flips())
            .fold(0, |m, (k, _)| m | 1 << (q - 1 - k))
    }

    /// `P|y⟩ = value |row⟩`.
    pub fn apply_basis(&self, y: usize) -> (usize, C64) {
        let q = self.qubits();
        let mut amp = C64::new(1.0, 0.0);
        for (k, p) in self.0.iter().enumerate() {
            amp *= p.amplitude(y >> (q - 1 - k) & 1 == 1);
        }
        (y ^ self.flip_mask(), amp)
    }

    /// Two strings commute iff they differ (both non-identity) on an even
    /// number of qubits.
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        self.0
            .iter()
            .zip(&other.0)
            .filter(|(a, b)| **a != Pauli::I && **b != Pauli::I && a != b)
            .count()
            % 2
            == 0
    }

    pub fn to_matrix(&self) -> Array2<C64> {
        let n = 1usize << self.qubits();
        let mut m = Array2::zeros((n, n));
        for y in 0..n {
            let (x, v) = self.apply_basis(y);
            m[(x, y)] = v;
        }
        m
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|p| write!(f, "{}", p.symbol()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PauliTerm {
    pub coeff: f64,
    pub string: PauliString,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PauliTermList {
    pub qubits: usize,
    /// Lexicographic in the base-4 code.
    pub terms: Vec<PauliTerm>,
}

impl PauliTermList {
    pub fn dim(&self) -> usize {
        1 << self.qubits
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Σ a_j P_j`.
    pub fn to_matrix(&self) -> Array2<C64> {
        let n = self.dim();
        let mut m = Array2::zeros((n, n));
        for t in &self.terms {
            for y in 0..n {
                let (x, v) = t.string.apply_basis(y);
                m[(x, y)] += v * t.coeff;
            }
        }
        m
    }
}

/// Smallest `q` with `2^q ≥ n`.
pub fn qubits_for(n: usize) -> usize {
    n.next_power_of_two().trailing_zeros() as usize
}

/// Zero-pad a square matrix to dimension `n`.
pub fn pad(m: &Array2<C64>, n: usize) -> Array2<C64> {
    let d = m.nrows();
    let mut out = Array2::zeros((n, n));
    out.slice_mut(ndarray::s![..d, ..d]).assign(m);
    out
}

/// `a_j = tr(P_j H) / 2^q` over all `4^q` strings, after zero-padding `H`
/// to the next power of two.
pub fn pauli_decompose(h: &Array2<C64>) -> Result<PauliTermList> {
    let (d, c) = h.dim();
    if d != c || d == 0 {
        return invalid(format!("expected a nonempty square matrix, got {d}x{c}"));
    }
    let q = qubits_for(d);
    let n = 1usize << q;
    let hp = pad(h, n);
    let scale = hp.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let mut terms = Vec::new();
    for code in 0..(1usize << (2 * q)) {
        let string = PauliString::from_code(code, q);
        // tr(P H) = Σ_y P_{x,y} H_{y,x} where P|y⟩ ∝ |x⟩
        let mut tr = C64::new(0.0, 0.0);
        for y in 0..n {
            let (x, v) = string.apply_basis(y);
            tr += v * hp[(y, x)];
        }
        let a = tr / n as f64;
        if a.im.abs() > 1e-10 * scale.max(1.0) {
            return invalid("Pauli expansion needs a Hermitian matrix");
        }
        if a.re.abs() >= DROP_TOL {
            terms.push(PauliTerm { coeff: a.re, string });
        }
    }
    Ok(PauliTermList { qubits: q, terms })
}
