//! Matrix-level emulation of a dilation-based Lindblad algorithm and its
//! Trotter errors.

pub mod cycle;
pub mod pauli;
pub mod trotter;

pub use cycle::{build_j, dilated_evolve, dilation_curve, dilation_cycle, DilatedRun, DilationSetup};
pub use pauli::{pauli_decompose, Pauli, PauliString, PauliTerm, PauliTermList};
pub use trotter::{
    compare_closed_trotter, trotter_error_bound, trotter_step, trotter_unitary, unitarity_defect, ClosedTrotterComparison,
    TrotterCurve,
};
