//! Density-matrix evolution and the observables built on it.

pub mod entropy;
pub mod evolve;
pub mod observables;
pub mod string;

pub use entropy::SpectralEvolution;
pub use evolve::{expectation, rk4_evolve, ClosedEvolution, EvolveOptions, Series, Trajectory};
pub use observables::{string_metric, string_peak_time, trajectory_relaxation_time, vacuum_subtracted_fields, von_neumann_entropy};
pub use string::{phase_diagram, phase_point, subtracted_string_fields, PhaseMode, PhaseOptions, PhasePoint, StringSetup};
