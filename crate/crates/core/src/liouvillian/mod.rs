//! Lindblad generator, its spectrum, CP block structure and rate estimates.

pub mod cp_sector;
pub mod generator;
pub mod leading;
pub mod rates;
pub mod spectrum;

pub use cp_sector::{cp_sector_analysis, CpSectorReport, SectorSpectra};
pub use generator::{Lindbladian, LiouvillianMatrix};
pub use leading::{leading_spectrum, LeadingOptions, LeadingResult};
pub use rates::{eigenstate_dissipation_rate, eigenstate_dissipation_rates, relaxation_rate_estimate, EigenstateRate, RateEstimate};
pub use spectrum::{eigenvalues, full_spectrum, Sector, SpectrumOptions, SpectrumResult};
