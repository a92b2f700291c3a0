//! Optical dipole forces on nanodiamonds that host dense NV-center ensembles.
//!
//! The crate covers the full chain from emitter physics to the statistics an
//! optical-tweezers experiment reports:
//!
//! * [`quantum`]: single-emitter ZPL dipole moment, three-level Bloch steady
//!   state and the analytic dipole force/potential.
//! * [`collective`]: coarse-graining of the inhomogeneous ZPL distribution into
//!   Dicke sub-domains, their Liouvillian steady states and stiffness.
//! * [`trap`]: Rayleigh (classical) stiffness, total stiffness curves,
//!   stiffness ratios and the high/low-NV difference Ξ.
//! * [`brownian`]: overdamped Langevin traces under the five-segment laser
//!   sequence.
//! * [`analysis`]: Welch PSD, Lorentzian corner-frequency fits, ratio
//!   extraction, the 10 % rule, LOF outlier rejection and moments.
//! * [`ensemble`]: Monte Carlo over nanodiamond populations.
//!
//! All quantities are SI internally; see [`units`] for conversions.

pub mod analysis;
pub mod brownian;
pub mod collective;
pub mod ensemble;
mod error;
pub mod io;
pub mod linalg;
pub mod quantum;
pub mod trap;
pub mod units;

pub use error::{Error, Result};
