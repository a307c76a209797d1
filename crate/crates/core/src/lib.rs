//! Numerical core for twin-field QKD with `M` discrete global phases.
//!
//! The crate computes asymptotic secret-key rates of two twin-field
//! protocols (with and without phase post-selection in the test mode),
//! bounds the eavesdropper's Holevo information under infinite- and
//! three-intensity decoy estimation, locates the maximal tolerable
//! channel loss, and cross-validates the analytic channel model with an
//! event-level Monte Carlo simulator of the protocols themselves.
//!
//! Module map:
//!
//! - [`math`] — binary entropy, Poisson photon-number statistics and
//!   certified series truncation.
//! - [`channel`] — the honest channel/detector model: gains, error
//!   rates and photon-number yields under loss, dark counts and
//!   misalignment.
//! - [`security`] — Holevo-information upper bounds for both
//!   protocols, including the yield-bounding linear programs for the
//!   three-intensity decoy mode.
//! - [`keyrate`] — key-rate assembly, per-point intensity optimization,
//!   maximal-loss search and the repeaterless comparison bound.
//! - [`sim`] — seeded event-level protocol simulator and its
//!   analytic-model comparison.
//! - [`checks`] — the numeric self-check suite exposed by the CLI.

pub mod channel;
pub mod checks;
pub mod error;
pub mod keyrate;
pub mod math;
pub mod security;
pub mod sim;

pub use channel::{EtaMapping, ExperimentParams, PhaseCount};
pub use error::{Error, Result};
pub use keyrate::{DecoyMode, KeyRatePoint, Protocol, Scenario};
