//! Construction and certification of two-setting Bell tests for entangled
//! pure states of any number of particles with arbitrary finite local
//! dimensions.
//!
//! The library walks a fixed pipeline:
//!
//! 1. [`optimizer::closest_product`] finds the closest product state of the
//!    input (the geometric-measure maximizer) by alternating sweeps.
//! 2. [`frame::aligned_frame`] builds per-party orthonormal qubit frames
//!    aligned with that product state and tabulates the state's coefficients
//!    over them, exposing the support structure that drives the construction.
//! 3. [`settings`] synthesizes one two-outcome measurement pair per party:
//!    either the rotation-based table (when the largest proper support
//!    pattern has size `n - 2`) or the parametric table driven by a
//!    polynomial root search (smaller patterns).
//! 4. [`evaluator::quantum_value`] computes the exact quantum probabilities
//!    entering the certified combination, with explicit leakage accounting
//!    for local dimensions above two.
//! 5. [`lhv`] establishes the classical bound by exhaustive enumeration of
//!    deterministic local models.
//!
//! [`pipeline::certify`] ties the steps together and emits a reproducible
//! JSON certificate; the `hardy-forge` binary wraps it in a CLI.

pub mod error;
pub mod evaluator;
pub mod frame;
pub mod io;
pub mod lhv;
pub mod linalg;
pub mod optimizer;
pub mod pipeline;
pub mod poly;
pub mod settings;
pub mod state;

pub use error::{Error, Result};
pub use evaluator::{quantum_value, HardyReport};
pub use frame::{aligned_frame, AlignedFrame};
pub use optimizer::{closest_product, ClosestProduct};
pub use pipeline::{certify, Certificate, PipelineOptions};
pub use settings::{MeasurementSettings, Scenario};
pub use state::{LocalVector, ProductVector, PureState, SubsetMask};

/// Version string stamped into certificates and reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
