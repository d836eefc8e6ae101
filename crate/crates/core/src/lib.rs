//! Simulation of a simplified sub-Nyquist array receiver: multiband array
//! signals, multi-coset sampling with channel selection, joint DOA/carrier
//! estimation, Cramér–Rao bounds and a Monte Carlo harness.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod crb;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod model;
pub mod siggen;

pub use error::{Error, Result};
pub use estimators::{
    Algorithm, EstimationResult, PhaseGrid, Receiver, Refinement, SourceEstimate,
};
pub use harness::{ResultRow, ResultTable, SweepConfig, SweepVariable, TrialRecord};
pub use model::{ArrayGeometry, CMatrix, CVector, MultiCosetPattern, Structure, C64};
pub use siggen::{Envelope, ScenarioConfig, SnapshotSet, SourceTruth};
