//! Finite-volume simulation of a density coupled to a regularized velocity
//! field, with a per-step ledger that checks the discrete energy, entropy and
//! `Lᵖ` estimates along the trajectory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod driver;
pub mod elliptic;
pub mod error;
pub mod evolution;
pub mod field;
pub mod grid;
pub mod ledger;
pub mod linalg;
pub mod monitor;
pub mod ops;
pub mod reaction;
pub mod replay;
pub mod snapshot;

pub use config::{parse_config, InitSpec, SimConfig};
pub use driver::{run_config, SimOutcome};
pub use elliptic::{Backend, HelmholtzOperator, SolveReport};
pub use error::{Error, Result};
pub use evolution::{run, AdvectionMode, EllipticSettings, ModelParams, RunControls, RunOutcome, StepState, Stepper};
pub use field::{ScalarField, VectorField};
pub use grid::Grid;
pub use monitor::{AbortReport, GuardConfig, GuardVerdict, LedgerRow, Monitor, MonitorConfig};
pub use reaction::ReactionModel;
pub use replay::{replay, ReplayReport};
pub use snapshot::{read_snapshot, write_snapshot, Snapshot};
