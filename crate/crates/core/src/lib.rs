//! Concurrent optimization of observer phasing and sensor tasking for
//! monitoring targets on periodic orbits of the circular restricted
//! three-body problem.
//!
//! The crate is organised bottom-up:
//!
//! - [`dynamics`]: rotating-frame equations of motion, Jacobi integral and
//!   numerical propagation of states and state transition matrices.
//! - [`catalog`]: periodic-orbit catalog ingestion and phase-to-state
//!   mapping.
//! - [`observation`]: angles-only measurement model, information matrices and
//!   the coefficient tensor `A[i, j, k]`.
//! - [`environment`]: observers and targets on a time grid, with the
//!   phase-independent target data cached.
//! - [`tasking`]: lower-level tasking solvers (cumulative and max-min), the
//!   myopic baseline and policy comparison metrics.
//! - [`phasing`]: the upper-level phase search (quasi-Newton ascent,
//!   multi-start, greedy and exhaustive strategies).
//! - [`ekf`]: linearized covariance recursion used to validate the
//!   information bookkeeping against filtering.
//! - [`scenario`]: the scenario file schema.

pub mod catalog;
pub mod dynamics;
pub mod ekf;
pub mod environment;
mod error;
pub mod observation;
pub mod phasing;
pub mod scenario;
pub mod tasking;

pub mod csvfmt;

pub use error::{Error, Result};

pub use catalog::{OrbitSpec, PhaseVector, TimeGrid};
pub use dynamics::{Cr3bp, MassRatio, PropagationSettings, StateVector, Stm};
pub use environment::Environment;
pub use observation::{InfoTensor, MeasurementModel};
pub use phasing::{BilevelObjective, OptimizeResult};
pub use scenario::Scenario;
pub use tasking::{ControlTensor, ObjectiveKind, TaskingSolution};
