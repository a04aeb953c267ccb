//! Disturbance-estimator-based motion control for serial manipulators:
//! rigid-body dynamics, the unknown-system-dynamics estimator, four torque
//! controllers, a closed-loop simulator and post-processing.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod controllers;
pub mod dynamics;
pub mod error;
pub mod estimator;
pub mod scenario;
pub mod simulation;
pub mod trace;
pub mod trajectory;

pub use controllers::{ControllerConfig, ControllerState, TrajectoryPoint, Variant};
pub use dynamics::{DynamicsTerms, JointMat, JointVec, LinkParams, ManipulatorModel, ModelKind};
pub use error::{Error, Result};
pub use estimator::{AuxiliaryVars, EstimatorState, InputHold, Usde};
pub use scenario::Scenario;
pub use simulation::{run_scenario, run_variants, RunResult, Trace, TraceRecord};
pub use trajectory::Trajectory;
