//! Post-processing of simulated traces.

pub mod certificate;
pub mod compare;
pub mod lyapunov;
pub mod metrics;

pub use certificate::{finite_time_bound, st_gain_certificate, JointCertificate};
pub use compare::{compare_controllers, ComparisonReport, ControllerSummary};
pub use metrics::{chattering_index, compute_metrics, ErrorMetrics, Stats};
