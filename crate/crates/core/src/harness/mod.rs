//! Scenario I/O, the closed-loop runner, the constants ledger, and
//! tracking/averaging metrics.

pub mod ledger;
pub mod metrics;
pub mod runner;
pub mod scenario;
pub mod steady;

pub use ledger::{constants_ledger, contraction_factor, regulation_band, ConstantsLedger};
pub use metrics::{cumulative_integral, running_average, tracking_metrics, TrackingMetrics};
pub use runner::{run_closed_loop, OracleSample, Trace, TraceRecord};
pub use scenario::Scenario;
pub use steady::closed_loop_fixed_point;
