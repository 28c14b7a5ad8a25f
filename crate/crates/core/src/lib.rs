//! Real-time game-theoretic coordination of competitive mobility-on-demand
//! fleets.
//!
//! The crate models a service area as a station graph with fluid user queues
//! and per-company vehicle stocks. Companies split a smooth queue-regulating
//! delivery target through a barrier-regularized game whose unique
//! equilibrium moves with the plant state; a projected prediction-correction
//! coordinator tracks it in real time while a balance projection keeps every
//! company's vehicle stocks constant. The harness runs the closed loop,
//! derives the constants behind its convergence guarantees, and checks them
//! on traces.

pub mod coordinator;
pub mod equilibrium;
pub mod error;
pub mod game;
pub mod harness;
pub mod plant;
pub mod qp;
pub mod regulation;
pub mod sensitivity;
pub mod topology;

pub use coordinator::{balance_project, box_project, coordinator_step, feasible_box};
pub use equilibrium::{
    approximation_bounds, approximation_report, solve_ne, ApproximationBounds,
    ApproximationReport,
};
pub use error::{Error, Result};
pub use game::{
    multiplier_map, Game, GameConfig, GameState, LagrangianPart, Layout, PlayerSpec,
    QuadraticCost, QuadraticProfit,
};
pub use harness::{
    constants_ledger, run_closed_loop, tracking_metrics, ConstantsLedger, Scenario, Trace,
};
pub use plant::{plant_step, vehicle_balance_residual, ArrivalKind, ArrivalModel, PlantState};
pub use regulation::RegulationParams;
pub use sensitivity::{
    assemble_jacobians, lipschitz_estimates, prediction_term, SensitivityBundle,
};
pub use topology::StationGraph;
