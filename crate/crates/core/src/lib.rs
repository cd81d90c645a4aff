//! Exact planner for multi-agent collective construction (MACC) with
//! per-action-type durations.
//!
//! The pipeline is:
//!
//! 1. [`instance`] parses the building world (grid, target height map, agent cap).
//! 2. [`durations`] turns rational action durations into integer timesteps.
//! 3. [`catalog`] enumerates every timed action and block-action for a horizon `T`.
//! 4. [`model`] assembles the 0/1 integer program and writes it in CPLEX LP format.
//! 5. [`solve`] runs an external MILP solver and walks the horizon upward until a
//!    plan exists, which gives optimal makespan first and sum-of-costs second.
//! 6. [`plan`] decomposes the selected actions into per-agent itineraries.
//! 7. [`bounds`] computes the makespan bounds and the duration-based estimate.
//! 8. [`validate`] replays plans against the world rules without touching the model.
//! 9. [`oracle`] solves toy instances by exhaustive search to certify the pipeline.

pub mod bounds;
pub mod catalog;
pub mod durations;
pub mod instance;
pub mod model;
pub mod oracle;
pub mod plan;
pub mod solve;
pub mod validate;

pub use bounds::BoundReport;
pub use catalog::{Action, ActionTemplate, BlockAction, Catalog, Kind};
pub use durations::{ActionType, DurationSpec, ScaledDurations};
pub use instance::{Cell, GridDims, Instance, Position};
pub use model::MilpModel;
pub use plan::{Itinerary, Plan};
pub use solve::{Solution, SolveStatus, SolverConfig};
pub use validate::{Rule, Violation, ViolationReport};

/// Timestep index in the scaled (integer) time domain.
pub type Time = u32;
