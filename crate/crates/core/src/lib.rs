//! Hard real-time heuristic scheduling on a single non-preemptive processor.
//!
//! * [`workload`]: aperiodic task model, seeded generation, workload files.
//! * [`resource`]: shared/exclusive resource availability and earliest start times.
//! * [`heuristics`]: the six H functions and minimum-H selection.
//! * [`offline`]: Original and Myopic schedule construction with strong
//!   feasibility and bounded backtracking.
//! * [`sim`]: discrete-time online execution with discards and scheduling overhead.
//! * [`experiments`]: replicated parameter grids and figure data.

pub mod experiments;
pub mod heuristics;
pub mod offline;
pub mod resource;
pub mod sim;
pub mod workload;

/// Simulated time, in integer time units.
pub type Time = u64;

pub use heuristics::{argmin_h, eval_h, HeuristicKind, HeuristicSpec, HeuristicValue, Weight};
pub use offline::{build, BuildConfig, BuildOutcome, BuildResult, OnInfeasible, ScheduledEntry, WindowSize};
pub use resource::{AccessMode, AvailabilityTable, ResourceRequest};
pub use sim::{replay_validate, simulate, OverheadModel, SimConfig, SimOutcome};
pub use workload::{generate, load_workload, save_workload, Task, TaskId, TaskSet, TimeRange, WorkloadParams};
