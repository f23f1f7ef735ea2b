//! Multi-line metro crew planning and replanning.
//!
//! The crate builds a hierarchical time-space network over a multi-day
//! timetable, searches it for resource-constrained shortest paths, and runs
//! a two-stage column-generation planner plus a fast path-adjustment
//! replanner for disruption scenarios. Benchmark heuristics and a roster
//! rule validator are included.

pub mod heuristics;
pub mod htsn;
pub mod lpsolve;
pub mod matching;
pub mod model;
pub mod planner;
pub mod pulse;
pub mod replanner;
pub mod roster;
pub mod validate;

pub use model::{
    CrewMember, DutyFrame, Instance, Line, Params, TrainTask, TransferStation,
};
pub use roster::{DutyList, PathStep, Roster, StepKind};
