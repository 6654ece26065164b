//! Parallel algorithm for finite families of k-strict pseudocontractions on
//! `ℝ^d`, explicit rates of asymptotic regularity, and an empirical
//! certification harness for every inequality those rates rest on.

pub mod check;
pub mod engine;
pub mod exact;
pub mod harness;
pub mod operators;
pub mod rates;
pub mod rng;
pub mod schedules;
pub mod vector;

pub use check::{CheckReport, Violation, DEFAULT_SLACK};
pub use operators::{Operator, OperatorError, OperatorKind};
pub use schedules::{Gamma, MixSchedule, StepSchedule, Theta};
pub use vector::Vector;
