//! Seeded synthetic data for desk-scale reproduction of the evaluations.
//!
//! [`gen_class_log`] builds a classification log whose joint counts of
//! primary failures, disagreements and detector hits are exactly those
//! requested. [`gen_steering_scenario`] builds a steering trace in which the
//! two systems agree up to noise, except during a ramp before each
//! disengagement where they are pushed apart.

mod class_log;
mod steering;

pub use class_log::{gen_class_log, CellCounts, ClassLogSpec};
pub use steering::{gen_steering_scenario, evenly_spaced_events, SteeringScenario, SteeringScenarioSpec};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("infeasible spec: {0}")]
    Infeasible(String),
    #[error("generator invariant violated: {0}")]
    Internal(String),
}
