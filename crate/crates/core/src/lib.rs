//! Monitoring paired black-box decision systems through their disagreement.
//!
//! A primary system and an independently built secondary system produce
//! decisions for the same inputs. Where they disagree, the case is routed to
//! a human supervisor. This crate provides the pieces needed to measure how
//! much that supervision buys:
//!
//! - [`streams`]: data model and file formats for classification logs,
//!   steering traces and disengagement events.
//! - [`disagreement`]: categorical top-1 mismatch and the windowed,
//!   normalized steering disagreement score.
//! - [`arbitration`]: oracle-supervised arbitration, random and ensemble
//!   baselines, detector precision/recall.
//! - [`disengagement`]: disengagement periods, window sampling, FAR/FRR and
//!   threshold sweeps.
//! - [`preprocessing`]: temporal frame composites (M1-M5) and steering-angle
//!   dataset balancing.
//! - [`synthgen`]: seeded generators for classification logs with prescribed
//!   joint counts and for steering scenarios with injected divergence.
//!
//! Data-parallel loops go through [`par::Execution`]. With the `parallel`
//! feature (on by default) they run on rayon; without it every path is
//! sequential. Results are identical either way.

pub mod arbitration;
pub mod disagreement;
pub mod disengagement;
pub mod par;
pub mod preprocessing;
pub mod streams;
pub mod synthgen;

pub use arbitration::{ArbitrationError, ArbitrationReport, DetectorMetrics, Method, System};
pub use disagreement::{DisagreementConfig, DisagreementError, DisagreementSignal};
pub use disengagement::{EvalError, Period, PeriodLabel, RocPoint};
pub use par::Execution;
pub use streams::{
    ClassLog, ClassRecord, DisengagementEvent, Initiator, SteeringSample, SteeringTrace,
    StreamError,
};
