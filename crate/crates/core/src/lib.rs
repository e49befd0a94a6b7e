//! Multisensor multitarget tracking by particle-based belief propagation.
//!
//! * [`model`]: states, motion and sensor models, and the local factors.
//! * [`association`]: per-sensor measurement evaluation and loopy data
//!   association message passing.
//! * [`tracker`]: the particle tracker over a fixed number of potential
//!   targets.
//! * [`simulator`]: ground truth and measurement generation.
//! * [`evaluation`]: OSPA and reference oracles.
//!
//! All randomness is drawn from streams derived in [`rng`], so a run is
//! reproducible from its seed regardless of the number of worker threads.

pub mod association;
pub mod evaluation;
pub mod model;
pub mod rng;
pub mod simulator;
pub mod tracker;

pub use association::{iterate_association, AssociationError, BetaTable, EtaTable};
pub use evaluation::{ospa, OspaParams};
pub use model::{Measurement, MeasurementFrame, MotionModel, SensorModel, TargetState};
pub use simulator::{generate_frame, generate_truth, GroundTruth, ScenarioConfig};
pub use tracker::{AdaptiveBirth, BirthMode, TrackRecord, Tracker, TrackerConfig, TrackerError};
