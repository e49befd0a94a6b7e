//! Scalar linear-Gaussian models.
//!
//! A random-walk target observed directly in additive Gaussian noise, with
//! clutter uniform on an interval. This is the single-target, single-sensor
//! setting in which the tracker coincides with a particle Bernoulli filter,
//! so it doubles as a reference configuration for tests.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Dynamics, ModelError, ParticleState, Sensor};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScalarState(pub f64);

impl ParticleState for ScalarState {
    fn zero() -> Self {
        Self(0.0)
    }

    fn add_scaled(&mut self, other: &Self, weight: f64) {
        self.0 += weight * other.0;
    }
}

/// `x_n = x_{n-1} + q u_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomWalk {
    pub std: f64,
}

impl Dynamics for RandomWalk {
    type State = ScalarState;

    fn propagate<R: Rng + ?Sized>(&self, state: &ScalarState, rng: &mut R) -> ScalarState {
        ScalarState(state.0 + self.std * rng.sample::<f64, _>(StandardNormal))
    }
}

/// `z = x + v`, `v ~ N(0, std²)`; clutter uniform on `[clutter_lo, clutter_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSensor {
    pub noise_std: f64,
    pub detection_probability: f64,
    pub clutter_mean: f64,
    pub clutter_lo: f64,
    pub clutter_hi: f64,
}

impl LinearSensor {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.clutter_mean > 0.0) {
            return Err(ModelError::NonPositiveClutterMean(self.clutter_mean));
        }
        if !(0.0..=1.0).contains(&self.detection_probability) {
            return Err(ModelError::InvalidDetectionProbability(self.detection_probability));
        }
        if !(self.noise_std > 0.0) || !(self.clutter_hi > self.clutter_lo) {
            return Err(ModelError::InvalidParameter("degenerate linear sensor".into()));
        }
        Ok(())
    }
}

impl Sensor<ScalarState> for LinearSensor {
    type Measurement = f64;

    fn detection_probability(&self, _state: &ScalarState) -> f64 {
        self.detection_probability
    }

    fn clutter_mean(&self) -> f64 {
        self.clutter_mean
    }

    fn log_clutter_pdf(&self, z: &f64) -> f64 {
        if *z < self.clutter_lo || *z > self.clutter_hi {
            f64::NEG_INFINITY
        } else {
            -(self.clutter_hi - self.clutter_lo).ln()
        }
    }

    fn log_measurement_pdf(&self, z: &f64, state: &ScalarState) -> Result<f64, ModelError> {
        let d = (z - state.0) / self.noise_std;
        Ok(-0.5 * d * d - self.noise_std.ln() - 0.5 * (2.0 * PI).ln())
    }
}
