//! Domain types and the local factors of the tracking factor graph.
//!
//! The tracker is generic over three traits:
//!
//! * [`ParticleState`]: a kinematic state that can be averaged,
//! * [`Dynamics`]: a Markov transition that can be sampled,
//! * [`Sensor`]: a detection/measurement/clutter model.
//!
//! The factor functions here ([`likelihood_factor_g`], [`detection_factor_h`],
//! [`joint_factor_upsilon`], [`exclusion_factor_psi`]) are written against
//! those traits, so the two-dimensional range-bearing scenario and the scalar
//! linear-Gaussian model share one implementation. Every factor has a log-domain
//! twin; the tracker only ever uses the log forms.

mod kinematics;
pub mod linear;
mod range_bearing;

use std::fmt::Debug;

use rand::Rng;
use thiserror::Error;

pub use kinematics::{transition_sample, MotionModel, TargetState};
pub use range_bearing::{
    clutter_pdf, log_clutter_pdf, log_measurement_pdf, measurement_pdf, wrap_bearing_residual,
    DetectionProfile, Measurement, SensorModel,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("target position coincides with sensor position; bearing undefined")]
    DegenerateGeometry,
    #[error("false-alarm density vanishes at an observed measurement (index {index})")]
    ClutterDensityZero { index: usize },
    #[error("association index {a} out of range for {measurements} measurements")]
    AssociationOutOfRange { a: usize, measurements: usize },
    #[error("detection probability {0} outside [0, 1]")]
    InvalidDetectionProbability(f64),
    #[error("mean clutter count must be positive, got {0}")]
    NonPositiveClutterMean(f64),
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
}

/// A kinematic state that can be carried by a particle.
pub trait ParticleState: Clone + Debug + Send + Sync {
    fn zero() -> Self;

    /// `self += weight * other`
    fn add_scaled(&mut self, other: &Self, weight: f64);
}

/// Single-target Markov transition `f(x_n | x_{n-1})`.
pub trait Dynamics: Send + Sync {
    type State: ParticleState;

    fn propagate<R: Rng + ?Sized>(&self, state: &Self::State, rng: &mut R) -> Self::State;
}

/// Per-sensor measurement model: detection probability, target likelihood
/// `f(z | x)` and Poisson clutter with intensity `mu * f_FA(z)`.
pub trait Sensor<X>: Send + Sync {
    type Measurement: Clone + Debug + Send + Sync;

    fn detection_probability(&self, state: &X) -> f64;

    /// Mean number of false alarms per scan. Always positive.
    fn clutter_mean(&self) -> f64;

    fn log_clutter_pdf(&self, z: &Self::Measurement) -> f64;

    fn log_measurement_pdf(&self, z: &Self::Measurement, state: &X) -> Result<f64, ModelError>;

    /// Writes `log f(z_m | state)` for every measurement into `out`.
    ///
    /// Implementations may override this to share per-state work across
    /// measurements.
    fn log_measurement_pdfs(
        &self,
        zs: &[Self::Measurement],
        state: &X,
        out: &mut [f64],
    ) -> Result<(), ModelError> {
        for (o, z) in out.iter_mut().zip(zs) {
            *o = self.log_measurement_pdf(z, state)?;
        }
        Ok(())
    }
}

/// All sensors' measurements at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementFrame<Z = Measurement> {
    per_sensor: Vec<Vec<Z>>,
}

impl<Z> MeasurementFrame<Z> {
    pub fn new(per_sensor: Vec<Vec<Z>>) -> Self {
        Self { per_sensor }
    }

    pub fn empty(num_sensors: usize) -> Self {
        Self {
            per_sensor: (0..num_sensors).map(|_| Vec::new()).collect(),
        }
    }

    pub fn num_sensors(&self) -> usize {
        self.per_sensor.len()
    }

    pub fn sensor(&self, s: usize) -> &[Z] {
        &self.per_sensor[s]
    }

    pub fn sensor_mut(&mut self, s: usize) -> &mut Vec<Z> {
        &mut self.per_sensor[s]
    }

    pub fn counts(&self) -> Vec<usize> {
        self.per_sensor.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.per_sensor.iter().map(Vec::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Z]> {
        self.per_sensor.iter().map(Vec::as_slice)
    }
}

/// Pair of association variables for one sensor.
///
/// `target_side` is the measurement index claimed by a potential target
/// (0 = missed), `measurement_side` the potential-target index claimed by a
/// measurement (0 = clutter). Both indices are 1-based when nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssociationHypothesis {
    pub target_side: usize,
    pub measurement_side: usize,
}

impl AssociationHypothesis {
    /// Whether the pair is consistent for target `k` and measurement `m`.
    pub fn is_consistent(&self, k: usize, m: usize) -> bool {
        exclusion_factor_psi(self.target_side, self.measurement_side, k, m) == 1.0
    }
}

/// Exclusion indicator between target `k`'s claim `a` and measurement `m`'s
/// claim `b`: zero iff exactly one side claims the pairing `(k, m)`.
pub fn exclusion_factor_psi(a: usize, b: usize, k: usize, m: usize) -> f64 {
    if (a == m) != (b == k) {
        0.0
    } else {
        1.0
    }
}

fn check_index(a: usize, measurements: usize) -> Result<(), ModelError> {
    if a > measurements {
        Err(ModelError::AssociationOutOfRange { a, measurements })
    } else {
        Ok(())
    }
}

fn checked_pd<X, S: Sensor<X>>(sensor: &S, x: &X) -> Result<f64, ModelError> {
    let pd = sensor.detection_probability(x);
    if (0.0..=1.0).contains(&pd) {
        Ok(pd)
    } else {
        Err(ModelError::InvalidDetectionProbability(pd))
    }
}

/// `log g(x, r, a; z)`: the log ratio `f(z_a | x) / f_FA(z_a)` for an existing
/// target claiming measurement `a >= 1`, zero otherwise.
pub fn log_likelihood_factor_g<X, S: Sensor<X>>(
    x: &X,
    exists: bool,
    a: usize,
    measurements: &[S::Measurement],
    sensor: &S,
) -> Result<f64, ModelError> {
    check_index(a, measurements.len())?;
    if !exists || a == 0 {
        return Ok(0.0);
    }
    let z = &measurements[a - 1];
    let log_fa = sensor.log_clutter_pdf(z);
    if log_fa == f64::NEG_INFINITY {
        return Err(ModelError::ClutterDensityZero { index: a });
    }
    Ok(sensor.log_measurement_pdf(z, x)? - log_fa)
}

pub fn likelihood_factor_g<X, S: Sensor<X>>(
    x: &X,
    exists: bool,
    a: usize,
    measurements: &[S::Measurement],
    sensor: &S,
) -> Result<f64, ModelError> {
    log_likelihood_factor_g(x, exists, a, measurements, sensor).map(f64::exp)
}

/// `log h(x, r, a)`. Nonexistent targets produce `log 1(a)`.
pub fn log_detection_factor_h<X, S: Sensor<X>>(
    x: &X,
    exists: bool,
    a: usize,
    sensor: &S,
) -> Result<f64, ModelError> {
    if !exists {
        return Ok(if a == 0 { 0.0 } else { f64::NEG_INFINITY });
    }
    let pd = checked_pd(sensor, x)?;
    if a == 0 {
        Ok((1.0 - pd).ln())
    } else {
        let mu = sensor.clutter_mean();
        if mu <= 0.0 {
            return Err(ModelError::NonPositiveClutterMean(mu));
        }
        Ok(pd.ln() - mu.ln())
    }
}

pub fn detection_factor_h<X, S: Sensor<X>>(
    x: &X,
    exists: bool,
    a: usize,
    sensor: &S,
) -> Result<f64, ModelError> {
    log_detection_factor_h(x, exists, a, sensor).map(f64::exp)
}

/// `log υ = log g + log h`.
pub fn log_joint_factor_upsilon<X, S: Sensor<X>>(
    x: &X,
    exists: bool,
    a: usize,
    measurements: &[S::Measurement],
    sensor: &S,
) -> Result<f64, ModelError> {
    check_index(a, measurements.len())?;
    let h = log_detection_factor_h(x, exists, a, sensor)?;
    if h == f64::NEG_INFINITY {
        return Ok(h);
    }
    Ok(h + log_likelihood_factor_g(x, exists, a, measurements, sensor)?)
}

pub fn joint_factor_upsilon<X, S: Sensor<X>>(
    x: &X,
    exists: bool,
    a: usize,
    measurements: &[S::Measurement],
    sensor: &S,
) -> Result<f64, ModelError> {
    log_joint_factor_upsilon(x, exists, a, measurements, sensor).map(f64::exp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sensor() -> SensorModel {
        SensorModel::builder([0.0, 0.0])
            .detection(DetectionProfile::Constant(0.8))
            .clutter_mean(2.0)
            .noise_std(10.0, 0.5)
            .max_range(6000.0)
            .build()
            .unwrap()
    }

    fn on_axis() -> (TargetState, Vec<Measurement>) {
        let x = TargetState::new(1000.0, 0.0, 0.0, 0.0);
        (x, vec![Measurement::new(1000.0, 0.0).unwrap()])
    }

    #[test]
    fn g_is_one_without_existence_or_detection() {
        let s = sensor();
        let (x, zs) = on_axis();
        let zs3 = vec![zs[0]; 3];
        assert_eq!(likelihood_factor_g(&x, false, 3, &zs3, &s).unwrap(), 1.0);
        assert_eq!(likelihood_factor_g(&x, true, 0, &zs3, &s).unwrap(), 1.0);
    }

    #[test]
    fn g_is_density_ratio() {
        let s = sensor();
        let (x, zs) = on_axis();
        let f = measurement_pdf(&zs[0], &x, &s).unwrap();
        let fa = clutter_pdf(&zs[0], &s);
        let g = likelihood_factor_g(&x, true, 1, &zs, &s).unwrap();
        assert_relative_eq!(g, f / fa, max_relative = 1e-12);
        // (2π·10·0.5)⁻¹ / ((2·1000/6000²)/360) = 648000/π
        assert_relative_eq!(g, 648000.0 / std::f64::consts::PI, max_relative = 1e-12);

        // At the edge of the support, f_FA = 9.26e-7 and g = 108000/π ≈ 3.44e4.
        let far = TargetState::new(6000.0, 0.0, 0.0, 0.0);
        let zf = vec![Measurement::new(6000.0, 0.0).unwrap()];
        let g = likelihood_factor_g(&far, true, 1, &zf, &s).unwrap();
        assert_relative_eq!(g, 108000.0 / std::f64::consts::PI, max_relative = 1e-12);
        assert_relative_eq!(
            joint_factor_upsilon(&far, true, 1, &zf, &s).unwrap(),
            0.4 * 108000.0 / std::f64::consts::PI,
            max_relative = 1e-12
        );
    }

    #[test]
    fn g_rejects_zero_clutter_density() {
        let s = sensor();
        let x = TargetState::new(1.0, 0.0, 0.0, 0.0);
        let zs = vec![Measurement::new(0.0, 0.0).unwrap()];
        assert_eq!(
            likelihood_factor_g(&x, true, 1, &zs, &s),
            Err(ModelError::ClutterDensityZero { index: 1 })
        );
    }

    #[test]
    fn h_branches() {
        let s = sensor();
        let (x, _) = on_axis();
        assert_relative_eq!(detection_factor_h(&x, true, 2, &s).unwrap(), 0.4, epsilon = 1e-15);
        assert_relative_eq!(detection_factor_h(&x, true, 0, &s).unwrap(), 0.2, epsilon = 1e-15);
        assert_eq!(detection_factor_h(&x, false, 0, &s).unwrap(), 1.0);
        assert_eq!(detection_factor_h(&x, false, 5, &s).unwrap(), 0.0);
    }

    #[test]
    fn upsilon_is_product() {
        let s = sensor();
        let (x, zs) = on_axis();
        assert_eq!(joint_factor_upsilon(&x, false, 0, &zs, &s).unwrap(), 1.0);
        assert_eq!(joint_factor_upsilon(&x, false, 1, &zs, &s).unwrap(), 0.0);
        assert_relative_eq!(joint_factor_upsilon(&x, true, 0, &zs, &s).unwrap(), 0.2, epsilon = 1e-15);
        let g = likelihood_factor_g(&x, true, 1, &zs, &s).unwrap();
        assert_relative_eq!(
            joint_factor_upsilon(&x, true, 1, &zs, &s).unwrap(),
            g * 0.4,
            max_relative = 1e-12
        );
        assert!(matches!(
            joint_factor_upsilon(&x, true, 2, &zs, &s),
            Err(ModelError::AssociationOutOfRange { .. })
        ));
    }

    #[test]
    fn psi_cases() {
        assert_eq!(exclusion_factor_psi(2, 3, 1, 2), 0.0);
        assert_eq!(exclusion_factor_psi(0, 0, 1, 2), 1.0);
        assert_eq!(exclusion_factor_psi(2, 1, 1, 2), 1.0);
        assert_eq!(exclusion_factor_psi(0, 1, 1, 2), 0.0);
        let h = AssociationHypothesis { target_side: 2, measurement_side: 1 };
        assert!(h.is_consistent(1, 2));
    }

    #[test]
    fn psi_table_has_two_zeros_per_pair() {
        for k in 1..5 {
            for m in 1..5 {
                let zeros = [0, m]
                    .iter()
                    .flat_map(|&a| [0, k].map(move |b| exclusion_factor_psi(a, b, k, m)))
                    .filter(|&v| v == 0.0)
                    .count();
                assert_eq!(zeros, 2);
            }
        }
    }
}
