//! Ground truth and measurement generation for the range-bearing scenario.
//!
//! Targets start on a circle around the origin at equally spaced angles
//! (with a random common rotation), head for the centre and then follow the
//! noisy constant-velocity model. Sensors sit on a larger circle and see
//! each target in range with probability `P_d`, plus Poisson clutter.

use std::f64::consts::PI;

use nalgebra::{Cholesky, Matrix2, Vector2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use thiserror::Error;

use crate::model::{
    DetectionProfile, Measurement, MeasurementFrame, ModelError, MotionModel, SensorModel, TargetState,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Half-width of the square region of interest (m).
    pub roi_halfwidth: f64,
    pub n_targets: usize,
    /// First time step at which each target exists; one entry per target.
    pub birth_times: Vec<usize>,
    /// Optional last time step of each target; empty means none die.
    pub death_times: Vec<Option<usize>>,
    pub initial_circle_radius: f64,
    pub initial_speed: f64,
    pub n_steps: usize,
    pub num_sensors: usize,
    pub sensor_circle_radius: f64,
    pub detection_probability: f64,
    pub clutter_mean: f64,
    /// Standard deviation of the driving acceleration noise (m/s²).
    pub sigma_u: f64,
    pub range_std: f64,
    pub bearing_std_deg: f64,
    /// Sensor range, also the support of the clutter density (m).
    pub max_range: f64,
    /// Sampling period (s).
    pub period: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            roi_halfwidth: 3000.0,
            n_targets: 5,
            birth_times: vec![5, 10, 15, 20, 25],
            death_times: Vec::new(),
            initial_circle_radius: 1000.0,
            initial_speed: 10.0,
            n_steps: 150,
            num_sensors: 3,
            sensor_circle_radius: 3000.0,
            detection_probability: 0.8,
            clutter_mean: 2.0,
            sigma_u: 0.025f64.sqrt(),
            range_std: 10.0,
            bearing_std_deg: 0.5,
            max_range: 6000.0,
            period: 1.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if self.birth_times.len() != self.n_targets {
            return bad(format!(
                "{} birth times given for {} targets",
                self.birth_times.len(),
                self.n_targets
            ));
        }
        if let Some(t) = self.birth_times.iter().find(|&&t| t < 1 || t > self.n_steps) {
            return bad(format!("birth time {t} outside [1, {}]", self.n_steps));
        }
        if !self.death_times.is_empty() {
            if self.death_times.len() != self.n_targets {
                return bad("death times must be empty or given for every target".into());
            }
            for (b, d) in self.birth_times.iter().zip(&self.death_times) {
                if matches!(d, Some(d) if d < b) {
                    return bad(format!("death time {d:?} precedes birth time {b}"));
                }
            }
        }
        for (name, v) in [
            ("roi_halfwidth", self.roi_halfwidth),
            ("initial_circle_radius", self.initial_circle_radius),
            ("sensor_circle_radius", self.sensor_circle_radius),
            ("range_std", self.range_std),
            ("bearing_std_deg", self.bearing_std_deg),
            ("max_range", self.max_range),
            ("period", self.period),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.initial_speed >= 0.0) || !(self.sigma_u >= 0.0) || !(self.clutter_mean >= 0.0) {
            return bad("speed, sigma_u and clutter mean must be nonnegative".into());
        }
        if !(0.0..=1.0).contains(&self.detection_probability) {
            return bad(format!("detection probability {} outside [0, 1]", self.detection_probability));
        }
        if self.n_steps == 0 || self.num_sensors == 0 {
            return bad("need at least one step and one sensor".into());
        }
        Ok(())
    }

    pub fn motion_model(&self) -> Result<MotionModel, ScenarioError> {
        Ok(MotionModel::constant_velocity(self.period, self.sigma_u)?)
    }

    /// Position of sensor `s`: equally spaced on the sensor circle, phase 0.
    pub fn sensor_position(&self, s: usize) -> [f64; 2] {
        let angle = 2.0 * PI * s as f64 / self.num_sensors as f64;
        [
            self.sensor_circle_radius * angle.cos(),
            self.sensor_circle_radius * angle.sin(),
        ]
    }

    /// Sensor models as seen by the tracker. A zero clutter mean is raised
    /// to a tiny positive value, since the tracker divides by it.
    pub fn sensors(&self) -> Result<Vec<SensorModel>, ScenarioError> {
        (0..self.num_sensors)
            .map(|s| {
                Ok(SensorModel::builder(self.sensor_position(s))
                    .detection(DetectionProfile::Constant(self.detection_probability))
                    .clutter_mean(self.clutter_mean.max(1e-9))
                    .noise_std(self.range_std, self.bearing_std_deg)
                    .max_range(self.max_range)
                    .build()?)
            })
            .collect()
    }

    /// `[x_min, x_max, y_min, y_max]` of the region of interest.
    pub fn region(&self) -> [f64; 4] {
        let h = self.roi_halfwidth;
        [-h, h, -h, h]
    }

    /// Birth times for `n_targets` targets spread evenly over `[1, last]`,
    /// for sweeps that vary the number of targets.
    pub fn staggered_births(n_targets: usize, last: usize) -> Vec<usize> {
        (0..n_targets)
            .map(|i| 1 + (i * last.saturating_sub(1)) / n_targets.max(1))
            .collect()
    }
}

/// True target states per time step `n = 1..=n_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    steps: Vec<Vec<(usize, TargetState)>>,
}

impl GroundTruth {
    pub fn new(steps: Vec<Vec<(usize, TargetState)>>) -> Self {
        Self { steps }
    }

    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }

    /// Alive targets `(id, state)` at time `n` (1-based).
    pub fn at(&self, n: usize) -> &[(usize, TargetState)] {
        &self.steps[n - 1]
    }

    pub fn positions(&self, n: usize) -> Vec<[f64; 2]> {
        self.at(n).iter().map(|(_, x)| x.position()).collect()
    }

    pub fn cardinality(&self, n: usize) -> usize {
        self.at(n).len()
    }
}

/// Generates the trajectories of all targets.
pub fn generate_truth<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<GroundTruth, ScenarioError> {
    config.validate()?;
    let motion = config.motion_model()?;
    let phase = rng.random_range(0.0..2.0 * PI);
    let mut steps = vec![Vec::new(); config.n_steps];
    for i in 0..config.n_targets {
        let angle = phase + 2.0 * PI * i as f64 / config.n_targets as f64;
        let (sin, cos) = angle.sin_cos();
        let r = config.initial_circle_radius;
        let v = config.initial_speed;
        let mut x = TargetState::new(r * cos, r * sin, -v * cos, -v * sin);
        let born = config.birth_times[i];
        let last = config
            .death_times
            .get(i)
            .copied()
            .flatten()
            .unwrap_or(config.n_steps)
            .min(config.n_steps);
        for n in born..=last {
            if n > born {
                x = crate::model::transition_sample(&x, &motion, rng);
            }
            steps[n - 1].push((i, x));
        }
    }
    Ok(GroundTruth { steps })
}

/// Generates one scan of all sensors for the targets alive at that time.
///
/// Target measurements whose noisy range falls outside `[0, max_range]` are
/// dropped, so every measurement lies in the clutter support.
pub fn generate_frame<R: Rng + ?Sized>(
    targets: &[(usize, TargetState)],
    sensors: &[SensorModel],
    clutter_mean: f64,
    rng: &mut R,
) -> MeasurementFrame {
    let per_sensor = sensors
        .iter()
        .map(|sensor| {
            let root = Cholesky::new(*sensor.noise_cov())
                .map(|c| c.l())
                .unwrap_or_else(Matrix2::zeros);
            let max_range = sensor.max_range();
            let mut zs = Vec::new();
            for (_, x) in targets {
                let Ok((range, bearing)) = sensor.observe(x.position()) else {
                    continue;
                };
                if range > max_range {
                    continue;
                }
                let pd = sensor.detection().probability(x);
                if rng.random::<f64>() >= pd {
                    continue;
                }
                let e = root * Vector2::new(rng.sample::<f64, _>(StandardNormal), rng.sample(StandardNormal));
                let (r, b) = (range + e[0], bearing + e[1]);
                if (0.0..=max_range).contains(&r) {
                    zs.push(Measurement::new(r, b).expect("finite measurement"));
                }
            }
            let count = if clutter_mean > 0.0 {
                Poisson::new(clutter_mean).expect("positive mean").sample(rng) as usize
            } else {
                0
            };
            for _ in 0..count {
                let r = max_range * rng.random::<f64>().sqrt();
                let b = rng.random_range(0.0..360.0);
                zs.push(Measurement::new(r, b).expect("finite clutter"));
            }
            zs.shuffle(rng);
            zs
        })
        .collect();
    MeasurementFrame::new(per_sensor)
}
