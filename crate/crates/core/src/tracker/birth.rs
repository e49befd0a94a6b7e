//! Birth and survival parameters per potential target.
//!
//! Potential targets whose previous existence probability exceeds the
//! reliability threshold keep their particles and survive with the global
//! survival probability; all others are recycled as birth slots. The birth
//! slots share the expected number of births equally and split one sensor's
//! previous measurements between them, each slot drawing its birth particles
//! around the measurements it was dealt.

use nalgebra::{Cholesky, Matrix2, Vector2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{BirthMode, PotentialTargetBelief, TrackerConfig};
use crate::model::linear::{LinearSensor, ScalarState};
use crate::model::{Dynamics, MeasurementFrame, MotionModel, Sensor, SensorModel, TargetState};
use crate::rng::{purpose, stream};

/// Source of birth particles at time `n`.
pub trait BirthSampler<D: Dynamics, S: Sensor<D::State>>: Send + Sync {
    /// Draws `count` particles of the birth density at the current time.
    ///
    /// `measurements` are the previous-scan measurements dealt to this slot
    /// (possibly none) and `sensor` is the sensor that produced them.
    fn sample<R: Rng + ?Sized>(
        &self,
        measurements: &[S::Measurement],
        sensor: Option<&S>,
        dynamics: &D,
        count: usize,
        rng: &mut R,
    ) -> Vec<D::State>;
}

/// Measurement-driven birth density for range-bearing sensors.
///
/// Each measurement is mapped to a Cartesian position; positions are drawn
/// from a Gaussian centred there with the unscented-transform covariance of
/// the measurement noise, velocities from `N(0, velocity_std² I)`. Slots
/// without measurements fall back to a uniform density over `region`. All
/// particles are then moved one step through the motion model.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveBirth {
    pub velocity_std: f64,
    /// `[x_min, x_max, y_min, y_max]`
    pub region: [f64; 4],
}

impl AdaptiveBirth {
    pub fn new(velocity_std: f64, region: [f64; 4]) -> Self {
        Self { velocity_std, region }
    }
}

/// Unscented transform of a range-bearing measurement into Cartesian
/// position. Returns the mean of the transformed sigma points and their
/// covariance.
pub fn unscented_position(
    range: f64,
    bearing_deg: f64,
    sensor: &SensorModel,
) -> (Vector2<f64>, Matrix2<f64>) {
    const KAPPA: f64 = 1.0;
    let n = 2.0;
    let cov = sensor.noise_cov() * (n + KAPPA);
    let root = Cholesky::new(cov).map(|c| c.l()).unwrap_or_else(Matrix2::zeros);
    let centre = Vector2::new(range, bearing_deg);
    let mut points = vec![(centre, KAPPA / (n + KAPPA))];
    for i in 0..2 {
        let col = root.column(i).into_owned();
        points.push((centre + col, 0.5 / (n + KAPPA)));
        points.push((centre - col, 0.5 / (n + KAPPA)));
    }
    let mapped: Vec<(Vector2<f64>, f64)> = points
        .iter()
        .map(|(p, w)| (Vector2::from(sensor.invert(p[0], p[1])), *w))
        .collect();
    let mean = mapped.iter().fold(Vector2::zeros(), |acc, (y, w)| acc + y * *w);
    let cov = mapped.iter().fold(Matrix2::zeros(), |acc, (y, w)| {
        let d = y - mean;
        acc + d * d.transpose() * *w
    });
    (mean, cov)
}

impl BirthSampler<MotionModel, SensorModel> for AdaptiveBirth {
    fn sample<R: Rng + ?Sized>(
        &self,
        measurements: &[crate::model::Measurement],
        sensor: Option<&SensorModel>,
        dynamics: &MotionModel,
        count: usize,
        rng: &mut R,
    ) -> Vec<TargetState> {
        let anchors: Vec<(Vector2<f64>, Matrix2<f64>)> = match sensor {
            Some(sensor) => measurements
                .iter()
                .map(|z| {
                    let (_, cov) = unscented_position(z.range, z.bearing, sensor);
                    let root = Cholesky::new(cov + Matrix2::identity() * 1e-9)
                        .map(|c| c.l())
                        .unwrap_or_else(Matrix2::zeros);
                    (Vector2::from(sensor.invert(z.range, z.bearing)), root)
                })
                .collect(),
            None => Vec::new(),
        };
        let [x0, x1, y0, y1] = self.region;
        (0..count)
            .map(|i| {
                let pos = match anchors.get(i % anchors.len().max(1)) {
                    Some((mean, root)) => mean + root * Vector2::new(normal(rng), normal(rng)),
                    None => Vector2::new(rng.random_range(x0..x1), rng.random_range(y0..y1)),
                };
                let vel = Vector2::new(normal(rng), normal(rng)) * self.velocity_std;
                dynamics.propagate(&TargetState::new(pos[0], pos[1], vel[0], vel[1]), rng)
            })
            .collect()
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Fixed Gaussian birth density for the scalar model, drawn directly at the
/// current time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBirth {
    pub mean: f64,
    pub std: f64,
}

impl<D: Dynamics<State = ScalarState>> BirthSampler<D, LinearSensor> for GaussianBirth {
    fn sample<R: Rng + ?Sized>(
        &self,
        _measurements: &[f64],
        _sensor: Option<&LinearSensor>,
        _dynamics: &D,
        count: usize,
        rng: &mut R,
    ) -> Vec<ScalarState> {
        (0..count)
            .map(|_| ScalarState(self.mean + self.std * normal(rng)))
            .collect()
    }
}

/// Birth/survival parameters and birth particles for one potential target.
#[derive(Debug, Clone)]
pub struct PlanEntry<X> {
    pub birth_probability: f64,
    pub survival_probability: f64,
    pub birth_particles: Vec<X>,
}

#[derive(Debug, Clone)]
pub struct BirthPlan<X> {
    pub entries: Vec<PlanEntry<X>>,
    pub reliable: Vec<usize>,
    pub unreliable: Vec<usize>,
    /// Sensor whose previous measurements seeded the births.
    pub source_sensor: Option<usize>,
    /// Measurement indices of the source sensor dealt to each unreliable
    /// target, aligned with `unreliable`.
    pub subsets: Vec<Vec<usize>>,
}

/// Randomly permutes `0..count` and deals the indices round-robin into
/// `parts` subsets, so subset sizes differ by at most one.
pub fn partition_balanced<R: Rng + ?Sized>(count: usize, parts: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut subsets = vec![Vec::new(); parts];
    if parts == 0 {
        return subsets;
    }
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(rng);
    for (i, m) in order.into_iter().enumerate() {
        subsets[i % parts].push(m);
    }
    subsets
}

/// Chooses birth and survival probabilities and draws birth particles for
/// time `n` from the beliefs and measurements of time `n - 1`.
pub fn plan_birth_survival<D, S, B>(
    beliefs: &[PotentialTargetBelief<D::State>],
    previous: Option<&MeasurementFrame<S::Measurement>>,
    config: &TrackerConfig,
    dynamics: &D,
    sensors: &[S],
    birth: &B,
    n: usize,
) -> BirthPlan<D::State>
where
    D: Dynamics,
    S: Sensor<D::State>,
    B: BirthSampler<D, S>,
{
    let (reliable, unreliable): (Vec<usize>, Vec<usize>) = (0..beliefs.len())
        .partition(|&k| beliefs[k].existence_probability() > config.reliability_threshold);
    let draw = |k: usize, zs: &[S::Measurement], sensor: Option<&S>| {
        let mut rng = stream(config.seed, &[n as u64, k as u64, purpose::BIRTH]);
        birth.sample(zs, sensor, dynamics, config.birth_particles, &mut rng)
    };

    match config.birth_mode {
        BirthMode::Fixed { birth_probability } => {
            let entries = (0..beliefs.len())
                .into_par_iter()
                .map(|k| PlanEntry {
                    birth_probability,
                    survival_probability: config.survival_probability,
                    birth_particles: if birth_probability > 0.0 { draw(k, &[], None) } else { Vec::new() },
                })
                .collect();
            BirthPlan {
                entries,
                reliable,
                unreliable,
                source_sensor: None,
                subsets: Vec::new(),
            }
        }
        BirthMode::Adaptive => {
            let source_sensor = (!sensors.is_empty()).then(|| (n.max(1) - 1) % sensors.len());
            let source: Vec<S::Measurement> = match (source_sensor, previous) {
                (Some(s), Some(frame)) if s < frame.num_sensors() => frame.sensor(s).to_vec(),
                _ => Vec::new(),
            };
            let mut rng = stream(config.seed, &[n as u64, purpose::PARTITION]);
            let subsets = partition_balanced(source.len(), unreliable.len(), &mut rng);
            let birth_probability = if unreliable.is_empty() {
                0.0
            } else {
                (config.mean_births / unreliable.len() as f64).min(1.0)
            };
            let mut entries: Vec<PlanEntry<D::State>> = (0..beliefs.len())
                .map(|_| PlanEntry {
                    birth_probability: 0.0,
                    survival_probability: config.survival_probability,
                    birth_particles: Vec::new(),
                })
                .collect();
            let sensor = source_sensor.map(|s| &sensors[s]);
            let births: Vec<Vec<D::State>> = unreliable
                .par_iter()
                .zip(subsets.par_iter())
                .map(|(&k, subset)| {
                    if birth_probability > 0.0 {
                        let zs: Vec<S::Measurement> = subset.iter().map(|&m| source[m].clone()).collect();
                        draw(k, &zs, sensor)
                    } else {
                        Vec::new()
                    }
                })
                .collect();
            for (&k, particles) in unreliable.iter().zip(births) {
                entries[k] = PlanEntry {
                    birth_probability,
                    survival_probability: 0.0,
                    birth_particles: particles,
                };
            }
            BirthPlan {
                entries,
                reliable,
                unreliable,
                source_sensor,
                subsets,
            }
        }
    }
}
