//! Particle-based belief propagation tracker.
//!
//! One time step runs, for every potential target (PT):
//!
//! 1. birth/survival planning from the previous beliefs ([`plan_birth_survival`]),
//! 2. prediction to `J` survivor plus `I` birth particles ([`predict`]),
//! 3. per-sensor measurement evaluation and data association
//!    ([`crate::association`]),
//! 4. an importance-sampling update across all sensors ([`update`]),
//! 5. detection and MMSE estimation ([`detect_and_estimate`]),
//! 6. systematic resampling back to `J` particles ([`resample`]).
//!
//! The existence probability of a PT is the total particle weight; the
//! nonexistence mass is never represented explicitly.

mod birth;

use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

pub use birth::{
    partition_balanced, plan_birth_survival, unscented_position, AdaptiveBirth, BirthPlan, BirthSampler,
    GaussianBirth, PlanEntry,
};

use crate::association::{
    iterate_association, log_clutter_densities, AssociationError, BetaTable, FactorRows,
    WeightedParticles,
};
use crate::model::{Dynamics, MeasurementFrame, ModelError, ParticleState, Sensor};
use crate::rng::{purpose, stream};

/// Slack allowed above 1 for accumulated existence probabilities.
pub const EXISTENCE_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackerError {
    #[error("invalid tracker configuration: {0}")]
    InvalidConfig(String),
    #[error("frame has {got} sensors, tracker is configured for {expected}")]
    SensorMismatch { expected: usize, got: usize },
    #[error("potential target {k} has a positive birth probability but no birth particles")]
    MissingBirthParticles { k: usize },
    #[error("posterior of potential target {k} is degenerate (all hypotheses have zero weight)")]
    DegeneratePosterior { k: usize },
    #[error("cannot resample a particle set with zero total weight")]
    ZeroWeights,
    #[error(transparent)]
    Association(#[from] AssociationError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// How birth and survival probabilities are assigned each step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BirthMode {
    /// Reliable PTs survive, unreliable PTs become measurement-seeded birth
    /// slots sharing `mean_births`.
    Adaptive,
    /// Every PT has the same birth probability and the global survival
    /// probability; birth particles come from a fixed density.
    Fixed { birth_probability: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    /// Number of potential targets `K`.
    pub potential_targets: usize,
    /// Particles kept per PT after resampling, `J`.
    pub particles: usize,
    /// Birth particles per PT, `I`.
    pub birth_particles: usize,
    /// Cap on association iterations, `P`.
    pub bp_iterations: usize,
    /// Early-exit threshold on the max change of the log message ratios.
    pub bp_tolerance: f64,
    pub detection_threshold: f64,
    pub reliability_threshold: f64,
    /// Expected number of newborn targets per step, `μ_b`.
    pub mean_births: f64,
    pub survival_probability: f64,
    pub birth_mode: BirthMode,
    pub seed: u64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            potential_targets: 8,
            particles: 3000,
            birth_particles: 3000,
            bp_iterations: 20,
            bp_tolerance: 1e-6,
            detection_threshold: 0.5,
            reliability_threshold: 1e-3,
            mean_births: 0.01,
            survival_probability: 0.999,
            birth_mode: BirthMode::Adaptive,
            seed: 0,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackerError> {
        let bad = |msg: String| Err(TrackerError::InvalidConfig(msg));
        if self.potential_targets == 0 || self.particles == 0 || self.birth_particles == 0 {
            return bad("K, J and I must be at least 1".into());
        }
        if self.bp_iterations == 0 || !(self.bp_tolerance > 0.0) {
            return bad("need at least one association iteration and a positive tolerance".into());
        }
        for (name, v) in [
            ("detection threshold", self.detection_threshold),
            ("reliability threshold", self.reliability_threshold),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        if !(self.mean_births >= 0.0 && self.mean_births.is_finite()) {
            return bad(format!("mean births must be nonnegative, got {}", self.mean_births));
        }
        if !(0.0..=1.0).contains(&self.survival_probability) {
            return bad(format!("survival probability {} outside [0, 1]", self.survival_probability));
        }
        if let BirthMode::Fixed { birth_probability } = self.birth_mode {
            if !(0.0..=1.0).contains(&birth_probability) {
                return bad(format!("birth probability {birth_probability} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Weighted particles representing the belief of one PT. The weights sum to
/// the existence probability.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTargetBelief<X> {
    states: Vec<X>,
    weights: Vec<f64>,
}

impl<X: ParticleState> PotentialTargetBelief<X> {
    pub fn new(states: Vec<X>, weights: Vec<f64>) -> Self {
        assert_eq!(states.len(), weights.len(), "one weight per particle");
        Self { states, weights }
    }

    /// A certainly nonexistent PT with `count` placeholder particles.
    pub fn nonexistent(count: usize) -> Self {
        Self {
            states: vec![X::zero(); count],
            weights: vec![0.0; count],
        }
    }

    pub fn states(&self) -> &[X] {
        &self.states
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn existence_probability(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Predicted particles `(x_j, w^α_j)`; the first `survivors` come from the
/// previous belief, the rest were drawn from the birth density.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedBelief<X> {
    states: Vec<X>,
    weights: Vec<f64>,
    survivors: usize,
}

impl<X> PredictedBelief<X> {
    pub fn states(&self) -> &[X] {
        &self.states
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn num_survivors(&self) -> usize {
        self.survivors
    }

    pub fn num_births(&self) -> usize {
        self.states.len() - self.survivors
    }

    pub fn is_birth(&self, j: usize) -> bool {
        j >= self.survivors
    }

    /// Predicted existence probability `Σ_j w^α_j`.
    pub fn existence_probability(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn as_weighted(&self) -> WeightedParticles<'_, X> {
        WeightedParticles {
            states: &self.states,
            weights: &self.weights,
        }
    }
}

/// Per-PT output of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetRecord<X> {
    pub existence: f64,
    /// MMSE estimate, present iff the PT is detected.
    pub estimate: Option<X>,
}

impl<X> TargetRecord<X> {
    pub fn detected(&self) -> bool {
        self.estimate.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackRecord<X> {
    pub time: usize,
    pub targets: Vec<TargetRecord<X>>,
    /// PTs reset to nonexistence after a degenerate posterior.
    pub resets: Vec<usize>,
    pub duration: Duration,
}

impl<X: Clone> TrackRecord<X> {
    pub fn estimates(&self) -> Vec<X> {
        self.targets.iter().filter_map(|t| t.estimate.clone()).collect()
    }

    pub fn cardinality(&self) -> usize {
        self.targets.iter().filter(|t| t.detected()).count()
    }
}

/// Moves the previous belief through the existence/state transition.
///
/// Survivor `j` is propagated through `dynamics` and weighted `p_s w̄_j`;
/// each birth particle gets `p_b (1 − p_e) / I`.
pub fn predict<D: Dynamics, R: Rng + ?Sized>(
    belief: &PotentialTargetBelief<D::State>,
    dynamics: &D,
    entry: &PlanEntry<D::State>,
    rng: &mut R,
) -> Result<PredictedBelief<D::State>, TrackerError> {
    let pe = belief.existence_probability();
    let ps = entry.survival_probability;
    let pb = entry.birth_probability;
    let births = entry.birth_particles.len();
    if pb > 0.0 && births == 0 {
        return Err(TrackerError::MissingBirthParticles { k: 0 });
    }
    let mut states = Vec::with_capacity(belief.len() + births);
    let mut weights = Vec::with_capacity(belief.len() + births);
    for (x, &w) in belief.states.iter().zip(&belief.weights) {
        if ps > 0.0 && w > 0.0 {
            states.push(dynamics.propagate(x, rng));
            weights.push(ps * w);
        } else {
            states.push(x.clone());
            weights.push(0.0);
        }
    }
    let wb = if births > 0 { pb * (1.0 - pe).max(0.0) / births as f64 } else { 0.0 };
    states.extend(entry.birth_particles.iter().cloned());
    weights.extend(std::iter::repeat_n(wb, births));
    Ok(PredictedBelief {
        states,
        weights,
        survivors: belief.len(),
    })
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Importance-sampling update from cached per-sensor factor rows.
///
/// `rows[s]` must have been evaluated on `predicted` and `etas[s]` is this
/// PT's message `η^{(s)}(a)`.
pub fn update_with_rows<X: ParticleState>(
    predicted: PredictedBelief<X>,
    rows: &[FactorRows],
    etas: &[&[f64]],
) -> Result<PotentialTargetBelief<X>, TrackerError> {
    assert_eq!(rows.len(), etas.len(), "one message row per sensor");
    let total: f64 = predicted.weights.iter().sum();
    let mut log_w = vec![f64::NEG_INFINITY; predicted.weights.len()];
    match rows.first() {
        Some(first) => {
            for i in 0..first.num_active() {
                let j = first.particle(i);
                let mut lw = predicted.weights[j].ln();
                for (r, eta) in rows.iter().zip(etas) {
                    debug_assert_eq!(r.particle(i), j);
                    lw += r.log_update_factor(i, eta);
                }
                log_w[j] = lw;
            }
        }
        None => {
            for (l, w) in log_w.iter_mut().zip(&predicted.weights) {
                *l = w.ln();
            }
        }
    }
    let log_wb = (1.0 - total).max(0.0).ln() + etas.iter().map(|e| e[0].ln()).sum::<f64>();
    let norm = log_sum_exp(log_w.iter().cloned().chain(std::iter::once(log_wb)));
    if !norm.is_finite() {
        return Err(TrackerError::DegeneratePosterior { k: 0 });
    }
    let weights = log_w.iter().map(|l| (l - norm).exp()).collect();
    Ok(PotentialTargetBelief {
        states: predicted.states,
        weights,
    })
}

/// Measurement update of one PT given its messages `η^{(s)}` from every
/// sensor.
pub fn update<X: ParticleState, S: Sensor<X>>(
    predicted: PredictedBelief<X>,
    etas: &[&[f64]],
    frame: &MeasurementFrame<S::Measurement>,
    sensors: &[S],
) -> Result<PotentialTargetBelief<X>, TrackerError> {
    if frame.num_sensors() != sensors.len() || etas.len() != sensors.len() {
        return Err(TrackerError::SensorMismatch {
            expected: sensors.len(),
            got: frame.num_sensors().min(etas.len()),
        });
    }
    let rows = sensors
        .iter()
        .enumerate()
        .map(|(s, sensor)| {
            let zs = frame.sensor(s);
            let log_fa = log_clutter_densities(zs, sensor)?;
            FactorRows::evaluate(&predicted.states, &predicted.weights, zs, &log_fa, sensor)
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    update_with_rows(predicted, &rows, etas)
}

/// Returns the MMSE estimate if the existence probability exceeds
/// `threshold` (strictly).
pub fn detect_and_estimate<X: ParticleState>(
    belief: &PotentialTargetBelief<X>,
    threshold: f64,
) -> Option<X> {
    let pe = belief.existence_probability();
    if pe > threshold {
        let mut mean = X::zero();
        for (x, w) in belief.states.iter().zip(&belief.weights) {
            if *w > 0.0 {
                mean.add_scaled(x, w / pe);
            }
        }
        Some(mean)
    } else {
        None
    }
}

/// Systematic resampling to `count` equally weighted particles carrying the
/// same total weight.
pub fn resample<X: Clone, R: Rng + ?Sized>(
    belief: &PotentialTargetBelief<X>,
    count: usize,
    rng: &mut R,
) -> Result<PotentialTargetBelief<X>, TrackerError> {
    let total: f64 = belief.weights.iter().sum();
    if !(total > 0.0) || count == 0 {
        return Err(TrackerError::ZeroWeights);
    }
    let step = total / count as f64;
    let mut u = rng.random::<f64>() * step;
    let mut states = Vec::with_capacity(count);
    let mut cum = 0.0;
    let mut j = 0;
    let last = belief
        .weights
        .iter()
        .rposition(|w| *w > 0.0)
        .expect("positive total weight");
    for _ in 0..count {
        while j < last && cum + belief.weights[j] <= u {
            cum += belief.weights[j];
            j += 1;
        }
        states.push(belief.states[j].clone());
        u += step;
    }
    Ok(PotentialTargetBelief {
        states,
        weights: vec![step; count],
    })
}

/// Multisensor multitarget tracker over `K` potential targets.
pub struct Tracker<D: Dynamics, S: Sensor<D::State>, B> {
    config: TrackerConfig,
    dynamics: D,
    sensors: Vec<S>,
    birth: B,
    beliefs: Vec<PotentialTargetBelief<D::State>>,
    previous: Option<MeasurementFrame<S::Measurement>>,
    time: usize,
}

impl<D, S, B> Tracker<D, S, B>
where
    D: Dynamics,
    S: Sensor<D::State>,
    B: BirthSampler<D, S>,
{
    /// Creates a tracker with every PT nonexistent.
    pub fn new(config: TrackerConfig, dynamics: D, sensors: Vec<S>, birth: B) -> Result<Self, TrackerError> {
        config.validate()?;
        let beliefs = (0..config.potential_targets)
            .map(|_| PotentialTargetBelief::nonexistent(config.particles))
            .collect();
        Ok(Self {
            config,
            dynamics,
            sensors,
            birth,
            beliefs,
            previous: None,
            time: 0,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn sensors(&self) -> &[S] {
        &self.sensors
    }

    pub fn beliefs(&self) -> &[PotentialTargetBelief<D::State>] {
        &self.beliefs
    }

    /// Index of the last processed step (0 before the first).
    pub fn time(&self) -> usize {
        self.time
    }

    /// Processes the measurements of the next time step.
    pub fn step(
        &mut self,
        frame: &MeasurementFrame<S::Measurement>,
    ) -> Result<TrackRecord<D::State>, TrackerError> {
        if frame.num_sensors() != self.sensors.len() {
            return Err(TrackerError::SensorMismatch {
                expected: self.sensors.len(),
                got: frame.num_sensors(),
            });
        }
        let started = Instant::now();
        let n = self.time + 1;
        let cfg = &self.config;
        let seed = cfg.seed;

        let plan = plan_birth_survival(
            &self.beliefs,
            self.previous.as_ref(),
            cfg,
            &self.dynamics,
            &self.sensors,
            &self.birth,
            n,
        );

        let predicted = self
            .beliefs
            .par_iter()
            .zip(plan.entries.par_iter())
            .enumerate()
            .map(|(k, (belief, entry))| {
                let mut rng = stream(seed, &[n as u64, k as u64, purpose::PREDICT]);
                predict(belief, &self.dynamics, entry, &mut rng).map_err(|e| match e {
                    TrackerError::MissingBirthParticles { .. } => TrackerError::MissingBirthParticles { k },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;

        let log_clutter = self
            .sensors
            .iter()
            .enumerate()
            .map(|(s, sensor)| log_clutter_densities(frame.sensor(s), sensor))
            .collect::<Result<Vec<_>, _>>()?;

        let rows = predicted
            .par_iter()
            .map(|p| {
                self.sensors
                    .iter()
                    .enumerate()
                    .map(|(s, sensor)| {
                        FactorRows::evaluate(&p.states, &p.weights, frame.sensor(s), &log_clutter[s], sensor)
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;

        let etas = (0..self.sensors.len())
            .into_par_iter()
            .map(|s| {
                let beta = BetaTable::new(
                    rows.iter()
                        .zip(&predicted)
                        .map(|(r, p)| r[s].beta(&p.weights))
                        .collect(),
                )?;
                iterate_association(&beta, cfg.bp_iterations, cfg.bp_tolerance)
            })
            .collect::<Result<Vec<_>, AssociationError>>()?;

        let updated: Vec<Result<PotentialTargetBelief<D::State>, TrackerError>> = predicted
            .into_par_iter()
            .zip(rows.into_par_iter())
            .enumerate()
            .map(|(k, (p, r))| {
                let eta_rows: Vec<&[f64]> = etas.iter().map(|e| e.row(k)).collect();
                update_with_rows(p, &r, &eta_rows)
            })
            .collect();

        let mut resets = Vec::new();
        let mut posteriors = Vec::with_capacity(updated.len());
        for (k, u) in updated.into_iter().enumerate() {
            match u {
                Ok(b) => posteriors.push(b),
                Err(TrackerError::DegeneratePosterior { .. }) => {
                    log::warn!("step {n}: potential target {k} has a degenerate posterior; reset to nonexistence");
                    resets.push(k);
                    posteriors.push(PotentialTargetBelief::nonexistent(cfg.particles));
                }
                Err(e) => return Err(e),
            }
        }

        let targets = posteriors
            .iter()
            .map(|b| TargetRecord {
                existence: b.existence_probability(),
                estimate: detect_and_estimate(b, cfg.detection_threshold),
            })
            .collect();

        self.beliefs = posteriors
            .par_iter()
            .enumerate()
            .map(|(k, b)| {
                let mut rng = stream(seed, &[n as u64, k as u64, purpose::RESAMPLE]);
                match resample(b, cfg.particles, &mut rng) {
                    Ok(r) => r,
                    Err(_) => PotentialTargetBelief::nonexistent(cfg.particles),
                }
            })
            .collect();
        self.previous = Some(frame.clone());
        self.time = n;

        Ok(TrackRecord {
            time: n,
            targets,
            resets,
            duration: started.elapsed(),
        })
    }
}
