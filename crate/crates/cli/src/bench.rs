//! Per-step runtime sweeps over sensors, clutter rate and targets.

use std::str::FromStr;
use std::time::Duration;

use bptrack::rng::{derive_seed, purpose};
use bptrack::{AdaptiveBirth, MeasurementFrame, ScenarioConfig, Tracker};

use crate::experiment::simulate_run;
use crate::{CliError, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Sensors,
    Clutter,
    Targets,
}

impl FromStr for Axis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "sensors" => Ok(Self::Sensors),
            "clutter" => Ok(Self::Clutter),
            "targets" => Ok(Self::Targets),
            other => Err(CliError::Config(format!("unknown bench axis {other:?}"))),
        }
    }
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Self::Sensors => "sensors",
            Self::Clutter => "clutter",
            Self::Targets => "targets",
        }
    }

    /// Sweep values of the full-range experiment.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            Self::Sensors | Self::Targets => (1..=10).map(|i| 2.0 * i as f64).collect(),
            Self::Clutter => std::iter::once(1.0).chain((1..=9).map(|i| 10.0 * i as f64)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub mean_ms: f64,
    pub median_ms: f64,
}

/// Timing protocol: `warmup` untimed steps, then `steps` timed ones. The
/// whole run is replayed `repeats` times; since it is deterministic, each
/// timed step keeps its fastest repeat, which filters out interference from
/// other processes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Protocol {
    pub warmup: usize,
    pub steps: usize,
    pub repeats: usize,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            warmup: 30,
            steps: 15,
            repeats: 5,
        }
    }
}

/// `base` with the axis parameter set to `value`. The target axis also
/// sets `K = targets + 3` and spreads births over the first 20 steps.
pub fn sweep_config(base: &RunConfig, axis: Axis, value: f64, protocol: Protocol) -> Result<RunConfig, CliError> {
    let mut cfg = base.clone();
    cfg.scenario.n_steps = protocol.warmup + protocol.steps;
    match axis {
        Axis::Sensors => cfg.scenario.num_sensors = positive_count(value)?,
        Axis::Clutter => cfg.scenario.clutter_mean_per_scan = value,
        Axis::Targets => {
            let n = positive_count(value)?;
            cfg.scenario.n_targets = n;
            cfg.scenario.birth_times_step = ScenarioConfig::staggered_births(n, 20.min(protocol.warmup.max(1)));
            cfg.tracker.potential_targets = n + 3;
        }
    }
    cfg.scenario.birth_times_step.retain(|&t| t <= cfg.scenario.n_steps);
    if axis != Axis::Targets {
        cfg.scenario.n_targets = cfg.scenario.birth_times_step.len();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn positive_count(v: f64) -> Result<usize, CliError> {
    if v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(CliError::Config(format!("sweep value {v} must be a positive integer")))
    }
}

/// Per-step durations of the timed steps of one tracker run.
fn time_steps(cfg: &RunConfig, seed: u64, warmup: usize, frames: &[MeasurementFrame]) -> Result<Vec<Duration>, CliError> {
    let scenario = cfg.scenario_config(seed);
    let sensors = scenario.sensors().map_err(|e| CliError::Config(e.to_string()))?;
    let motion = scenario.motion_model().map_err(|e| CliError::Config(e.to_string()))?;
    let birth = AdaptiveBirth::new(cfg.tracker.birth_velocity_std_m_per_s, scenario.region());
    let mut tracker = Tracker::new(
        cfg.tracker_config(derive_seed(seed, &[0, purpose::TRACKER])),
        motion,
        sensors,
        birth,
    )?;
    let mut times = Vec::with_capacity(frames.len().saturating_sub(warmup));
    for (i, frame) in frames.iter().enumerate() {
        let rec = tracker.step(frame)?;
        if i >= warmup {
            times.push(rec.duration);
        }
    }
    Ok(times)
}

fn summarize(value: f64, times: &[Duration]) -> SweepPoint {
    let mut ms: Vec<f64> = times.iter().map(|d| d.as_secs_f64() * 1e3).collect();
    ms.sort_by(f64::total_cmp);
    let n = ms.len();
    let median_ms = if n % 2 == 1 { ms[n / 2] } else { 0.5 * (ms[n / 2 - 1] + ms[n / 2]) };
    SweepPoint {
        value,
        mean_ms: ms.iter().sum::<f64>() / n as f64,
        median_ms,
    }
}

/// Times `tracker.step` alone (no simulation or I/O) at every sweep value.
///
/// The repeats are interleaved across values, so that a slow period of the
/// machine lands on different values in different rounds.
pub fn run_sweep(
    base: &RunConfig,
    axis: Axis,
    values: &[f64],
    seed: u64,
    protocol: Protocol,
) -> Result<Vec<SweepPoint>, CliError> {
    if protocol.steps == 0 {
        return Err(CliError::Config("bench needs at least one timed step".into()));
    }
    let cases = values
        .iter()
        .map(|&v| {
            let cfg = sweep_config(base, axis, v, protocol)?;
            let (_, frames) = simulate_run(&cfg, seed, 0)?;
            Ok((cfg, frames))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut best: Vec<Vec<Duration>> = vec![vec![Duration::MAX; protocol.steps]; values.len()];
    for _ in 0..protocol.repeats.max(1) {
        for ((cfg, frames), best) in cases.iter().zip(&mut best) {
            let times = time_steps(cfg, seed, protocol.warmup, frames)?;
            for (b, t) in best.iter_mut().zip(times) {
                *b = (*b).min(t);
            }
        }
    }
    Ok(values
        .iter()
        .zip(&best)
        .map(|(&v, times)| {
            let p = summarize(v, times);
            log::info!("{} = {v}: median {:.3} ms", axis.name(), p.median_ms);
            p
        })
        .collect())
}
