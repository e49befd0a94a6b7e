//! Monte Carlo runs of simulation, tracking and OSPA scoring.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use bptrack::rng::{derive_seed, purpose, stream};
use bptrack::{
    generate_frame, generate_truth, ospa, AdaptiveBirth, GroundTruth, MeasurementFrame, Tracker,
};
use rayon::prelude::*;

use crate::io::{MospaRow, ResultRow};
use crate::{CliError, RunConfig};

/// Ground truth and scans of Monte Carlo run `run`.
pub fn simulate_run(cfg: &RunConfig, seed: u64, run: usize) -> Result<(GroundTruth, Vec<MeasurementFrame>), CliError> {
    let scenario = cfg.scenario_config(seed);
    let sensors = scenario.sensors().map_err(|e| CliError::Config(e.to_string()))?;
    let truth = generate_truth(&scenario, &mut stream(seed, &[run as u64, purpose::TRUTH]))
        .map_err(|e| CliError::Config(e.to_string()))?;
    let frames = (1..=scenario.n_steps)
        .map(|n| {
            let mut rng = stream(seed, &[run as u64, n as u64, purpose::FRAME]);
            generate_frame(truth.at(n), &sensors, scenario.clutter_mean, &mut rng)
        })
        .collect();
    Ok((truth, frames))
}

/// Tracks one run and scores each step against the truth.
pub fn track_run(
    cfg: &RunConfig,
    seed: u64,
    run: usize,
    truth: &GroundTruth,
    frames: &[MeasurementFrame],
) -> Result<Vec<ResultRow>, CliError> {
    let scenario = cfg.scenario_config(seed);
    let sensors = scenario.sensors().map_err(|e| CliError::Config(e.to_string()))?;
    let motion = scenario.motion_model().map_err(|e| CliError::Config(e.to_string()))?;
    let birth = AdaptiveBirth::new(cfg.tracker.birth_velocity_std_m_per_s, scenario.region());
    let tracker_cfg = cfg.tracker_config(derive_seed(seed, &[run as u64, purpose::TRACKER]));
    let mut tracker = Tracker::new(tracker_cfg, motion, sensors, birth)?;
    let params = cfg.ospa_params();
    if truth.num_steps() < frames.len() {
        return Err(CliError::Data(format!(
            "run {run}: {} frames but truth covers only {} steps",
            frames.len(),
            truth.num_steps()
        )));
    }
    frames
        .iter()
        .enumerate()
        .map(|(i, frame)| {
            let n = i + 1;
            let rec = tracker.step(frame)?;
            let est: Vec<[f64; 2]> = rec.estimates().iter().map(|x| x.position()).collect();
            Ok(ResultRow {
                run,
                n,
                ospa: ospa(&est, &truth.positions(n), &params),
                card_est: est.len(),
                card_true: truth.cardinality(n),
                step_ms: rec.duration.as_secs_f64() * 1e3,
            })
        })
        .collect()
}

/// Simulates and tracks `runs` independent runs in parallel. Rows are sorted
/// by `(run, n)`.
pub fn monte_carlo(cfg: &RunConfig, seed: u64, runs: usize) -> Result<Vec<ResultRow>, CliError> {
    let per_run = (0..runs)
        .into_par_iter()
        .map(|run| {
            let (truth, frames) = simulate_run(cfg, seed, run)?;
            track_run(cfg, seed, run, &truth, &frames)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(per_run.into_iter().flatten().collect())
}

/// Tracks previously recorded runs.
pub fn track_recorded(
    cfg: &RunConfig,
    seed: u64,
    frames: &BTreeMap<usize, Vec<MeasurementFrame>>,
    truth: &BTreeMap<usize, GroundTruth>,
) -> Result<Vec<ResultRow>, CliError> {
    let runs: Vec<(&usize, &Vec<MeasurementFrame>)> = frames.iter().collect();
    let per_run = runs
        .into_par_iter()
        .map(|(&run, f)| {
            let t = truth
                .get(&run)
                .ok_or_else(|| CliError::Data(format!("run {run} has frames but no truth")))?;
            track_run(cfg, seed, run, t, f)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(per_run.into_iter().flatten().collect())
}

/// Per-step averages over runs.
pub fn aggregate(rows: &[ResultRow]) -> Vec<MospaRow> {
    let mut by_step: BTreeMap<usize, (f64, f64, f64, usize)> = BTreeMap::new();
    for r in rows {
        let e = by_step.entry(r.n).or_default();
        e.0 += r.ospa;
        e.1 += r.card_est as f64;
        e.2 += r.card_true as f64;
        e.3 += 1;
    }
    by_step
        .into_iter()
        .map(|(n, (o, ce, ct, c))| {
            let c = c as f64;
            MospaRow {
                n,
                mospa: o / c,
                mean_card_est: ce / c,
                mean_card_true: ct / c,
            }
        })
        .collect()
}

/// Mean MOSPA over the steps in `steps`.
pub fn time_average(mospa: &[MospaRow], steps: RangeInclusive<usize>) -> f64 {
    let sel: Vec<f64> = mospa.iter().filter(|r| steps.contains(&r.n)).map(|r| r.mospa).collect();
    sel.iter().sum::<f64>() / sel.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_is_mean_over_runs() {
        let row = |run, n, ospa, card_est| ResultRow { run, n, ospa, card_est, card_true: 1, step_ms: 0.0 };
        let rows = vec![row(0, 1, 10.0, 1), row(1, 1, 30.0, 2), row(0, 2, 5.0, 0), row(1, 2, 7.0, 1)];
        let m = aggregate(&rows);
        assert_eq!(m[0], MospaRow { n: 1, mospa: 20.0, mean_card_est: 1.5, mean_card_true: 1.0 });
        assert_eq!(m[1].mospa, 6.0);
        assert_eq!(time_average(&m, 1..=2), 13.0);
    }
}
