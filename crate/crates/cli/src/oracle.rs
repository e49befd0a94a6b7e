//! Comparisons of the tracker's components against exact references.

use bptrack::association::{association_marginals, run_association, BetaTable};
use bptrack::evaluation::{bernoulli_oracle, exact_association_marginals, Grid, LinearScenario};
use bptrack::rng::stream;
use rand::Rng;

use crate::CliError;

/// Tolerances of the association comparison.
pub const ASSOC_MAX_ABS: f64 = 0.02;
pub const ASSOC_MEDIAN_ABS: f64 = 1e-3;
pub const SINGLE_TARGET_REL: f64 = 1e-12;
/// Largest per-step existence deviation allowed in the Bernoulli comparison.
pub const BERNOULLI_MAX_ABS: f64 = 0.05;

const CONVERGED_RESIDUAL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct AssocReport {
    pub instances: usize,
    /// Largest per-instance max absolute marginal error.
    pub max_abs: f64,
    pub mean_abs: f64,
    /// Median of the per-instance max absolute errors.
    pub median_abs: f64,
    /// Largest relative error over the single-target instances.
    pub single_target_max_rel: f64,
    /// Instances whose loop did not reach the residual threshold.
    pub unconverged: usize,
}

impl AssocReport {
    pub fn passes(&self) -> bool {
        self.max_abs <= ASSOC_MAX_ABS
            && self.median_abs <= ASSOC_MEDIAN_ABS
            && self.single_target_max_rel <= SINGLE_TARGET_REL
            && self.unconverged == 0
    }
}

fn bp_marginals(beta: &BetaTable) -> Result<(Vec<Vec<f64>>, bool), CliError> {
    let state = run_association(beta, 10_000, 1e-9).map_err(|e| CliError::Tracker(e.to_string()))?;
    Ok((association_marginals(beta, &state.eta()), state.residual < CONVERGED_RESIDUAL))
}

fn random_beta<R: Rng>(rng: &mut R, k: usize, m: usize) -> BetaTable {
    let rows = (0..k)
        .map(|_| (0..=m).map(|_| 1.0 - rng.random::<f64>()).collect())
        .collect();
    BetaTable::new(rows).expect("positive finite table")
}

/// Compares converged association marginals with exact enumeration on
/// `instances` random tables (entries i.i.d. uniform on `(0, 1]`) with up to `max_targets` PTs and
/// `max_measurements` measurements, plus as many single-target tables with
/// up to six measurements.
pub fn assoc_oracle(
    instances: usize,
    max_targets: usize,
    max_measurements: usize,
    seed: u64,
) -> Result<AssocReport, CliError> {
    let mut rng = stream(seed, &[0x6173_736f]);
    let mut errors = Vec::with_capacity(instances);
    let mut unconverged = 0;
    for _ in 0..instances {
        let k = rng.random_range(1..=max_targets.max(1));
        let m = rng.random_range(0..=max_measurements);
        let beta = random_beta(&mut rng, k, m);
        let exact = exact_association_marginals(&beta).map_err(|e| CliError::Config(e.to_string()))?;
        let (bp, converged) = bp_marginals(&beta)?;
        unconverged += usize::from(!converged);
        let err = bp
            .iter()
            .flatten()
            .zip(exact.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        errors.push(err);
    }
    let mut single_target_max_rel: f64 = 0.0;
    for _ in 0..instances {
        let m = rng.random_range(0..=6);
        let beta = random_beta(&mut rng, 1, m);
        let exact = exact_association_marginals(&beta).map_err(|e| CliError::Config(e.to_string()))?;
        let (bp, converged) = bp_marginals(&beta)?;
        unconverged += usize::from(!converged);
        for (a, b) in bp[0].iter().zip(&exact[0]) {
            single_target_max_rel = single_target_max_rel.max((a - b).abs() / b.abs());
        }
    }
    let mut sorted = errors.clone();
    sorted.sort_by(f64::total_cmp);
    let median_abs = match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2],
        n => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    };
    Ok(AssocReport {
        instances,
        max_abs: sorted.last().copied().unwrap_or(0.0),
        mean_abs: errors.iter().sum::<f64>() / errors.len().max(1) as f64,
        median_abs,
        single_target_max_rel,
        unconverged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliReport {
    pub oracle: Vec<f64>,
    pub tracker: Vec<f64>,
    pub max_abs: f64,
    pub mean_abs: f64,
}

impl BernoulliReport {
    pub fn passes(&self) -> bool {
        self.max_abs <= BERNOULLI_MAX_ABS
    }
}

/// Runs the one-target tracker with `particles` particles on the scripted
/// scalar scenario and compares its existence probabilities with the grid
/// Bernoulli filter.
pub fn bernoulli_check(particles: usize, seed: u64) -> Result<BernoulliReport, CliError> {
    let scenario = LinearScenario::scripted();
    let oracle = bernoulli_oracle(&scenario, Grid::default()).existence();
    let tracker = scenario.track_existence(particles, seed)?;
    let dev: Vec<f64> = oracle.iter().zip(&tracker).map(|(a, b)| (a - b).abs()).collect();
    Ok(BernoulliReport {
        max_abs: dev.iter().copied().fold(0.0, f64::max),
        mean_abs: dev.iter().sum::<f64>() / dev.len() as f64,
        oracle,
        tracker,
    })
}
