//! Grid-based Bernoulli filter for the scalar linear-Gaussian model.
//!
//! With one potential target and one sensor the tracker reduces to a
//! particle Bernoulli filter. This module computes the same recursion by
//! deterministic quadrature on a fine grid, giving a reference existence
//! probability trajectory for a scripted measurement sequence.

use std::f64::consts::PI;

use crate::model::linear::{LinearSensor, RandomWalk};
use crate::model::MeasurementFrame;
use crate::tracker::{BirthMode, GaussianBirth, Tracker, TrackerConfig, TrackerError};

/// Single-target, single-sensor scalar scenario with scripted measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearScenario {
    pub walk_std: f64,
    pub noise_std: f64,
    pub detection_probability: f64,
    pub clutter_mean: f64,
    /// Clutter is uniform on `[clutter_lo, clutter_hi]`.
    pub clutter_lo: f64,
    pub clutter_hi: f64,
    pub survival_probability: f64,
    pub birth_probability: f64,
    pub birth_mean: f64,
    pub birth_std: f64,
    /// Measurements of each step `n = 1..`.
    pub measurements: Vec<Vec<f64>>,
}

impl LinearScenario {
    /// Fifty steps; a target present for `n = 10..=40` that drifts from 2 to
    /// about 11, missed at four steps, plus scattered clutter.
    pub fn scripted() -> Self {
        let misses = [15, 22, 23, 33];
        let measurements = (1..=50)
            .map(|n| {
                let mut zs = Vec::new();
                if n % 7 == 0 {
                    zs.push(30.0 - n as f64);
                }
                if (10..=40).contains(&n) && !misses.contains(&n) {
                    let t = (n - 10) as f64;
                    let x = 2.0 + 0.3 * t;
                    let noise = 0.8 * (1.7 * t).sin();
                    zs.push(x + noise);
                }
                if n % 11 == 3 {
                    zs.push(-40.0 + 1.5 * n as f64);
                }
                zs
            })
            .collect();
        Self {
            walk_std: 1.0,
            noise_std: 1.0,
            detection_probability: 0.9,
            clutter_mean: 0.5,
            clutter_lo: -50.0,
            clutter_hi: 50.0,
            survival_probability: 0.95,
            birth_probability: 0.05,
            birth_mean: 0.0,
            birth_std: 10.0,
            measurements,
        }
    }

    pub fn num_steps(&self) -> usize {
        self.measurements.len()
    }

    pub fn sensor(&self) -> LinearSensor {
        LinearSensor {
            noise_std: self.noise_std,
            detection_probability: self.detection_probability,
            clutter_mean: self.clutter_mean,
            clutter_lo: self.clutter_lo,
            clutter_hi: self.clutter_hi,
        }
    }

    pub fn dynamics(&self) -> RandomWalk {
        RandomWalk { std: self.walk_std }
    }

    pub fn birth(&self) -> GaussianBirth {
        GaussianBirth {
            mean: self.birth_mean,
            std: self.birth_std,
        }
    }

    /// Configuration of a one-PT tracker with the fixed birth density.
    pub fn tracker_config(&self, particles: usize, seed: u64) -> TrackerConfig {
        TrackerConfig {
            potential_targets: 1,
            particles,
            birth_particles: particles,
            survival_probability: self.survival_probability,
            birth_mode: BirthMode::Fixed {
                birth_probability: self.birth_probability,
            },
            seed,
            ..TrackerConfig::default()
        }
    }

    /// Runs the particle tracker over the script and returns `p_e` per step.
    pub fn track_existence(&self, particles: usize, seed: u64) -> Result<Vec<f64>, TrackerError> {
        self.sensor().validate()?;
        let mut tracker = Tracker::new(
            self.tracker_config(particles, seed),
            self.dynamics(),
            vec![self.sensor()],
            self.birth(),
        )?;
        self.measurements
            .iter()
            .map(|zs| {
                let rec = tracker.step(&MeasurementFrame::new(vec![zs.clone()]))?;
                Ok(rec.targets[0].existence)
            })
            .collect()
    }
}

/// Uniform grid on `[lo, hi]` with `cells` intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl Grid {
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let dx = self.spacing();
        (0..=self.cells).map(|i| self.lo + i as f64 * dx).collect()
    }

    /// Trapezoid rule for values at the nodes.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        let n = values.len();
        let inner: f64 = values[1..n - 1].iter().sum();
        self.spacing() * (inner + 0.5 * (values[0] + values[n - 1]))
    }
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            lo: -50.0,
            hi: 50.0,
            cells: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliStep {
    pub existence: f64,
    /// Posterior state density at the grid nodes (integrates to 1).
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliTrajectory {
    pub grid: Grid,
    pub steps: Vec<BernoulliStep>,
    /// Set when the grid spacing is too coarse for the model scales.
    pub coarse: bool,
}

impl BernoulliTrajectory {
    pub fn existence(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.existence).collect()
    }
}

fn gauss(d: f64, std: f64) -> f64 {
    (-0.5 * (d / std).powi(2)).exp() / (std * (2.0 * PI).sqrt())
}

/// Runs the Bernoulli filter recursion on `grid`, starting from a certainly
/// absent target.
pub fn bernoulli_oracle(scenario: &LinearScenario, grid: Grid) -> BernoulliTrajectory {
    let dx = grid.spacing();
    let smallest = scenario.walk_std.min(scenario.noise_std).min(scenario.birth_std);
    let coarse = dx > 0.25 * smallest;
    if coarse {
        log::warn!("grid spacing {dx} is coarse relative to model scale {smallest}");
    }
    let nodes = grid.nodes();
    let len = nodes.len();
    let normalize = |f: &mut Vec<f64>| {
        let z = grid.integrate(f);
        if z > 0.0 {
            f.iter_mut().for_each(|v| *v /= z);
        }
    };

    let mut birth: Vec<f64> = nodes
        .iter()
        .map(|x| gauss(x - scenario.birth_mean, scenario.birth_std))
        .collect();
    normalize(&mut birth);
    let reach = ((8.0 * scenario.walk_std / dx).ceil() as usize).min(len - 1);
    let kernel: Vec<f64> = (0..=reach).map(|d| gauss(d as f64 * dx, scenario.walk_std)).collect();
    let trapz_weight = |j: usize| if j == 0 || j == len - 1 { 0.5 * dx } else { dx };

    let sensor = scenario.sensor();
    let clutter_density = 1.0 / (scenario.clutter_hi - scenario.clutter_lo);
    let pd = scenario.detection_probability;
    let (ps, pb) = (scenario.survival_probability, scenario.birth_probability);

    let mut pe = 0.0;
    let mut density = vec![0.0; len];
    let mut steps = Vec::with_capacity(scenario.num_steps());
    for zs in &scenario.measurements {
        let mut moved = vec![0.0; len];
        if pe > 0.0 {
            for (j, &f) in density.iter().enumerate() {
                if f == 0.0 {
                    continue;
                }
                let mass = f * trapz_weight(j);
                let (a, b) = (j.saturating_sub(reach), (j + reach).min(len - 1));
                for (i, m) in moved[a..=b].iter_mut().enumerate() {
                    *m += mass * kernel[(a + i).abs_diff(j)];
                }
            }
            normalize(&mut moved);
        }
        let pe_pred = ps * pe + pb * (1.0 - pe);
        let predicted: Vec<f64> = if pe_pred > 0.0 {
            moved
                .iter()
                .zip(&birth)
                .map(|(m, b)| (ps * pe * m + pb * (1.0 - pe) * b) / pe_pred)
                .collect()
        } else {
            vec![0.0; len]
        };

        let lambda: Vec<f64> = zs
            .iter()
            .map(|z| {
                let inside = (scenario.clutter_lo..=scenario.clutter_hi).contains(z);
                scenario.clutter_mean * if inside { clutter_density } else { 0.0 }
            })
            .collect();
        let likelihood: Vec<f64> = nodes
            .iter()
            .map(|x| {
                let detected: f64 = zs
                    .iter()
                    .zip(&lambda)
                    .map(|(z, l)| pd * gauss(z - x, sensor.noise_std) / l)
                    .sum();
                1.0 - pd + detected
            })
            .collect();
        let posterior: Vec<f64> = likelihood.iter().zip(&predicted).map(|(l, f)| l * f).collect();
        let evidence = grid.integrate(&posterior);
        pe = pe_pred * evidence / (1.0 - pe_pred + pe_pred * evidence);
        density = posterior;
        normalize(&mut density);
        steps.push(BernoulliStep {
            existence: pe,
            density: density.clone(),
        });
    }
    BernoulliTrajectory { grid, steps, coarse }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn quiet(mut s: LinearScenario, pd: f64, steps: usize) -> LinearScenario {
        s.detection_probability = pd;
        s.measurements = vec![Vec::new(); steps];
        s
    }

    #[test]
    fn existence_recursion_without_detection() {
        let s = quiet(LinearScenario::scripted(), 0.0, 30);
        let t = bernoulli_oracle(&s, Grid::default());
        let mut pe: f64 = 0.0;
        for step in &t.steps {
            pe = 0.95 * pe + 0.05 * (1.0 - pe);
            assert_relative_eq!(step.existence, pe, epsilon = 1e-12);
        }
        assert!(!t.coarse);
    }

    #[test]
    fn measurement_at_prior_mean_raises_existence() {
        let mut s = quiet(LinearScenario::scripted(), 0.9, 1);
        s.clutter_mean = 1e-6;
        s.measurements = vec![vec![0.0]];
        let t = bernoulli_oracle(&s, Grid::default());
        assert!(t.steps[0].existence > 0.05);
    }

    #[test]
    fn coarse_grid_is_flagged() {
        let t = bernoulli_oracle(&quiet(LinearScenario::scripted(), 0.5, 2), Grid { lo: -50.0, hi: 50.0, cells: 50 });
        assert!(t.coarse);
    }

    #[test]
    fn densities_are_normalized() {
        let t = bernoulli_oracle(&LinearScenario::scripted(), Grid::default());
        for s in &t.steps {
            assert_relative_eq!(t.grid.integrate(&s.density), 1.0, epsilon = 1e-9);
            assert!((0.0..=1.0).contains(&s.existence));
        }
    }

    /// Exact Gaussian-mixture Bernoulli filter, used to check the grid for
    /// the first steps (the mixture grows with every measurement).
    fn mixture_filter(s: &LinearScenario, steps: usize) -> Vec<f64> {
        let mut pe = 0.0;
        let mut comps: Vec<(f64, f64, f64)> = Vec::new();
        let mut out = Vec::new();
        let lambda = s.clutter_mean / (s.clutter_hi - s.clutter_lo);
        for zs in s.measurements.iter().take(steps) {
            let pe_pred = s.survival_probability * pe + s.birth_probability * (1.0 - pe);
            let mut pred: Vec<(f64, f64, f64)> = comps
                .iter()
                .map(|&(w, m, v)| (w * s.survival_probability * pe / pe_pred, m, v + s.walk_std.powi(2)))
                .collect();
            pred.push((s.birth_probability * (1.0 - pe) / pe_pred, s.birth_mean, s.birth_std.powi(2)));
            let r = s.noise_std.powi(2);
            let mut post = Vec::new();
            for &(w, m, v) in &pred {
                post.push((w * (1.0 - s.detection_probability), m, v));
                for z in zs {
                    let gain = v / (v + r);
                    let q = gauss(z - m, (v + r).sqrt());
                    post.push((w * s.detection_probability * q / lambda, m + gain * (z - m), (1.0 - gain) * v));
                }
            }
            let evidence: f64 = post.iter().map(|c| c.0).sum();
            pe = pe_pred * evidence / (1.0 - pe_pred + pe_pred * evidence);
            comps = post.into_iter().map(|(w, m, v)| (w / evidence, m, v)).collect();
            out.push(pe);
        }
        out
    }

    #[test]
    fn grid_matches_exact_mixture_filter() {
        let s = LinearScenario::scripted();
        let grid = bernoulli_oracle(&s, Grid::default()).existence();
        let exact = mixture_filter(&s, 16);
        for (n, (g, e)) in grid.iter().zip(&exact).enumerate() {
            assert!((g - e).abs() < 1e-4, "step {}: grid {g} exact {e}", n + 1);
        }
    }
}
