//! Experiment configuration file.
//!
//! TOML with one table per concern. Key names carry their units and unknown
//! keys are rejected, so a typo fails loudly instead of silently falling
//! back to a default.

use std::path::Path;

use bptrack::{BirthMode, OspaParams, ScenarioConfig, TrackerConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub experiment: ExperimentSection,
    pub scenario: ScenarioSection,
    pub tracker: TrackerSection,
    pub ospa: OspaSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub seed: u64,
    pub monte_carlo_runs: usize,
    pub output_dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub n_steps: usize,
    pub n_targets: usize,
    pub birth_times_step: Vec<usize>,
    pub roi_halfwidth_m: f64,
    pub initial_circle_radius_m: f64,
    pub initial_speed_m_per_s: f64,
    pub num_sensors: usize,
    pub sensor_circle_radius_m: f64,
    pub detection_probability: f64,
    pub clutter_mean_per_scan: f64,
    pub sigma_u_m_per_s2: f64,
    pub range_std_m: f64,
    pub bearing_std_deg: f64,
    pub max_range_m: f64,
    pub period_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerSection {
    pub potential_targets: usize,
    pub particles: usize,
    pub birth_particles: usize,
    pub bp_iterations: usize,
    pub bp_tolerance: f64,
    pub detection_threshold: f64,
    pub reliability_threshold: f64,
    pub mean_births_per_step: f64,
    pub survival_probability: f64,
    pub birth_velocity_std_m_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OspaSection {
    pub cutoff_m: f64,
    pub order: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            seed: 0,
            monte_carlo_runs: 1,
            output_dir: "out".into(),
        }
    }
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let s = ScenarioConfig::default();
        Self {
            n_steps: s.n_steps,
            n_targets: s.n_targets,
            birth_times_step: s.birth_times,
            roi_halfwidth_m: s.roi_halfwidth,
            initial_circle_radius_m: s.initial_circle_radius,
            initial_speed_m_per_s: s.initial_speed,
            num_sensors: s.num_sensors,
            sensor_circle_radius_m: s.sensor_circle_radius,
            detection_probability: s.detection_probability,
            clutter_mean_per_scan: s.clutter_mean,
            sigma_u_m_per_s2: s.sigma_u,
            range_std_m: s.range_std,
            bearing_std_deg: s.bearing_std_deg,
            max_range_m: s.max_range,
            period_s: s.period,
        }
    }
}

impl Default for TrackerSection {
    fn default() -> Self {
        let t = TrackerConfig::default();
        Self {
            potential_targets: t.potential_targets,
            particles: t.particles,
            birth_particles: t.birth_particles,
            bp_iterations: t.bp_iterations,
            bp_tolerance: t.bp_tolerance,
            detection_threshold: t.detection_threshold,
            reliability_threshold: t.reliability_threshold,
            mean_births_per_step: t.mean_births,
            survival_probability: t.survival_probability,
            birth_velocity_std_m_per_s: 10.0,
        }
    }
}

impl Default for OspaSection {
    fn default() -> Self {
        let o = OspaParams::default();
        Self {
            cutoff_m: o.cutoff,
            order: o.order,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is serializable")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.experiment.monte_carlo_runs == 0 {
            return Err(CliError::Config("experiment.monte_carlo_runs must be at least 1".into()));
        }
        self.scenario_config(0)
            .validate()
            .map_err(|e| CliError::Config(format!("[scenario] {e}")))?;
        self.tracker_config(0)
            .validate()
            .map_err(|e| CliError::Config(format!("[tracker] {e}")))?;
        if !(self.tracker.birth_velocity_std_m_per_s >= 0.0) {
            return Err(CliError::Config("[tracker] birth_velocity_std_m_per_s must be nonnegative".into()));
        }
        self.ospa_params().validate().map_err(|e| CliError::Config(format!("[ospa] {e}")))
    }

    pub fn scenario_config(&self, seed: u64) -> ScenarioConfig {
        let s = &self.scenario;
        ScenarioConfig {
            roi_halfwidth: s.roi_halfwidth_m,
            n_targets: s.n_targets,
            birth_times: s.birth_times_step.clone(),
            death_times: Vec::new(),
            initial_circle_radius: s.initial_circle_radius_m,
            initial_speed: s.initial_speed_m_per_s,
            n_steps: s.n_steps,
            num_sensors: s.num_sensors,
            sensor_circle_radius: s.sensor_circle_radius_m,
            detection_probability: s.detection_probability,
            clutter_mean: s.clutter_mean_per_scan,
            sigma_u: s.sigma_u_m_per_s2,
            range_std: s.range_std_m,
            bearing_std_deg: s.bearing_std_deg,
            max_range: s.max_range_m,
            period: s.period_s,
            seed,
        }
    }

    pub fn tracker_config(&self, seed: u64) -> TrackerConfig {
        let t = &self.tracker;
        TrackerConfig {
            potential_targets: t.potential_targets,
            particles: t.particles,
            birth_particles: t.birth_particles,
            bp_iterations: t.bp_iterations,
            bp_tolerance: t.bp_tolerance,
            detection_threshold: t.detection_threshold,
            reliability_threshold: t.reliability_threshold,
            mean_births: t.mean_births_per_step,
            survival_probability: t.survival_probability,
            birth_mode: BirthMode::Adaptive,
            seed,
        }
    }

    pub fn ospa_params(&self) -> OspaParams {
        OspaParams {
            cutoff: self.ospa.cutoff_m,
            order: self.ospa.order,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(RunConfig::from_toml("").unwrap(), cfg);
    }

    #[test]
    fn partial_override() {
        let cfg = RunConfig::from_toml("[scenario]\ndetection_probability = 0.6\nnum_sensors = 6\n").unwrap();
        assert_eq!(cfg.scenario.num_sensors, 6);
        assert_eq!(cfg.scenario.detection_probability, 0.6);
        assert_eq!(cfg.tracker.particles, 3000);
    }

    #[test]
    fn unknown_key_reports_location() {
        let err = RunConfig::from_toml("[scenario]\nn_steps = 10\nsigma_u = 0.1\n").unwrap_err();
        let CliError::Config(msg) = err else { panic!("wrong error kind") };
        assert!(msg.contains("sigma_u"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for text in [
            "[experiment]\nmonte_carlo_runs = 0\n",
            "[scenario]\ndetection_probability = 1.5\n",
            "[tracker]\nparticles = 0\n",
            "[ospa]\ncutoff_m = -1.0\n",
            "[scenario]\nn_targets = 2\n",
        ] {
            assert!(matches!(RunConfig::from_toml(text), Err(CliError::Config(_))), "{text}");
        }
    }
}
