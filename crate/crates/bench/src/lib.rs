//! Fixtures shared by the criterion benchmarks.

use bptrack::rng::{derive_seed, purpose, stream};
use bptrack::{
    generate_frame, generate_truth, AdaptiveBirth, BetaTable, GroundTruth, MeasurementFrame, MotionModel,
    ScenarioConfig, SensorModel, Tracker, TrackerConfig,
};
use rand::Rng;

pub type SceneTracker = Tracker<MotionModel, SensorModel, AdaptiveBirth>;

/// Association input for `targets` potential targets and `measurements`
/// measurements, with column 0 near one and the rest in `(0, 1]`.
pub fn beta_table(targets: usize, measurements: usize, seed: u64) -> BetaTable {
    let mut rng = stream(seed, &[targets as u64, measurements as u64]);
    let rows = (0..targets)
        .map(|_| {
            let mut row = vec![1.0];
            row.extend((0..measurements).map(|_| 1.0 - rng.random::<f64>()));
            row
        })
        .collect();
    BetaTable::new(rows).expect("positive beta table")
}

/// A simulated scenario together with a tracker that has already processed
/// the first `warmup` scans, so that the measured steps see confirmed tracks.
pub struct Scene {
    pub tracker: SceneTracker,
    pub frames: Vec<MeasurementFrame>,
    pub truth: GroundTruth,
    pub next: usize,
}

impl Scene {
    pub fn new(scenario: ScenarioConfig, tracker: TrackerConfig, warmup: usize) -> Self {
        let seed = scenario.seed;
        let truth = generate_truth(&scenario, &mut stream(seed, &[0, purpose::TRUTH])).expect("valid scenario");
        let sensors = scenario.sensors().expect("valid sensors");
        let frames: Vec<MeasurementFrame> = (1..=scenario.n_steps)
            .map(|n| {
                let mut rng = stream(seed, &[0, n as u64, purpose::FRAME]);
                generate_frame(truth.at(n), &sensors, scenario.clutter_mean, &mut rng)
            })
            .collect();
        let birth = AdaptiveBirth::new(10.0, scenario.region());
        let config = TrackerConfig {
            seed: derive_seed(seed, &[0, purpose::TRACKER]),
            ..tracker
        };
        let motion = scenario.motion_model().expect("valid motion model");
        let mut scene = Self {
            tracker: Tracker::new(config, motion, sensors, birth).expect("valid tracker"),
            frames,
            truth,
            next: 0,
        };
        for _ in 0..warmup {
            scene.step();
        }
        scene
    }

    /// Default scenario with the given number of sensors and tracker size.
    pub fn standard(num_sensors: usize, particles: usize, warmup: usize) -> Self {
        let scenario = ScenarioConfig {
            num_sensors,
            seed: 1,
            ..ScenarioConfig::default()
        };
        let tracker = TrackerConfig {
            particles,
            birth_particles: particles,
            ..TrackerConfig::default()
        };
        Self::new(scenario, tracker, warmup)
    }

    /// Runs the tracker on the next scan, wrapping around at the end.
    pub fn step(&mut self) -> usize {
        let frame = &self.frames[self.next % self.frames.len()];
        self.next += 1;
        self.tracker.step(frame).expect("tracker step").cardinality()
    }
}
