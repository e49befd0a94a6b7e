use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};

use super::{ModelError, Sensor, TargetState};

/// Range (m) and bearing (deg, in `[0, 360)`) measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub range: f64,
    pub bearing: f64,
}

impl Measurement {
    pub fn new(range: f64, bearing: f64) -> Result<Self, ModelError> {
        if !(range >= 0.0 && range.is_finite()) || !bearing.is_finite() {
            return Err(ModelError::InvalidParameter(format!(
                "invalid measurement (range {range}, bearing {bearing})"
            )));
        }
        Ok(Self {
            range,
            bearing: wrap_bearing(bearing),
        })
    }
}

fn wrap_bearing(deg: f64) -> f64 {
    let b = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if b >= 360.0 {
        0.0
    } else {
        b
    }
}

/// Wraps an angle difference in degrees to `(-180, 180]`.
pub fn wrap_bearing_residual(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Detection probability as a function of the target state.
#[derive(Clone)]
pub enum DetectionProfile {
    Constant(f64),
    StateDependent(Arc<dyn Fn(&TargetState) -> f64 + Send + Sync>),
}

impl DetectionProfile {
    pub fn probability(&self, x: &TargetState) -> f64 {
        match self {
            Self::Constant(p) => *p,
            Self::StateDependent(f) => f(x),
        }
    }
}

impl fmt::Debug for DetectionProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(p) => f.debug_tuple("Constant").field(p).finish(),
            Self::StateDependent(_) => f.write_str("StateDependent(..)"),
        }
    }
}

/// Range-bearing sensor with Poisson clutter, uniform in area over a disc.
#[derive(Debug, Clone)]
pub struct SensorModel {
    position: Vector2<f64>,
    detection: DetectionProfile,
    clutter_mean: f64,
    noise_cov: Matrix2<f64>,
    max_range: f64,
    info: Matrix2<f64>,
    log_norm: f64,
    log_clutter_const: f64,
}

pub struct SensorModelBuilder {
    position: Vector2<f64>,
    detection: DetectionProfile,
    clutter_mean: f64,
    noise_cov: Matrix2<f64>,
    max_range: f64,
}

impl SensorModelBuilder {
    pub fn detection(mut self, d: DetectionProfile) -> Self {
        self.detection = d;
        self
    }

    pub fn clutter_mean(mut self, mu: f64) -> Self {
        self.clutter_mean = mu;
        self
    }

    /// Range std in m, bearing std in degrees.
    pub fn noise_std(mut self, range_std: f64, bearing_std_deg: f64) -> Self {
        self.noise_cov = Matrix2::new(range_std * range_std, 0.0, 0.0, bearing_std_deg * bearing_std_deg);
        self
    }

    pub fn noise_cov(mut self, cov: Matrix2<f64>) -> Self {
        self.noise_cov = cov;
        self
    }

    pub fn max_range(mut self, r: f64) -> Self {
        self.max_range = r;
        self
    }

    pub fn build(self) -> Result<SensorModel, ModelError> {
        if !(self.clutter_mean > 0.0 && self.clutter_mean.is_finite()) {
            return Err(ModelError::NonPositiveClutterMean(self.clutter_mean));
        }
        if let DetectionProfile::Constant(p) = self.detection {
            if !(0.0..=1.0).contains(&p) {
                return Err(ModelError::InvalidDetectionProbability(p));
            }
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "max range must be positive, got {}",
                self.max_range
            )));
        }
        let c = self.noise_cov;
        if (c[(0, 1)] - c[(1, 0)]).abs() > 1e-12 * c.abs().max() {
            return Err(ModelError::InvalidParameter("noise covariance not symmetric".into()));
        }
        let chol = c
            .cholesky()
            .ok_or_else(|| ModelError::InvalidParameter("noise covariance not positive definite".into()))?;
        let info = chol.inverse();
        let det = c.determinant();
        Ok(SensorModel {
            position: self.position,
            detection: self.detection,
            clutter_mean: self.clutter_mean,
            noise_cov: c,
            max_range: self.max_range,
            info,
            log_norm: -(2.0 * PI).ln() - 0.5 * det.ln(),
            log_clutter_const: 2.0f64.ln() - 2.0 * self.max_range.ln() - 360.0f64.ln(),
        })
    }
}

impl SensorModel {
    pub fn builder(position: [f64; 2]) -> SensorModelBuilder {
        SensorModelBuilder {
            position: Vector2::new(position[0], position[1]),
            detection: DetectionProfile::Constant(1.0),
            clutter_mean: 1.0,
            noise_cov: Matrix2::identity(),
            max_range: f64::MAX,
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.position[0], self.position[1]]
    }

    pub fn detection(&self) -> &DetectionProfile {
        &self.detection
    }

    pub fn noise_cov(&self) -> &Matrix2<f64> {
        &self.noise_cov
    }

    pub fn max_range(&self) -> f64 {
        self.max_range
    }

    /// Noise-free range and bearing (deg, `[0, 360)`) of a position.
    pub fn observe(&self, p: [f64; 2]) -> Result<(f64, f64), ModelError> {
        let dx = p[0] - self.position[0];
        let dy = p[1] - self.position[1];
        if dx == 0.0 && dy == 0.0 {
            return Err(ModelError::DegenerateGeometry);
        }
        Ok((dx.hypot(dy), wrap_bearing(dy.atan2(dx).to_degrees())))
    }

    /// Cartesian position of a noise-free range-bearing pair.
    pub fn invert(&self, range: f64, bearing_deg: f64) -> [f64; 2] {
        let (s, c) = bearing_deg.to_radians().sin_cos();
        [self.position[0] + range * c, self.position[1] + range * s]
    }

    #[inline]
    fn log_gaussian(&self, dr: f64, db: f64) -> f64 {
        let q = dr * dr * self.info[(0, 0)]
            + 2.0 * dr * db * self.info[(0, 1)]
            + db * db * self.info[(1, 1)];
        self.log_norm - 0.5 * q
    }
}

/// `log f(z | x)`: bivariate Gaussian in (range, bearing) with the bearing
/// residual wrapped to `(-180, 180]`.
pub fn log_measurement_pdf(
    z: &Measurement,
    x: &TargetState,
    sensor: &SensorModel,
) -> Result<f64, ModelError> {
    let (r, b) = sensor.observe(x.position())?;
    Ok(sensor.log_gaussian(z.range - r, wrap_bearing_residual(z.bearing - b)))
}

pub fn measurement_pdf(
    z: &Measurement,
    x: &TargetState,
    sensor: &SensorModel,
) -> Result<f64, ModelError> {
    log_measurement_pdf(z, x, sensor).map(f64::exp)
}

/// `log f_FA(z)`: range density `2r/R²` on `[0, R]`, bearing uniform.
pub fn log_clutter_pdf(z: &Measurement, sensor: &SensorModel) -> f64 {
    if z.range > sensor.max_range || z.range <= 0.0 {
        f64::NEG_INFINITY
    } else {
        sensor.log_clutter_const + z.range.ln()
    }
}

pub fn clutter_pdf(z: &Measurement, sensor: &SensorModel) -> f64 {
    if z.range > sensor.max_range || z.range < 0.0 {
        0.0
    } else {
        2.0 * z.range / (sensor.max_range * sensor.max_range) / 360.0
    }
}

impl Sensor<TargetState> for SensorModel {
    type Measurement = Measurement;

    fn detection_probability(&self, state: &TargetState) -> f64 {
        self.detection.probability(state)
    }

    fn clutter_mean(&self) -> f64 {
        self.clutter_mean
    }

    fn log_clutter_pdf(&self, z: &Measurement) -> f64 {
        log_clutter_pdf(z, self)
    }

    fn log_measurement_pdf(&self, z: &Measurement, state: &TargetState) -> Result<f64, ModelError> {
        log_measurement_pdf(z, state, self)
    }

    fn log_measurement_pdfs(
        &self,
        zs: &[Measurement],
        state: &TargetState,
        out: &mut [f64],
    ) -> Result<(), ModelError> {
        let (r, b) = self.observe(state.position())?;
        for (o, z) in out.iter_mut().zip(zs) {
            *o = self.log_gaussian(z.range - r, wrap_bearing_residual(z.bearing - b));
        }
        Ok(())
    }
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

    #[test]
    fn density_at_mean() {
        let s = sensor();
        let x = TargetState::new(1000.0, 0.0, 0.0, 0.0);
        let z = Measurement::new(1000.0, 0.0).unwrap();
        let f = measurement_pdf(&z, &x, &s).unwrap();
        assert_relative_eq!(f, 1.0 / (2.0 * PI * 10.0 * 0.5), max_relative = 1e-14);
        assert_relative_eq!(f, 0.03183, max_relative = 1e-3);

        let z1 = Measurement::new(1010.0, 0.0).unwrap();
        let f1 = measurement_pdf(&z1, &x, &s).unwrap();
        assert_relative_eq!(f1, f * (-0.5f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn bearing_residual_wraps() {
        assert_relative_eq!(wrap_bearing_residual(359.5), -0.5, epsilon = 1e-12);
        assert_relative_eq!(wrap_bearing_residual(-180.0), 180.0, epsilon = 1e-12);
        assert_relative_eq!(wrap_bearing_residual(180.0), 180.0, epsilon = 1e-12);
        let s = sensor();
        let x = TargetState::new(1000.0, 0.0, 0.0, 0.0);
        let a = measurement_pdf(&Measurement::new(1000.0, 359.5).unwrap(), &x, &s).unwrap();
        let b = measurement_pdf(&Measurement::new(1000.0, 0.5).unwrap(), &x, &s).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_geometry_is_an_error() {
        let s = sensor();
        let z = Measurement::new(10.0, 0.0).unwrap();
        assert_eq!(
            measurement_pdf(&z, &TargetState::zero_at([0.0, 0.0]), &s),
            Err(ModelError::DegenerateGeometry)
        );
    }

    #[test]
    fn clutter_density_values() {
        let s = sensor();
        let at = |r| clutter_pdf(&Measurement::new(r, 17.0).unwrap(), &s);
        assert_relative_eq!(at(6000.0), (2.0 / 6000.0) / 360.0, max_relative = 1e-14);
        assert_eq!(at(0.0), 0.0);
        assert_eq!(at(6000.5), 0.0);
        assert_relative_eq!(
            log_clutter_pdf(&Measurement::new(2500.0, 3.0).unwrap(), &s).exp(),
            at(2500.0),
            max_relative = 1e-12
        );
    }

    #[test]
    fn clutter_density_integrates_to_one() {
        // Composite Simpson over range; the bearing integral is exact (uniform).
        let s = sensor();
        let n = 2000;
        let h = 6000.0 / n as f64;
        let f = |r: f64| clutter_pdf(&Measurement::new(r, 0.0).unwrap(), &s) * 360.0;
        let mut acc = f(0.0) + f(6000.0);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        assert!((acc * h / 3.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn batch_matches_single() {
        let s = sensor();
        let x = TargetState::new(-300.0, 2200.0, 1.0, 2.0);
        let zs: Vec<_> = [(2200.0, 97.0), (2300.0, 100.0), (10.0, 300.0)]
            .iter()
            .map(|&(r, b)| Measurement::new(r, b).unwrap())
            .collect();
        let mut out = vec![0.0; 3];
        s.log_measurement_pdfs(&zs, &x, &mut out).unwrap();
        for (o, z) in out.iter().zip(&zs) {
            assert_relative_eq!(*o, log_measurement_pdf(z, &x, &s).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn rejects_invalid_configuration() {
        let b = || SensorModel::builder([0.0, 0.0]).noise_std(10.0, 0.5).max_range(6000.0);
        assert!(matches!(b().clutter_mean(0.0).build(), Err(ModelError::NonPositiveClutterMean(_))));
        assert!(b().detection(DetectionProfile::Constant(1.5)).build().is_err());
        assert!(b().noise_cov(Matrix2::new(1.0, 2.0, 2.0, 1.0)).build().is_err());
    }

    #[test]
    fn observe_and_invert_round_trip() {
        let s = SensorModel::builder([100.0, -50.0]).build().unwrap();
        let (r, b) = s.observe([-400.0, 700.0]).unwrap();
        let p = s.invert(r, b);
        assert_relative_eq!(p[0], -400.0, epsilon = 1e-9);
        assert_relative_eq!(p[1], 700.0, epsilon = 1e-9);
    }

    impl TargetState {
        fn zero_at(p: [f64; 2]) -> Self {
            TargetState::new(p[0], p[1], 0.0, 0.0)
        }
    }
}
