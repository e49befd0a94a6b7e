use nalgebra::{Matrix4, Matrix4x2, Vector2, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Dynamics, ModelError, ParticleState};

/// Two-dimensional position/velocity state `[p1 p2 v1 v2]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TargetState {
    pub p1: f64,
    pub p2: f64,
    pub v1: f64,
    pub v2: f64,
}

impl TargetState {
    pub const fn new(p1: f64, p2: f64, v1: f64, v2: f64) -> Self {
        Self { p1, p2, v1, v2 }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.p1, self.p2]
    }

    pub fn velocity(&self) -> [f64; 2] {
        [self.v1, self.v2]
    }

    pub fn is_finite(&self) -> bool {
        self.p1.is_finite() && self.p2.is_finite() && self.v1.is_finite() && self.v2.is_finite()
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.p1, self.p2, self.v1, self.v2)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl ParticleState for TargetState {
    fn zero() -> Self {
        Self::default()
    }

    fn add_scaled(&mut self, other: &Self, weight: f64) {
        self.p1 += weight * other.p1;
        self.p2 += weight * other.p2;
        self.v1 += weight * other.v1;
        self.v2 += weight * other.v2;
    }
}

/// Constant-velocity model `x_n = A x_{n-1} + W u_n`, `u_n ~ N(0, sigma_u² I₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionModel {
    transition: Matrix4<f64>,
    noise_gain: Matrix4x2<f64>,
    sigma_u: f64,
    period: f64,
}

impl MotionModel {
    /// White-noise-acceleration discretization with sampling period `period`.
    pub fn constant_velocity(period: f64, sigma_u: f64) -> Result<Self, ModelError> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "sampling period must be positive, got {period}"
            )));
        }
        if !(sigma_u >= 0.0 && sigma_u.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "driving-noise std must be nonnegative, got {sigma_u}"
            )));
        }
        let t = period;
        #[rustfmt::skip]
        let transition = Matrix4::new(
            1.0, 0.0, t,   0.0,
            0.0, 1.0, 0.0, t,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        );
        let h = 0.5 * t * t;
        #[rustfmt::skip]
        let noise_gain = Matrix4x2::new(
            h,   0.0,
            0.0, h,
            t,   0.0,
            0.0, t,
        );
        Ok(Self {
            transition,
            noise_gain,
            sigma_u,
            period,
        })
    }

    pub fn transition_matrix(&self) -> &Matrix4<f64> {
        &self.transition
    }

    pub fn noise_gain(&self) -> &Matrix4x2<f64> {
        &self.noise_gain
    }

    pub fn sigma_u(&self) -> f64 {
        self.sigma_u
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Noise-free propagation `A x`.
    pub fn predict_mean(&self, state: &TargetState) -> TargetState {
        TargetState::from_vector(&(self.transition * state.to_vector()))
    }
}

/// Draws `x_n ~ f(· | state)`.
pub fn transition_sample<R: Rng + ?Sized>(
    state: &TargetState,
    motion: &MotionModel,
    rng: &mut R,
) -> TargetState {
    let u = Vector2::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
        * motion.sigma_u;
    TargetState::from_vector(&(motion.transition * state.to_vector() + motion.noise_gain * u))
}

impl Dynamics for MotionModel {
    type State = TargetState;

    fn propagate<R: Rng + ?Sized>(&self, state: &TargetState, rng: &mut R) -> TargetState {
        transition_sample(state, self, rng)
    }
}
