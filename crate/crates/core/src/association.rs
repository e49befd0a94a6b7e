//! Per-sensor probabilistic data association by loopy belief propagation.
//!
//! For one sensor, every potential target `k` contributes a message
//! `β_k(a)` over its target-oriented association `a ∈ {0, …, M}`. The
//! exclusion constraint between target-oriented and measurement-oriented
//! variables makes every message between the two sides a two-valued function
//! ("claims the pairing" vs. "does not"), so each is carried as one positive
//! ratio and an iteration costs `O(K·M)`:
//!
//! ```text
//! ψ[k][m] = β_k(m) / β_k(0)
//! ν[k][m] = 1 / (1 + Σ_{k'≠k} ζ[k'][m])                  measurement → target
//! ζ[k][m] = ψ[k][m] / (1 + Σ_{m'≠m} ψ[k][m'] ν[k][m'])    target → measurement
//! η_k(0) = 1,  η_k(m) = ν[k][m]
//! ```
//!
//! Sweeps are synchronous (all `ν` from the previous `ζ`, then all `ζ`), so
//! the result does not depend on evaluation order.

use thiserror::Error;

use crate::model::{ModelError, Sensor};

/// Relative floor applied to `β_k(0)` so that ratios stay finite.
const MISS_FLOOR: f64 = 1e-250;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssociationError {
    #[error("potential target {k} has no particles")]
    EmptyParticles { k: usize },
    #[error("potential target {k} has a negative or non-finite weight")]
    InvalidWeight { k: usize },
    #[error("predicted weights of potential target {k} sum to {sum} > 1")]
    ExcessMass { k: usize, sum: f64 },
    #[error("beta row {k} is invalid: {reason}")]
    InvalidBeta { k: usize, reason: &'static str },
    #[error("non-finite message at iteration {iteration}")]
    NumericalFailure { iteration: usize },
    #[error("invalid association parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Messages `β_k(a)` for all potential targets of one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaTable {
    rows: Vec<Vec<f64>>,
    measurements: usize,
}

impl BetaTable {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, AssociationError> {
        let width = rows.first().map_or(1, Vec::len);
        if width == 0 {
            return Err(AssociationError::InvalidBeta { k: 0, reason: "empty row" });
        }
        for (k, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(AssociationError::InvalidBeta { k, reason: "row length mismatch" });
            }
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(AssociationError::InvalidBeta { k, reason: "negative or non-finite entry" });
            }
            if row.iter().all(|v| *v == 0.0) {
                return Err(AssociationError::InvalidBeta { k, reason: "all entries zero" });
            }
        }
        Ok(Self {
            rows,
            measurements: width - 1,
        })
    }

    pub fn num_targets(&self) -> usize {
        self.rows.len()
    }

    pub fn num_measurements(&self) -> usize {
        self.measurements
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// `ψ[k][m] = β_k(m+1) / β_k(0)`, row-major `K × M`.
    fn ratios(&self) -> Vec<f64> {
        let m = self.measurements;
        let mut out = Vec::with_capacity(self.rows.len() * m);
        for row in &self.rows {
            let max = row.iter().cloned().fold(0.0, f64::max);
            let miss = row[0].max(max * MISS_FLOOR);
            out.extend(row[1..].iter().map(|b| b / miss));
        }
        out
    }
}

/// Messages `η_k(a)` for all potential targets of one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaTable {
    rows: Vec<Vec<f64>>,
}

impl EtaTable {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        Self { rows }
    }

    /// Uninformative messages (all ones).
    pub fn uniform(num_targets: usize, num_measurements: usize) -> Self {
        Self {
            rows: vec![vec![1.0; num_measurements + 1]; num_targets],
        }
    }

    pub fn num_targets(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// Ratio-form messages of the association loop.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageState {
    num_targets: usize,
    num_measurements: usize,
    /// `ζ[k][m]`, target → measurement, row-major.
    zeta: Vec<f64>,
    /// `ν[k][m]`, measurement → target, row-major.
    nu: Vec<f64>,
    pub iteration: usize,
    pub residual: f64,
}

impl MessageState {
    pub fn zeta(&self, k: usize, m: usize) -> f64 {
        self.zeta[k * self.num_measurements + m]
    }

    pub fn nu(&self, k: usize, m: usize) -> f64 {
        self.nu[k * self.num_measurements + m]
    }

    pub fn eta(&self) -> EtaTable {
        let m = self.num_measurements;
        let rows = (0..self.num_targets)
            .map(|k| {
                let mut row = Vec::with_capacity(m + 1);
                row.push(1.0);
                row.extend_from_slice(&self.nu[k * m..(k + 1) * m]);
                row
            })
            .collect();
        EtaTable { rows }
    }

    /// Approximate `p(b_m = k)` for each measurement; entry 0 is clutter.
    pub fn measurement_marginals(&self) -> Vec<Vec<f64>> {
        let (kk, mm) = (self.num_targets, self.num_measurements);
        (0..mm)
            .map(|m| {
                let mut p = Vec::with_capacity(kk + 1);
                p.push(1.0);
                p.extend((0..kk).map(|k| self.zeta[k * mm + m]));
                let total: f64 = p.iter().sum();
                p.iter_mut().for_each(|v| *v /= total);
                p
            })
            .collect()
    }
}

/// `out[i] = Σ_{j≠i} values[j]` without subtractive cancellation.
fn exclusive_sums(values: impl Iterator<Item = f64> + Clone, out: &mut [f64]) {
    let mut acc = 0.0;
    for (o, v) in out.iter_mut().zip(values.clone()) {
        *o = acc;
        acc += v;
    }
    let n = out.len();
    let vals: Vec<f64> = values.take(n).collect();
    let mut acc = 0.0;
    for i in (0..n).rev() {
        out[i] += acc;
        acc += vals[i];
    }
}

fn zeta_from_nu(psi: &[f64], nu: &[f64], m: usize, zeta: &mut [f64], scratch: &mut [f64]) {
    for ((p_row, n_row), z_row) in psi.chunks(m).zip(nu.chunks(m)).zip(zeta.chunks_mut(m)) {
        exclusive_sums(p_row.iter().zip(n_row).map(|(p, n)| p * n), scratch);
        for ((z, p), s) in z_row.iter_mut().zip(p_row).zip(scratch.iter()) {
            *z = p / (1.0 + s);
        }
    }
}

/// Initial target → measurement messages `ζ⁽⁰⁾_{k→m}(b) = Σ_a β_k(a) Ψ(a, b)`.
pub fn init_zeta(beta: &BetaTable) -> MessageState {
    let (kk, mm) = (beta.num_targets(), beta.num_measurements());
    let psi = beta.ratios();
    let nu = vec![1.0; kk * mm];
    let mut zeta = vec![0.0; kk * mm];
    let mut scratch = vec![0.0; mm];
    if mm > 0 {
        zeta_from_nu(&psi, &nu, mm, &mut zeta, &mut scratch);
    }
    MessageState {
        num_targets: kk,
        num_measurements: mm,
        zeta,
        nu,
        iteration: 0,
        residual: f64::INFINITY,
    }
}

/// Runs the ν/ζ recursion for at most `max_iters` sweeps, stopping early once
/// the largest change of any `ln ν` falls below `tol`. Returns the final
/// message state.
pub fn run_association(
    beta: &BetaTable,
    max_iters: usize,
    tol: f64,
) -> Result<MessageState, AssociationError> {
    if max_iters == 0 || !(tol > 0.0) {
        return Err(AssociationError::InvalidParameters(format!(
            "need max_iters >= 1 and tol > 0 (got {max_iters}, {tol})"
        )));
    }
    let mut state = init_zeta(beta);
    let (kk, mm) = (state.num_targets, state.num_measurements);
    if kk == 0 || mm == 0 {
        state.residual = 0.0;
        return Ok(state);
    }
    let psi = beta.ratios();
    let mut col = vec![0.0; kk];
    let mut scratch = vec![0.0; mm];
    for p in 1..=max_iters {
        let mut residual: f64 = 0.0;
        for m in 0..mm {
            exclusive_sums((0..kk).map(|k| state.zeta[k * mm + m]), &mut col);
            for (k, excl) in col.iter().enumerate() {
                let new = 1.0 / (1.0 + excl);
                if !(new.is_finite() && new > 0.0) {
                    return Err(AssociationError::NumericalFailure { iteration: p });
                }
                let old = &mut state.nu[k * mm + m];
                residual = residual.max((new.ln() - old.ln()).abs());
                *old = new;
            }
        }
        state.iteration = p;
        state.residual = residual;
        if residual < tol || p == max_iters {
            break;
        }
        zeta_from_nu(&psi, &state.nu, mm, &mut state.zeta, &mut scratch);
        if state.zeta.iter().any(|z| !z.is_finite()) {
            return Err(AssociationError::NumericalFailure { iteration: p });
        }
    }
    Ok(state)
}

/// Runs the association loop and returns the messages `η_k(a)`.
pub fn iterate_association(
    beta: &BetaTable,
    max_iters: usize,
    tol: f64,
) -> Result<EtaTable, AssociationError> {
    run_association(beta, max_iters, tol).map(|s| s.eta())
}

/// Normalized approximate marginals `p(a_k = a) ∝ β_k(a) η_k(a)`.
pub fn association_marginals(beta: &BetaTable, eta: &EtaTable) -> Vec<Vec<f64>> {
    beta.rows
        .iter()
        .zip(&eta.rows)
        .map(|(b, e)| {
            let mut p: Vec<f64> = b.iter().zip(e).map(|(b, e)| b * e).collect();
            let total: f64 = p.iter().sum();
            p.iter_mut().for_each(|v| *v /= total);
            p
        })
        .collect()
}

/// Borrowed view of one potential target's weighted particles.
#[derive(Debug, Clone, Copy)]
pub struct WeightedParticles<'a, X> {
    pub states: &'a [X],
    pub weights: &'a [f64],
}

impl<X> WeightedParticles<'_, X> {
    fn validate(&self, k: usize) -> Result<f64, AssociationError> {
        if self.states.is_empty() || self.states.len() != self.weights.len() {
            return Err(AssociationError::EmptyParticles { k });
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(AssociationError::InvalidWeight { k });
        }
        let sum: f64 = self.weights.iter().sum();
        if sum > 1.0 + 1e-9 {
            return Err(AssociationError::ExcessMass { k, sum });
        }
        Ok(sum)
    }
}

/// `log f_FA(z_m)` for every measurement; a vanishing density at an observed
/// measurement means the model cannot explain the data.
pub fn log_clutter_densities<X, S: Sensor<X>>(
    measurements: &[S::Measurement],
    sensor: &S,
) -> Result<Vec<f64>, ModelError> {
    measurements
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let v = sensor.log_clutter_pdf(z);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(ModelError::ClutterDensityZero { index: i + 1 })
            }
        })
        .collect()
}

/// Cached `υ(x_j, 1, a)` for the particles with positive weight.
///
/// Row `i` stores `exp(log υ(x_j, 1, a) - shift_i)` with `shift_i` the row
/// maximum, so sums over `a` can be formed without overflow and returned to
/// the log domain exactly.
#[derive(Debug, Clone)]
pub struct FactorRows {
    width: usize,
    active: Vec<usize>,
    shift: Vec<f64>,
    scaled: Vec<f64>,
}

impl FactorRows {
    pub fn evaluate<X, S: Sensor<X>>(
        states: &[X],
        weights: &[f64],
        measurements: &[S::Measurement],
        log_clutter: &[f64],
        sensor: &S,
    ) -> Result<Self, ModelError> {
        let width = measurements.len() + 1;
        let log_mu = sensor.clutter_mean().ln();
        let mut active = Vec::new();
        let mut shift = Vec::new();
        let mut scaled = Vec::new();
        let mut row = vec![0.0; width];
        for (j, (x, &w)) in states.iter().zip(weights).enumerate() {
            if w <= 0.0 {
                continue;
            }
            let pd = sensor.detection_probability(x);
            if !(0.0..=1.0).contains(&pd) {
                return Err(ModelError::InvalidDetectionProbability(pd));
            }
            row[0] = (1.0 - pd).ln();
            sensor.log_measurement_pdfs(measurements, x, &mut row[1..])?;
            let log_h = pd.ln() - log_mu;
            for (r, fa) in row[1..].iter_mut().zip(log_clutter) {
                *r += log_h - fa;
            }
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            active.push(j);
            shift.push(max);
            scaled.extend(row.iter().map(|v| (v - max).exp()));
        }
        Ok(Self {
            width,
            active,
            shift,
            scaled,
        })
    }

    pub fn num_active(&self) -> usize {
        self.active.len()
    }

    /// Particle index of active row `i`.
    pub fn particle(&self, i: usize) -> usize {
        self.active[i]
    }

    /// `β̃(a) = Σ_j υ(x_j, 1, a) w_j + 1(a) (1 − Σ_j w_j)`.
    pub fn beta(&self, weights: &[f64]) -> Vec<f64> {
        let total: f64 = weights.iter().sum();
        let mut beta = vec![0.0; self.width];
        for (i, &j) in self.active.iter().enumerate() {
            let scale = weights[j] * self.shift[i].exp();
            let row = &self.scaled[i * self.width..(i + 1) * self.width];
            for (b, v) in beta.iter_mut().zip(row) {
                *b += scale * v;
            }
        }
        beta[0] += (1.0 - total).max(0.0);
        beta
    }

    /// `ln Σ_a υ(x_j, 1, a) η(a)` for active row `i`.
    pub fn log_update_factor(&self, i: usize, eta: &[f64]) -> f64 {
        let row = &self.scaled[i * self.width..(i + 1) * self.width];
        let s: f64 = row.iter().zip(eta).map(|(v, e)| v * e).sum();
        self.shift[i] + s.ln()
    }
}

/// Measurement evaluation for all potential targets of one sensor.
pub fn evaluate_beta<X, S: Sensor<X>>(
    predicted: &[WeightedParticles<'_, X>],
    measurements: &[S::Measurement],
    sensor: &S,
) -> Result<BetaTable, AssociationError> {
    let log_clutter = log_clutter_densities(measurements, sensor)?;
    let rows = predicted
        .iter()
        .enumerate()
        .map(|(k, p)| {
            p.validate(k)?;
            let rows = FactorRows::evaluate(p.states, p.weights, measurements, &log_clutter, sensor)?;
            Ok(rows.beta(p.weights))
        })
        .collect::<Result<Vec<_>, AssociationError>>()?;
    BetaTable::new(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::linear::{LinearSensor, ScalarState};
    use crate::model::{exclusion_factor_psi, joint_factor_upsilon};
    use approx::assert_relative_eq;

    fn sensor(pd: f64) -> LinearSensor {
        LinearSensor {
            noise_std: 1.0,
            detection_probability: pd,
            clutter_mean: 2.0,
            clutter_lo: -50.0,
            clutter_hi: 50.0,
        }
    }

    #[test]
    fn beta_of_certainly_absent_target() {
        let s = sensor(0.8);
        let states = [ScalarState(0.0), ScalarState(1.0)];
        let p = WeightedParticles { states: &states, weights: &[0.0, 0.0] };
        let b = evaluate_beta(&[p], &[0.5, -3.0], &s).unwrap();
        assert_eq!(b.row(0), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn beta_without_measurements() {
        let s = sensor(0.8);
        let states = [ScalarState(0.0), ScalarState(1.0)];
        let w = [0.3, 0.2];
        let p = WeightedParticles { states: &states, weights: &w };
        let b = evaluate_beta(&[p], &[], &s).unwrap();
        assert_eq!(b.num_measurements(), 0);
        assert_relative_eq!(b.row(0)[0], 0.2 * 0.5 + 0.5, epsilon = 1e-15);
    }

    #[test]
    fn beta_hand_evaluation() {
        // One particle, w = 0.5, P_d = 0.8, μ = 2, and a measurement placed so
        // that the likelihood ratio f/f_FA equals 10.
        let s = sensor(0.8);
        let x = ScalarState(0.0);
        let target_log_f = (10.0f64 * 0.01).ln();
        let d = (-2.0 * (target_log_f + 0.5 * (2.0 * std::f64::consts::PI).ln())).sqrt();
        let states = [x];
        let p = WeightedParticles { states: &states, weights: &[0.5] };
        let b = evaluate_beta(&[p], &[d], &s).unwrap();
        assert_relative_eq!(b.row(0)[0], 0.6, epsilon = 1e-12);
        assert_relative_eq!(b.row(0)[1], 2.0, epsilon = 1e-12);
        let direct = joint_factor_upsilon(&x, true, 1, &[d], &s).unwrap() * 0.5;
        assert_relative_eq!(b.row(0)[1], direct, max_relative = 1e-12);
    }

    #[test]
    fn beta_rejects_bad_inputs() {
        let s = sensor(0.8);
        let states: [ScalarState; 0] = [];
        let p = WeightedParticles { states: &states, weights: &[] };
        assert_eq!(
            evaluate_beta(&[p], &[], &s),
            Err(AssociationError::EmptyParticles { k: 0 })
        );
        let states = [ScalarState(0.0)];
        let p = WeightedParticles { states: &states, weights: &[-0.1] };
        assert_eq!(
            evaluate_beta(&[p], &[], &s),
            Err(AssociationError::InvalidWeight { k: 0 })
        );
    }

    /// Reference ζ⁽⁰⁾ by direct summation of β(a)Ψ(a, b) over all `a`.
    fn zeta0_by_enumeration(beta: &[f64], k: usize, m: usize, b: usize) -> f64 {
        (0..beta.len()).map(|a| beta[a] * exclusion_factor_psi(a, b, k, m)).sum()
    }

    #[test]
    fn init_zeta_matches_enumeration() {
        let beta = BetaTable::new(vec![vec![0.7, 1.3]]).unwrap();
        let st = init_zeta(&beta);
        // ζ(b = k) = β(1) and ζ(b ≠ k) = β(0), so the ratio is β(1)/β(0)
        assert_eq!(zeta0_by_enumeration(beta.row(0), 1, 1, 1), 1.3);
        assert_eq!(zeta0_by_enumeration(beta.row(0), 1, 1, 0), 0.7);
        assert_relative_eq!(st.zeta(0, 0), 1.3 / 0.7, max_relative = 1e-14);

        let rows = vec![vec![0.2, 1.0, 3.0, 0.5], vec![2.0, 0.1, 0.0, 4.0]];
        let beta = BetaTable::new(rows.clone()).unwrap();
        let st = init_zeta(&beta);
        for (k, row) in rows.iter().enumerate() {
            for m in 1..=3 {
                let claim = zeta0_by_enumeration(row, k + 1, m, k + 1);
                let deny = zeta0_by_enumeration(row, k + 1, m, 0);
                assert_eq!(deny, zeta0_by_enumeration(row, k + 1, m, k + 2));
                assert_relative_eq!(st.zeta(k, m - 1), claim / deny, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn init_zeta_special_cases() {
        let beta = BetaTable::new(vec![vec![1.0, 0.0, 0.0]]).unwrap();
        let st = init_zeta(&beta);
        assert_eq!(st.zeta(0, 0), 0.0);
        assert_eq!(st.zeta(0, 1), 0.0);
        let m = 4;
        let beta = BetaTable::new(vec![vec![1.0; m + 1]]).unwrap();
        let st = init_zeta(&beta);
        for i in 0..m {
            assert_relative_eq!(st.zeta(0, i), 1.0 / m as f64, max_relative = 1e-14);
        }
    }

    #[test]
    fn single_target_eta_is_flat() {
        let beta = BetaTable::new(vec![vec![0.3, 2.0, 0.01]]).unwrap();
        let eta = iterate_association(&beta, 1, 1e-6).unwrap();
        assert_eq!(eta.row(0), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn two_targets_one_measurement() {
        let beta = BetaTable::new(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let st = run_association(&beta, 200, 1e-12).unwrap();
        let marg = association_marginals(&beta, &st.eta());
        // Exact value is 1/3; the loop is a tree here, so BP is exact.
        assert_relative_eq!(marg[0][1], 1.0 / 3.0, epsilon = 1e-9);
        assert_relative_eq!(marg[1][1], 1.0 / 3.0, epsilon = 1e-9);
        let mb = st.measurement_marginals();
        assert_relative_eq!(mb[0].iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_invalid_parameters_and_tables() {
        let beta = BetaTable::new(vec![vec![1.0, 1.0]]).unwrap();
        assert!(run_association(&beta, 0, 1e-6).is_err());
        assert!(run_association(&beta, 5, 0.0).is_err());
        assert!(BetaTable::new(vec![vec![0.0, 0.0]]).is_err());
        assert!(BetaTable::new(vec![vec![1.0, f64::NAN]]).is_err());
        assert!(BetaTable::new(vec![vec![1.0, 1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn zero_miss_probability_stays_finite() {
        let beta = BetaTable::new(vec![vec![0.0, 5.0, 1.0], vec![0.0, 1.0, 5.0]]).unwrap();
        let st = run_association(&beta, 50, 1e-9).unwrap();
        let marg = association_marginals(&beta, &st.eta());
        for row in &marg {
            assert!(row.iter().all(|v| v.is_finite()));
            assert_relative_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn exclusive_sums_are_exact() {
        let v = [1e16, 1.0, 2.0];
        let mut out = [0.0; 3];
        exclusive_sums(v.iter().cloned(), &mut out);
        assert_eq!(out[0], 3.0);
        assert_eq!(out[1], 1e16 + 2.0);
    }
}
