//! Optimal subpattern assignment (OSPA) distance between point sets.

use super::assignment::optimal_assignment;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OspaParams {
    /// Cutoff `c` (m).
    pub cutoff: f64,
    /// Order `p`.
    pub order: f64,
}

impl Default for OspaParams {
    fn default() -> Self {
        Self { cutoff: 200.0, order: 1.0 }
    }
}

impl OspaParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.cutoff > 0.0 && self.cutoff.is_finite()) {
            return Err(format!("OSPA cutoff must be positive, got {}", self.cutoff));
        }
        if !(self.order >= 1.0 && self.order.is_finite()) {
            return Err(format!("OSPA order must be at least 1, got {}", self.order));
        }
        Ok(())
    }
}

/// OSPA distance between two finite sets of 2D positions; lies in `[0, c]`.
pub fn ospa(x: &[[f64; 2]], y: &[[f64; 2]], params: &OspaParams) -> f64 {
    let (small, large) = if x.len() <= y.len() { (x, y) } else { (y, x) };
    let (m, n) = (small.len(), large.len());
    if n == 0 {
        return 0.0;
    }
    let c = params.cutoff;
    let p = params.order;
    let cost: Vec<Vec<f64>> = small
        .iter()
        .map(|a| {
            large
                .iter()
                .map(|b| (a[0] - b[0]).hypot(a[1] - b[1]).min(c).powf(p))
                .collect()
        })
        .collect();
    let matched = if m == 0 { 0.0 } else { optimal_assignment(&cost).cost };
    let total = matched + c.powf(p) * (n - m) as f64;
    (total / n as f64).powf(1.0 / p).min(c)
}
