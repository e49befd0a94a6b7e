//! Exact association marginals by enumerating every valid association map.

use thiserror::Error;

use crate::association::BetaTable;

/// Largest number of association maps the oracle will enumerate.
pub const MAX_ASSOCIATION_MAPS: f64 = 1e7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnumerationError {
    #[error("{maps:.3e} association maps exceed the enumeration limit of {limit:.0e}")]
    TooLarge { maps: f64, limit: f64 },
    #[error("all association maps have zero probability")]
    ZeroMass,
}

/// Number of maps `a` with distinct nonzero entries:
/// `Σ_j C(K, j) M! / (M − j)!`.
pub fn count_association_maps(num_targets: usize, num_measurements: usize) -> f64 {
    let mut total = 0.0;
    let mut choose = 1.0;
    let mut falling = 1.0;
    for j in 0..=num_targets.min(num_measurements) {
        if j > 0 {
            choose *= (num_targets - j + 1) as f64 / j as f64;
            falling *= (num_measurements - j + 1) as f64;
        }
        total += choose * falling;
    }
    total
}

/// Marginals `p(a_k = a)` of `p(a) ∝ Π_k β_k(a_k) ψ(a)`, where `ψ` excludes
/// two PTs claiming the same measurement. Row `k` has `M + 1` entries.
pub fn exact_association_marginals(beta: &BetaTable) -> Result<Vec<Vec<f64>>, EnumerationError> {
    let k = beta.num_targets();
    let m = beta.num_measurements();
    let maps = count_association_maps(k, m);
    if maps > MAX_ASSOCIATION_MAPS {
        return Err(EnumerationError::TooLarge { maps, limit: MAX_ASSOCIATION_MAPS });
    }
    let mut marginals = vec![vec![0.0; m + 1]; k];
    let mut assignment = vec![0usize; k];
    let mut used = vec![false; m + 1];
    let total = visit(beta, 0, 1.0, &mut assignment, &mut used, &mut marginals);
    if !(total > 0.0) {
        return Err(EnumerationError::ZeroMass);
    }
    for row in &mut marginals {
        for p in row.iter_mut() {
            *p /= total;
        }
    }
    Ok(marginals)
}

fn visit(
    beta: &BetaTable,
    k: usize,
    weight: f64,
    assignment: &mut [usize],
    used: &mut [bool],
    marginals: &mut [Vec<f64>],
) -> f64 {
    if k == assignment.len() {
        for (row, &a) in marginals.iter_mut().zip(assignment.iter()) {
            row[a] += weight;
        }
        return weight;
    }
    let row = beta.row(k);
    let mut total = 0.0;
    for a in 0..row.len() {
        if row[a] == 0.0 || (a > 0 && used[a]) {
            continue;
        }
        used[a] = a > 0;
        assignment[k] = a;
        total += visit(beta, k + 1, weight * row[a], assignment, used, marginals);
        used[a] = false;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn map_counts() {
        assert_eq!(count_association_maps(1, 3), 4.0);
        assert_eq!(count_association_maps(2, 1), 3.0);
        // j=0: 1, j=1: 3·2, j=2: 3·2·1 = 13
        assert_eq!(count_association_maps(3, 2), 13.0);
        assert_eq!(count_association_maps(0, 5), 1.0);
    }

    #[test]
    fn single_target_is_normalized_beta() {
        let b = BetaTable::new(vec![vec![1.0, 2.0, 5.0]]).unwrap();
        let p = exact_association_marginals(&b).unwrap();
        assert_relative_eq!(p[0][2], 0.625, epsilon = 1e-15);
    }

    #[test]
    fn two_targets_one_measurement() {
        let b = BetaTable::new(vec![vec![1.0, 1.0]; 2]).unwrap();
        let p = exact_association_marginals(&b).unwrap();
        assert_relative_eq!(p[0][1], 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(p[1][0], 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn rows_are_pmfs() {
        let b = BetaTable::new(vec![vec![0.3, 1.2, 0.4], vec![2.0, 0.1, 0.7], vec![0.5, 0.5, 3.0]]).unwrap();
        for row in exact_association_marginals(&b).unwrap() {
            assert_relative_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn size_guard() {
        let b = BetaTable::new(vec![vec![1.0; 13]; 12]).unwrap();
        assert!(matches!(exact_association_marginals(&b), Err(EnumerationError::TooLarge { .. })));
    }
}
