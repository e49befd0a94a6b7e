//! Least-squares polynomial fits for runtime scaling curves.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    /// Coefficients in increasing degree.
    pub coefficients: Vec<f64>,
    /// Residual sum of squares.
    pub rss: f64,
    pub r_squared: f64,
}

/// Fits `y ≈ Σ_d c_d x^d` for `d = 0..=degree`.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> PolyFit {
    assert_eq!(x.len(), y.len());
    assert!(x.len() > degree, "need more points than coefficients");
    let a = DMatrix::from_fn(x.len(), degree + 1, |i, d| x[i].powi(d as i32));
    let b = DVector::from_column_slice(y);
    let c = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-12)
        .expect("SVD with both factors");
    let residual = &a * &c - &b;
    let rss = residual.norm_squared();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    PolyFit {
        coefficients: c.iter().copied().collect(),
        rss,
        r_squared: if tss > 0.0 { 1.0 - rss / tss } else { 1.0 },
    }
}

/// Fraction by which a quadratic fit lowers the residual sum of squares of
/// a linear fit.
pub fn quadratic_gain(x: &[f64], y: &[f64]) -> f64 {
    let lin = polyfit(x, y, 1);
    let quad = polyfit(x, y, 2);
    if lin.rss > 0.0 {
        1.0 - quad.rss / lin.rss
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_polynomials() {
        let x: Vec<f64> = (0..8).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 + 3.0 * v).collect();
        let f = polyfit(&x, &y, 1);
        assert!((f.coefficients[1] - 3.0).abs() < 1e-10);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let y: Vec<f64> = x.iter().map(|v| 1.0 + 0.5 * v * v).collect();
        assert!(quadratic_gain(&x, &y) > 0.999);
        assert!(polyfit(&x, &y, 1).r_squared < 1.0);
    }

    #[test]
    fn r_squared_by_hand() {
        // Best line through (0,0), (1,1), (2,1) is y = 1/6 + x/2; RSS = 1/6,
        // TSS = 2/3.
        let f = polyfit(&[0.0, 1.0, 2.0], &[0.0, 1.0, 1.0], 1);
        assert!((f.rss - 1.0 / 6.0).abs() < 1e-12);
        assert!((f.r_squared - 0.75).abs() < 1e-12);
    }
}
