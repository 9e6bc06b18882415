//! Weighted least-squares polynomial fits with parameter covariance.

use nalgebra::{DMatrix, DVector};

use crate::error::{HspError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    /// Ascending order: `coeffs[d]` multiplies `x^d`.
    pub coeffs: Vec<f64>,
    /// Parameter covariance scaled by the weighted residual variance. `None` when
    /// there are no residual degrees of freedom.
    pub covariance: Option<DMatrix<f64>>,
    pub weighted_rss: f64,
}

impl PolyFit {
    pub fn stderr(&self, d: usize) -> Option<f64> {
        self.covariance.as_ref().map(|c| c[(d, d)].max(0.0).sqrt())
    }
}

/// Fits `Σ_d c_d x^d` minimizing `Σ w_i (y_i − f(x_i))²`. Points with zero weight
/// are ignored; weights are relative, so the covariance does not depend on their
/// scale.
pub fn weighted_polyfit(x: &[f64], y: &[f64], w: &[f64], degree: usize) -> Result<PolyFit> {
    if x.len() != y.len() || x.len() != w.len() {
        return Err(HspError::LengthMismatch {
            name: "polyfit inputs",
            expected: x.len(),
            actual: y.len().min(w.len()),
        });
    }
    let pts: Vec<(f64, f64, f64)> = x
        .iter()
        .zip(y)
        .zip(w)
        .filter(|(_, &wi)| wi > 0.0)
        .map(|((&xi, &yi), &wi)| (xi, yi, wi))
        .collect();
    let p = degree + 1;
    if pts.len() < p {
        return Err(HspError::EmptyData(format!(
            "degree-{degree} fit needs {p} weighted points, got {}",
            pts.len()
        )));
    }
    let a = DMatrix::from_fn(pts.len(), p, |r, c| {
        pts[r].2.sqrt() * pts[r].0.powi(c as i32)
    });
    let b = DVector::from_iterator(pts.len(), pts.iter().map(|(_, yi, wi)| wi.sqrt() * yi));
    let ata = a.transpose() * &a;
    let atb = a.transpose() * &b;
    let chol = ata
        .cholesky()
        .ok_or_else(|| HspError::Numerical("singular normal equations in polynomial fit".into()))?;
    let coeffs = chol.solve(&atb);
    let resid = &b - &a * &coeffs;
    let weighted_rss = resid.norm_squared();
    let dof = pts.len() - p;
    let covariance = (dof > 0).then(|| chol.inverse() * (weighted_rss / dof as f64));
    Ok(PolyFit {
        coeffs: coeffs.iter().cloned().collect(),
        covariance,
        weighted_rss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_quadratic() {
        let x: Vec<f64> = (0..11).map(|i| -1.0 + 0.2 * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|x| 3.0 - 0.5 * x + 7.0 * x * x).collect();
        let w: Vec<f64> = x.iter().map(|x| (-x * x).exp()).collect();
        let fit = weighted_polyfit(&x, &y, &w, 2).unwrap();
        assert!((fit.coeffs[0] - 3.0).abs() < 1e-10);
        assert!((fit.coeffs[1] + 0.5).abs() < 1e-10);
        assert!((fit.coeffs[2] - 7.0).abs() < 1e-10);
        assert!(fit.stderr(2).unwrap() < 1e-8);
    }

    #[test]
    fn stderr_matches_unweighted_line_formula() {
        // Straight line with residuals ±1: var(slope) = s² / Σ(x − x̄)².
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 0.0, 3.0, 2.0];
        let fit = weighted_polyfit(&x, &y, &[1.0; 4], 1).unwrap();
        assert!((fit.coeffs[1] - 0.6).abs() < 1e-12);
        let rss = fit.weighted_rss;
        let expected = (rss / 2.0 / 5.0).sqrt();
        assert!((fit.stderr(1).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert!(weighted_polyfit(&[0.0, 1.0, 2.0], &[0.0; 3], &[1.0, 1.0, 0.0], 2).is_err());
        let fit = weighted_polyfit(&[0.0, 1.0, 2.0], &[0.0, 1.0, 4.0], &[1.0; 3], 2).unwrap();
        assert!(fit.covariance.is_none());
    }
}
