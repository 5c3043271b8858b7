//! Small least-squares helpers for convergence reports.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Least-squares polynomial `y ≈ Σ_k c_k x^k`, `k = 0..=degree`.
///
/// The abscissae are rescaled by `max|x|` before solving so that sweeps over
/// many decades stay well conditioned.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<Vec<f64>> {
    fit_powers(x, y, &(0..=degree).collect::<Vec<_>>())
}

/// Least-squares fit `y ≈ Σ_j c_j x^{p_j}` over the given powers.
pub fn fit_powers(x: &[f64], y: &[f64], powers: &[usize]) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::DegenerateFit(format!("{} abscissae but {} ordinates", x.len(), y.len())));
    }
    if x.len() < powers.len() {
        return Err(Error::DegenerateFit(format!(
            "{} points cannot determine {} coefficients",
            x.len(),
            powers.len()
        )));
    }
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFit("abscissae vanish or data is not finite".into()));
    }
    let a = DMatrix::from_fn(x.len(), powers.len(), |r, c| (x[r] / scale).powi(powers[c] as i32));
    let b = DVector::from_column_slice(y);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= smax * 1e-13 {
        return Err(Error::DegenerateFit("design matrix is rank deficient".into()));
    }
    let sol = svd.solve(&b, 0.0).map_err(|e| Error::DegenerateFit(e.to_string()))?;
    Ok(sol.iter().zip(powers).map(|(c, &p)| c / scale.powi(p as i32)).collect())
}

/// Slope of `log y` against `log x`, the empirical convergence order.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.iter().chain(y).any(|v| *v <= 0.0 || !v.is_finite()) {
        return Err(Error::DegenerateFit("log-log fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    if lx.len() < 2 {
        return Err(Error::DegenerateFit("log-log fit needs at least two points".into()));
    }
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("abscissae coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}
