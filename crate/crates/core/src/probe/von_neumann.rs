//! Von Neumann coupling `e^{−ig A⊗P̂}` between a finite target and a grid probe.

use crate::error::{dim_mismatch, Error, Result};
use crate::fit::{fit_powers, loglog_slope};
use crate::linalg::{eigendecompose_hermitian, max_diff, QOperator, C64};
use crate::probe::grid::{probe_moments, ProbeGrid};
use crate::tol;
use crate::weak::{weak_value, PrePostSelection};

/// Conditioned probe `⟨f|V e^{−igA⊗P̂} U|i⟩|ξ⟩` and its squared norm.
#[derive(Clone, Debug)]
pub struct ConditionedProbe {
    pub xi_out: ProbeGrid,
    pub success_prob: f64,
}

/// Exact conditioned probe by the spectral method: each eigenbranch `a`
/// translates the probe by `g·a` with amplitude `⟨f|V P_a U|i⟩`.
pub fn exact_von_neumann(sel: &PrePostSelection, a: &QOperator, xi: &ProbeGrid, g: f64) -> Result<ConditionedProbe> {
    if a.dim() != sel.dim() {
        return Err(dim_mismatch("observable", sel.dim(), a.dim()));
    }
    let eig = eigendecompose_hermitian(a)?;
    let branches: Vec<(f64, C64)> = eig
        .eigenprojectors(tol::EIGEN_CLUSTER_GAP)
        .into_iter()
        .map(|(value, p)| (value, sel.amplitude(&p)))
        .collect();
    let shifts: Vec<f64> =
        branches.iter().filter(|(_, c)| c.norm() > 0.0).map(|(value, _)| g * value).collect();
    xi.check_shifts(&shifts)?;
    let mut out = xi.zeros_like();
    for (value, c) in branches {
        if c.norm() > 0.0 {
            out.add_scaled(c, &xi.translate(g * value));
        }
    }
    let success_prob = out.norm_sq();
    Ok(ConditionedProbe { xi_out: out, success_prob })
}

/// Conditioned probe for a projector `A` at arbitrary `g`:
/// `⟨f|VU|i⟩·((1 − A_w)ξ + A_w·ξ(x − g))`.
pub fn full_order_probe(sel: &PrePostSelection, a: &QOperator, xi: &ProbeGrid, g: f64) -> Result<ProbeGrid> {
    let residual = max_diff(&(a.matrix() * a.matrix()), a.matrix());
    if residual > tol::CONSTRUCT {
        return Err(Error::NotProjector { residual });
    }
    let w = weak_value(sel, a)?;
    xi.check_shifts(&[g])?;
    let mut out = xi.zeros_like();
    out.add_scaled(w.overlap * (C64::from(1.0) - w.value), xi);
    out.add_scaled(w.overlap * w.value, &xi.translate(g));
    Ok(out)
}

/// First-order probe shifts `(Δ[Q], Δ[P])`:
/// `Δ[Q] = g Re w + m g Im w dVar[Q]/dt`, `Δ[P] = 2g Im w Var[P]`.
pub fn jozsa_shifts(w: C64, xi: &ProbeGrid, g: f64) -> Result<(f64, f64)> {
    let m = probe_moments(xi)?;
    let dq = g * w.re + xi.mass() * g * w.im * m.d_var_q_dt;
    let dp = 2.0 * g * w.im * m.var_p;
    Ok((dq, dp))
}

/// Exact probe shifts `(Δ[Q], Δ[P])` from the conditioned probe.
pub fn exact_shifts(sel: &PrePostSelection, a: &QOperator, xi: &ProbeGrid, g: f64) -> Result<(f64, f64)> {
    let before = probe_moments(xi)?;
    let after = probe_moments(&exact_von_neumann(sel, a, xi, g)?.xi_out)?;
    Ok((after.mean_q - before.mean_q, after.mean_p - before.mean_p))
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct WeakLimitRow {
    pub g: f64,
    pub dq_exact: f64,
    pub dp_exact: f64,
    pub dq_formula: f64,
    pub dp_formula: f64,
}

impl WeakLimitRow {
    pub fn err_q(&self) -> f64 {
        (self.dq_exact - self.dq_formula).abs()
    }
    pub fn err_p(&self) -> f64 {
        (self.dp_exact - self.dp_formula).abs()
    }
}

/// Residuals below this are treated as exact (no order can be fitted).
pub const RESIDUAL_NOISE_FLOOR: f64 = 1e-14;

/// Exact vs first-order shifts over a sequence of couplings.
#[derive(Clone, Debug)]
pub struct WeakLimitReport {
    pub weak_value: C64,
    pub rows: Vec<WeakLimitRow>,
    /// Log-log slope of the Δ[Q] residual; `None` when every residual is at
    /// the noise floor.
    pub order_q: Option<f64>,
    pub order_p: Option<f64>,
    /// Least-squares `Δ[Q]_exact ≈ c1 g + c2 g²`.
    pub coeff_q: [f64; 2],
    pub coeff_p: [f64; 2],
}

pub(crate) fn residual_order(g: &[f64], err: &[f64]) -> Result<Option<f64>> {
    let (x, y): (Vec<f64>, Vec<f64>) =
        g.iter().zip(err).filter(|(_, e)| **e > RESIDUAL_NOISE_FLOOR).map(|(a, b)| (*a, *b)).unzip();
    if x.len() < 2 {
        return Ok(None);
    }
    loglog_slope(&x, &y).map(Some)
}

/// Compares exact shifts with [`jozsa_shifts`] for each `g` and fits the
/// residual order and the leading coefficients.
pub fn verify_weak_limit(sel: &PrePostSelection, a: &QOperator, xi: &ProbeGrid, g_list: &[f64]) -> Result<WeakLimitReport> {
    if g_list.len() < 2 || g_list.iter().any(|g| *g == 0.0 || !g.is_finite()) {
        return Err(Error::DegenerateFit("need at least two nonzero couplings".into()));
    }
    let w = weak_value(sel, a)?.value;
    let rows = g_list
        .iter()
        .map(|&g| {
            let (dq_exact, dp_exact) = exact_shifts(sel, a, xi, g)?;
            let (dq_formula, dp_formula) = jozsa_shifts(w, xi, g)?;
            Ok(WeakLimitRow { g, dq_exact, dp_exact, dq_formula, dp_formula })
        })
        .collect::<Result<Vec<_>>>()?;
    let g: Vec<f64> = rows.iter().map(|r| r.g.abs()).collect();
    let gs: Vec<f64> = rows.iter().map(|r| r.g).collect();
    let order_q = residual_order(&g, &rows.iter().map(WeakLimitRow::err_q).collect::<Vec<_>>())?;
    let order_p = residual_order(&g, &rows.iter().map(WeakLimitRow::err_p).collect::<Vec<_>>())?;
    let cq = fit_powers(&gs, &rows.iter().map(|r| r.dq_exact).collect::<Vec<_>>(), &[1, 2])?;
    let cp = fit_powers(&gs, &rows.iter().map(|r| r.dp_exact).collect::<Vec<_>>(), &[1, 2])?;
    Ok(WeakLimitReport { weak_value: w, rows, order_q, order_p, coeff_q: [cq[0], cq[1]], coeff_p: [cp[0], cp[1]] })
}
