//! Closed-form references for checking the `weakval` library, built from
//! textbook formulas and direct matrix arithmetic only.

use std::f64::consts::PI;

use weakval::linalg::{c, CMatrix, QState, C64};
use weakval::probe::ProbeGrid;

/// Largest entrywise modulus of `a − b`.
pub fn max_abs(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `e^{−iHt}` by Padé.
pub fn propagator(h: &CMatrix, t: f64) -> CMatrix {
    (h * c(0.0, -t)).exp()
}

/// Mean position and momentum of `Σ_a c_a ξ(x − g a)` for a real Gaussian `ξ`
/// of position width `sigma`, relative to the unshifted probe.
pub fn gaussian_branch_shifts(branches: &[(f64, C64)], g: f64, sigma: f64) -> (f64, f64) {
    let (mut norm, mut q, mut p) = (C64::from(0.0), C64::from(0.0), C64::from(0.0));
    for &(a, ca) in branches {
        for &(b, cb) in branches {
            let (s, t) = (g * a, g * b);
            let w = ca.conj() * cb * (-(s - t).powi(2) / (8.0 * sigma * sigma)).exp();
            norm += w;
            q += w * (0.5 * (s + t));
            p += w * c(0.0, (s - t) / (4.0 * sigma * sigma));
        }
    }
    ((q / norm).re, (p / norm).re)
}

/// `(eigenvalue, ⟨f|V P U|i⟩)` for `A = Σ λ_k |b_k⟩⟨b_k|`.
pub fn spectral_branches(pre: &CMatrix, post: &CMatrix, values: &[f64], vectors: &[CMatrix]) -> Vec<(f64, C64)> {
    values
        .iter()
        .zip(vectors)
        .map(|(v, b)| (*v, (post.adjoint() * b * b.adjoint() * pre)[(0, 0)]))
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

/// Column matrix holding the state amplitudes.
pub fn column(v: &QState) -> CMatrix {
    CMatrix::from_column_slice(v.dim(), 1, v.amps().as_slice())
}

/// Max-norm distance between a grid probe and `Σ (amp) ξ(x − s)` for the
/// unit-width real Gaussian `ξ`.
pub fn oracle_diff(xi: &ProbeGrid, branches: &[(f64, C64)]) -> f64 {
    let norm = (2.0 * PI).powf(-0.25);
    (0..xi.n_points())
        .map(|k| {
            let x = xi.x(k);
            let expected: C64 = branches.iter().map(|(s, amp)| amp * (norm * (-(x - s).powi(2) / 4.0).exp())).sum();
            (xi.amps()[k] - expected).norm()
        })
        .fold(0.0, f64::max)
}

/// `Pr[k]` after the C-NOT, post-selected on the target.
pub fn cnot_oracle(pre: &QState, post: &QState, gamma: f64, eta: f64, k: usize) -> f64 {
    let probe = [[gamma, eta], [eta, gamma]];
    let amp = |m: usize| (0..2).map(|s| post.amps()[s].conj() * pre.amps()[s] * probe[s][m]).sum::<C64>().norm_sqr();
    amp(k) / (amp(0) + amp(1))
}

/// `Σ_m (1⊗⟨m|) M (1⊗|m⟩)` for `M` on `ds ⊗ dp`.
pub fn trace_out_second(m: &CMatrix, ds: usize, dp: usize) -> CMatrix {
    CMatrix::from_fn(ds, ds, |r, s| (0..dp).map(|k| m[(r * dp + k, s * dp + k)]).sum())
}

/// `(1⊗⟨bra|) M (1⊗|ket⟩)`.
pub fn env_block(m: &CMatrix, ds: usize, bra: &QState, ket: &QState) -> CMatrix {
    let de = bra.dim();
    CMatrix::from_fn(ds, ds, |r, s| {
        let mut z = C64::from(0.0);
        for a in 0..de {
            for b in 0..de {
                z += bra.amps()[a].conj() * m[(r * de + a, s * de + b)] * ket.amps()[b];
            }
        }
        z
    })
}
