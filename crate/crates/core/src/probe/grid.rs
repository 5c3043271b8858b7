//! Continuous probe sampled on a periodic position grid.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};

/// Edge amplitudes above this fraction of the peak trip the window guard.
pub const EDGE_FRACTION: f64 = 1e-8;

/// Grid geometry and probe mass.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct GridParams {
    pub n_points: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub mass: f64,
}

impl GridParams {
    /// 1024 points over `[−20σ, 20σ]`, unit mass.
    pub fn for_width(width: f64) -> Self {
        Self { n_points: 1024, x_min: -20.0 * width, x_max: 20.0 * width, mass: 1.0 }
    }

    pub fn with_points(mut self, n_points: usize) -> Self {
        self.n_points = n_points;
        self
    }

    pub fn with_mass(mut self, mass: f64) -> Self {
        self.mass = mass;
        self
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_points as f64
    }

    fn validate(&self) -> Result<()> {
        if self.n_points < 4 || !self.n_points.is_power_of_two() {
            return Err(Error::GridUnderResolved(format!("n_points = {} must be a power of two ≥ 4", self.n_points)));
        }
        if !(self.x_max > self.x_min) || !self.x_min.is_finite() || !self.x_max.is_finite() {
            return Err(Error::GridUnderResolved(format!("empty window [{}, {}]", self.x_min, self.x_max)));
        }
        if !(self.mass > 0.0) || !self.mass.is_finite() {
            return Err(Error::InvalidArgument(format!("probe mass must be positive, got {}", self.mass)));
        }
        Ok(())
    }
}

/// Probe wavefunction `ξ(x_k)`, `x_k = x_min + k·dx`, periodic in the window.
///
/// States built through [`ProbeGrid::new`] are normalized and pass the
/// edge guard; outputs of conditioned evolutions may be unnormalized, in
/// which case [`ProbeGrid::norm_sq`] is the post-selection weight.
#[derive(Clone)]
pub struct ProbeGrid {
    params: GridParams,
    amps: Vec<C64>,
    potential: Option<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for ProbeGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProbeGrid")
            .field("params", &self.params)
            .field("norm_sq", &self.norm_sq())
            .field("potential", &self.potential.is_some())
            .finish()
    }
}

impl ProbeGrid {
    /// Validated, normalized probe. `amps` must already have unit norm.
    pub fn new(params: GridParams, amps: Vec<C64>) -> Result<Self> {
        let grid = Self::unnormalized(params, amps)?;
        let norm_sq = grid.norm_sq();
        if (norm_sq - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized { norm_sq });
        }
        grid.check_edges()?;
        Ok(grid)
    }

    /// Probe sampled from `f` and normalized on the grid.
    pub fn from_fn<F: Fn(f64) -> C64>(params: GridParams, f: F) -> Result<Self> {
        params.validate()?;
        let dx = params.dx();
        let amps: Vec<C64> = (0..params.n_points).map(|k| f(params.x_min + k as f64 * dx)).collect();
        let mut grid = Self::unnormalized(params, amps)?;
        let norm = grid.norm_sq().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NotNormalized { norm_sq: norm * norm });
        }
        grid.amps.iter_mut().for_each(|a| *a /= norm);
        Self::new(params, grid.amps)
    }

    pub(crate) fn unnormalized(params: GridParams, amps: Vec<C64>) -> Result<Self> {
        params.validate()?;
        if amps.len() != params.n_points {
            return Err(Error::DimensionMismatch(format!(
                "probe amplitudes: expected {}, got {}",
                params.n_points,
                amps.len()
            )));
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(params.n_points);
        let ifft = planner.plan_fft_inverse(params.n_points);
        Ok(Self { params, amps, potential: None, fft, ifft })
    }

    /// Same grid, new amplitudes (no normalization check).
    pub(crate) fn with_amps(&self, amps: Vec<C64>) -> Self {
        debug_assert_eq!(amps.len(), self.amps.len());
        Self { params: self.params, amps, potential: self.potential.clone(), fft: self.fft.clone(), ifft: self.ifft.clone() }
    }

    /// Attaches a potential `V(x_k)` used by free evolution.
    pub fn with_potential(mut self, potential: Vec<f64>) -> Result<Self> {
        if potential.len() != self.amps.len() {
            return Err(Error::DimensionMismatch(format!(
                "potential: expected {}, got {}",
                self.amps.len(),
                potential.len()
            )));
        }
        self.potential = Some(potential);
        Ok(self)
    }

    pub fn params(&self) -> &GridParams {
        &self.params
    }
    pub fn n_points(&self) -> usize {
        self.params.n_points
    }
    pub fn dx(&self) -> f64 {
        self.params.dx()
    }
    pub fn mass(&self) -> f64 {
        self.params.mass
    }
    pub fn amps(&self) -> &[C64] {
        &self.amps
    }
    pub fn potential(&self) -> Option<&[f64]> {
        self.potential.as_deref()
    }

    pub fn x(&self, k: usize) -> f64 {
        self.params.x_min + k as f64 * self.dx()
    }

    /// Angular wavenumber of FFT bin `j` (standard ordering).
    pub fn p(&self, j: usize) -> f64 {
        let n = self.params.n_points;
        let k = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
        2.0 * PI * k / (n as f64 * self.dx())
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.n_points()).map(|j| self.p(j)).collect()
    }

    /// `Σ|ξ_k|²·dx`
    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.dx()
    }

    /// Unnormalized forward DFT of the amplitudes, in FFT bin order.
    pub fn to_momentum(&self) -> Vec<C64> {
        let mut buf = self.amps.clone();
        self.fft.process(&mut buf);
        buf
    }

    /// Inverse of [`ProbeGrid::to_momentum`] on this grid.
    pub fn from_momentum(&self, mut buf: Vec<C64>) -> Self {
        self.ifft.process(&mut buf);
        let n = self.n_points() as f64;
        buf.iter_mut().for_each(|a| *a /= n);
        self.with_amps(buf)
    }

    /// Multiplies each momentum component by `phase(p)`.
    pub fn apply_momentum_function<F: Fn(f64) -> C64>(&self, phase: F) -> Self {
        let mut buf = self.to_momentum();
        for (j, a) in buf.iter_mut().enumerate() {
            *a *= phase(self.p(j));
        }
        self.from_momentum(buf)
    }

    /// `ξ(x − s)`, i.e. `e^{−isP̂}ξ`, exact on the periodic grid.
    pub fn translate(&self, s: f64) -> Self {
        if s == 0.0 {
            return self.clone();
        }
        self.apply_momentum_function(|p| C64::from_polar(1.0, -p * s))
    }

    /// Free evolution under `P̂²/2m + V(Q̂)` for time `t`; with a potential
    /// this is one symmetric split-operator step.
    pub fn evolve_free(&self, t: f64) -> Self {
        let m = self.mass();
        let kinetic = |p: f64| C64::from_polar(1.0, -t * p * p / (2.0 * m));
        match &self.potential {
            None => self.apply_momentum_function(kinetic),
            Some(v) => {
                let half: Vec<C64> = v.iter().map(|vk| C64::from_polar(1.0, -0.5 * t * vk)).collect();
                let kicked = self.with_amps(self.amps.iter().zip(&half).map(|(a, h)| a * h).collect());
                let drifted = kicked.apply_momentum_function(kinetic);
                let amps = drifted.amps.iter().zip(&half).map(|(a, h)| a * h).collect();
                self.with_amps(amps)
            }
        }
    }

    /// Index range holding every amplitude above `EDGE_FRACTION × peak`.
    pub fn support(&self) -> (usize, usize) {
        let peak = self.amps.iter().fold(0.0f64, |m, a| m.max(a.norm()));
        let cut = EDGE_FRACTION * peak;
        let lo = self.amps.iter().position(|a| a.norm() > cut).unwrap_or(0);
        let hi = self.amps.iter().rposition(|a| a.norm() > cut).unwrap_or(self.amps.len() - 1);
        (lo, hi)
    }

    /// Errors when amplitude at either window edge exceeds `EDGE_FRACTION × peak`.
    pub fn check_edges(&self) -> Result<()> {
        let peak = self.amps.iter().fold(0.0f64, |m, a| m.max(a.norm()));
        if peak == 0.0 {
            return Ok(());
        }
        let n = self.amps.len();
        let edge = self.amps[0].norm().max(self.amps[n - 1].norm());
        if edge > EDGE_FRACTION * peak {
            return Err(Error::WindowGuard(format!(
                "edge amplitude {:.3e} of peak; widen the window",
                edge / peak
            )));
        }
        Ok(())
    }

    /// Errors unless shifting the support by every value in `shifts` stays
    /// inside the window.
    pub fn check_shifts(&self, shifts: &[f64]) -> Result<()> {
        let (lo, hi) = self.support();
        let (xl, xh) = (self.x(lo), self.x(hi));
        for &s in shifts {
            if xl + s < self.params.x_min || xh + s > self.params.x_max - self.dx() {
                return Err(Error::WindowGuard(format!(
                    "shift {s:e} moves the support [{xl:.4}, {xh:.4}] outside [{}, {}]",
                    self.params.x_min, self.params.x_max
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn zeros_like(&self) -> Self {
        self.with_amps(vec![ZERO; self.amps.len()])
    }

    /// `self + s·other` on the same grid.
    pub(crate) fn add_scaled(&mut self, s: C64, other: &ProbeGrid) {
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += s * b;
        }
    }

    /// Largest amplitude difference to another probe on the same grid.
    pub fn max_diff(&self, other: &ProbeGrid) -> f64 {
        self.amps.iter().zip(&other.amps).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()))
    }
}

/// Real Gaussian `(2πσ²)^{-1/4} exp(−(x−c)²/4σ²)`: variance `σ²`.
pub fn gaussian_probe(center: f64, width: f64, params: GridParams) -> Result<ProbeGrid> {
    params.validate()?;
    if !(width > 0.0) {
        return Err(Error::InvalidArgument(format!("width must be positive, got {width}")));
    }
    if width <= 3.0 * params.dx() {
        return Err(Error::GridUnderResolved(format!(
            "width {width} is not above 3·dx = {}",
            3.0 * params.dx()
        )));
    }
    if params.x_max - params.x_min < 10.0 * width {
        return Err(Error::GridUnderResolved(format!(
            "window {} is narrower than 10·width = {}",
            params.x_max - params.x_min,
            10.0 * width
        )));
    }
    let norm = (2.0 * PI * width * width).powf(-0.25);
    ProbeGrid::from_fn(params, |x| C64::from(norm * (-(x - center).powi(2) / (4.0 * width * width)).exp()))
}

/// Probe expectation values and the rate of change of the position variance.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ProbeMoments {
    pub mean_q: f64,
    pub mean_p: f64,
    pub var_q: f64,
    pub var_p: f64,
    pub d_var_q_dt: f64,
}

/// Moments of `ξ/‖ξ‖`; momentum moments via the discrete Fourier transform and
/// `dVar[Q]/dt = (⟨{Q,P}⟩ − 2⟨Q⟩⟨P⟩)/m`.
pub fn probe_moments(xi: &ProbeGrid) -> Result<ProbeMoments> {
    let norm_sq = xi.norm_sq();
    if !(norm_sq > 0.0) || !norm_sq.is_finite() {
        return Err(Error::NotNormalized { norm_sq });
    }
    let dx = xi.dx();
    let weight = |k: usize| xi.amps[k].norm_sqr() * dx / norm_sq;
    let n = xi.n_points();
    let mean_q: f64 = (0..n).map(|k| weight(k) * xi.x(k)).sum();
    let var_q: f64 = (0..n).map(|k| weight(k) * (xi.x(k) - mean_q).powi(2)).sum();

    let phi = xi.to_momentum();
    let total: f64 = phi.iter().map(|a| a.norm_sqr()).sum();
    let mean_p: f64 = phi.iter().enumerate().map(|(j, a)| a.norm_sqr() * xi.p(j)).sum::<f64>() / total;
    let var_p: f64 = phi.iter().enumerate().map(|(j, a)| a.norm_sqr() * (xi.p(j) - mean_p).powi(2)).sum::<f64>() / total;

    // P̂ξ in position space
    let p_xi = xi.from_momentum(phi.iter().enumerate().map(|(j, a)| a * xi.p(j)).collect());
    let qp: C64 = (0..n).map(|k| xi.amps[k].conj() * xi.x(k) * p_xi.amps[k]).sum::<C64>() * dx / norm_sq;
    let anticommutator = 2.0 * qp.re;
    let d_var_q_dt = (anticommutator - 2.0 * mean_q * mean_p) / xi.mass();
    Ok(ProbeMoments { mean_q, mean_p, var_q, var_p, d_var_q_dt })
}
