//! Qubit probes: Bloch-vector weak values and the qubit-probe readout.

use crate::error::{dim_mismatch, Error, Result};
use crate::linalg::{c, matrix_exponential, tensor, CMatrix, QOperator, QState, C64};
use crate::tol;
use crate::weak::{weak_value, PrePostSelection};

/// Bloch vector `r` with `‖r‖ ≤ 1`; `ρ = (1 + r·σ)/2`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct BlochVector {
    r: [f64; 3],
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

impl BlochVector {
    pub fn new(r: [f64; 3]) -> Result<Self> {
        let norm = dot(r, r).sqrt();
        if !norm.is_finite() || norm > 1.0 + 1e-12 {
            return Err(Error::InvalidBlochVector { norm });
        }
        Ok(Self { r })
    }

    /// Pure state along `r`, rescaled to unit length.
    pub fn pure(r: [f64; 3]) -> Result<Self> {
        let norm = dot(r, r).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidBlochVector { norm });
        }
        Ok(Self { r: [r[0] / norm, r[1] / norm, r[2] / norm] })
    }

    /// Bloch vector `⟨ψ|σ|ψ⟩` of a qubit state.
    pub fn from_state(psi: &QState) -> Result<Self> {
        if psi.dim() != 2 {
            return Err(dim_mismatch("qubit state", 2, psi.dim()));
        }
        let r = [
            QOperator::pauli_x().sandwich(psi, psi).re,
            QOperator::pauli_y().sandwich(psi, psi).re,
            QOperator::pauli_z().sandwich(psi, psi).re,
        ];
        Self::pure(r)
    }

    pub fn x() -> Self {
        Self { r: [1.0, 0.0, 0.0] }
    }
    pub fn y() -> Self {
        Self { r: [0.0, 1.0, 0.0] }
    }
    pub fn z() -> Self {
        Self { r: [0.0, 0.0, 1.0] }
    }

    pub fn r(&self) -> [f64; 3] {
        self.r
    }

    pub fn norm(&self) -> f64 {
        dot(self.r, self.r).sqrt()
    }

    /// `cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩` for a unit vector.
    pub fn to_state(&self) -> Result<QState> {
        let norm = self.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidBlochVector { norm });
        }
        let [x, y, z] = self.r;
        let theta = z.clamp(-1.0, 1.0).acos();
        let phi = y.atan2(x);
        QState::new(vec![c((theta / 2.0).cos(), 0.0), C64::from_polar((theta / 2.0).sin(), phi)])
    }
}

fn require_unit(v: [f64; 3], what: &str) -> Result<()> {
    let norm = dot(v, v).sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("{what} must be a unit vector, |{what}| = {norm}")));
    }
    Ok(())
}

fn antipodal_guard(r_i: &BlochVector, r_f: &BlochVector) -> Result<f64> {
    // 1 + r_i·r_f = 2|⟨f|i⟩|²
    let value = 1.0 + dot(r_i.r, r_f.r);
    if value <= 2.0 * tol::OVERLAP_FLOOR {
        return Err(Error::AntipodalSelection { value });
    }
    Ok(value)
}

/// `⟨n·σ⟩_w = n·(r_i + r_f + i r_i×r_f)/(1 + r_i·r_f)`
pub fn qubit_weak_value(r_i: &BlochVector, r_f: &BlochVector, n: [f64; 3]) -> Result<C64> {
    require_unit(n, "n")?;
    let den = antipodal_guard(r_i, r_f)?;
    let sum = [r_i.r[0] + r_f.r[0], r_i.r[1] + r_f.r[1], r_i.r[2] + r_f.r[2]];
    Ok(c(dot(n, sum), dot(n, cross(r_i.r, r_f.r))) / den)
}

/// Geometry of a qubit-probe weak measurement: probe `(1 + m·σ)/2`,
/// coupling `e^{−ig A⊗(v·σ)}`, readout `q·σ`.
#[derive(Copy, Clone, Debug)]
pub struct QubitProbeSetup {
    pub r_i: BlochVector,
    pub r_f: BlochVector,
    pub m: BlochVector,
    pub v: [f64; 3],
    pub q: [f64; 3],
}

/// First-order readout shift next to its exact counterpart.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct QubitShift {
    pub weak_value: C64,
    pub re_coefficient: f64,
    pub im_coefficient: f64,
    pub formula: f64,
    pub exact: f64,
}

impl QubitShift {
    pub fn residual(&self) -> f64 {
        (self.formula - self.exact).abs()
    }
}

/// `Δ[q·σ] = 2g{(q×v)·m} Re⟨A⟩_w + 2g{v·q − (v·m)(q·m)} Im⟨A⟩_w`, with the
/// exact shift from `e^{−ig A⊗(v·σ)}` followed by post-selection.
pub fn qubit_probe_shift(setup: &QubitProbeSetup, a: &QOperator, g: f64) -> Result<QubitShift> {
    require_unit(setup.v, "v")?;
    require_unit(setup.q, "q")?;
    if a.dim() != 2 {
        return Err(dim_mismatch("qubit observable", 2, a.dim()));
    }
    a.require_hermitian()?;
    antipodal_guard(&setup.r_i, &setup.r_f)?;
    let (pre, post, probe) = (setup.r_i.to_state()?, setup.r_f.to_state()?, setup.m.to_state()?);
    let sel = PrePostSelection::new(pre.clone(), post.clone())?;
    let w = weak_value(&sel, a)?.value;
    let (m, v, q) = (setup.m.r, setup.v, setup.q);
    let re_coefficient = 2.0 * g * dot(cross(q, v), m);
    let im_coefficient = 2.0 * g * (dot(v, q) - dot(v, m) * dot(q, m));
    let formula = re_coefficient * w.re + im_coefficient * w.im;

    let coupling = tensor(a, &QOperator::pauli_dot(v));
    let u = matrix_exponential(&coupling, c(0.0, -g))?;
    let joint = u.matrix() * pre.tensor_with(&probe);
    // ⟨f| on the target factor
    let xi_out = crate::linalg::CVector::from_fn(2, |p, _| {
        (0..2).map(|s| post.amps()[s].conj() * joint[s * 2 + p]).sum::<C64>()
    });
    let norm_sq = xi_out.norm_squared();
    if norm_sq <= tol::VANISHING_OVERLAP {
        return Err(Error::VanishingOverlap(format!("post-selected probe norm² = {norm_sq:e}")));
    }
    let readout = QOperator::pauli_dot(q);
    let after = xi_out.dotc(&(readout.matrix() * &xi_out)).re / norm_sq;
    let exact = after - dot(q, m);
    Ok(QubitShift { weak_value: w, re_coefficient, im_coefficient, formula, exact })
}

/// C-NOT scheme inputs: target pre-state `α|0⟩ + β|1⟩`, real probe
/// amplitudes `γ|0⟩ + η|1⟩`, target post-selection `|φ⟩`.
#[derive(Clone, Debug)]
pub struct CnotSetup {
    pub pre: QState,
    pub post: QState,
    pub gamma: f64,
    pub eta: f64,
}

impl CnotSetup {
    pub fn new(alpha: C64, beta: C64, gamma: f64, eta: f64, post: QState) -> Result<Self> {
        let norm_sq = alpha.norm_sqr() + beta.norm_sqr();
        if (norm_sq - 1.0).abs() > tol::CONSTRUCT {
            return Err(Error::NotNormalized { norm_sq });
        }
        Self::from_states(QState::new(vec![alpha, beta])?, post, gamma, eta)
    }

    pub fn from_states(pre: QState, post: QState, gamma: f64, eta: f64) -> Result<Self> {
        if pre.dim() != 2 || post.dim() != 2 {
            return Err(dim_mismatch("C-NOT target state", 2, pre.dim().max(post.dim())));
        }
        if !gamma.is_finite() || !eta.is_finite() || (gamma * gamma + eta * eta - 1.0).abs() > tol::CONSTRUCT {
            return Err(Error::InvalidProbeAmplitudes(format!("γ² + η² = {} ≠ 1", gamma * gamma + eta * eta)));
        }
        Ok(Self { pre, post, gamma, eta })
    }

    /// `γ = √(½ + ε)`, `η = √(½ − ε)`.
    pub fn with_epsilon(pre: QState, post: QState, epsilon: f64) -> Result<Self> {
        if !(epsilon.abs() <= 0.5) {
            return Err(Error::InvalidProbeAmplitudes(format!("ε = {epsilon} outside [−½, ½]")));
        }
        Self::from_states(pre, post, (0.5 + epsilon).sqrt(), (0.5 - epsilon).sqrt())
    }
}

fn check_outcome(k: usize) -> Result<()> {
    if k > 1 {
        return Err(Error::InvalidArgument(format!("outcome bit must be 0 or 1, got {k}")));
    }
    Ok(())
}

/// `Pr[k]` from the closed form: weak values of `|m⟩⟨m|` when the selection
/// overlap clears the floor, the amplitude form otherwise.
pub fn cnot_probability(setup: &CnotSetup, k: usize) -> Result<f64> {
    check_outcome(k)?;
    let (g, e) = (setup.gamma, setup.eta);
    let overlap = setup.post.inner(&setup.pre);
    let path = |m: usize| setup.post.amps()[m].conj() * setup.pre.amps()[m];
    if overlap.norm() > tol::OVERLAP_FLOOR {
        let w = [path(0) / overlap, path(1) / overlap];
        let den = 1.0 - (g - e).powi(2) * (1.0 - w[0].norm_sqr() - w[1].norm_sqr());
        if den.abs() <= tol::VANISHING_OVERLAP {
            return Err(Error::VanishingOverlap("C-NOT post-selection has zero probability".into()));
        }
        Ok((w[k] * (g - e) + e).norm_sqr() / den)
    } else {
        let num = |m: usize| (path(m) * (g - e) + overlap * e).norm_sqr();
        let den = num(0) + num(1);
        if den <= tol::VANISHING_OVERLAP * tol::VANISHING_OVERLAP {
            return Err(Error::VanishingOverlap("C-NOT post-selection has zero probability".into()));
        }
        Ok(num(k) / den)
    }
}

/// `Pr[k]` by applying the C-NOT gate to `|ψ⟩⊗|ξ⟩` and post-selecting.
pub fn cnot_probability_circuit(setup: &CnotSetup, k: usize) -> Result<f64> {
    check_outcome(k)?;
    let xi = QState::new(vec![c(setup.gamma, 0.0), c(setup.eta, 0.0)])?;
    let mut gate = CMatrix::zeros(4, 4);
    for (r, col) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        gate[(r, col)] = c(1.0, 0.0);
    }
    let psi_c = gate * setup.pre.tensor_with(&xi);
    let amp = |m: usize| (0..2).map(|s| setup.post.amps()[s].conj() * psi_c[s * 2 + m]).sum::<C64>();
    let weights = [amp(0).norm_sqr(), amp(1).norm_sqr()];
    let total = weights[0] + weights[1];
    if total <= tol::VANISHING_OVERLAP * tol::VANISHING_OVERLAP {
        return Err(Error::VanishingOverlap("C-NOT post-selection has zero probability".into()));
    }
    Ok(weights[k] / total)
}

/// `(Pr[k], R[k])` with `R[k] = (Pr[k] − η²)/(γ² − η²)`.
pub fn cnot_readout(setup: &CnotSetup, k: usize) -> Result<(f64, f64)> {
    let prob = cnot_probability(setup, k)?;
    let strength = setup.gamma.powi(2) - setup.eta.powi(2);
    if strength.abs() <= tol::CONSTRUCT {
        return Err(Error::GammaEqualsEta { value: setup.gamma });
    }
    Ok((prob, (prob - setup.eta.powi(2)) / strength))
}

/// Default ε sweep for [`cnot_weak_value_estimate`].
pub const DEFAULT_EPSILONS: [f64; 5] = [-0.01, -0.005, 0.0, 0.005, 0.01];

#[derive(Clone, Debug, PartialEq)]
pub struct CnotEstimate {
    /// `R[k]` extrapolated to `ε = 0`, which equals `Re⟨|k⟩⟨k|⟩_w`.
    pub re_est: f64,
    /// `dR[k]/dε` at `ε = 0`.
    pub slope: f64,
    pub epsilons: Vec<f64>,
    pub probabilities: Vec<f64>,
}

/// Extracts `R[k](0)` and `dR/dε(0)` from `Pr[k](ε)` at `γ = √(½+ε)`,
/// `η = √(½−ε)`.
///
/// `R` itself is undefined at `ε = 0`, so the fit is done on
/// `Pr(ε) = ½ − ε + 2εR(ε)`: with `Pr ≈ Σ p_j ε^j`, `R(0) = (p₁ + 1)/2` and
/// `R′(0) = p₂/2`.
pub fn cnot_weak_value_estimate(pre: &QState, post: &QState, k: usize, epsilons: &[f64]) -> Result<CnotEstimate> {
    check_outcome(k)?;
    if epsilons.len() < 3 {
        return Err(Error::DegenerateFit(format!("{} ε values; at least 3 are required", epsilons.len())));
    }
    if let Some(e) = epsilons.iter().find(|e| !(e.abs() < 0.2)) {
        return Err(Error::InvalidArgument(format!("ε = {e} outside (−0.2, 0.2)")));
    }
    let mut sorted: Vec<f64> = epsilons.to_vec();
    sorted.sort_by(f64::total_cmp);
    let symmetric = sorted.iter().zip(sorted.iter().rev()).all(|(a, b)| (a + b).abs() <= 1e-12);
    if !symmetric {
        return Err(Error::InvalidArgument("ε values must be symmetric around 0".into()));
    }
    let probabilities = epsilons
        .iter()
        .map(|&e| cnot_probability(&CnotSetup::with_epsilon(pre.clone(), post.clone(), e)?, k))
        .collect::<Result<Vec<_>>>()?;
    let degree = (epsilons.len() - 1).min(4);
    let coeffs = crate::fit::polyfit(epsilons, &probabilities, degree)?;
    Ok(CnotEstimate {
        re_est: (coeffs[1] + 1.0) / 2.0,
        slope: coeffs[2] / 2.0,
        epsilons: epsilons.to_vec(),
        probabilities,
    })
}

trait TensorWith {
    fn tensor_with(&self, other: &QState) -> crate::linalg::CVector;
}

impl TensorWith for QState {
    fn tensor_with(&self, other: &QState) -> crate::linalg::CVector {
        self.amps().kronecker(other.amps())
    }
}
