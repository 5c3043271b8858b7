//! Weak values of pre/post-selected systems and the statistical identities
//! built on them.
//!
//! Integrals over post-selections are realized as sums over a finite
//! complete orthonormal basis `{|φ_k⟩}`; for finite dimension
//! `Σ_k |φ_k⟩⟨φ_k| = 1` carries the same completeness the continuum measure
//! encodes. [`expectation_via_haar_sampling`] gives an independent Monte-Carlo
//! estimate over Haar-random post-selections.

use rand::Rng;

use crate::error::{dim_mismatch, Error, Result};
use crate::linalg::{require_complete_basis, QOperator, QState, C64, ZERO};
use crate::random::random_state;
use crate::tol;

/// Pre-selection `|i⟩`, post-selection `⟨f|`, and the evolutions before
/// (`U(t, t_i)`) and after (`U(t_f, t)`) the intermediate time.
#[derive(Clone, Debug)]
pub struct PrePostSelection {
    pre: QState,
    post: QState,
    u_before: QOperator,
    u_after: QOperator,
    overlap_floor: f64,
}

impl PrePostSelection {
    /// Selection with trivial evolutions.
    pub fn new(pre: QState, post: QState) -> Result<Self> {
        let d = pre.dim();
        Self::with_evolutions(pre, post, QOperator::identity(d), QOperator::identity(d))
    }

    pub fn with_evolutions(pre: QState, post: QState, u_before: QOperator, u_after: QOperator) -> Result<Self> {
        let d = pre.dim();
        for (what, got) in [("post-selection", post.dim()), ("U(t,t_i)", u_before.dim()), ("U(t_f,t)", u_after.dim())] {
            if got != d {
                return Err(dim_mismatch(what, d, got));
            }
        }
        u_before.require_unitary()?;
        u_after.require_unitary()?;
        Ok(Self { pre, post, u_before, u_after, overlap_floor: tol::OVERLAP_FLOOR })
    }

    /// Lowers (or raises) the floor on `|⟨f|VU|i⟩|`; amplification studies
    /// opt in to near-orthogonal selections here.
    pub fn with_overlap_floor(mut self, floor: f64) -> Self {
        self.overlap_floor = floor;
        self
    }

    pub fn dim(&self) -> usize {
        self.pre.dim()
    }
    pub fn pre(&self) -> &QState {
        &self.pre
    }
    pub fn post(&self) -> &QState {
        &self.post
    }
    pub fn u_before(&self) -> &QOperator {
        &self.u_before
    }
    pub fn u_after(&self) -> &QOperator {
        &self.u_after
    }
    pub fn overlap_floor(&self) -> f64 {
        self.overlap_floor
    }

    /// `⟨f|U(t_f,t) U(t,t_i)|i⟩`
    pub fn overlap(&self) -> C64 {
        self.amplitude(&QOperator::identity(self.dim()).into_matrix())
    }

    /// `⟨f|V X U|i⟩` for an arbitrary target-space matrix `X`.
    pub(crate) fn amplitude(&self, x: &crate::linalg::CMatrix) -> C64 {
        let ket = self.u_before.matrix() * self.pre.amps();
        let bra = self.u_after.matrix().adjoint() * self.post.amps();
        bra.dotc(&(x * ket))
    }

    /// Errors when the selection is too close to orthogonal for a weak value.
    pub fn check(&self) -> Result<C64> {
        let overlap = self.overlap();
        if overlap.norm() <= self.overlap_floor {
            return Err(Error::NearOrthogonalSelection { overlap: overlap.norm(), floor: self.overlap_floor });
        }
        Ok(overlap)
    }
}

/// A weak value together with its denominator.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct WeakValue {
    pub value: C64,
    pub overlap: C64,
}

/// `⟨f|V A U|i⟩ / ⟨f|V U|i⟩`
pub fn weak_value(sel: &PrePostSelection, a: &QOperator) -> Result<WeakValue> {
    if a.dim() != sel.dim() {
        return Err(dim_mismatch("observable", sel.dim(), a.dim()));
    }
    let overlap = sel.check()?;
    Ok(WeakValue { value: sel.amplitude(a.matrix()) / overlap, overlap })
}

/// Sum over the basis of `|⟨φ|ψ⟩|² · f(φ)`, skipping exactly vanishing overlaps.
fn basis_average<F>(psi: &QState, basis: &[QState], mut term: F) -> Result<C64>
where
    F: FnMut(&QState, C64) -> C64,
{
    require_complete_basis(basis, psi.dim())?;
    let mut acc = ZERO;
    for phi in basis {
        let ov = phi.inner(psi);
        if ov.norm() < tol::VANISHING_OVERLAP {
            continue;
        }
        acc += term(phi, ov) * ov.norm_sqr();
    }
    Ok(acc)
}

/// Weak value `⟨φ|A|ψ⟩/⟨φ|ψ⟩` with trivial evolution, given the overlap.
fn local_weak_value(phi: &QState, a: &QOperator, psi: &QState, ov: C64) -> C64 {
    a.sandwich(phi, psi) / ov
}

/// `Σ_φ |⟨φ|ψ⟩|² ⟨A⟩_w(ψ → φ)`, which reproduces `⟨ψ|A|ψ⟩`.
pub fn expectation_via_weak_values(psi: &QState, a: &QOperator, basis: &[QState]) -> Result<C64> {
    if a.dim() != psi.dim() {
        return Err(dim_mismatch("observable", psi.dim(), a.dim()));
    }
    basis_average(psi, basis, |phi, ov| local_weak_value(phi, a, psi, ov))
}

/// `Σ |h_A|² dP − (Σ h_A dP)²` with `h_A` the weak value random variable.
///
/// The second moment keeps post-selections orthogonal to `ψ`: there
/// `|h_A|² dP` has the finite limit `|⟨φ|A|ψ⟩|²`.
pub fn variance_via_weak_values(psi: &QState, a: &QOperator, basis: &[QState]) -> Result<C64> {
    if a.dim() != psi.dim() {
        return Err(dim_mismatch("observable", psi.dim(), a.dim()));
    }
    // |⟨φ|ψ⟩|²|h_A|² = |⟨φ|A|ψ⟩|², which stays finite where the overlap vanishes
    require_complete_basis(basis, psi.dim())?;
    let second: f64 = basis.iter().map(|phi| a.sandwich(phi, psi).norm_sqr()).sum();
    let first = basis_average(psi, basis, |phi, ov| local_weak_value(phi, a, psi, ov))?;
    Ok(C64::from(second) - first * first)
}

/// Bayes-type decomposition `Σ_φ ⟨|a⟩⟨a|⟩_w |⟨φ|ψ⟩|²`, equal to `|⟨a|ψ⟩|²`.
pub fn bayes_decomposition(psi: &QState, a: &QState, basis: &[QState]) -> Result<f64> {
    if a.dim() != psi.dim() {
        return Err(dim_mismatch("intermediate state", psi.dim(), a.dim()));
    }
    let proj = a.projector();
    let total = basis_average(psi, basis, |phi, ov| local_weak_value(phi, &proj, psi, ov))?;
    if total.im.abs() > tol::CONSTRUCT {
        return Err(Error::InconsistentConstruction(format!(
            "Bayes decomposition has imaginary residue {:e}",
            total.im
        )));
    }
    Ok(total.re)
}

/// `Σ_a ⟨|a⟩⟨a|⟩_w` over a complete basis; equals 1.
pub fn completeness_sum(sel: &PrePostSelection, basis: &[QState]) -> Result<C64> {
    require_complete_basis(basis, sel.dim())?;
    let overlap = sel.check()?;
    Ok(basis.iter().map(|a| sel.amplitude(a.projector().matrix())).sum::<C64>() / overlap)
}

/// Bargmann invariant phase `arg ⟨ψ1|ψ2⟩⟨ψ2|ψ3⟩⟨ψ3|ψ1⟩` in `(−π, π]`.
///
/// Equal to the argument of `⟨|ψ2⟩⟨ψ2|⟩_w` with pre-selection `ψ3` and
/// post-selection `ψ1`.
pub fn geometric_phase(psi1: &QState, psi2: &QState, psi3: &QState) -> Result<f64> {
    if psi2.dim() != psi1.dim() || psi3.dim() != psi1.dim() {
        return Err(Error::DimensionMismatch("geometric phase states differ in dimension".into()));
    }
    let pairs = [(psi1.inner(psi2), "⟨ψ1|ψ2⟩"), (psi2.inner(psi3), "⟨ψ2|ψ3⟩"), (psi3.inner(psi1), "⟨ψ3|ψ1⟩")];
    for (ov, name) in &pairs {
        if ov.norm() < tol::VANISHING_OVERLAP {
            return Err(Error::VanishingOverlap(format!("{name} = {:e}", ov.norm())));
        }
    }
    let product = pairs[0].0 * pairs[1].0 * pairs[2].0;
    let arg = product.arg();
    // atan2 returns −π for a negative real with −0 imaginary part
    Ok(if arg <= -std::f64::consts::PI { std::f64::consts::PI } else { arg })
}

/// Monte-Carlo estimate of `⟨ψ|A|ψ⟩` from Haar-random post-selections.
///
/// With `dφ = d · dHaar`, `∫ dφ |φ⟩⟨φ| = 1`, so the estimator is
/// `d · mean(|⟨φ|ψ⟩|² ⟨A⟩_w)`. Converges as `1/√samples`.
pub fn expectation_via_haar_sampling<R: Rng + ?Sized>(
    psi: &QState,
    a: &QOperator,
    samples: usize,
    rng: &mut R,
) -> Result<C64> {
    if a.dim() != psi.dim() {
        return Err(dim_mismatch("observable", psi.dim(), a.dim()));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("at least one sample is required".into()));
    }
    let d = psi.dim() as f64;
    let mut acc = ZERO;
    for _ in 0..samples {
        let phi = random_state(psi.dim(), rng);
        let ov = phi.inner(psi);
        if ov.norm() < tol::VANISHING_OVERLAP {
            continue;
        }
        acc += local_weak_value(&phi, a, psi, ov) * ov.norm_sqr();
    }
    Ok(acc * d / samples as f64)
}
