//! Two-state vector formalism: the W operator and ABL probabilities.
//!
//! The time-symmetry of the ABL rule is formalized here as invariance under
//! swapping `(|i⟩, U) ↔ (|f⟩, V†)` with the outcome set held fixed; the path
//! amplitudes only pick up a complex conjugate under that swap.

use crate::error::{dim_mismatch, Error, Result};
use crate::linalg::{max_norm, outer, trace, CMatrix, QOperator, C64};
use crate::tol;
use crate::weak::PrePostSelection;

/// `W = U|i⟩⟨f|V`, stored as a full matrix so that channel outputs of any
/// rank share the type. `provenance` keeps the selection when known.
#[derive(Clone, Debug)]
pub struct WOperator {
    matrix: CMatrix,
    provenance: Option<PrePostSelection>,
}

impl WOperator {
    /// A W operator without provenance, e.g. the output of a channel.
    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "W operator must be square, got {}×{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { matrix, provenance: None })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
    pub fn provenance(&self) -> Option<&PrePostSelection> {
        self.provenance.as_ref()
    }
    pub fn trace(&self) -> C64 {
        trace(&self.matrix)
    }

    /// Multiplies by a complex scalar; provenance no longer describes the result.
    pub fn scaled(&self, s: C64) -> Self {
        Self { matrix: &self.matrix * s, provenance: None }
    }

    /// Overlap floor used for division: the selection's when known.
    fn floor(&self) -> f64 {
        self.provenance.as_ref().map_or(tol::OVERLAP_FLOOR, |p| p.overlap_floor())
    }
}

/// Builds `W = U_before|i⟩⟨f|U_after`.
pub fn build_w(sel: &PrePostSelection) -> WOperator {
    let ket = sel.u_before().matrix() * sel.pre().amps();
    let bra_dual = sel.u_after().matrix().adjoint() * sel.post().amps();
    WOperator { matrix: outer(&ket, &bra_dual), provenance: Some(sel.clone()) }
}

/// `Tr(WA)/Tr(W)`
pub fn weak_value_from_w(w: &WOperator, a: &QOperator) -> Result<C64> {
    if a.dim() != w.dim() {
        return Err(dim_mismatch("observable", w.dim(), a.dim()));
    }
    let tr = w.trace();
    let floor = w.floor();
    if tr.norm() <= floor {
        return Err(Error::NearOrthogonalSelection { overlap: tr.norm(), floor });
    }
    Ok(trace(&(w.matrix() * a.matrix())) / tr)
}

/// ABL distribution over the distinct eigenvalues of an observable.
#[derive(Clone, Debug, PartialEq)]
pub struct AblDistribution {
    pub eigenvalues: Vec<f64>,
    pub probabilities: Vec<f64>,
}

fn normalize_paths(amplitudes: &[C64]) -> Result<Vec<f64>> {
    let weights: Vec<f64> = amplitudes.iter().map(|a| a.norm_sqr()).collect();
    let total: f64 = weights.iter().sum();
    if total <= tol::VANISHING_OVERLAP * tol::VANISHING_OVERLAP {
        return Err(Error::AllPathsVanish);
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// `Pr[a] = |⟨f|V P_a U|i⟩|² / Σ_b |⟨f|V P_b U|i⟩|²`, with `P_a` the
/// eigenprojector of each distinct eigenvalue of `A`.
pub fn abl_probabilities(sel: &PrePostSelection, a: &QOperator) -> Result<AblDistribution> {
    if a.dim() != sel.dim() {
        return Err(dim_mismatch("observable", sel.dim(), a.dim()));
    }
    let eig = crate::linalg::eigendecompose_hermitian(a)?;
    let projectors = eig.eigenprojectors(tol::EIGEN_CLUSTER_GAP);
    let amplitudes: Vec<C64> = projectors.iter().map(|(_, p)| sel.amplitude(p)).collect();
    Ok(AblDistribution {
        eigenvalues: projectors.iter().map(|(v, _)| *v).collect(),
        probabilities: normalize_paths(&amplitudes)?,
    })
}

/// Checks that the projectors are orthogonal, idempotent and sum to 1.
pub fn require_projector_family(projectors: &[QOperator], dim: usize) -> Result<()> {
    if projectors.is_empty() {
        return Err(Error::IncompleteProjectorFamily("empty family".into()));
    }
    let mut sum = CMatrix::zeros(dim, dim);
    for (j, p) in projectors.iter().enumerate() {
        if p.dim() != dim {
            return Err(dim_mismatch("projector", dim, p.dim()));
        }
        let m = p.matrix();
        let residual = max_norm(&(m * m - m)).max(crate::linalg::hermiticity_residual(m));
        if residual > tol::CONSTRUCT {
            return Err(Error::IncompleteProjectorFamily(format!("element {j} is not a projector ({residual:e})")));
        }
        for (k, q) in projectors.iter().enumerate().skip(j + 1) {
            let r = max_norm(&(m * q.matrix()));
            if r > tol::CONSTRUCT {
                return Err(Error::IncompleteProjectorFamily(format!("elements {j} and {k} overlap ({r:e})")));
            }
        }
        sum += m;
    }
    let residual = max_norm(&(sum - CMatrix::identity(dim, dim)));
    if residual > tol::CONSTRUCT {
        return Err(Error::IncompleteProjectorFamily(format!("Σ P − 1 has max norm {residual:e}")));
    }
    Ok(())
}

/// `Pr[n] = |Tr W P_n|² / Σ_m |Tr W P_m|²`
pub fn abl_from_w(w: &WOperator, projectors: &[QOperator]) -> Result<Vec<f64>> {
    require_projector_family(projectors, w.dim())?;
    let amplitudes: Vec<C64> = projectors.iter().map(|p| trace(&(w.matrix() * p.matrix()))).collect();
    normalize_paths(&amplitudes)
}
