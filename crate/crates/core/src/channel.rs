//! Kraus channels acting on density operators and on W operators.
//!
//! A channel carries two Kraus families: `E_m` acting from the left and `F_m`
//! whose adjoints act from the right, `E(W) = Σ_m E_m W F_m†`. For density
//! operators only `E` matters; the `F` family carries the backward-in-time
//! normalization `Σ F_m†F_m = 1`.

use crate::error::{dim_mismatch, Error, Result};
use crate::linalg::{
    hermitian_eigenvalues, max_diff, max_norm, partial_trace_matrix, require_complete_basis, CMatrix,
    DensityOp, QOperator, QState, Subsystem, C64,
};
use crate::tol;
use crate::two_state::WOperator;

#[derive(Clone, Debug)]
pub struct Channel {
    kraus_e: Vec<QOperator>,
    kraus_f: Vec<QOperator>,
}

fn normalization_residual(family: &[CMatrix], dim: usize) -> f64 {
    let mut sum = CMatrix::zeros(dim, dim);
    for k in family {
        sum += k.adjoint() * k;
    }
    max_diff(&sum, &CMatrix::identity(dim, dim))
}

impl Channel {
    /// Channel with `F = E`.
    pub fn new(kraus: Vec<CMatrix>) -> Result<Self> {
        Self::with_backward(kraus.clone(), kraus)
    }

    /// Channel with distinct forward and backward families.
    pub fn with_backward(kraus_e: Vec<CMatrix>, kraus_f: Vec<CMatrix>) -> Result<Self> {
        Self::build(kraus_e, kraus_f, tol::KRAUS_NORMALIZATION)
    }

    pub(crate) fn build(kraus_e: Vec<CMatrix>, kraus_f: Vec<CMatrix>, tolerance: f64) -> Result<Self> {
        if kraus_e.is_empty() {
            return Err(Error::InvalidChannel("empty Kraus family".into()));
        }
        if kraus_e.len() != kraus_f.len() {
            return Err(Error::InvalidChannel(format!(
                "E and F families differ in length ({} vs {})",
                kraus_e.len(),
                kraus_f.len()
            )));
        }
        let d = kraus_e[0].nrows();
        for k in kraus_e.iter().chain(&kraus_f) {
            if k.nrows() != d || k.ncols() != d {
                return Err(dim_mismatch("Kraus factor", d, k.nrows().max(k.ncols())));
            }
        }
        for (name, family) in [("E", &kraus_e), ("F", &kraus_f)] {
            let residual = normalization_residual(family, d);
            if residual > tolerance {
                return Err(Error::InvalidChannel(format!("Σ {name}†{name} − 1 has max norm {residual:e}")));
            }
        }
        // a pair is dropped only when both members vanish
        let (e, f): (Vec<_>, Vec<_>) = kraus_e
            .into_iter()
            .zip(kraus_f)
            .filter(|(e, f)| max_norm(e) >= tol::KRAUS_PRUNE || max_norm(f) >= tol::KRAUS_PRUNE)
            .map(|(e, f)| (QOperator::from_raw(e), QOperator::from_raw(f)))
            .unzip();
        Ok(Self { kraus_e: e, kraus_f: f })
    }

    pub fn identity(dim: usize) -> Self {
        Self { kraus_e: vec![QOperator::identity(dim)], kraus_f: vec![QOperator::identity(dim)] }
    }

    /// Channel with factors `E_m = ⟨e_m|U|e_i⟩`, `F_m† = ⟨e_f|V|e_m⟩`, where
    /// `U`, `V` act on target ⊗ environment (target factor first).
    pub fn from_environment_factorization(
        u: &QOperator,
        v: &QOperator,
        e_i: &QState,
        e_f: &QState,
        e_basis: &[QState],
    ) -> Result<Self> {
        Self::from_environment_factorization_with_tolerance(u, v, e_i, e_f, e_basis, tol::KRAUS_NORMALIZATION)
    }

    pub(crate) fn from_environment_factorization_with_tolerance(
        u: &QOperator,
        v: &QOperator,
        e_i: &QState,
        e_f: &QState,
        e_basis: &[QState],
        tolerance: f64,
    ) -> Result<Self> {
        let de = e_i.dim();
        if e_f.dim() != de {
            return Err(dim_mismatch("final environment state", de, e_f.dim()));
        }
        if v.dim() != u.dim() {
            return Err(dim_mismatch("backward evolution", u.dim(), v.dim()));
        }
        require_complete_basis(e_basis, de)?;
        let ds = factor_dim(u.dim(), de)?;
        let mut e = Vec::with_capacity(de);
        let mut f = Vec::with_capacity(de);
        for em in e_basis {
            e.push(environment_element(u.matrix(), (ds, de), em, e_i)?);
            f.push(environment_element(v.matrix(), (ds, de), e_f, em)?.adjoint());
        }
        Self::build(e, f, tolerance)
    }

    pub fn dim(&self) -> usize {
        self.kraus_e[0].dim()
    }
    pub fn len(&self) -> usize {
        self.kraus_e.len()
    }
    pub fn is_empty(&self) -> bool {
        self.kraus_e.is_empty()
    }
    pub fn kraus_e(&self) -> &[QOperator] {
        &self.kraus_e
    }
    pub fn kraus_f(&self) -> &[QOperator] {
        &self.kraus_f
    }

    /// True when every `F_m` equals `E_m` within [`tol::EQUALITY`].
    pub fn is_symmetric(&self) -> bool {
        self.kraus_e.iter().zip(&self.kraus_f).all(|(e, f)| max_diff(e.matrix(), f.matrix()) <= tol::EQUALITY)
    }

    /// `self ∘ first`: factors `E²_j E¹_k` and `F²_j F¹_k`.
    pub fn compose(&self, first: &Channel) -> Result<Self> {
        if self.dim() != first.dim() {
            return Err(dim_mismatch("composed channel", first.dim(), self.dim()));
        }
        let mut e = Vec::with_capacity(self.len() * first.len());
        let mut f = Vec::with_capacity(self.len() * first.len());
        for (e2, f2) in self.kraus_e.iter().zip(&self.kraus_f) {
            for (e1, f1) in first.kraus_e.iter().zip(&first.kraus_f) {
                e.push(e2.matrix() * e1.matrix());
                f.push(f2.matrix() * f1.matrix());
            }
        }
        Self::with_backward(e, f)
    }

    /// Smallest eigenvalue of the Choi matrices `Σ |a⟩⟨b| ⊗ Φ(|a⟩⟨b|)` of the
    /// maps built from the E and from the F family. Diagnostic only.
    pub fn choi_min_eigenvalue(&self) -> f64 {
        let d = self.dim();
        let mut min = f64::INFINITY;
        for family in [&self.kraus_e, &self.kraus_f] {
            let mut choi = CMatrix::zeros(d * d, d * d);
            for k in family.iter() {
                // vec(K) column stacked on the input index: Σ_a |a⟩ ⊗ K|a⟩
                let v = crate::linalg::CVector::from_fn(d * d, |r, _| k.matrix()[(r % d, r / d)]);
                choi += &v * v.adjoint();
            }
            min = min.min(hermitian_eigenvalues(&choi).into_iter().fold(f64::INFINITY, f64::min));
        }
        min
    }

    /// Errors when either Choi matrix has an eigenvalue below [`tol::PSD_FLOOR`].
    pub fn verify_choi(&self) -> Result<()> {
        let min_eigenvalue = self.choi_min_eigenvalue();
        if min_eigenvalue < tol::PSD_FLOOR {
            return Err(Error::NotPositive { min_eigenvalue });
        }
        Ok(())
    }
}

fn factor_dim(total: usize, factor: usize) -> Result<usize> {
    if factor == 0 || !total.is_multiple_of(factor) {
        return Err(Error::DimensionMismatch(format!(
            "operator dimension {total} is not a multiple of the factor dimension {factor}"
        )));
    }
    Ok(total / factor)
}

/// `⟨bra|op|ket⟩` over the second tensor factor, leaving an operator on the first.
pub fn environment_element(op: &CMatrix, dims: (usize, usize), bra: &QState, ket: &QState) -> Result<CMatrix> {
    let (ds, de) = dims;
    if op.nrows() != ds * de || op.ncols() != ds * de {
        return Err(dim_mismatch("bipartite operator", ds * de, op.nrows()));
    }
    if bra.dim() != de || ket.dim() != de {
        return Err(dim_mismatch("second-factor state", de, bra.dim().max(ket.dim())));
    }
    let (b, k) = (bra.amps(), ket.amps());
    Ok(CMatrix::from_fn(ds, ds, |r, c| {
        let mut acc = C64::new(0.0, 0.0);
        for p in 0..de {
            let bp = b[p].conj();
            if bp.norm_sqr() == 0.0 {
                continue;
            }
            for q in 0..de {
                acc += bp * op[(r * de + p, c * de + q)] * k[q];
            }
        }
        acc
    }))
}

/// `E_m = ⟨b_m|U|φ⟩_p` for `U` on system ⊗ probe (system factor first).
pub fn kraus_from_dilation(u: &QOperator, probe_init: &QState, probe_basis: &[QState]) -> Result<Channel> {
    u.require_unitary()?;
    let dp = probe_init.dim();
    require_complete_basis(probe_basis, dp)?;
    let ds = factor_dim(u.dim(), dp)?;
    let kraus = probe_basis
        .iter()
        .map(|b| environment_element(u.matrix(), (ds, dp), b, probe_init))
        .collect::<Result<Vec<_>>>()?;
    Channel::new(kraus)
}

/// `Σ_m E_m ρ E_m†`
pub fn apply_to_density(ch: &Channel, rho: &DensityOp) -> Result<DensityOp> {
    if rho.dim() != ch.dim() {
        return Err(dim_mismatch("density operator", ch.dim(), rho.dim()));
    }
    let mut out = CMatrix::zeros(ch.dim(), ch.dim());
    for e in &ch.kraus_e {
        out += e.matrix() * rho.matrix() * e.matrix().adjoint();
    }
    DensityOp::from_channel_output(out, 10.0 * tol::KRAUS_NORMALIZATION)
}

/// `Σ_m E_m W F_m†`, a W operator of arbitrary rank without provenance.
pub fn apply_to_w(ch: &Channel, w: &WOperator) -> Result<WOperator> {
    if w.dim() != ch.dim() {
        return Err(dim_mismatch("W operator", ch.dim(), w.dim()));
    }
    let mut out = CMatrix::zeros(ch.dim(), ch.dim());
    for (e, f) in ch.kraus_e.iter().zip(&ch.kraus_f) {
        out += e.matrix() * w.matrix() * f.matrix().adjoint();
    }
    WOperator::from_matrix(out)
}

/// Positive operator valued measure.
#[derive(Clone, Debug)]
pub struct Povm {
    elements: Vec<QOperator>,
}

impl Povm {
    pub fn new(elements: Vec<CMatrix>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidChannel("empty POVM".into()));
        }
        let d = elements[0].nrows();
        let mut sum = CMatrix::zeros(d, d);
        let mut ops = Vec::with_capacity(elements.len());
        for m in elements {
            if m.nrows() != d || m.ncols() != d {
                return Err(dim_mismatch("POVM element", d, m.nrows()));
            }
            let op = QOperator::hermitian(m)?;
            let min_eigenvalue = hermitian_eigenvalues(op.matrix()).into_iter().fold(f64::INFINITY, f64::min);
            if min_eigenvalue < tol::PSD_FLOOR {
                return Err(Error::NotPositive { min_eigenvalue });
            }
            sum += op.matrix();
            ops.push(op);
        }
        let residual = max_diff(&sum, &CMatrix::identity(d, d));
        if residual > tol::KRAUS_NORMALIZATION {
            return Err(Error::InvalidChannel(format!("Σ M − 1 has max norm {residual:e}")));
        }
        Ok(Self { elements: ops })
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }
    pub fn elements(&self) -> &[QOperator] {
        &self.elements
    }
}

/// `M_m = E_m†E_m`
pub fn povm_from_channel(ch: &Channel) -> Result<Povm> {
    Povm::new(ch.kraus_e.iter().map(|e| e.matrix().adjoint() * e.matrix()).collect())
}

/// `p_m = Tr(ρ M_m)`
pub fn born_probabilities(rho: &DensityOp, povm: &Povm) -> Result<Vec<f64>> {
    if rho.dim() != povm.dim() {
        return Err(dim_mismatch("density operator", povm.dim(), rho.dim()));
    }
    let probs: Vec<f64> = povm.elements.iter().map(|m| rho.expectation(m).map(|z| z.re)).collect::<Result<_>>()?;
    if let Some(p) = probs.iter().find(|p| **p < -1e-12) {
        return Err(Error::NotPositive { min_eigenvalue: *p });
    }
    Ok(probs)
}

/// Max-norm residual between `Σ_m F_m†E_m` and `⟨e_f|VU|e_i⟩`.
pub fn s_matrix_identity_check(
    ch: &Channel,
    u: &QOperator,
    v: &QOperator,
    e_i: &QState,
    e_f: &QState,
) -> Result<f64> {
    if u.dim() != v.dim() || e_i.dim() != e_f.dim() {
        return Err(Error::InconsistentConstruction("U, V or environment states differ in dimension".into()));
    }
    let de = e_i.dim();
    let ds = factor_dim(u.dim(), de).map_err(|e| Error::InconsistentConstruction(e.to_string()))?;
    if ds != ch.dim() {
        return Err(Error::InconsistentConstruction(format!(
            "channel acts on dimension {}, evolutions on target dimension {ds}",
            ch.dim()
        )));
    }
    let mut sum = CMatrix::zeros(ds, ds);
    for (e, f) in ch.kraus_e.iter().zip(&ch.kraus_f) {
        sum += f.matrix().adjoint() * e.matrix();
    }
    let s = environment_element(&(v.matrix() * u.matrix()), (ds, de), e_f, e_i)?;
    Ok(max_diff(&sum, &s))
}

/// `Tr_p[U (ρ ⊗ |φ⟩⟨φ|) U†]`, the dilation side of the Kraus construction.
pub fn dilation_output(u: &QOperator, rho: &DensityOp, probe_init: &QState) -> Result<CMatrix> {
    let dp = probe_init.dim();
    let ds = rho.dim();
    if u.dim() != ds * dp {
        return Err(dim_mismatch("dilation unitary", ds * dp, u.dim()));
    }
    let joint = rho.matrix().kronecker(probe_init.density().matrix());
    partial_trace_matrix(&(u.matrix() * joint * u.matrix().adjoint()), (ds, dp), Subsystem::First)
}
