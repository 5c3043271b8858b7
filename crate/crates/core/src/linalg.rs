//! Dense complex linear algebra over small Hilbert spaces.
//!
//! Conventions: ħ = 1, computational basis `|0⟩ … |d−1⟩`, and tensor products
//! are ordered left factor major, so `|a⟩ ⊗ |b⟩` has index `a·d_b + b`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{dim_mismatch, Error, Result};
use crate::tol;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Largest entry modulus.
pub fn max_norm(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Max-norm distance between two equally-shaped matrices.
pub fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_diff on mismatched shapes");
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    max_diff(m, &m.adjoint())
}

pub fn unitarity_residual(m: &CMatrix) -> f64 {
    let n = m.nrows();
    max_diff(&(m.adjoint() * m), &CMatrix::identity(n, n))
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// `|ket⟩⟨bra|` as a matrix.
pub fn outer(ket: &CVector, bra: &CVector) -> CMatrix {
    ket * bra.adjoint()
}

// ---------------------------------------------------------------------------

/// Unit-norm pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct QState {
    amps: CVector,
}

impl QState {
    /// Accepts amplitudes whose norm is already 1 within the construction
    /// tolerance and removes the residual rounding.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        Self::from_vector(CVector::from_vec(amps))
    }

    pub fn from_vector(amps: CVector) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::DimensionMismatch("state of dimension 0".into()));
        }
        let norm_sq = amps.norm_squared();
        if (norm_sq - 1.0).abs() > tol::CONSTRUCT {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(Self { amps: amps.unscale(norm_sq.sqrt()) })
    }

    /// Normalizes any nonzero vector.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        Self::normalize_vector(CVector::from_vec(amps))
    }

    pub fn normalize_vector(amps: CVector) -> Result<Self> {
        let norm = amps.norm();
        if amps.is_empty() || !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NotNormalized { norm_sq: norm * norm });
        }
        Ok(Self { amps: amps.unscale(norm) })
    }

    /// Computational basis state `|k⟩`.
    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(k < dim, "basis index {k} out of range for dimension {dim}");
        let mut amps = CVector::zeros(dim);
        amps[k] = ONE;
        Self { amps }
    }

    /// Full computational basis of dimension `dim`.
    pub fn computational_basis(dim: usize) -> Vec<Self> {
        (0..dim).map(|k| Self::basis(dim, k)).collect()
    }

    /// `|+⟩`
    pub fn plus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self { amps: CVector::from_vec(vec![c(h, 0.0), c(h, 0.0)]) }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &CVector {
        &self.amps
    }

    pub fn into_vector(self) -> CVector {
        self.amps
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &QState) -> C64 {
        self.amps.dotc(&other.amps)
    }

    /// Multiplies by a global phase `e^{iφ}`.
    pub fn with_phase(&self, phi: f64) -> Self {
        let phase = C64::from_polar(1.0, phi);
        Self { amps: self.amps.map(|z| z * phase) }
    }

    pub fn density(&self) -> DensityOp {
        DensityOp { m: outer(&self.amps, &self.amps) }
    }

    /// `|self⟩⟨self|` as a projector.
    pub fn projector(&self) -> QOperator {
        QOperator { m: outer(&self.amps, &self.amps), kind: OperatorKind::Projector }
    }

    /// Applies an operator and renormalizes.
    pub fn evolve(&self, op: &QOperator) -> Result<Self> {
        if op.dim() != self.dim() {
            return Err(dim_mismatch("operator on state", self.dim(), op.dim()));
        }
        Self::normalize_vector(op.matrix() * &self.amps)
    }
}

// ---------------------------------------------------------------------------

/// Role tag recorded at construction; the matching structural property was
/// checked at [`tol::CONSTRUCT`].
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    Hermitian,
    Unitary,
    Projector,
    General,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QOperator {
    m: CMatrix,
    kind: OperatorKind,
}

impl QOperator {
    fn square(m: &CMatrix) -> Result<()> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "operator must be square and non-empty, got {}×{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(())
    }

    /// Square matrix already known to be well-formed; kind `General`.
    pub(crate) fn from_raw(m: CMatrix) -> Self {
        debug_assert!(m.is_square());
        Self { m, kind: OperatorKind::General }
    }

    pub fn general(m: CMatrix) -> Result<Self> {
        Self::square(&m)?;
        Ok(Self { m, kind: OperatorKind::General })
    }

    pub fn hermitian(m: CMatrix) -> Result<Self> {
        Self::square(&m)?;
        let residual = hermiticity_residual(&m);
        if residual > tol::CONSTRUCT {
            return Err(Error::NotHermitian { residual });
        }
        Ok(Self { m, kind: OperatorKind::Hermitian })
    }

    pub fn unitary(m: CMatrix) -> Result<Self> {
        Self::square(&m)?;
        let residual = unitarity_residual(&m);
        if residual > tol::CONSTRUCT {
            return Err(Error::NotUnitary { residual });
        }
        Ok(Self { m, kind: OperatorKind::Unitary })
    }

    pub fn projector(m: CMatrix) -> Result<Self> {
        Self::square(&m)?;
        let residual = hermiticity_residual(&m);
        if residual > tol::CONSTRUCT {
            return Err(Error::NotHermitian { residual });
        }
        let residual = max_diff(&(&m * &m), &m);
        if residual > tol::CONSTRUCT {
            return Err(Error::NotProjector { residual });
        }
        Ok(Self { m, kind: OperatorKind::Projector })
    }

    pub fn identity(dim: usize) -> Self {
        Self { m: CMatrix::identity(dim, dim), kind: OperatorKind::Projector }
    }

    /// Real diagonal observable.
    pub fn diagonal(values: &[f64]) -> Self {
        let d = values.len();
        let m = CMatrix::from_fn(d, d, |r, c| if r == c { C64::from(values[r]) } else { ZERO });
        Self { m, kind: OperatorKind::Hermitian }
    }

    pub fn pauli_x() -> Self {
        Self { m: pauli(1), kind: OperatorKind::Hermitian }
    }

    pub fn pauli_y() -> Self {
        Self { m: pauli(2), kind: OperatorKind::Hermitian }
    }

    pub fn pauli_z() -> Self {
        Self { m: pauli(3), kind: OperatorKind::Hermitian }
    }

    /// `n·σ` for a real 3-vector `n`.
    pub fn pauli_dot(n: [f64; 3]) -> Self {
        let m = pauli(1) * C64::from(n[0]) + pauli(2) * C64::from(n[1]) + pauli(3) * C64::from(n[2]);
        Self { m, kind: OperatorKind::Hermitian }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn adjoint(&self) -> Self {
        Self { m: self.m.adjoint(), kind: self.kind }
    }

    /// Operator product `self · rhs`; the kind survives only for unitaries.
    pub fn compose(&self, rhs: &QOperator) -> Result<Self> {
        if self.dim() != rhs.dim() {
            return Err(dim_mismatch("operator product", self.dim(), rhs.dim()));
        }
        let kind = match (self.kind, rhs.kind) {
            (OperatorKind::Unitary, OperatorKind::Unitary) => OperatorKind::Unitary,
            _ => OperatorKind::General,
        };
        Ok(Self { m: &self.m * &rhs.m, kind })
    }

    pub fn is_hermitian(&self) -> bool {
        hermiticity_residual(&self.m) <= tol::CONSTRUCT
    }

    pub fn is_unitary(&self) -> bool {
        unitarity_residual(&self.m) <= tol::CONSTRUCT
    }

    pub(crate) fn require_hermitian(&self) -> Result<()> {
        let residual = hermiticity_residual(&self.m);
        if residual > tol::CONSTRUCT {
            return Err(Error::NotHermitian { residual });
        }
        Ok(())
    }

    pub(crate) fn require_unitary(&self) -> Result<()> {
        let residual = unitarity_residual(&self.m);
        if residual > tol::CONSTRUCT {
            return Err(Error::NotUnitary { residual });
        }
        Ok(())
    }

    /// `⟨bra| self |ket⟩`
    pub fn sandwich(&self, bra: &QState, ket: &QState) -> C64 {
        bra.amps().dotc(&(&self.m * ket.amps()))
    }
}

fn pauli(k: usize) -> CMatrix {
    match k {
        1 => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        2 => CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        3 => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        _ => CMatrix::identity(2, 2),
    }
}

// ---------------------------------------------------------------------------

/// Hermitian, positive semidefinite, unit-trace operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOp {
    m: CMatrix,
}

impl DensityOp {
    pub fn new(m: CMatrix) -> Result<Self> {
        QOperator::square(&m)?;
        let residual = hermiticity_residual(&m);
        if residual > tol::CONSTRUCT {
            return Err(Error::NotHermitian { residual });
        }
        let tr = trace(&m).re;
        if (tr - 1.0).abs() > tol::CONSTRUCT {
            return Err(Error::NotUnitTrace { trace: tr });
        }
        let min_eigenvalue = hermitian_eigenvalues(&m).into_iter().fold(f64::INFINITY, f64::min);
        if min_eigenvalue < tol::PSD_FLOOR {
            return Err(Error::NotPositive { min_eigenvalue });
        }
        Ok(Self { m })
    }

    /// Accepts channel outputs whose trace and Hermiticity carry the
    /// channel's own normalization error; symmetrizes and checks positivity.
    pub(crate) fn from_channel_output(m: CMatrix, trace_tolerance: f64) -> Result<Self> {
        let herm = (&m + m.adjoint()).unscale(2.0);
        let tr = trace(&herm).re;
        if (tr - 1.0).abs() > trace_tolerance {
            return Err(Error::NotUnitTrace { trace: tr });
        }
        let min_eigenvalue = hermitian_eigenvalues(&herm).into_iter().fold(f64::INFINITY, f64::min);
        if min_eigenvalue < tol::PSD_FLOOR {
            return Err(Error::NotPositive { min_eigenvalue });
        }
        Ok(Self { m: herm })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { m: CMatrix::identity(dim, dim).unscale(dim as f64) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        trace(&self.m).re
    }

    /// `Tr(ρ A)`
    pub fn expectation(&self, a: &QOperator) -> Result<C64> {
        if a.dim() != self.dim() {
            return Err(dim_mismatch("observable on density operator", self.dim(), a.dim()));
        }
        Ok(trace(&(&self.m * a.matrix())))
    }
}

// ---------------------------------------------------------------------------

/// Kronecker product, left factor major.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Self;
}

impl Tensor for QState {
    fn tensor(&self, other: &Self) -> Self {
        Self { amps: self.amps.kronecker(&other.amps) }
    }
}

impl Tensor for QOperator {
    fn tensor(&self, other: &Self) -> Self {
        use OperatorKind::*;
        let kind = match (self.kind, other.kind) {
            (Projector, Projector) => Projector,
            (Unitary, Unitary) => Unitary,
            (Hermitian | Projector, Hermitian | Projector) => Hermitian,
            _ => General,
        };
        Self { m: self.m.kronecker(&other.m), kind }
    }
}

impl Tensor for DensityOp {
    fn tensor(&self, other: &Self) -> Self {
        Self { m: self.m.kronecker(&other.m) }
    }
}

pub fn tensor<T: Tensor>(a: &T, b: &T) -> T {
    a.tensor(b)
}

// ---------------------------------------------------------------------------

/// `exp(scale · M)` with the default dimension limit.
pub fn matrix_exponential(m: &QOperator, scale: C64) -> Result<QOperator> {
    matrix_exponential_with_limit(m, scale, tol::MAX_EXP_DIM)
}

/// Hermitian and anti-Hermitian generators go through the spectral
/// decomposition; everything else through scaling-and-squaring Padé.
pub fn matrix_exponential_with_limit(m: &QOperator, scale: C64, limit: usize) -> Result<QOperator> {
    let d = m.dim();
    if d > limit {
        return Err(Error::DimensionLimit { dim: d, limit });
    }
    if scale == ZERO {
        return Ok(QOperator::identity(d));
    }
    let mat = m.matrix();
    let herm = hermiticity_residual(mat) <= tol::CONSTRUCT;
    let anti = !herm && max_diff(mat, &(-mat.adjoint())) <= tol::CONSTRUCT;
    let out = if herm {
        spectral_exp(mat, scale)
    } else if anti {
        // M = −iH with H = iM Hermitian, so exp(sM) = exp(−is·H)
        spectral_exp(&(mat * I), -I * scale)
    } else {
        (mat * scale).exp()
    };
    let kind = if unitarity_residual(&out) <= tol::CONSTRUCT {
        OperatorKind::Unitary
    } else {
        OperatorKind::General
    };
    Ok(QOperator { m: out, kind })
}

/// `exp(s·H)` for Hermitian `H` via `H = V Λ V†`.
pub(crate) fn spectral_exp(h: &CMatrix, s: C64) -> CMatrix {
    let eig = h.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let phases = eig.eigenvalues.map(|l| (s * l).exp());
    let mut scaled = v.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    scaled * v.adjoint()
}

/// `exp(−i t H)` for Hermitian `H`, unchecked.
pub(crate) fn unitary_exp(h: &CMatrix, t: f64) -> CMatrix {
    if h.nrows() == 2 {
        return unitary_exp_2x2(h, t);
    }
    spectral_exp(h, c(0.0, -t))
}

/// Closed form for 2×2 Hermitian generators, `H = a₀ + a·σ`.
fn unitary_exp_2x2(h: &CMatrix, t: f64) -> CMatrix {
    let a0 = 0.5 * (h[(0, 0)].re + h[(1, 1)].re);
    let az = 0.5 * (h[(0, 0)].re - h[(1, 1)].re);
    let ax = h[(1, 0)].re;
    let ay = h[(1, 0)].im;
    let r = (ax * ax + ay * ay + az * az).sqrt();
    let (cs, sn) = ((r * t).cos(), (r * t).sin());
    let global = C64::from_polar(1.0, -a0 * t);
    let (nx, ny, nz) = if r > 0.0 { (ax / r, ay / r, az / r) } else { (0.0, 0.0, 0.0) };
    // cos(rt) − i sin(rt) n·σ
    let m00 = c(cs, -sn * nz);
    let m11 = c(cs, sn * nz);
    let m01 = c(0.0, -sn) * c(nx, -ny);
    let m10 = c(0.0, -sn) * c(nx, ny);
    CMatrix::from_row_slice(2, 2, &[m00 * global, m01 * global, m10 * global, m11 * global])
}

// ---------------------------------------------------------------------------

/// Which tensor factor survives a partial trace.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Subsystem {
    First,
    Second,
}

/// Partial trace of a `(d_a·d_b)`-square matrix.
pub fn partial_trace_matrix(m: &CMatrix, dims: (usize, usize), keep: Subsystem) -> Result<CMatrix> {
    let (da, db) = dims;
    if m.nrows() != da * db || m.ncols() != da * db {
        return Err(dim_mismatch("partial trace input", da * db, m.nrows()));
    }
    let out = match keep {
        Subsystem::First => CMatrix::from_fn(da, da, |r, c| (0..db).map(|k| m[(r * db + k, c * db + k)]).sum()),
        Subsystem::Second => CMatrix::from_fn(db, db, |r, c| (0..da).map(|k| m[(k * db + r, k * db + c)]).sum()),
    };
    Ok(out)
}

pub fn partial_trace(rho: &DensityOp, dims: (usize, usize), keep: Subsystem) -> Result<DensityOp> {
    Ok(DensityOp { m: partial_trace_matrix(rho.matrix(), dims, keep)? })
}

// ---------------------------------------------------------------------------

/// Eigenpairs in ascending eigenvalue order.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<QState>,
}

impl HermitianEigen {
    /// Groups eigenvalues closer than `gap` and returns `(λ, P_λ)` pairs.
    pub fn eigenprojectors(&self, gap: f64) -> Vec<(f64, CMatrix)> {
        let mut out: Vec<(f64, CMatrix, usize)> = Vec::new();
        for (lambda, v) in self.values.iter().zip(&self.vectors) {
            let p = outer(v.amps(), v.amps());
            match out.last_mut() {
                Some((mean, proj, count)) if (lambda - *mean).abs() <= gap => {
                    *mean = (*mean * *count as f64 + lambda) / (*count as f64 + 1.0);
                    *proj += p;
                    *count += 1;
                }
                _ => out.push((*lambda, p, 1)),
            }
        }
        out.into_iter().map(|(l, p, _)| (l, p)).collect()
    }
}

pub fn eigendecompose_hermitian(m: &QOperator) -> Result<HermitianEigen> {
    m.require_hermitian()?;
    Ok(eigh(m.matrix()))
}

pub(crate) fn eigh(m: &CMatrix) -> HermitianEigen {
    // symmetrize away the sub-tolerance anti-Hermitian part
    let herm = (m + m.adjoint()).unscale(2.0);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = order
        .iter()
        .map(|&k| {
            let v: CVector = eig.eigenvectors.column(k).into_owned();
            QState::normalize_vector(v).expect("eigenvectors are nonzero")
        })
        .collect();
    HermitianEigen { values, vectors }
}

pub(crate) fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let herm = (m + m.adjoint()).unscale(2.0);
    herm.symmetric_eigenvalues().iter().copied().collect()
}

/// `‖Σ|φ⟩⟨φ| − 1‖_max` together with the orthonormality residual.
pub fn basis_residual(basis: &[QState], dim: usize) -> Result<f64> {
    if basis.iter().any(|b| b.dim() != dim) {
        return Err(Error::DimensionMismatch("basis element dimension".into()));
    }
    let mut sum = CMatrix::zeros(dim, dim);
    for b in basis {
        sum += outer(b.amps(), b.amps());
    }
    let mut residual = max_diff(&sum, &CMatrix::identity(dim, dim));
    for (j, a) in basis.iter().enumerate() {
        for b in &basis[j + 1..] {
            residual = residual.max(a.inner(b).norm());
        }
    }
    Ok(residual)
}

/// Errors unless `basis` is complete and orthonormal within [`tol::CONSTRUCT`].
pub fn require_complete_basis(basis: &[QState], dim: usize) -> Result<()> {
    let residual = basis_residual(basis, dim)?;
    if residual > tol::CONSTRUCT || basis.len() != dim {
        return Err(Error::IncompleteBasis { residual });
    }
    Ok(())
}
