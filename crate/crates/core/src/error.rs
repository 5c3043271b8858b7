use thiserror::Error;

/// Every numerical guard in the crate reports through this type. The variant
/// name doubles as the guard identifier surfaced by the CLI.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("DimensionMismatch: {0}")]
    DimensionMismatch(String),

    #[error("DimensionLimit: dimension {dim} exceeds the limit {limit}")]
    DimensionLimit { dim: usize, limit: usize },

    #[error("NotNormalized: norm² = {norm_sq}")]
    NotNormalized { norm_sq: f64 },

    #[error("NotHermitian: ‖M − M†‖_max = {residual:e}")]
    NotHermitian { residual: f64 },

    #[error("NotUnitary: ‖M†M − 1‖_max = {residual:e}")]
    NotUnitary { residual: f64 },

    #[error("NotProjector: ‖M² − M‖_max = {residual:e}")]
    NotProjector { residual: f64 },

    #[error("NotPositive: minimum eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },

    #[error("NotUnitTrace: trace = {trace}")]
    NotUnitTrace { trace: f64 },

    #[error("NearOrthogonalSelection: |overlap| = {overlap:e} ≤ floor {floor:e}")]
    NearOrthogonalSelection { overlap: f64, floor: f64 },

    #[error("VanishingOverlap: {0}")]
    VanishingOverlap(String),

    #[error("IncompleteBasis: ‖Σ|φ⟩⟨φ| − 1‖_max = {residual:e}")]
    IncompleteBasis { residual: f64 },

    #[error("IncompleteProjectorFamily: {0}")]
    IncompleteProjectorFamily(String),

    #[error("AllPathsVanish: every ABL path amplitude is zero")]
    AllPathsVanish,

    #[error("InvalidChannel: {0}")]
    InvalidChannel(String),

    #[error("InconsistentConstruction: {0}")]
    InconsistentConstruction(String),

    #[error("AntipodalSelection: 1 + r_i·r_f = {value:e}")]
    AntipodalSelection { value: f64 },

    #[error("InvalidBlochVector: |r| = {norm}")]
    InvalidBlochVector { norm: f64 },

    #[error("GammaEqualsEta: probe amplitudes γ = η = {value} give zero measurement strength")]
    GammaEqualsEta { value: f64 },

    #[error("InvalidProbeAmplitudes: {0}")]
    InvalidProbeAmplitudes(String),

    #[error("DegenerateFit: {0}")]
    DegenerateFit(String),

    #[error("GridUnderResolved: {0}")]
    GridUnderResolved(String),

    #[error("WindowGuard: {0}")]
    WindowGuard(String),

    #[error("SpectralGapViolation: gap {gap:e} at t = {time} is below {min_gap:e}")]
    SpectralGapViolation { gap: f64, time: f64, min_gap: f64 },

    #[error("InsufficientSteps: {steps} < minimum {minimum}")]
    InsufficientSteps { steps: usize, minimum: usize },

    #[error("SlicingNonConvergence: doubling slices changed the propagator by {change:e}")]
    SlicingNonConvergence { change: f64 },

    #[error("InvalidTimes: {0}")]
    InvalidTimes(String),

    #[error("InvalidArgument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Guard identifier, e.g. `"NearOrthogonalSelection"`.
    pub fn guard_name(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::DimensionLimit { .. } => "DimensionLimit",
            Error::NotNormalized { .. } => "NotNormalized",
            Error::NotHermitian { .. } => "NotHermitian",
            Error::NotUnitary { .. } => "NotUnitary",
            Error::NotProjector { .. } => "NotProjector",
            Error::NotPositive { .. } => "NotPositive",
            Error::NotUnitTrace { .. } => "NotUnitTrace",
            Error::NearOrthogonalSelection { .. } => "NearOrthogonalSelection",
            Error::VanishingOverlap(_) => "VanishingOverlap",
            Error::IncompleteBasis { .. } => "IncompleteBasis",
            Error::IncompleteProjectorFamily(_) => "IncompleteProjectorFamily",
            Error::AllPathsVanish => "AllPathsVanish",
            Error::InvalidChannel(_) => "InvalidChannel",
            Error::InconsistentConstruction(_) => "InconsistentConstruction",
            Error::AntipodalSelection { .. } => "AntipodalSelection",
            Error::InvalidBlochVector { .. } => "InvalidBlochVector",
            Error::GammaEqualsEta { .. } => "GammaEqualsEta",
            Error::InvalidProbeAmplitudes(_) => "InvalidProbeAmplitudes",
            Error::DegenerateFit(_) => "DegenerateFit",
            Error::GridUnderResolved(_) => "GridUnderResolved",
            Error::WindowGuard(_) => "WindowGuard",
            Error::SpectralGapViolation { .. } => "SpectralGapViolation",
            Error::InsufficientSteps { .. } => "InsufficientSteps",
            Error::SlicingNonConvergence { .. } => "SlicingNonConvergence",
            Error::InvalidTimes(_) => "InvalidTimes",
            Error::InvalidArgument(_) => "InvalidArgument",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_mismatch(what: &str, expected: usize, got: usize) -> Error {
    Error::DimensionMismatch(format!("{what}: expected {expected}, got {got}"))
}
