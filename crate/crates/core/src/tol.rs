//! Tolerance policy shared by all modules.
//!
//! Constructors validate at [`CONSTRUCT`], identity checks assert at
//! [`EQUALITY`]. Iterative and adiabatic routines carry their own thresholds
//! next to the routine.

/// Structural checks at construction (Hermiticity, unitarity, projector).
pub const CONSTRUCT: f64 = 1e-10;

/// Equality assertions between two algebraic routes.
pub const EQUALITY: f64 = 1e-9;

/// Unit-norm tolerance for states after construction or normalization.
pub const STATE_NORM: f64 = 1e-12;

/// Kraus normalization (Σ E†E = 1) accepted by [`crate::channel::Channel`].
pub const KRAUS_NORMALIZATION: f64 = 1e-9;

/// Kraus factors whose max-norm falls below this are pruned.
pub const KRAUS_PRUNE: f64 = 1e-12;

/// Smallest eigenvalue accepted for positive semidefinite operators.
pub const PSD_FLOOR: f64 = -1e-10;

/// Default floor on |⟨f|VU|i⟩| before a weak value is reported.
pub const OVERLAP_FLOOR: f64 = 1e-8;

/// Post-selection overlaps below this count as exactly vanishing; such terms
/// carry zero probability weight in basis decompositions.
pub const VANISHING_OVERLAP: f64 = 1e-14;

/// Eigenvalues closer than this are merged into a single eigenspace.
pub const EIGEN_CLUSTER_GAP: f64 = 1e-8;

/// Largest matrix accepted by the matrix exponential unless overridden.
pub const MAX_EXP_DIM: usize = 256;
