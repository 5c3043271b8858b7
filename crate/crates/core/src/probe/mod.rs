//! Continuous pointer probes and qubit meters coupled to a pre- and
//! post-selected system.

pub mod grid;
pub mod protective;
pub mod qubit;
pub mod von_neumann;

pub use grid::{gaussian_probe, probe_moments, GridParams, ProbeGrid, ProbeMoments};
pub use protective::{adiabatic_shift_quadrature, protective_measurement, ProtectiveConfig, ProtectiveOutcome};
pub use qubit::{
    cnot_probability, cnot_probability_circuit, cnot_readout, cnot_weak_value_estimate, qubit_probe_shift,
    qubit_weak_value, BlochVector, CnotEstimate, CnotSetup, QubitProbeSetup, QubitShift, DEFAULT_EPSILONS,
};
pub use von_neumann::{
    exact_shifts, exact_von_neumann, full_order_probe, jozsa_shifts, verify_weak_limit, ConditionedProbe,
    WeakLimitReport, WeakLimitRow,
};
