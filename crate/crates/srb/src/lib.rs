//! Subspace randomized benchmarking (SRB) simulator and analysis toolkit.
//!
//! Two qubits driven only by exchange-symmetric gates (collective rotations
//! and a ZZ phase gate) stay block-diagonal with respect to the symmetric
//! triplet / antisymmetric singlet decomposition. Benchmarking runs inside
//! the three-dimensional symmetric ("qutrit") subspace; population that
//! crosses into the singlet is leakage. This crate builds the 216-element
//! qutrit Clifford group, compiles each element into physical gates, runs
//! noisy benchmarking sequences in the Liouville representation, and fits the
//! standard and leakage decay curves to estimate gate fidelities.
//!
//! Module map:
//! - [`qops`] — complex linear algebra, superoperators, subspace split
//! - [`qgroups`] — Weyl and qutrit-Clifford group tables
//! - [`synth`] — physical gate set and numerical Clifford synthesis
//! - [`noise`] — injectable error channels and their classification
//! - [`engine`] — sequence generation, noisy simulation, detector model
//! - [`analysis`] — decay fits, bootstrap, fidelity formulas, twirl algebra

pub mod analysis;
pub mod engine;
pub mod error;
pub mod noise;
pub(crate) mod optim;
pub mod qgroups;
pub mod qops;
pub mod seed;
pub mod synth;

pub use error::SrbError;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex (super)vector.
pub type CVec = nalgebra::DVector<C64>;

/// Named numerical tolerances. These are the crate-wide defaults; operations
/// that check them accept an explicit override.
pub mod tol {
    /// Max-abs deviation from U†U = 𝟙 accepted for a unitary input.
    pub const UNITARITY: f64 = 1e-10;
    /// Max-abs off-block entry for a subspace-preserving operator.
    pub const BLOCK_DIAG: f64 = 1e-14;
    /// Max-abs deviation of ⟨⟨𝟙|S from ⟨⟨𝟙| for a trace-preserving map.
    pub const TRACE_PRESERVING: f64 = 1e-10;
    /// Most negative Choi eigenvalue accepted for a CP map.
    pub const CP_EIGENVALUE: f64 = -1e-10;
    /// Kraus completeness: max-abs deviation of Σ A†A from 𝟙.
    pub const KRAUS_COMPLETENESS: f64 = 1e-10;
    /// Residual infidelity required of a synthesized Clifford recipe.
    pub const SYNTHESIS_RESIDUAL: f64 = 1e-8;
    /// Leakage/seepage below this is treated as exactly zero when
    /// classifying a channel.
    pub const CLASSIFICATION: f64 = 1e-9;
}

pub type Result<T> = std::result::Result<T, SrbError>;
