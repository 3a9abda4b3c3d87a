//! Injectable error channels, their leakage classification, and the analytic
//! lowest-order decay predictions for the single-parameter channels.
//!
//! Channel conventions (all on the full 4-dim space, computational basis):
//! - `Depolarizing`: ρ → (1−ε)ρ + ε·𝟙/4.
//! - `IntensityError`: the unitary exp[−iεZZ], an over-rotation of the
//!   phase gate. Subspace preserving.
//! - `OpticalPumping`: independent amplitude damping of each qubit toward
//!   |0⟩ with rate ε; the composite damps toward |00⟩.
//! - `InhomogeneousField`: independent phase damping of each qubit,
//!   realized as a Z flip with probability ε (off-diagonals shrink by
//!   1 − 2ε). Slowly fluctuating collective fields dephase both qubits.
//!
//! The per-qubit realizations of the last two reproduce the analytic decay
//! table of [`analytic_decay`] exactly to first order, which is checked in
//! the tests, so no collective variant is needed.

use crate::error::SrbError;
use crate::qgroups::{weyl_unitary, WeylLabel};
use crate::qops::{kraus_to_super, leakage_seepage, unitary_to_super, SubspaceSplit, SuperOp};
use crate::{tol, C64, CMat, Result};
use serde::{Deserialize, Serialize};

/// Built-in channel families. `Custom` carries a free-form label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Depolarizing,
    IntensityError,
    OpticalPumping,
    InhomogeneousField,
    Custom(String),
}

impl std::fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ChannelKind::Depolarizing => write!(f, "depolarizing"),
            ChannelKind::IntensityError => write!(f, "intensity_error"),
            ChannelKind::OpticalPumping => write!(f, "optical_pumping"),
            ChannelKind::InhomogeneousField => write!(f, "inhomogeneous_field"),
            ChannelKind::Custom(label) => write!(f, "custom:{label}"),
        }
    }
}

/// A CPTP error channel parameterized by a single magnitude.
#[derive(Debug, Clone)]
pub struct ErrorChannel {
    pub kind: ChannelKind,
    pub epsilon: f64,
    pub superop: SuperOp,
}

impl ErrorChannel {
    /// Wrap an explicit Kraus decomposition; CPTP is enforced.
    pub fn from_kraus(label: &str, epsilon: f64, kraus: &[CMat]) -> Result<ErrorChannel> {
        let superop = kraus_to_super(kraus)?;
        let ch = ErrorChannel { kind: ChannelKind::Custom(label.into()), epsilon, superop };
        ch.check_cptp()?;
        Ok(ch)
    }

    /// Wrap an explicit superoperator; CPTP is enforced.
    pub fn from_superop(label: &str, epsilon: f64, superop: SuperOp) -> Result<ErrorChannel> {
        let ch = ErrorChannel { kind: ChannelKind::Custom(label.into()), epsilon, superop };
        ch.check_cptp()?;
        Ok(ch)
    }

    fn check_cptp(&self) -> Result<()> {
        if !self.superop.is_trace_preserving(tol::TRACE_PRESERVING) {
            return Err(SrbError::InvalidChannel(format!(
                "{}: trace preservation violated ({:.3e})",
                self.kind,
                self.superop.tp_defect()
            )));
        }
        let min_eig = self.superop.min_choi_eigenvalue();
        if min_eig < tol::CP_EIGENVALUE {
            return Err(SrbError::InvalidChannel(format!(
                "{}: Choi eigenvalue {min_eig:.3e} below {:.1e}",
                self.kind,
                tol::CP_EIGENVALUE
            )));
        }
        Ok(())
    }
}

/// Tensor two single-qubit Kraus sets into the two-qubit set.
fn tensor_kraus(a: &[CMat], b: &[CMat]) -> Vec<CMat> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for ka in a {
        for kb in b {
            out.push(ka.kronecker(kb));
        }
    }
    out
}

/// Construct one of the built-in channels at magnitude `epsilon`.
pub fn make_channel(kind: ChannelKind, epsilon: f64) -> Result<ErrorChannel> {
    if epsilon < 0.0 {
        return Err(SrbError::InvalidChannel("epsilon must be non-negative".into()));
    }
    let needs_unit_range = !matches!(kind, ChannelKind::IntensityError);
    if needs_unit_range && epsilon > 1.0 {
        return Err(SrbError::InvalidChannel(format!("{kind}: epsilon {epsilon} outside [0, 1]")));
    }
    let superop = match &kind {
        ChannelKind::Depolarizing => {
            let id = CMat::identity(4, 4);
            let one = crate::qops::vectorize(&id);
            let mat = CMat::identity(16, 16) * C64::new(1.0 - epsilon, 0.0)
                + (&one * one.adjoint()) * C64::new(epsilon / 4.0, 0.0);
            SuperOp::new(4, mat)
        }
        ChannelKind::IntensityError => {
            // ZZ = diag(1, −1, −1, 1) in the computational basis.
            let d = crate::CVec::from_vec(vec![
                C64::from_polar(1.0, -epsilon),
                C64::from_polar(1.0, epsilon),
                C64::from_polar(1.0, epsilon),
                C64::from_polar(1.0, -epsilon),
            ]);
            unitary_to_super(&CMat::from_diagonal(&d))?
        }
        ChannelKind::OpticalPumping => {
            let mut k0 = CMat::identity(2, 2);
            k0[(1, 1)] = C64::new((1.0 - epsilon).sqrt(), 0.0);
            let mut k1 = CMat::zeros(2, 2);
            k1[(0, 1)] = C64::new(epsilon.sqrt(), 0.0);
            let single = vec![k0, k1];
            kraus_to_super(&tensor_kraus(&single, &single))?
        }
        ChannelKind::InhomogeneousField => {
            let id = CMat::identity(2, 2) * C64::new((1.0 - epsilon).sqrt(), 0.0);
            let z = CMat::from_diagonal(&crate::CVec::from_vec(vec![
                C64::new(epsilon.sqrt(), 0.0),
                C64::new(-(epsilon.sqrt()), 0.0),
            ]));
            let single = vec![id, z];
            kraus_to_super(&tensor_kraus(&single, &single))?
        }
        ChannelKind::Custom(label) => {
            return Err(SrbError::InvalidChannel(format!(
                "custom channel '{label}' needs explicit Kraus operators"
            )));
        }
    };
    let ch = ErrorChannel { kind, epsilon, superop };
    ch.check_cptp()?;
    Ok(ch)
}

/// Depolarizing restricted to the qutrit block: with probability ε the
/// symmetric population is scrambled by a random embedded Weyl gate (and
/// symmetric↔antisymmetric coherences die); the singlet is untouched.
/// The standard decay of this channel is exactly r = 1 − ε with t = 1.
pub fn qutrit_depolarizing(epsilon: f64) -> Result<ErrorChannel> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(SrbError::InvalidChannel("qutrit_depolarizing: epsilon outside [0, 1]".into()));
    }
    let split = SubspaceSplit::two_qubit();
    let mut kraus = vec![CMat::identity(4, 4) * C64::new((1.0 - epsilon).sqrt(), 0.0)];
    let weight = C64::new((epsilon / 9.0).sqrt(), 0.0);
    for w in WeylLabel::all() {
        let embedded = &split.sym_isometry * weyl_unitary(w) * split.sym_isometry.adjoint()
            + split.leak_projector();
        kraus.push(embedded * weight);
    }
    let mut ch = ErrorChannel {
        kind: ChannelKind::Custom("qutrit_depolarizing".into()),
        epsilon,
        superop: kraus_to_super(&kraus)?,
    };
    ch.check_cptp()?;
    ch.kind = ChannelKind::Custom("qutrit_depolarizing".into());
    Ok(ch)
}

/// Coherent rotation between the symmetric one-bright state and the singlet
/// with population transfer ε = sin²χ per application. Produces equal
/// leakage and seepage L = S = ε/√3, so its leakage decay is 1 − 4ε/3.
pub fn subspace_mixer(epsilon: f64) -> Result<ErrorChannel> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(SrbError::InvalidChannel("subspace_mixer: epsilon outside [0, 1]".into()));
    }
    let chi = epsilon.sqrt().asin();
    let split = SubspaceSplit::two_qubit();
    let b1 = split.sym_isometry.column(1).into_owned();
    let b3 = split.asym_vector.column(0).into_owned();
    let cos = C64::new(chi.cos() - 1.0, 0.0);
    let sin = C64::new(0.0, -chi.sin());
    let u = CMat::identity(4, 4)
        + (&b1 * b1.adjoint() + &b3 * b3.adjoint()) * cos
        + (&b1 * b3.adjoint() + &b3 * b1.adjoint()) * sin;
    let mut ch = ErrorChannel {
        kind: ChannelKind::Custom("subspace_mixer".into()),
        epsilon,
        superop: unitary_to_super(&u)?,
    };
    ch.check_cptp()?;
    ch.kind = ChannelKind::Custom("subspace_mixer".into());
    Ok(ch)
}

// ---------------------------------------------------------------------------
// Noise model
// ---------------------------------------------------------------------------

/// Error channels attached to a simulated experiment. `None` slots are
/// ideal. Gate channels apply after the gate they decorate; the XX-YY gate
/// counts as a phase-gate slot since it substitutes for one.
#[derive(Debug, Clone, Default)]
pub struct NoiseModel {
    pub per_phase_gate: Option<ErrorChannel>,
    pub per_rotation: Option<ErrorChannel>,
    /// Extra channel applied once after each compiled Clifford.
    pub per_clifford: Option<ErrorChannel>,
    pub prep: Option<ErrorChannel>,
    pub measure: Option<ErrorChannel>,
}

impl NoiseModel {
    pub fn ideal() -> Self {
        NoiseModel::default()
    }

    pub fn is_ideal(&self) -> bool {
        self.per_phase_gate.is_none()
            && self.per_rotation.is_none()
            && self.per_clifford.is_none()
            && self.prep.is_none()
            && self.measure.is_none()
    }
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelType {
    /// Subspace preserving: L = S = 0.
    Type1,
    /// Mixes the RB and leakage subspaces.
    Type2,
}

#[derive(Debug, Clone, Copy)]
pub struct Classification {
    pub channel_type: ChannelType,
    pub leakage: f64,
    pub seepage: f64,
}

/// Classify a channel by its leakage and seepage rates.
pub fn classify_channel(ch: &ErrorChannel) -> Classification {
    let split = SubspaceSplit::two_qubit();
    let (leakage, seepage) = leakage_seepage(&ch.superop, &split);
    let channel_type = if leakage.max(seepage) < tol::CLASSIFICATION {
        ChannelType::Type1
    } else {
        ChannelType::Type2
    };
    Classification { channel_type, leakage, seepage }
}

// ---------------------------------------------------------------------------
// Analytic decay predictions
// ---------------------------------------------------------------------------

/// Lowest-order expansions of the per-phase-gate standard decay r, leakage
/// decay t, and the gap between full and extended-sub fidelity:
///
/// | channel              | r          | t        | gap    |
/// |----------------------|------------|----------|--------|
/// | intensity error      | 1 − ε²     | 1        | ε²/5   |
/// | optical pumping      | 1 − 13ε/12 | 1 − 4ε/3 | 2ε/5   |
/// | inhomogeneous field  | 1 − 13ε/6  | 1 − 8ε/3 | ε²/40  |
pub fn analytic_decay(kind: &ChannelKind, epsilon: f64) -> Result<(f64, f64, f64)> {
    match kind {
        ChannelKind::IntensityError => {
            Ok((1.0 - epsilon * epsilon, 1.0, epsilon * epsilon / 5.0))
        }
        ChannelKind::OpticalPumping => {
            Ok((1.0 - 13.0 * epsilon / 12.0, 1.0 - 4.0 * epsilon / 3.0, 2.0 * epsilon / 5.0))
        }
        ChannelKind::InhomogeneousField => {
            Ok((1.0 - 13.0 * epsilon / 6.0, 1.0 - 8.0 * epsilon / 3.0, epsilon * epsilon / 40.0))
        }
        other => Err(SrbError::InvalidInput(format!(
            "analytic_decay: no expansion tabulated for {other}"
        ))),
    }
}
