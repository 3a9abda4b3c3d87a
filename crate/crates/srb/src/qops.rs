//! Complex linear algebra and Liouville-representation channel algebra over
//! the two-qubit space with its symmetric/antisymmetric decomposition.
//!
//! Superoperators use column-stacking vectorization in the computational
//! basis, so the superoperator of a unitary `U` is literally `U* ⊗ U` and
//! `⟨⟨A|B⟩⟩ = Tr(A†B)` is the plain inner product of the stacked vectors.
//! A Hermitian (generalized Gell-Mann) operator basis is available as a view
//! for the formulas whose traces should come out real.

use crate::error::SrbError;
use crate::{tol, C64, CMat, CVec, Result};
use rand::Rng;

// ---------------------------------------------------------------------------
// Vectorization and small helpers
// ---------------------------------------------------------------------------

/// Column-stacking vectorization |A⟩⟩ of an operator A.
///
/// nalgebra stores matrices column-major, so this is a straight copy.
pub fn vectorize(a: &CMat) -> CVec {
    CVec::from_column_slice(a.as_slice())
}

/// Inverse of [`vectorize`] for a d²-dimensional supervector.
pub fn unvectorize(v: &CVec, d: usize) -> CMat {
    assert_eq!(v.len(), d * d, "supervector length must be d²");
    CMat::from_column_slice(d, d, v.as_slice())
}

/// Hilbert–Schmidt inner product ⟨⟨A|B⟩⟩ = Tr(A†B).
pub fn hs_inner(a: &CMat, b: &CMat) -> C64 {
    vectorize(a).dotc(&vectorize(b))
}

/// Max-abs entry of a matrix; the norm used by all tolerance checks.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Deviation of U from unitarity, max-abs of U†U − 𝟙.
pub fn unitarity_defect(u: &CMat) -> f64 {
    let d = u.nrows();
    max_abs(&(u.adjoint() * u - CMat::identity(d, d)))
}

pub fn is_unitary(u: &CMat, tolerance: f64) -> bool {
    u.is_square() && unitarity_defect(u) <= tolerance
}

/// Haar-random d×d unitary (QR of a Ginibre matrix with phase fix).
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(d, d, |_, _| {
        // Box-Muller pairs; the raw normals need no exact scaling here.
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let r = (-2.0 * u1.ln()).sqrt();
        C64::new(r * (2.0 * std::f64::consts::PI * u2).cos(), r * (2.0 * std::f64::consts::PI * u2).sin())
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

// ---------------------------------------------------------------------------
// SuperOp
// ---------------------------------------------------------------------------

/// A quantum process in Liouville (transfer-matrix) form.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOp {
    /// Hilbert dimension d; the matrix is d² × d².
    pub dim: usize,
    pub mat: CMat,
}

impl SuperOp {
    pub fn new(dim: usize, mat: CMat) -> Self {
        assert_eq!(mat.nrows(), dim * dim);
        assert_eq!(mat.ncols(), dim * dim);
        SuperOp { dim, mat }
    }

    pub fn identity(dim: usize) -> Self {
        SuperOp { dim, mat: CMat::identity(dim * dim, dim * dim) }
    }

    /// Apply to a vectorized operator.
    pub fn apply_vec(&self, rho: &CVec) -> CVec {
        &self.mat * rho
    }

    /// Apply to an operator given as a matrix.
    pub fn apply(&self, rho: &CMat) -> CMat {
        unvectorize(&self.apply_vec(&vectorize(rho)), self.dim)
    }

    /// Composition self ∘ other (other acts first).
    pub fn compose(&self, other: &SuperOp) -> SuperOp {
        assert_eq!(self.dim, other.dim);
        SuperOp { dim: self.dim, mat: &self.mat * &other.mat }
    }

    /// Deviation from trace preservation, max-abs of ⟨⟨𝟙|S − ⟨⟨𝟙|.
    pub fn tp_defect(&self) -> f64 {
        let one = vectorize(&CMat::identity(self.dim, self.dim));
        let lhs = self.mat.adjoint() * &one;
        (lhs - one).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_trace_preserving(&self, tolerance: f64) -> bool {
        self.tp_defect() <= tolerance
    }

    /// Choi matrix (reshuffle); Hermitian for Hermiticity-preserving maps.
    pub fn choi(&self) -> CMat {
        let d = self.dim;
        let mut c = CMat::zeros(d * d, d * d);
        // Choi[(i,k),(j,l)] = ⟨k|Λ(|i⟩⟨j|)|l⟩ = S[(l·d+k),(j·d+i)]
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        c[(i * d + k, j * d + l)] = self.mat[(l * d + k, j * d + i)];
                    }
                }
            }
        }
        c
    }

    /// Smallest Choi eigenvalue; ≥ 0 (within tolerance) iff the map is CP.
    pub fn min_choi_eigenvalue(&self) -> f64 {
        let choi = self.choi();
        // Symmetrize to wash out float asymmetry before the Hermitian solve.
        let h = (&choi + choi.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn is_cptp(&self, tp_tol: f64, cp_tol: f64) -> bool {
        self.is_trace_preserving(tp_tol) && self.min_choi_eigenvalue() >= cp_tol
    }
}

/// Superoperator U* ⊗ U of a unitary conjugation.
///
/// Errors if `U` is not square-unitary within [`tol::UNITARITY`].
pub fn unitary_to_super(u: &CMat) -> Result<SuperOp> {
    if !u.is_square() {
        return Err(SrbError::InvalidInput(format!(
            "unitary_to_super: matrix is {}x{}, not square",
            u.nrows(),
            u.ncols()
        )));
    }
    let defect = unitarity_defect(u);
    if defect > tol::UNITARITY {
        return Err(SrbError::InvalidInput(format!(
            "unitary_to_super: unitarity defect {defect:.3e} exceeds {:.1e}",
            tol::UNITARITY
        )));
    }
    Ok(SuperOp::new(u.nrows(), u.conjugate().kronecker(u)))
}

/// Superoperator Σ_i A_i* ⊗ A_i of a Kraus decomposition.
///
/// Errors if the operators mismatch in shape or violate Σ A†A = 𝟙 within
/// [`tol::KRAUS_COMPLETENESS`].
pub fn kraus_to_super(kraus: &[CMat]) -> Result<SuperOp> {
    let first = kraus
        .first()
        .ok_or_else(|| SrbError::InvalidChannel("kraus_to_super: empty Kraus set".into()))?;
    let d = first.nrows();
    if !first.is_square() || kraus.iter().any(|k| k.nrows() != d || k.ncols() != d) {
        return Err(SrbError::InvalidChannel(
            "kraus_to_super: Kraus operators must be square with equal dims".into(),
        ));
    }
    let mut completeness = CMat::zeros(d, d);
    let mut mat = CMat::zeros(d * d, d * d);
    for k in kraus {
        completeness += k.adjoint() * k;
        mat += k.conjugate().kronecker(k);
    }
    let defect = max_abs(&(completeness - CMat::identity(d, d)));
    if defect > tol::KRAUS_COMPLETENESS {
        return Err(SrbError::InvalidChannel(format!(
            "kraus_to_super: completeness defect {defect:.3e} exceeds {:.1e}",
            tol::KRAUS_COMPLETENESS
        )));
    }
    Ok(SuperOp::new(d, mat))
}

/// Process fidelity F = Tr(Λ)/d² of an error channel (target already
/// inverted out). Real part is taken; the imaginary part of the trace is
/// zero for any Hermiticity-preserving map.
pub fn process_fidelity(s: &SuperOp) -> f64 {
    s.mat.trace().re / (s.dim * s.dim) as f64
}

// ---------------------------------------------------------------------------
// Subspace split
// ---------------------------------------------------------------------------

/// The symmetric/antisymmetric decomposition of the two-qubit space.
///
/// Basis ordering is (|00⟩, (|01⟩+|10⟩)/√2, |11⟩, (|01⟩−|10⟩)/√2), so the
/// qutrit index k corresponds to k bright ions and index 3 is the leakage
/// (singlet) state.
#[derive(Debug, Clone)]
pub struct SubspaceSplit {
    /// RB-subspace dimension.
    pub d1: usize,
    /// Leakage-subspace dimension.
    pub d2: usize,
    /// 4×3 isometry whose columns are the symmetric basis vectors.
    pub sym_isometry: CMat,
    /// The singlet vector as a 4×1 column.
    pub asym_vector: CMat,
}

impl Default for SubspaceSplit {
    fn default() -> Self {
        Self::two_qubit()
    }
}

impl SubspaceSplit {
    /// The d₁ = 3, d₂ = 1 split used everywhere in this crate.
    pub fn two_qubit() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut v = CMat::zeros(4, 3);
        v[(0, 0)] = C64::new(1.0, 0.0);
        v[(1, 1)] = C64::new(s, 0.0);
        v[(2, 1)] = C64::new(s, 0.0);
        v[(3, 2)] = C64::new(1.0, 0.0);
        let mut a = CMat::zeros(4, 1);
        a[(1, 0)] = C64::new(s, 0.0);
        a[(2, 0)] = C64::new(-s, 0.0);
        SubspaceSplit { d1: 3, d2: 1, sym_isometry: v, asym_vector: a }
    }

    pub fn dim(&self) -> usize {
        self.d1 + self.d2
    }

    /// Projector 𝟙₁ onto the RB subspace (4×4, computational basis).
    pub fn rb_projector(&self) -> CMat {
        &self.sym_isometry * self.sym_isometry.adjoint()
    }

    /// Projector 𝟙₂ onto the leakage subspace.
    pub fn leak_projector(&self) -> CMat {
        &self.asym_vector * self.asym_vector.adjoint()
    }

    /// Restrict a 4×4 operator to its symmetric 3×3 block.
    pub fn sym_block(&self, m: &CMat) -> CMat {
        self.sym_isometry.adjoint() * m * &self.sym_isometry
    }

    /// The (singlet, singlet) matrix element of a 4×4 operator.
    pub fn asym_element(&self, m: &CMat) -> C64 {
        (self.asym_vector.adjoint() * m * &self.asym_vector)[(0, 0)]
    }

    /// Max-abs entry of the off-block (symmetric↔antisymmetric) corners.
    pub fn off_block_defect(&self, m: &CMat) -> f64 {
        let up = self.sym_isometry.adjoint() * m * &self.asym_vector;
        let down = self.asym_vector.adjoint() * m * &self.sym_isometry;
        max_abs(&up).max(max_abs(&down))
    }
}

/// Leakage rate L = Tr(Λ[𝟙₁]𝟙₂)/√(d₁d₂) and seepage rate
/// S = Tr(𝟙₁Λ[𝟙₂])/√(d₁d₂) of a full-space channel.
pub fn leakage_seepage(s: &SuperOp, split: &SubspaceSplit) -> (f64, f64) {
    assert_eq!(s.dim, split.dim(), "channel must act on the full space");
    let norm = 1.0 / ((split.d1 * split.d2) as f64).sqrt();
    let p1 = split.rb_projector();
    let p2 = split.leak_projector();
    let leak = (s.apply(&p1) * &p2).trace().re * norm;
    let seep = (p1 * s.apply(&p2)).trace().re * norm;
    (leak, seep)
}

// ---------------------------------------------------------------------------
// Spin-1 algebra and symmetric embedding
// ---------------------------------------------------------------------------

/// Spin-1 angular momentum matrices (Jx, Jy, Jz) in the symmetric basis
/// (|00⟩, (|01⟩+|10⟩)/√2, |11⟩). These are the generators realized by the
/// collective single-qubit gates.
pub fn spin1_operators() -> (CMat, CMat, CMat) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let jx = CMat::from_row_slice(
        3,
        3,
        &[
            C64::new(0.0, 0.0), C64::new(s, 0.0), C64::new(0.0, 0.0),
            C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(s, 0.0),
            C64::new(0.0, 0.0), C64::new(s, 0.0), C64::new(0.0, 0.0),
        ],
    );
    let jy = CMat::from_row_slice(
        3,
        3,
        &[
            C64::new(0.0, 0.0), C64::new(0.0, -s), C64::new(0.0, 0.0),
            C64::new(0.0, s), C64::new(0.0, 0.0), C64::new(0.0, -s),
            C64::new(0.0, 0.0), C64::new(0.0, s), C64::new(0.0, 0.0),
        ],
    );
    let jz = CMat::from_diagonal(&CVec::from_vec(vec![
        C64::new(1.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(-1.0, 0.0),
    ]));
    (jx, jy, jz)
}

/// Embed a 3×3 unitary on the symmetric subspace together with a scalar
/// phase on the singlet: returns the 4×4 unitary U₃ ⊕ phase in the
/// computational basis.
pub fn embed_symmetric(u3: &CMat, phase: C64) -> Result<CMat> {
    if u3.nrows() != 3 || u3.ncols() != 3 {
        return Err(SrbError::InvalidInput("embed_symmetric: need a 3×3 matrix".into()));
    }
    if !is_unitary(u3, tol::UNITARITY) {
        return Err(SrbError::InvalidInput("embed_symmetric: block is not unitary".into()));
    }
    if (phase.norm() - 1.0).abs() > tol::UNITARITY {
        return Err(SrbError::InvalidInput(format!(
            "embed_symmetric: |phase| = {} is not 1",
            phase.norm()
        )));
    }
    let split = SubspaceSplit::two_qubit();
    Ok(&split.sym_isometry * u3 * split.sym_isometry.adjoint()
        + (&split.asym_vector * split.asym_vector.adjoint()) * phase)
}

// ---------------------------------------------------------------------------
// Hermitian operator basis (normalized-Pauli view)
// ---------------------------------------------------------------------------

/// Orthonormal Hermitian operator basis for dimension d (generalized
/// Gell-Mann matrices plus 𝟙/√d as the first element).
pub fn hermitian_basis(d: usize) -> Vec<CMat> {
    let mut basis = Vec::with_capacity(d * d);
    let norm = 1.0 / (d as f64).sqrt();
    basis.push(CMat::identity(d, d) * C64::new(norm, 0.0));
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..d {
        for j in (i + 1)..d {
            let mut sym = CMat::zeros(d, d);
            sym[(i, j)] = C64::new(s, 0.0);
            sym[(j, i)] = C64::new(s, 0.0);
            basis.push(sym);
            let mut asym = CMat::zeros(d, d);
            asym[(i, j)] = C64::new(0.0, -s);
            asym[(j, i)] = C64::new(0.0, s);
            basis.push(asym);
        }
    }
    for k in 1..d {
        // diag(1,...,1,-k,0,...)/√(k(k+1))
        let norm = 1.0 / ((k * (k + 1)) as f64).sqrt();
        let mut m = CMat::zeros(d, d);
        for i in 0..k {
            m[(i, i)] = C64::new(norm, 0.0);
        }
        m[(k, k)] = C64::new(-(k as f64) * norm, 0.0);
        basis.push(m);
    }
    basis
}

/// Transfer-matrix view of a superoperator in the Hermitian basis:
/// T[a, b] = ⟨⟨P_a|S|P_b⟩⟩. Real for Hermiticity-preserving maps.
pub fn hermitian_transfer_matrix(s: &SuperOp) -> nalgebra::DMatrix<f64> {
    let basis = hermitian_basis(s.dim);
    let n = basis.len();
    let vecs: Vec<CVec> = basis.iter().map(vectorize).collect();
    let mut t = nalgebra::DMatrix::<f64>::zeros(n, n);
    for (b, vb) in vecs.iter().enumerate() {
        let img = self_apply(s, vb);
        for (a, va) in vecs.iter().enumerate() {
            t[(a, b)] = va.dotc(&img).re;
        }
    }
    t
}

fn self_apply(s: &SuperOp, v: &CVec) -> CVec {
    &s.mat * v
}

// ---------------------------------------------------------------------------
