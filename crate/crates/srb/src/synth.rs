//! Physical gate set and numerical synthesis of the qutrit Cliffords.
//!
//! The hardware-native gates are collective single-qubit rotations
//! U(θ,φ)⊗U(θ,φ), the entangling phase gate exp[−i(π/4)ZZ], and the XX-YY
//! gate exp[iXXπ/4]exp[iYYπ/4] that implements the same symmetric-block
//! action with the opposite relative phase on the singlet. On the symmetric
//! subspace the rotations generate spin-1 rotations exp[−iθ(n̂·J)] and the
//! phase gate acts as a Jz²-generated phase, so every qutrit Clifford can be
//! reached with the fixed alternation
//!
//!   U = K(n̂₁,φ₁) · U_ZZ · K(n̂₂,φ₂) · U_ZZ · K(n̂₃,φ₃) · U_ZZ · K(n̂₄,φ₄),
//!
//! whose twelve rotation parameters are found by multi-start Nelder-Mead on
//! the phase-insensitive infidelity 1 − |Tr(target†U)|/3. Exactly three
//! phase gates appear in every recipe, so the relative phase accumulated on
//! the singlet is the same e^{i3π/4} for every standard Clifford.

use crate::error::SrbError;
use crate::optim::nelder_mead;
use crate::qgroups::{CliffordGroup, CliffordId, CLIFFORD_COUNT};
use crate::qops::{max_abs, spin1_operators, SubspaceSplit};
use crate::seed::{self, tag};
use crate::{tol, C64, CMat, Result};
use nalgebra::Matrix3;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::path::Path;

/// Default master seed for recipe synthesis; part of the cache contract.
pub const DEFAULT_SYNTH_SEED: u64 = 0x5352_42_53;

const RESTART_BUDGET: usize = 50;
const EVALS_PER_RESTART: usize = 10_000;
const CONVERGENCE_INFIDELITY: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Physical gates
// ---------------------------------------------------------------------------

/// One hardware gate. Angles are radians with θ ∈ [0, 4π), φ ∈ [0, 2π).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum PhysicalGate {
    CollectiveRotation { theta: f64, phi: f64 },
    PhaseGate,
    XxyyGate,
}

impl PhysicalGate {
    /// 4×4 unitary in the computational basis (|00⟩,|01⟩,|10⟩,|11⟩).
    pub fn unitary(&self) -> CMat {
        match *self {
            PhysicalGate::CollectiveRotation { theta, phi } => collective_rotation(theta, phi),
            PhysicalGate::PhaseGate => phase_gate(),
            PhysicalGate::XxyyGate => xxyy_gate(),
        }
    }
}

/// Collective rotation U(θ,φ) ⊗ U(θ,φ) with
/// U(θ,φ) = exp[−i(θ/2)(X cosφ + Y sinφ)].
pub fn collective_rotation(theta: f64, phi: f64) -> CMat {
    let c = C64::new((theta / 2.0).cos(), 0.0);
    let s = (theta / 2.0).sin();
    let off_upper = C64::new(0.0, -s) * C64::from_polar(1.0, -phi);
    let off_lower = C64::new(0.0, -s) * C64::from_polar(1.0, phi);
    let u1 = CMat::from_row_slice(2, 2, &[c, off_upper, off_lower, c]);
    u1.kronecker(&u1)
}

/// Entangling phase gate exp[−i(π/4)ZZ] =
/// diag(e^{−iπ/4}, e^{iπ/4}, e^{iπ/4}, e^{−iπ/4}).
pub fn phase_gate() -> CMat {
    let minus = C64::from_polar(1.0, -FRAC_PI_4);
    let plus = C64::from_polar(1.0, FRAC_PI_4);
    CMat::from_diagonal(&crate::CVec::from_vec(vec![minus, plus, plus, minus]))
}

/// XX-YY gate exp[iXXπ/4]·exp[iYYπ/4] (iSWAP-equivalent): same symmetric
/// block as the phase gate up to global phase, relative singlet phase −i.
pub fn xxyy_gate() -> CMat {
    let x = CMat::from_row_slice(2, 2, &[
        C64::new(0., 0.), C64::new(1., 0.),
        C64::new(1., 0.), C64::new(0., 0.),
    ]);
    let y = CMat::from_row_slice(2, 2, &[
        C64::new(0., 0.), C64::new(0., -1.),
        C64::new(0., 1.), C64::new(0., 0.),
    ]);
    let xx = x.kronecker(&x);
    let yy = y.kronecker(&y);
    let id = CMat::identity(4, 4);
    let half = C64::new(FRAC_PI_4.cos(), 0.0);
    let ihalf = C64::new(0.0, FRAC_PI_4.sin());
    let exp_xx = &id * half + &xx * ihalf;
    let exp_yy = &id * half + &yy * ihalf;
    exp_xx * exp_yy
}

/// Symmetric 3×3 block of the phase gate: diag(e^{−iπ/4}, e^{iπ/4}, e^{−iπ/4}).
fn phase_gate_sym() -> Matrix3<C64> {
    let minus = C64::from_polar(1.0, -FRAC_PI_4);
    let plus = C64::from_polar(1.0, FRAC_PI_4);
    Matrix3::from_diagonal(&nalgebra::Vector3::new(minus, plus, minus))
}

/// Spin-1 rotation exp[−iχ(n̂·J)] via the Rodrigues form A³ = A:
/// exp(−iχA) = 𝟙 − iA sinχ + A²(cosχ − 1).
fn spin1_rotation(axis: [f64; 3], chi: f64) -> Matrix3<C64> {
    let (jx, jy, jz) = spin1_operators();
    let mut a = Matrix3::<C64>::zeros();
    for i in 0..3 {
        for j in 0..3 {
            a[(i, j)] = jx[(i, j)] * C64::new(axis[0], 0.0)
                + jy[(i, j)] * C64::new(axis[1], 0.0)
                + jz[(i, j)] * C64::new(axis[2], 0.0);
        }
    }
    let a2 = a * a;
    Matrix3::identity() + a * C64::new(0.0, -chi.sin()) + a2 * C64::new(chi.cos() - 1.0, 0.0)
}

fn axis_from_angles(alpha: f64, beta: f64) -> [f64; 3] {
    [beta.sin() * alpha.cos(), beta.sin() * alpha.sin(), beta.cos()]
}

// ---------------------------------------------------------------------------
// Rotation decomposition
// ---------------------------------------------------------------------------

/// Decompose a rotation exp[−iχ(n̂·J)] into at most two rotations around
/// axes in the X-Y plane, returned in application order.
///
/// Works in the SU(2) double cover: a planar pulse has quaternion
/// (cos θ/2, sin θ/2 cosφ, sin θ/2 sinφ, 0), and the product of two planar
/// quaternions reaches any target quaternion with w ≥ 0.
pub fn decompose_rotation(axis: [f64; 3], angle: f64) -> Result<Vec<(f64, f64)>> {
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if norm < 1e-12 {
        return Err(SrbError::InvalidInput("decompose_rotation: zero-length axis".into()));
    }
    let n = [axis[0] / norm, axis[1] / norm, axis[2] / norm];

    // Target quaternion, sign-normalized to w ≥ 0 (spin-1 is insensitive).
    let mut w = (angle / 2.0).cos();
    let s = (angle / 2.0).sin();
    let mut v = [s * n[0], s * n[1], s * n[2]];
    if w < 0.0 {
        w = -w;
        v = [-v[0], -v[1], -v[2]];
    }

    let vxy = (v[0] * v[0] + v[1] * v[1]).sqrt();
    if vxy < 1e-15 && v[2].abs() < 1e-15 {
        return Ok(Vec::new());
    }
    if v[2].abs() < 1e-15 {
        // Axis already in the X-Y plane: one pulse.
        let theta = 2.0 * vxy.atan2(w);
        let phi = v[1].atan2(v[0]).rem_euclid(2.0 * PI);
        return Ok(vec![(theta, phi)]);
    }

    // Two pulses of equal angle θ with azimuths φ̄ ± Δ/2.
    let delta = 2.0 * v[2].atan2(1.0 - w);
    let rho = ((1.0 - w).powi(2) + v[2] * v[2]) / (2.0 * (1.0 - w));
    let sp = rho.min(1.0).sqrt();
    let cp = (1.0 - rho).max(0.0).sqrt();
    let theta = 2.0 * sp.atan2(cp);
    let phi_mean = if vxy > 1e-15 { v[1].atan2(v[0]) } else { 0.0 };
    let phi1 = (phi_mean + delta / 2.0).rem_euclid(2.0 * PI);
    let phi2 = (phi_mean - delta / 2.0).rem_euclid(2.0 * PI);
    Ok(vec![(theta, phi1), (theta, phi2)])
}

// ---------------------------------------------------------------------------
// Clifford recipes
// ---------------------------------------------------------------------------

/// Physical-gate compilation of one qutrit Clifford.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CliffordRecipe {
    pub clifford: CliffordId,
    /// Gates in application order; standard recipes hold exactly 3
    /// `PhaseGate` entries interleaved with rotation pulses.
    pub gates: Vec<PhysicalGate>,
    /// Raw template parameters (α, β, φ) for K₁..K₄, kept for provenance.
    pub params: [[f64; 3]; 4],
    /// 1 − |Tr(target†·symmetric block)|/3 of the emitted gate product.
    pub residual_infidelity: f64,
    /// Scalar action on the singlet, [re, im]; magnitude 1.
    pub leakage_phase: [f64; 2],
}

impl CliffordRecipe {
    pub fn leakage_phase_c(&self) -> C64 {
        C64::new(self.leakage_phase[0], self.leakage_phase[1])
    }

    /// Full 4×4 unitary of the emitted gate list, first gate applied first.
    pub fn unitary(&self) -> CMat {
        let mut total = CMat::identity(4, 4);
        for g in &self.gates {
            total = g.unitary() * total;
        }
        total
    }

    pub fn phase_gate_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, PhysicalGate::PhaseGate)).count()
    }
}

/// Template product on the symmetric block for a 12-parameter point.
fn template_sym(params: &[f64]) -> Matrix3<C64> {
    let p = phase_gate_sym();
    let mut u = spin1_rotation(axis_from_angles(params[9], params[10]), params[11]);
    for k in (0..3).rev() {
        u = p * u;
        let rot = spin1_rotation(axis_from_angles(params[3 * k], params[3 * k + 1]), params[3 * k + 2]);
        u = rot * u;
    }
    u
}

fn infidelity(target: &Matrix3<C64>, u: &Matrix3<C64>) -> f64 {
    let tr = (target.adjoint() * u).trace();
    1.0 - tr.norm() / 3.0
}

/// Synthesize one Clifford from the alternating rotation/phase-gate template.
///
/// Deterministic given `(master_seed, clifford)`: restarts draw their start
/// points from a stream seeded by the pair. Fails with the best infidelity
/// found if the restart budget is exhausted.
pub fn synthesize_clifford(
    target: &CMat,
    clifford: CliffordId,
    master_seed: u64,
) -> Result<CliffordRecipe> {
    let t3 = Matrix3::from_fn(|i, j| target[(i, j)]);
    let mut obj = |x: &[f64]| infidelity(&t3, &template_sym(x));

    let mut rng = seed::stream_rng(master_seed, tag::SYNTHESIS, clifford.0 as u64, 0);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..RESTART_BUDGET {
        // Polish from the incumbent once it is close; otherwise explore.
        let (x0, step): (Vec<f64>, f64) = match &best {
            Some((x, f)) if *f < 1e-4 => {
                let jitter: Vec<f64> =
                    x.iter().map(|v| v + rng.gen_range(-0.02..0.02)).collect();
                (jitter, 0.02)
            }
            _ => ((0..12).map(|_| rng.gen_range(0.0..2.0 * PI)).collect(), 0.8),
        };
        let r = nelder_mead(&mut obj, &x0, step, CONVERGENCE_INFIDELITY, EVALS_PER_RESTART);
        if best.as_ref().map_or(true, |(_, f)| r.f < *f) {
            best = Some((r.x, r.f));
        }
        if best.as_ref().unwrap().1 <= CONVERGENCE_INFIDELITY {
            break;
        }
    }
    let (x, f) = best.unwrap();
    if f >= tol::SYNTHESIS_RESIDUAL {
        return Err(SrbError::SynthesisFailure { id: clifford.0, best_infidelity: f });
    }
    emit_recipe(target, clifford, &x)
}

/// Expand template parameters into the physical gate list and verify it.
fn emit_recipe(target: &CMat, clifford: CliffordId, x: &[f64]) -> Result<CliffordRecipe> {
    let mut gates = Vec::new();
    // Application order: K₄ first, then phase gate, ..., K₁ last.
    for k in (0..4).rev() {
        let axis = axis_from_angles(x[3 * k], x[3 * k + 1]);
        for (theta, phi) in decompose_rotation(axis, x[3 * k + 2])? {
            gates.push(PhysicalGate::CollectiveRotation {
                theta: theta.rem_euclid(4.0 * PI),
                phi,
            });
        }
        if k > 0 {
            gates.push(PhysicalGate::PhaseGate);
        }
    }
    let params = [
        [x[0], x[1], x[2]],
        [x[3], x[4], x[5]],
        [x[6], x[7], x[8]],
        [x[9], x[10], x[11]],
    ];

    let split = SubspaceSplit::two_qubit();
    let mut recipe = CliffordRecipe {
        clifford,
        gates,
        params,
        residual_infidelity: 0.0,
        leakage_phase: [0.0, 0.0],
    };
    let product = recipe.unitary();
    let sym = split.sym_block(&product);
    let tr = (target.adjoint() * &sym).trace();
    recipe.residual_infidelity = 1.0 - tr.norm() / 3.0;
    let lp = split.asym_element(&product);
    recipe.leakage_phase = [lp.re, lp.im];

    if recipe.residual_infidelity >= tol::SYNTHESIS_RESIDUAL {
        return Err(SrbError::SynthesisFailure {
            id: clifford.0,
            best_infidelity: recipe.residual_infidelity,
        });
    }
    if (lp.norm() - 1.0).abs() > 1e-9 || split.off_block_defect(&product) > 1e-10 {
        return Err(SrbError::SynthesisFailure {
            id: clifford.0,
            best_infidelity: recipe.residual_infidelity,
        });
    }
    Ok(recipe)
}

/// Swap the final phase gate for the XX-YY gate: identical symmetric-block
/// action up to global phase, opposite relative phase on the singlet.
pub fn phase_reversed_recipe(recipe: &CliffordRecipe) -> Result<CliffordRecipe> {
    let last_phase = recipe
        .gates
        .iter()
        .rposition(|g| matches!(g, PhysicalGate::PhaseGate))
        .ok_or_else(|| SrbError::InvalidInput("recipe has no phase gate to reverse".into()))?;
    let mut reversed = recipe.clone();
    reversed.gates[last_phase] = PhysicalGate::XxyyGate;
    let split = SubspaceSplit::two_qubit();
    let lp = split.asym_element(&reversed.unitary());
    reversed.leakage_phase = [lp.re, lp.im];
    Ok(reversed)
}

// ---------------------------------------------------------------------------
// Recipe table and cache
// ---------------------------------------------------------------------------

/// All 216 standard recipes plus provenance of the group they compile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecipeTable {
    pub version: u32,
    pub master_seed: u64,
    /// Checksum of the group table the recipes were verified against.
    pub group_checksum: String,
    pub recipes: Vec<CliffordRecipe>,
}

const RECIPE_CACHE_VERSION: u32 = 1;

/// Synthesize recipes for every Clifford in the group (parallel; each target
/// is seeded independently so the result is schedule-invariant).
pub fn build_recipe_table(group: &CliffordGroup, master_seed: u64) -> Result<RecipeTable> {
    let recipes: Result<Vec<CliffordRecipe>> = group
        .unitaries
        .par_iter()
        .enumerate()
        .map(|(i, target)| synthesize_clifford(target, CliffordId(i), master_seed))
        .collect();
    Ok(RecipeTable {
        version: RECIPE_CACHE_VERSION,
        master_seed,
        group_checksum: group.checksum()?,
        recipes: recipes?,
    })
}

#[derive(Serialize, Deserialize)]
struct RecipeCacheFile {
    table: RecipeTable,
    checksum: String,
}

fn table_checksum(table: &RecipeTable) -> Result<String> {
    let bytes = serde_json::to_vec(table)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

impl RecipeTable {
    pub fn recipe(&self, id: CliffordId) -> &CliffordRecipe {
        &self.recipes[id.0]
    }

    /// Write a human-readable, checksummed cache file (atomic).
    pub fn save(&self, path: &Path) -> Result<()> {
        let checksum = table_checksum(self)?;
        let file = RecipeCacheFile { table: self.clone(), checksum };
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_vec_pretty(&file)?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Load a cache file, verifying version, checksum, and table size.
    pub fn load(path: &Path) -> Result<RecipeTable> {
        let bytes = std::fs::read(path)?;
        let file: RecipeCacheFile =
            serde_json::from_slice(&bytes).map_err(|e| SrbError::Cache(format!("parse: {e}")))?;
        if file.table.version != RECIPE_CACHE_VERSION {
            return Err(SrbError::Cache(format!(
                "recipe cache version {} unsupported",
                file.table.version
            )));
        }
        if table_checksum(&file.table)? != file.checksum {
            return Err(SrbError::Cache("recipe cache checksum mismatch".into()));
        }
        if file.table.recipes.len() != CLIFFORD_COUNT {
            return Err(SrbError::Cache("recipe cache does not hold 216 recipes".into()));
        }
        Ok(file.table)
    }

    /// Cheap consistency check against a loaded group.
    pub fn verify_against(&self, group: &CliffordGroup) -> Result<()> {
        if self.group_checksum != group.checksum()? {
            return Err(SrbError::Cache(
                "recipe cache was built against a different group table".into(),
            ));
        }
        Ok(())
    }
}
