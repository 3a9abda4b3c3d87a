//! Qutrit Weyl (generalized Pauli) group and the 216-element qutrit Clifford
//! group, with lookup tables for composition, inversion, and Weyl-compiled
//! inversion gates.
//!
//! The Clifford group is generated by breadth-first closure from the qutrit
//! Fourier gate and the phase gate diag(1, 1, ω); the construction is
//! self-verifying because the closure must terminate at exactly 216
//! projective classes. Global phases are fixed by making the first nonzero
//! entry (row-major) real positive, which makes deduplication and
//! serialization deterministic.

use crate::error::SrbError;
use crate::qops::max_abs;
use crate::{C64, CMat, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::path::Path;

/// Number of qutrit Clifford classes.
pub const CLIFFORD_COUNT: usize = 216;
/// Number of qutrit Weyl gates.
pub const WEYL_COUNT: usize = 9;

const OVERLAP_TOL: f64 = 1e-9;

/// Label (a, b) of the Weyl gate X^a Z^b, exponents mod 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WeylLabel {
    pub a: u8,
    pub b: u8,
}

impl WeylLabel {
    pub fn new(a: u8, b: u8) -> Self {
        WeylLabel { a: a % 3, b: b % 3 }
    }

    pub fn index(&self) -> usize {
        (self.a as usize) * 3 + self.b as usize
    }

    pub fn from_index(i: usize) -> Self {
        WeylLabel { a: (i / 3) as u8, b: (i % 3) as u8 }
    }

    pub fn is_identity(&self) -> bool {
        self.a == 0 && self.b == 0
    }

    pub fn all() -> impl Iterator<Item = WeylLabel> {
        (0..WEYL_COUNT).map(WeylLabel::from_index)
    }
}

/// Index into the canonical Clifford list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CliffordId(pub usize);

fn omega() -> C64 {
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0)
}

/// The 3×3 unitary X^a Z^b with X|j⟩ = |j+1 mod 3⟩ and Z|j⟩ = ω^j|j⟩.
pub fn weyl_unitary(label: WeylLabel) -> CMat {
    let w = omega();
    let mut m = CMat::zeros(3, 3);
    for j in 0..3usize {
        let row = (j + label.a as usize) % 3;
        m[(row, j)] = w.powu(label.b as u32 * j as u32);
    }
    m
}

/// Qutrit Fourier gate F[j,k] = ω^{jk}/√3.
pub fn fourier_gate() -> CMat {
    let w = omega();
    let n = C64::new(1.0 / 3.0_f64.sqrt(), 0.0);
    CMat::from_fn(3, 3, |j, k| n * w.powu((j * k) as u32))
}

/// Qutrit phase gate diag(1, 1, ω).
pub fn qutrit_phase_gate() -> CMat {
    let mut m = CMat::identity(3, 3);
    m[(2, 2)] = omega();
    m
}

/// Fix the global phase so the first entry (row-major) with magnitude above
/// 0.1 is real positive. Clifford entries have magnitude 0 or ≥ 1/3, so the
/// threshold is safe.
fn canonicalize(u: &CMat) -> CMat {
    for i in 0..u.nrows() {
        for j in 0..u.ncols() {
            let z = u[(i, j)];
            if z.norm() > 0.1 {
                let phase = z.conj() / z.norm();
                return u * phase;
            }
        }
    }
    u.clone()
}

/// Projective overlap |Tr(A†B)|/d.
fn overlap(a: &CMat, b: &CMat) -> f64 {
    (a.adjoint() * b).trace().norm() / a.nrows() as f64
}

fn fingerprint(u: &CMat) -> Vec<(i64, i64)> {
    u.iter().map(|z| ((z.re * 1e6).round() as i64, (z.im * 1e6).round() as i64)).collect()
}

/// Group tables over the canonical Clifford list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupTable {
    /// mult[i * 216 + j] is the class of U_i · U_j.
    pub mult: Vec<u16>,
    /// inv[i] is the class of U_i†.
    pub inv: Vec<u16>,
    /// Identity element.
    pub identity: CliffordId,
    /// weyl_action[i * 9 + w] = (image label, phase) with
    /// C_i W C_i† = phase · W'.
    pub weyl_action: Vec<(WeylLabel, [f64; 2])>,
    /// Clifford class of each Weyl gate.
    pub weyl_embedding: Vec<CliffordId>,
}

impl GroupTable {
    pub fn mult(&self, i: CliffordId, j: CliffordId) -> CliffordId {
        CliffordId(self.mult[i.0 * CLIFFORD_COUNT + j.0] as usize)
    }

    pub fn inv(&self, i: CliffordId) -> CliffordId {
        CliffordId(self.inv[i.0] as usize)
    }

    pub fn weyl_action(&self, i: CliffordId, w: WeylLabel) -> (WeylLabel, C64) {
        let (label, ph) = self.weyl_action[i.0 * WEYL_COUNT + w.index()];
        (label, C64::new(ph[0], ph[1]))
    }

    pub fn weyl_embedding(&self, w: WeylLabel) -> CliffordId {
        self.weyl_embedding[w.index()]
    }
}

/// The canonical Clifford unitaries together with their group tables.
#[derive(Debug, Clone)]
pub struct CliffordGroup {
    pub unitaries: Vec<CMat>,
    pub table: GroupTable,
}

struct Lookup {
    by_print: HashMap<Vec<(i64, i64)>, usize>,
}

impl Lookup {
    fn find(&self, canon: &CMat, unitaries: &[CMat]) -> Option<usize> {
        if let Some(&i) = self.by_print.get(&fingerprint(canon)) {
            if overlap(&unitaries[i], canon) > 1.0 - OVERLAP_TOL {
                return Some(i);
            }
        }
        // Rounding can land on a different grid cell; fall back to a scan.
        unitaries.iter().position(|u| overlap(u, canon) > 1.0 - OVERLAP_TOL)
    }
}

/// Generate the qutrit Clifford group by closure from {Fourier, phase}.
///
/// Errors if the closure does not terminate at exactly 216 classes.
pub fn build_clifford_group() -> Result<CliffordGroup> {
    let gens = [fourier_gate(), qutrit_phase_gate()];
    let mut unitaries: Vec<CMat> = vec![canonicalize(&CMat::identity(3, 3))];
    let mut lookup = Lookup { by_print: HashMap::new() };
    lookup.by_print.insert(fingerprint(&unitaries[0]), 0);

    let mut frontier = vec![0usize];
    while let Some(idx) = frontier.pop() {
        for g in &gens {
            let prod = canonicalize(&(g * &unitaries[idx]));
            if lookup.find(&prod, &unitaries).is_none() {
                let new_idx = unitaries.len();
                if new_idx >= 4 * CLIFFORD_COUNT {
                    return Err(SrbError::GroupConstruction(
                        "closure exceeded 4×216 elements; dedup failure".into(),
                    ));
                }
                lookup.by_print.insert(fingerprint(&prod), new_idx);
                unitaries.push(prod);
                frontier.push(new_idx);
            }
        }
    }
    if unitaries.len() != CLIFFORD_COUNT {
        return Err(SrbError::GroupConstruction(format!(
            "closure terminated at {} elements, expected {}",
            unitaries.len(),
            CLIFFORD_COUNT
        )));
    }

    // Composition and inversion tables.
    let find = |m: &CMat| -> Result<usize> {
        lookup.find(&canonicalize(m), &unitaries).ok_or_else(|| {
            SrbError::GroupConstruction("product escaped the closed group".into())
        })
    };
    let mut mult = vec![0u16; CLIFFORD_COUNT * CLIFFORD_COUNT];
    for i in 0..CLIFFORD_COUNT {
        for j in 0..CLIFFORD_COUNT {
            mult[i * CLIFFORD_COUNT + j] = find(&(&unitaries[i] * &unitaries[j]))? as u16;
        }
    }
    let mut inv = vec![0u16; CLIFFORD_COUNT];
    for (i, slot) in inv.iter_mut().enumerate() {
        *slot = find(&unitaries[i].adjoint())? as u16;
    }
    let identity = CliffordId(find(&CMat::identity(3, 3))?);

    // Weyl conjugation action: every Clifford must map the Weyl set to
    // itself up to phase.
    let weyls: Vec<CMat> = WeylLabel::all().map(weyl_unitary).collect();
    let mut weyl_action = Vec::with_capacity(CLIFFORD_COUNT * WEYL_COUNT);
    for u in &unitaries {
        for w in &weyls {
            let conj = u * w * u.adjoint();
            let mut found = None;
            for (wi, wmat) in weyls.iter().enumerate() {
                if overlap(wmat, &conj) > 1.0 - OVERLAP_TOL {
                    let phase = (wmat.adjoint() * &conj).trace() / C64::new(3.0, 0.0);
                    found = Some((WeylLabel::from_index(wi), [phase.re, phase.im]));
                    break;
                }
            }
            weyl_action.push(found.ok_or_else(|| {
                SrbError::GroupConstruction("element does not normalize the Weyl set".into())
            })?);
        }
    }
    let mut weyl_embedding = Vec::with_capacity(WEYL_COUNT);
    for w in &weyls {
        weyl_embedding.push(CliffordId(find(w)?));
    }

    Ok(CliffordGroup {
        unitaries,
        table: GroupTable { mult, inv, identity, weyl_action, weyl_embedding },
    })
}

/// Frame potential (1/N²) Σ_{i,j} |Tr(U_i†U_j)|^{2t}.
pub fn frame_potential(unitaries: &[CMat], t: u32) -> Result<f64> {
    if unitaries.is_empty() {
        return Err(SrbError::InvalidInput("frame_potential: empty gate list".into()));
    }
    let n = unitaries.len();
    let mut total = 0.0;
    for a in unitaries {
        let ad = a.adjoint();
        for b in unitaries {
            total += (&ad * b).trace().norm().powi(2 * t as i32);
        }
    }
    Ok(total / (n * n) as f64)
}

/// Compile the inversion gate Q_k (C_ℓ⋯C_1)⁻¹ into a single Clifford class
/// and return it with the expected bright-ion outcome m_k = a.
pub fn compile_inversion(
    table: &GroupTable,
    sequence: &[CliffordId],
    weyl: WeylLabel,
) -> (CliffordId, u8) {
    let mut prod = table.identity;
    for &c in sequence {
        prod = table.mult(c, prod);
    }
    let inv = table.mult(table.weyl_embedding(weyl), table.inv(prod));
    (inv, weyl.a)
}

// ---------------------------------------------------------------------------
// Cache file
// ---------------------------------------------------------------------------

const GROUP_CACHE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct GroupCachePayload {
    version: u32,
    /// Row-major 9 complex entries per unitary, each as [re, im].
    unitaries: Vec<Vec<[f64; 2]>>,
    mult: Vec<u16>,
    inv: Vec<u16>,
    identity: usize,
    weyl_action: Vec<(WeylLabel, [f64; 2])>,
    weyl_embedding: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct GroupCacheFile {
    payload: GroupCachePayload,
    /// SHA-256 of the serialized payload.
    checksum: String,
}

fn payload_checksum(payload: &GroupCachePayload) -> Result<String> {
    let bytes = serde_json::to_vec(payload)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

impl CliffordGroup {
    fn to_payload(&self) -> GroupCachePayload {
        let unitaries = self
            .unitaries
            .iter()
            .map(|u| {
                (0..3)
                    .flat_map(|i| (0..3).map(move |j| (i, j)))
                    .map(|(i, j)| [u[(i, j)].re, u[(i, j)].im])
                    .collect()
            })
            .collect();
        GroupCachePayload {
            version: GROUP_CACHE_VERSION,
            unitaries,
            mult: self.table.mult.clone(),
            inv: self.table.inv.clone(),
            identity: self.table.identity.0,
            weyl_action: self.table.weyl_action.clone(),
            weyl_embedding: self.table.weyl_embedding.iter().map(|c| c.0).collect(),
        }
    }

    /// Checksum of the serialized group content; recipe caches record it.
    pub fn checksum(&self) -> Result<String> {
        payload_checksum(&self.to_payload())
    }

    /// Write the group table to a versioned, checksummed cache file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let payload = self.to_payload();
        let checksum = payload_checksum(&payload)?;
        let file = GroupCacheFile { payload, checksum };
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_vec(&file)?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Load and verify a cache file written by [`CliffordGroup::save`].
    pub fn load(path: &Path) -> Result<CliffordGroup> {
        let bytes = std::fs::read(path)?;
        let file: GroupCacheFile =
            serde_json::from_slice(&bytes).map_err(|e| SrbError::Cache(format!("parse: {e}")))?;
        if file.payload.version != GROUP_CACHE_VERSION {
            return Err(SrbError::Cache(format!(
                "group cache version {} unsupported",
                file.payload.version
            )));
        }
        if payload_checksum(&file.payload)? != file.checksum {
            return Err(SrbError::Cache("group cache checksum mismatch".into()));
        }
        let p = file.payload;
        if p.unitaries.len() != CLIFFORD_COUNT
            || p.mult.len() != CLIFFORD_COUNT * CLIFFORD_COUNT
            || p.inv.len() != CLIFFORD_COUNT
            || p.weyl_action.len() != CLIFFORD_COUNT * WEYL_COUNT
            || p.weyl_embedding.len() != WEYL_COUNT
        {
            return Err(SrbError::Cache("group cache has inconsistent table sizes".into()));
        }
        let unitaries = p
            .unitaries
            .iter()
            .map(|entries| {
                CMat::from_fn(3, 3, |i, j| {
                    let [re, im] = entries[i * 3 + j];
                    C64::new(re, im)
                })
            })
            .collect();
        Ok(CliffordGroup {
            unitaries,
            table: GroupTable {
                mult: p.mult,
                inv: p.inv,
                identity: CliffordId(p.identity),
                weyl_action: p.weyl_action,
                weyl_embedding: p.weyl_embedding.into_iter().map(CliffordId).collect(),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use once_cell::sync::Lazy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    static GROUP: Lazy<CliffordGroup> = Lazy::new(|| build_clifford_group().unwrap());

    #[test]
    fn weyl_unitary_basics() {
        let id = weyl_unitary(WeylLabel::new(0, 0));
        assert_abs_diff_eq!(max_abs(&(id - CMat::identity(3, 3))), 0.0, epsilon = 1e-15);

        // X|0⟩ = |1⟩
        let x = weyl_unitary(WeylLabel::new(1, 0));
        let e0 = CMat::from_column_slice(3, 1, &[C64::new(1., 0.), C64::new(0., 0.), C64::new(0., 0.)]);
        let shifted = &x * &e0;
        assert_abs_diff_eq!(shifted[(1, 0)].re, 1.0, epsilon = 1e-15);

        // ZX = ω XZ
        let z = weyl_unitary(WeylLabel::new(0, 1));
        let lhs = &z * &x;
        let rhs = (&x * &z) * omega();
        assert_abs_diff_eq!(max_abs(&(lhs - rhs)), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn group_has_216_distinct_classes() {
        let g = &*GROUP;
        assert_eq!(g.unitaries.len(), CLIFFORD_COUNT);
        for i in 0..CLIFFORD_COUNT {
            for j in (i + 1)..CLIFFORD_COUNT {
                assert!(
                    overlap(&g.unitaries[i], &g.unitaries[j]) < 1.0 - 1e-9,
                    "classes {i} and {j} coincide"
                );
            }
        }
    }

    #[test]
    fn fourier_conjugates_x_to_z() {
        let f = fourier_gate();
        let x = weyl_unitary(WeylLabel::new(1, 0));
        let z = weyl_unitary(WeylLabel::new(0, 1));
        let conj = &f * &x * f.adjoint();
        assert!(overlap(&z, &conj) > 1.0 - 1e-12);
    }

    #[test]
    fn every_element_normalizes_weyl_set() {
        // The exhaustive 216×9 check runs inside the group construction;
        // spot-verify the stored action reproduces the matrix conjugation.
        let g = &*GROUP;
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..50 {
            let i = CliffordId(rng.gen_range(0..CLIFFORD_COUNT));
            let w = WeylLabel::from_index(rng.gen_range(0..WEYL_COUNT));
            let (img, phase) = g.table.weyl_action(i, w);
            let conj = &g.unitaries[i.0] * weyl_unitary(w) * g.unitaries[i.0].adjoint();
            let expect = weyl_unitary(img) * phase;
            assert_abs_diff_eq!(max_abs(&(conj - expect)), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn inverse_and_closure_tables() {
        let g = &*GROUP;
        for i in 0..CLIFFORD_COUNT {
            assert_eq!(g.table.mult(CliffordId(i), g.table.inv(CliffordId(i))), g.table.identity);
        }
    }

    #[test]
    fn associativity_spot_check() {
        let g = &*GROUP;
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let (i, j, k) = (
                CliffordId(rng.gen_range(0..CLIFFORD_COUNT)),
                CliffordId(rng.gen_range(0..CLIFFORD_COUNT)),
                CliffordId(rng.gen_range(0..CLIFFORD_COUNT)),
            );
            assert_eq!(g.table.mult(g.table.mult(i, j), k), g.table.mult(i, g.table.mult(j, k)));
        }
    }

    #[test]
    fn table_product_matches_matrix_product_projectively() {
        let g = &*GROUP;
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        for _ in 0..1000 {
            let i = rng.gen_range(0..CLIFFORD_COUNT);
            let j = rng.gen_range(0..CLIFFORD_COUNT);
            let prod = &g.unitaries[i] * &g.unitaries[j];
            let id = g.table.mult(CliffordId(i), CliffordId(j));
            assert!(overlap(&g.unitaries[id.0], &prod) > 1.0 - 1e-9);
        }
    }

    #[test]
    fn weyl_subgroup_closed_under_mult() {
        let g = &*GROUP;
        let ids: Vec<CliffordId> = WeylLabel::all().map(|w| g.table.weyl_embedding(w)).collect();
        for &a in &ids {
            for &b in &ids {
                assert!(ids.contains(&g.table.mult(a, b)));
            }
        }
    }

    #[test]
    fn frame_potentials() {
        let g = &*GROUP;
        assert_abs_diff_eq!(frame_potential(&g.unitaries, 2).unwrap(), 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(frame_potential(&g.unitaries, 1).unwrap(), 1.0, epsilon = 1e-9);
        let weyls: Vec<CMat> = WeylLabel::all().map(weyl_unitary).collect();
        assert_abs_diff_eq!(frame_potential(&weyls, 1).unwrap(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(
            frame_potential(&[CMat::identity(3, 3)], 2).unwrap(),
            81.0,
            epsilon = 1e-9
        );
        assert!(frame_potential(&[], 1).is_err());
    }

    #[test]
    fn compile_inversion_cases() {
        let g = &*GROUP;
        let (inv, m) = compile_inversion(&g.table, &[], WeylLabel::new(0, 0));
        assert_eq!(inv, g.table.identity);
        assert_eq!(m, 0);

        let mut rng = ChaCha12Rng::seed_from_u64(41);
        let c = CliffordId(rng.gen_range(0..CLIFFORD_COUNT));
        let (inv, m) = compile_inversion(&g.table, &[c], WeylLabel::new(0, 0));
        assert_eq!(inv, g.table.inv(c));
        assert_eq!(m, 0);

        // Random length-10 sequence with Weyl (2, 1): the full product must
        // carry |0⟩ to |2⟩ up to phase.
        let seq: Vec<CliffordId> =
            (0..10).map(|_| CliffordId(rng.gen_range(0..CLIFFORD_COUNT))).collect();
        let weyl = WeylLabel::new(2, 1);
        let (inv, m) = compile_inversion(&g.table, &seq, weyl);
        assert_eq!(m, 2);
        let mut total = CMat::identity(3, 3);
        for &c in &seq {
            total = &g.unitaries[c.0] * total;
        }
        total = &g.unitaries[inv.0] * total;
        let e0 = CMat::from_column_slice(3, 1, &[C64::new(1., 0.), C64::new(0., 0.), C64::new(0., 0.)]);
        let out = total * e0;
        assert_abs_diff_eq!(out[(2, 0)].norm(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn cache_round_trip_is_bit_exact() {
        let g = &*GROUP;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("group.json");
        g.save(&path).unwrap();
        let loaded = CliffordGroup::load(&path).unwrap();
        assert_eq!(loaded.table.mult, g.table.mult);
        assert_eq!(loaded.table.inv, g.table.inv);
        for (a, b) in loaded.unitaries.iter().zip(&g.unitaries) {
            assert_eq!(a, b);
        }
        assert_eq!(loaded.checksum().unwrap(), g.checksum().unwrap());
    }

    #[test]
    fn corrupted_cache_is_rejected() {
        let g = &*GROUP;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("group.json");
        g.save(&path).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        text = text.replacen("\"mult\":[", "\"mult\":[1,", 1);
        std::fs::write(&path, text).unwrap();
        assert!(matches!(CliffordGroup::load(&path), Err(SrbError::Cache(_))));
    }
}
