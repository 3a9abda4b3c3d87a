//! Sequence generation, noisy simulation, and dataset assembly for SRB,
//! SRB-lite, and group RB runs.
//!
//! Everything is driven by a single master seed: sequence i at length ℓ uses
//! the sub-stream derived from (master, ℓ, i), so exact reruns and parallel
//! execution produce identical datasets.
//!
//! Protocols:
//! - `Srb` — random Cliffords, a uniformly random final Weyl gate compiled
//!   into the inversion, standard + leakage analyses.
//! - `SrbLite` — no final Weyl gate; survival of outcome 0 only.
//! - `GroupRb` — the plain fixed-asymptote protocol: final Weyl gate and
//!   standard analysis, no leakage processing.

pub mod detector;

pub use detector::{
    correct_counts, detector_tomography, simulate_detector, DetectorModel, TRUE_CLASSES,
};

use crate::error::SrbError;
use crate::noise::NoiseModel;
use crate::qgroups::{compile_inversion, CliffordId, GroupTable, WeylLabel, CLIFFORD_COUNT};
use crate::qops::{unitary_to_super, vectorize, SubspaceSplit, SuperOp};
use crate::seed::{self, tag};
use crate::synth::{phase_reversed_recipe, PhysicalGate, RecipeTable};
use crate::{C64, CMat, CVec, Result};
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Srb,
    SrbLite,
    GroupRb,
}

impl Protocol {
    pub fn uses_weyl(&self) -> bool {
        matches!(self, Protocol::Srb | Protocol::GroupRb)
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Protocol::Srb => write!(f, "srb"),
            Protocol::SrbLite => write!(f, "srb_lite"),
            Protocol::GroupRb => write!(f, "group_rb"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Sampled,
}

/// One randomized sequence: ℓ Cliffords, the compiled inversion, and the
/// per-position standard/phase-reversed choices.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    pub length: usize,
    pub clifford_ids: Vec<CliffordId>,
    pub weyl: Option<WeylLabel>,
    pub inversion: CliffordId,
    pub expected_outcome: u8,
    /// Config flag: was phase-reversed averaging enabled?
    pub phase_reversed: bool,
    /// Per-position recipe choice (length ℓ+1, inversion last); all false
    /// when phase reversal is off.
    pub reversed_mask: Vec<bool>,
}

/// Per-sequence measurement record. In `Exact` mode `n_shots` is 0,
/// `raw_counts` is empty, and `corrected` holds the exact true-class
/// probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotRecord {
    pub length: usize,
    pub sequence_index: usize,
    pub weyl: Option<WeylLabel>,
    pub expected_outcome: u8,
    pub phase_reversed: bool,
    pub n_shots: u64,
    pub raw_counts: Vec<u64>,
    /// Least-squares corrected outcome frequencies (may be slightly
    /// negative; never clipped here).
    pub corrected: [f64; 3],
    /// Clipped, renormalized convenience view of `corrected`.
    pub clipped: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub protocol: Protocol,
    pub mode: Mode,
    pub lengths: Vec<usize>,
    pub records: Vec<ShotRecord>,
    pub master_seed: u64,
}

impl Dataset {
    pub fn records_at(&self, length: usize) -> impl Iterator<Item = &ShotRecord> {
        self.records.iter().filter(move |r| r.length == length)
    }
}

/// Detector handling for sampled runs.
#[derive(Debug, Clone)]
pub enum DetectorSpec {
    /// Shots are multinomial draws over the true classes; no photon model.
    Ideal,
    /// Photon-count model with the analytic response used for correction.
    Analytic(DetectorModel),
    /// Photon-count model corrected with a tomography estimate built from
    /// `calibration_shots` per class.
    Tomography { model: DetectorModel, calibration_shots: u64 },
}

impl Default for DetectorSpec {
    fn default() -> Self {
        DetectorSpec::Tomography { model: DetectorModel::default(), calibration_shots: 100_000 }
    }
}

/// Everything a run needs besides the compiled tables.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub protocol: Protocol,
    pub lengths: Vec<usize>,
    /// Random sequences per length (K).
    pub k_sequences: usize,
    /// Shots per sequence (Sampled mode).
    pub n_shots: u64,
    pub mode: Mode,
    pub phase_reversed: bool,
    pub master_seed: u64,
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lengths.is_empty() {
            return Err(SrbError::Config("lengths must be non-empty".into()));
        }
        let mut sorted = self.lengths.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.lengths.len() {
            return Err(SrbError::Config("duplicate sequence lengths".into()));
        }
        if self.k_sequences == 0 {
            return Err(SrbError::Config("k_sequences must be positive".into()));
        }
        if self.mode == Mode::Sampled && self.n_shots == 0 {
            return Err(SrbError::Config("n_shots must be positive in sampled mode".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Compiled gate set
// ---------------------------------------------------------------------------

/// Per-Clifford noisy superoperators, standard and (optionally) reversed.
pub struct CompiledSet {
    pub standard: Vec<SuperOp>,
    pub reversed: Option<Vec<SuperOp>>,
    pub prep: Option<SuperOp>,
    pub measure: Option<SuperOp>,
}

fn gate_noise<'a>(gate: &PhysicalGate, noise: &'a NoiseModel) -> Option<&'a SuperOp> {
    match gate {
        PhysicalGate::CollectiveRotation { .. } => noise.per_rotation.as_ref().map(|c| &c.superop),
        // The XX-YY gate substitutes for a phase gate, so it inherits the
        // phase-gate error slot.
        PhysicalGate::PhaseGate | PhysicalGate::XxyyGate => {
            noise.per_phase_gate.as_ref().map(|c| &c.superop)
        }
    }
}

fn compile_recipe_super(
    gates: &[PhysicalGate],
    noise: &NoiseModel,
) -> Result<SuperOp> {
    let mut total = SuperOp::identity(4);
    for gate in gates {
        let ideal = unitary_to_super(&gate.unitary())?;
        total = ideal.compose(&total);
        if let Some(err) = gate_noise(gate, noise) {
            total = SuperOp::new(4, &err.mat * &total.mat);
        }
    }
    if let Some(cl) = &noise.per_clifford {
        total = SuperOp::new(4, &cl.superop.mat * &total.mat);
    }
    Ok(total)
}

/// Expand every recipe into its noisy 16×16 superoperator.
pub fn compile_gate_set(
    recipes: &RecipeTable,
    noise: &NoiseModel,
    with_reversed: bool,
) -> Result<CompiledSet> {
    let standard: Result<Vec<SuperOp>> =
        recipes.recipes.iter().map(|r| compile_recipe_super(&r.gates, noise)).collect();
    let reversed = if with_reversed {
        let rev: Result<Vec<SuperOp>> = recipes
            .recipes
            .iter()
            .map(|r| compile_recipe_super(&phase_reversed_recipe(r)?.gates, noise))
            .collect();
        Some(rev?)
    } else {
        None
    };
    Ok(CompiledSet {
        standard: standard?,
        reversed,
        prep: noise.prep.as_ref().map(|c| c.superop.clone()),
        measure: noise.measure.as_ref().map(|c| c.superop.clone()),
    })
}

// ---------------------------------------------------------------------------
// Sequence generation and simulation
// ---------------------------------------------------------------------------

/// Draw a random sequence for the given protocol.
pub fn generate_sequence<R: Rng + ?Sized>(
    table: &GroupTable,
    length: usize,
    protocol: Protocol,
    phase_reversed: bool,
    rng: &mut R,
) -> SequenceSpec {
    let clifford_ids: Vec<CliffordId> =
        (0..length).map(|_| CliffordId(rng.gen_range(0..CLIFFORD_COUNT))).collect();
    let weyl = if protocol.uses_weyl() {
        Some(WeylLabel::from_index(rng.gen_range(0..9)))
    } else {
        None
    };
    let (inversion, expected_outcome) =
        compile_inversion(table, &clifford_ids, weyl.unwrap_or(WeylLabel::new(0, 0)));
    let reversed_mask: Vec<bool> = if phase_reversed {
        (0..=length).map(|_| rng.gen_bool(0.5)).collect()
    } else {
        vec![false; length + 1]
    };
    SequenceSpec {
        length,
        clifford_ids,
        weyl,
        inversion,
        expected_outcome,
        phase_reversed,
        reversed_mask,
    }
}

/// Exact outcome of one sequence: true-class probabilities and the
/// population left in the antisymmetric state.
#[derive(Debug, Clone, Copy)]
pub struct ExactOutcome {
    pub probs: [f64; 3],
    pub leak_population: f64,
}

fn initial_state() -> CVec {
    let mut rho = CMat::zeros(4, 4);
    rho[(0, 0)] = C64::new(1.0, 0.0);
    vectorize(&rho)
}

/// Propagate one sequence through the compiled superoperators.
pub fn simulate_sequence(spec: &SequenceSpec, compiled: &CompiledSet) -> Result<ExactOutcome> {
    let pick = |id: CliffordId, reversed: bool| -> Result<&SuperOp> {
        if reversed {
            compiled
                .reversed
                .as_ref()
                .map(|v| &v[id.0])
                .ok_or_else(|| SrbError::InvalidInput("reversed recipes not compiled".into()))
        } else {
            Ok(&compiled.standard[id.0])
        }
    };

    let mut rho = initial_state();
    if let Some(prep) = &compiled.prep {
        rho = prep.apply_vec(&rho);
    }
    for (j, &id) in spec.clifford_ids.iter().enumerate() {
        rho = pick(id, spec.reversed_mask[j])?.apply_vec(&rho);
    }
    rho = pick(spec.inversion, spec.reversed_mask[spec.length])?.apply_vec(&rho);
    if let Some(measure) = &compiled.measure {
        rho = measure.apply_vec(&rho);
    }

    // POVM {|00⟩⟨00|, |01⟩⟨01|+|10⟩⟨10|, |11⟩⟨11|}: diagonal in the
    // computational basis, so probabilities read off the vectorized state.
    let diag = |i: usize| rho[i * 4 + i].re;
    let probs = [diag(0), diag(1) + diag(2), diag(3)];
    let split = SubspaceSplit::two_qubit();
    let rho_mat = crate::qops::unvectorize(&rho, 4);
    let leak_population = (split.leak_projector() * rho_mat).trace().re;
    Ok(ExactOutcome { probs, leak_population })
}

fn multinomial_draw<R: Rng + ?Sized>(probs: &[f64; 3], n: u64, rng: &mut R) -> [u64; 3] {
    let mut counts = [0u64; 3];
    // Clip tiny negative float noise before drawing.
    let p: Vec<f64> = probs.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = p.iter().sum();
    for _ in 0..n {
        let mut u = rng.gen_range(0.0..total.max(1e-300));
        let mut k = 2;
        for (i, &pi) in p.iter().enumerate() {
            if u < pi {
                k = i;
                break;
            }
            u -= pi;
        }
        counts[k] += 1;
    }
    counts
}

/// Correction matrix actually used for a detector spec (estimated once per
/// run for the tomography variant).
fn correction_response<R: Rng + ?Sized>(
    detector: &DetectorSpec,
    rng: &mut R,
) -> Result<Option<DMatrix<f64>>> {
    match detector {
        DetectorSpec::Ideal => Ok(None),
        DetectorSpec::Analytic(model) => Ok(Some(model.response.clone())),
        DetectorSpec::Tomography { model, calibration_shots } => {
            let mut calib = Vec::new();
            for k in 0..TRUE_CLASSES {
                let mut counts = [0u64; 3];
                counts[k] = *calibration_shots;
                calib.push(simulate_detector(&counts, model, rng));
            }
            Ok(Some(detector_tomography(&calib)?))
        }
    }
}

fn sample_record<R: Rng + ?Sized>(
    spec: &SequenceSpec,
    seq_index: usize,
    outcome: &ExactOutcome,
    n_shots: u64,
    detector: &DetectorSpec,
    response: Option<&DMatrix<f64>>,
    rng: &mut R,
) -> Result<ShotRecord> {
    let true_counts = multinomial_draw(&outcome.probs, n_shots, rng);
    let (raw, corrected, clipped) = match detector {
        DetectorSpec::Ideal => {
            let raw = true_counts.to_vec();
            let freqs: Vec<f64> = raw.iter().map(|&c| c as f64 / n_shots as f64).collect();
            let corrected = [freqs[0], freqs[1], freqs[2]];
            (raw, corrected, corrected)
        }
        DetectorSpec::Analytic(model) | DetectorSpec::Tomography { model, .. } => {
            let raw = simulate_detector(&true_counts, model, rng);
            let resp = response.expect("photon detector requires a response matrix");
            let (corr, clip) = correct_counts(&raw, resp)?;
            (raw, [corr[0], corr[1], corr[2]], [clip[0], clip[1], clip[2]])
        }
    };
    Ok(ShotRecord {
        length: spec.length,
        sequence_index: seq_index,
        weyl: spec.weyl,
        expected_outcome: spec.expected_outcome,
        phase_reversed: spec.phase_reversed,
        n_shots,
        raw_counts: raw,
        corrected,
        clipped,
    })
}

/// Run the full experiment: K sequences per length, exact or sampled.
///
/// Sequence i at length ℓ draws from the stream (master_seed, ℓ, i), so
/// parallel and serial execution give identical datasets.
pub fn run_experiment(
    table: &GroupTable,
    compiled: &CompiledSet,
    spec: &RunSpec,
    detector: &DetectorSpec,
) -> Result<Dataset> {
    spec.validate()?;
    let response = {
        let mut rng = seed::stream_rng(spec.master_seed, tag::CALIBRATION, 0, 0);
        correction_response(detector, &mut rng)?
    };

    let jobs: Vec<(usize, usize)> = spec
        .lengths
        .iter()
        .flat_map(|&l| (0..spec.k_sequences).map(move |i| (l, i)))
        .collect();

    let records: Result<Vec<ShotRecord>> = jobs
        .par_iter()
        .map(|&(length, i)| {
            let mut rng = seed::stream_rng(spec.master_seed, tag::SEQUENCE, length as u64, i as u64);
            let seq =
                generate_sequence(table, length, spec.protocol, spec.phase_reversed, &mut rng);
            let outcome = simulate_sequence(&seq, compiled)?;
            match spec.mode {
                Mode::Exact => Ok(ShotRecord {
                    length,
                    sequence_index: i,
                    weyl: seq.weyl,
                    expected_outcome: seq.expected_outcome,
                    phase_reversed: seq.phase_reversed,
                    n_shots: 0,
                    raw_counts: Vec::new(),
                    corrected: outcome.probs,
                    clipped: outcome.probs,
                }),
                Mode::Sampled => {
                    let mut det_rng =
                        seed::stream_rng(spec.master_seed, tag::DETECTOR, length as u64, i as u64);
                    sample_record(
                        &seq,
                        i,
                        &outcome,
                        spec.n_shots,
                        detector,
                        response.as_ref(),
                        &mut det_rng,
                    )
                }
            }
        })
        .collect();

    Ok(Dataset {
        protocol: spec.protocol,
        mode: spec.mode,
        lengths: spec.lengths.clone(),
        records: records?,
        master_seed: spec.master_seed,
    })
}

// ---------------------------------------------------------------------------
// CSV import/export
// ---------------------------------------------------------------------------

const CSV_HEADER: [&str; 14] = [
    "protocol",
    "length",
    "sequence_index",
    "phase_reversed",
    "weyl_a",
    "weyl_b",
    "expected_outcome",
    "n_shots",
    "raw_c0",
    "raw_c1",
    "raw_c2",
    "corr_f0",
    "corr_f1",
    "corr_f2",
];

/// Write a dataset as CSV, one row per (length, sequence).
pub fn export_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::Writer::from_path(&tmp)?;
        w.write_record(CSV_HEADER)?;
        for r in &ds.records {
            let (wa, wb) = match r.weyl {
                Some(w) => (w.a.to_string(), w.b.to_string()),
                None => (String::new(), String::new()),
            };
            let raw = |i: usize| r.raw_counts.get(i).copied().unwrap_or(0).to_string();
            w.write_record([
                ds.protocol.to_string(),
                r.length.to_string(),
                r.sequence_index.to_string(),
                (r.phase_reversed as u8).to_string(),
                wa,
                wb,
                r.expected_outcome.to_string(),
                r.n_shots.to_string(),
                raw(0),
                raw(1),
                raw(2),
                format!("{:?}", r.corrected[0]),
                format!("{:?}", r.corrected[1]),
                format!("{:?}", r.corrected[2]),
            ])?;
        }
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn schema_err(line: usize, msg: impl Into<String>) -> SrbError {
    SrbError::Schema { line, msg: msg.into() }
}

/// Read a dataset from the documented CSV schema. Records are grouped by
/// (length, sequence index); mode is `Exact` when every row has zero shots.
pub fn ingest_external(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let mut missing: Vec<&str> = Vec::new();
    let mut idx = [0usize; 14];
    for (i, name) in CSV_HEADER.iter().enumerate() {
        match col(name) {
            Some(j) => idx[i] = j,
            None => missing.push(name),
        }
    }
    if !missing.is_empty() {
        return Err(schema_err(1, format!("missing columns: {}", missing.join(", "))));
    }

    let mut protocol: Option<Protocol> = None;
    let mut records = Vec::new();
    for (row_idx, row) in reader.records().enumerate() {
        let line = row_idx + 2;
        let row = row?;
        let field = |i: usize| row.get(idx[i]).unwrap_or("").trim();
        let parse_u = |i: usize, what: &str| -> Result<u64> {
            field(i)
                .parse::<u64>()
                .map_err(|_| schema_err(line, format!("bad {what}: '{}'", field(i))))
        };
        let parse_f = |i: usize, what: &str| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .map_err(|_| schema_err(line, format!("bad {what}: '{}'", field(i))))
        };

        let proto = match field(0) {
            "srb" => Protocol::Srb,
            "srb_lite" => Protocol::SrbLite,
            "group_rb" => Protocol::GroupRb,
            other => return Err(schema_err(line, format!("unknown protocol '{other}'"))),
        };
        match protocol {
            None => protocol = Some(proto),
            Some(p) if p != proto => {
                return Err(schema_err(line, "mixed protocols in one file"));
            }
            _ => {}
        }
        let weyl = if proto.uses_weyl() {
            let a = parse_u(4, "weyl_a")?;
            let b = parse_u(5, "weyl_b")?;
            if a > 2 || b > 2 {
                return Err(schema_err(line, "weyl exponents must be in {0,1,2}"));
            }
            Some(WeylLabel::new(a as u8, b as u8))
        } else {
            None
        };
        let expected = field(6);
        if expected.is_empty() {
            return Err(schema_err(line, "missing expected_outcome"));
        }
        let expected_outcome = expected
            .parse::<u8>()
            .map_err(|_| schema_err(line, format!("bad expected_outcome: '{expected}'")))?;
        if expected_outcome > 2 {
            return Err(schema_err(line, "expected_outcome must be in {0,1,2}"));
        }
        let n_shots = parse_u(7, "n_shots")?;
        let raw_counts = if n_shots > 0 {
            let raw = vec![parse_u(8, "raw_c0")?, parse_u(9, "raw_c1")?, parse_u(10, "raw_c2")?];
            let total: u64 = raw.iter().sum();
            if total != n_shots {
                return Err(schema_err(
                    line,
                    format!("raw counts sum to {total} but n_shots = {n_shots}"),
                ));
            }
            raw
        } else {
            Vec::new()
        };
        let corrected =
            [parse_f(11, "corr_f0")?, parse_f(12, "corr_f1")?, parse_f(13, "corr_f2")?];
        let mut clipped = corrected.map(|v| v.max(0.0));
        let s: f64 = clipped.iter().sum();
        if s > 0.0 {
            clipped = clipped.map(|v| v / s);
        }
        records.push(ShotRecord {
            length: parse_u(1, "length")? as usize,
            sequence_index: parse_u(2, "sequence_index")? as usize,
            weyl,
            expected_outcome,
            phase_reversed: field(3) == "1" || field(3) == "true",
            n_shots,
            raw_counts,
            corrected,
            clipped,
        });
    }
    if records.is_empty() {
        return Err(schema_err(2, "file contains no data rows"));
    }
    let protocol = protocol.unwrap();
    let mut lengths: Vec<usize> = records.iter().map(|r| r.length).collect();
    lengths.sort_unstable();
    lengths.dedup();
    let mode =
        if records.iter().all(|r| r.n_shots == 0) { Mode::Exact } else { Mode::Sampled };
    Ok(Dataset { protocol, mode, lengths, records, master_seed: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{make_channel, qutrit_depolarizing, ChannelKind, NoiseModel};
    use crate::qgroups::build_clifford_group;
    use crate::synth::{build_recipe_table, DEFAULT_SYNTH_SEED};
    use approx::assert_abs_diff_eq;
    use once_cell::sync::Lazy;

    struct Tables {
        group: crate::qgroups::CliffordGroup,
        recipes: RecipeTable,
    }

    static TABLES: Lazy<Tables> = Lazy::new(|| {
        let group = build_clifford_group().unwrap();
        let recipes = build_recipe_table(&group, DEFAULT_SYNTH_SEED).unwrap();
        Tables { group, recipes }
    });

    fn ideal_compiled() -> CompiledSet {
        compile_gate_set(&TABLES.recipes, &NoiseModel::ideal(), false).unwrap()
    }

    fn run_spec(protocol: Protocol, lengths: &[usize], k: usize, mode: Mode, seed: u64) -> RunSpec {
        RunSpec {
            protocol,
            lengths: lengths.to_vec(),
            k_sequences: k,
            n_shots: 50,
            mode,
            phase_reversed: false,
            master_seed: seed,
        }
    }

    #[test]
    fn noiseless_sequences_return_expected_outcome() {
        let t = &*TABLES;
        let compiled = ideal_compiled();
        let mut rng = seed::stream_rng(3, tag::SEQUENCE, 0, 0);
        for protocol in [Protocol::Srb, Protocol::SrbLite, Protocol::GroupRb] {
            for length in [0usize, 1, 5, 12] {
                let seq = generate_sequence(&t.group.table, length, protocol, false, &mut rng);
                let out = simulate_sequence(&seq, &compiled).unwrap();
                assert!(
                    (out.probs[seq.expected_outcome as usize] - 1.0).abs() < 1e-10,
                    "{protocol} ℓ={length}: {:?}",
                    out.probs
                );
                assert!(out.leak_population.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn phase_reversed_sequences_also_invert() {
        let t = &*TABLES;
        let compiled = compile_gate_set(&TABLES.recipes, &NoiseModel::ideal(), true).unwrap();
        let mut rng = seed::stream_rng(5, tag::SEQUENCE, 1, 0);
        for _ in 0..5 {
            let seq = generate_sequence(&t.group.table, 6, Protocol::Srb, true, &mut rng);
            let out = simulate_sequence(&seq, &compiled).unwrap();
            assert!((out.probs[seq.expected_outcome as usize] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn per_clifford_depolarizing_matches_closed_form() {
        // Qutrit-block depolarizing composes exactly:
        // survival = (1−ε)^{ℓ+1} + (1 − (1−ε)^{ℓ+1})/3.
        let t = &*TABLES;
        let eps = 0.07;
        let noise =
            NoiseModel { per_clifford: Some(qutrit_depolarizing(eps).unwrap()), ..Default::default() };
        let compiled = compile_gate_set(&t.recipes, &noise, false).unwrap();
        let mut rng = seed::stream_rng(11, tag::SEQUENCE, 0, 1);
        for length in [0usize, 3, 10] {
            let seq = generate_sequence(&t.group.table, length, Protocol::Srb, false, &mut rng);
            let out = simulate_sequence(&seq, &compiled).unwrap();
            let decay = (1.0 - eps).powi(length as i32 + 1);
            let expect = decay + (1.0 - decay) / 3.0;
            assert_abs_diff_eq!(out.probs[seq.expected_outcome as usize], expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn probabilities_stay_normalized_under_noise() {
        let t = &*TABLES;
        let noise = NoiseModel {
            per_phase_gate: Some(make_channel(ChannelKind::OpticalPumping, 0.05).unwrap()),
            ..Default::default()
        };
        let compiled = compile_gate_set(&t.recipes, &noise, false).unwrap();
        let mut rng = seed::stream_rng(13, tag::SEQUENCE, 10, 2);
        let seq = generate_sequence(&t.group.table, 10, Protocol::Srb, false, &mut rng);
        let out = simulate_sequence(&seq, &compiled).unwrap();
        let total: f64 = out.probs.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn type1_noise_leaves_singlet_empty() {
        let t = &*TABLES;
        let noise = NoiseModel {
            per_phase_gate: Some(make_channel(ChannelKind::IntensityError, 0.2).unwrap()),
            per_rotation: Some(qutrit_depolarizing(0.01).unwrap()),
            ..Default::default()
        };
        let compiled = compile_gate_set(&t.recipes, &noise, false).unwrap();
        let mut rng = seed::stream_rng(17, tag::SEQUENCE, 20, 0);
        let seq = generate_sequence(&t.group.table, 20, Protocol::Srb, false, &mut rng);
        let out = simulate_sequence(&seq, &compiled).unwrap();
        assert!(out.leak_population.abs() < 1e-12);
    }

    #[test]
    fn reruns_are_bit_identical() {
        let t = &*TABLES;
        let compiled = ideal_compiled();
        let spec = run_spec(Protocol::Srb, &[1, 4, 9], 8, Mode::Sampled, 99);
        let detector = DetectorSpec::default();
        let a = run_experiment(&t.group.table, &compiled, &spec, &detector).unwrap();
        let b = run_experiment(&t.group.table, &compiled, &spec, &detector).unwrap();
        assert_eq!(a, b);
        // Exact mode too.
        let spec = run_spec(Protocol::Srb, &[1, 4, 9], 8, Mode::Exact, 99);
        let a = run_experiment(&t.group.table, &compiled, &spec, &DetectorSpec::Ideal).unwrap();
        let b = run_experiment(&t.group.table, &compiled, &spec, &DetectorSpec::Ideal).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 24);
    }

    #[test]
    fn exact_mode_zero_noise_records_certain_outcomes() {
        let t = &*TABLES;
        let compiled = ideal_compiled();
        let spec = run_spec(Protocol::Srb, &[2, 7], 6, Mode::Exact, 7);
        let ds = run_experiment(&t.group.table, &compiled, &spec, &DetectorSpec::Ideal).unwrap();
        for r in &ds.records {
            assert!((r.corrected[r.expected_outcome as usize] - 1.0).abs() < 1e-10);
            let total: f64 = r.corrected.iter().sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn csv_round_trip() {
        let t = &*TABLES;
        let compiled = ideal_compiled();
        let dir = tempfile::tempdir().unwrap();

        for (mode, detector) in
            [(Mode::Sampled, DetectorSpec::default()), (Mode::Exact, DetectorSpec::Ideal)]
        {
            let spec = run_spec(Protocol::Srb, &[1, 3], 5, mode, 21);
            let ds = run_experiment(&t.group.table, &compiled, &spec, &detector).unwrap();
            let path = dir.path().join(format!("ds_{mode:?}.csv"));
            export_csv(&ds, &path).unwrap();
            let back = ingest_external(&path).unwrap();
            assert_eq!(back.protocol, ds.protocol);
            assert_eq!(back.mode, ds.mode);
            assert_eq!(back.lengths, ds.lengths);
            assert_eq!(back.records.len(), ds.records.len());
            for (a, b) in back.records.iter().zip(&ds.records) {
                assert_eq!(a.length, b.length);
                assert_eq!(a.weyl, b.weyl);
                assert_eq!(a.expected_outcome, b.expected_outcome);
                assert_eq!(a.n_shots, b.n_shots);
                // Floats are printed with full precision, so they survive.
                assert_eq!(a.corrected, b.corrected);
                if mode == Mode::Sampled {
                    assert_eq!(a.raw_counts, b.raw_counts);
                }
            }
        }
    }

    #[test]
    fn ingest_rejects_bad_schema() {
        let dir = tempfile::tempdir().unwrap();

        // Missing expected_outcome column entirely.
        let path = dir.path().join("missing.csv");
        std::fs::write(
            &path,
            "protocol,length,sequence_index,phase_reversed,weyl_a,weyl_b,n_shots,raw_c0,raw_c1,raw_c2,corr_f0,corr_f1,corr_f2\n",
        )
        .unwrap();
        match ingest_external(&path) {
            Err(SrbError::Schema { msg, .. }) => assert!(msg.contains("expected_outcome")),
            other => panic!("expected schema error, got {other:?}"),
        }

        // Header only: empty dataset.
        let path = dir.path().join("empty.csv");
        let header = CSV_HEADER.join(",");
        std::fs::write(&path, format!("{header}\n")).unwrap();
        assert!(matches!(ingest_external(&path), Err(SrbError::Schema { .. })));

        // Row whose raw counts do not add up.
        let path = dir.path().join("bad_counts.csv");
        std::fs::write(
            &path,
            format!("{header}\nsrb,3,0,0,1,2,1,100,10,10,10,0.1,0.1,0.8\n"),
        )
        .unwrap();
        match ingest_external(&path) {
            Err(SrbError::Schema { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected schema error, got {other:?}"),
        }
    }
}
