//! Photon-count detector model, tomography, and count correction.
//!
//! State-dependent fluorescence returns a photon count proportional to the
//! number of bright ions: true outcome k emits Poisson counts with mean
//! k·bright + (2−k)·dark. Counts are classified into bins at the
//! maximum-likelihood boundaries, and the resulting confusion matrix is
//! inverted (least squares) to recover outcome frequencies.

use crate::error::SrbError;
use crate::Result;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Poisson};

/// Number of true outcome classes (0, 1, or 2 bright ions).
pub const TRUE_CLASSES: usize = 3;

#[derive(Debug, Clone)]
pub struct DetectorModel {
    /// Mean photon count per bright ion.
    pub bright_mean: f64,
    /// Mean photon count per dark ion.
    pub dark_mean: f64,
    /// Count thresholds: counts < thresholds[0] fall in bin 0, etc.
    pub thresholds: Vec<u32>,
    /// Column-stochastic response R[observed bin][true class].
    pub response: DMatrix<f64>,
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel::new(9.0, 0.1)
    }
}

impl DetectorModel {
    /// Detector with maximum-likelihood bin boundaries and the analytic
    /// Poisson response matrix.
    pub fn new(bright_mean: f64, dark_mean: f64) -> Self {
        let thresholds = ml_thresholds(bright_mean, dark_mean);
        let response = analytic_response(bright_mean, dark_mean, &thresholds);
        DetectorModel { bright_mean, dark_mean, thresholds, response }
    }

    /// Mean photon count for true outcome k.
    pub fn class_mean(&self, k: usize) -> f64 {
        k as f64 * self.bright_mean + (2 - k) as f64 * self.dark_mean
    }

    pub fn n_bins(&self) -> usize {
        self.thresholds.len() + 1
    }

    pub fn classify(&self, count: u32) -> usize {
        self.thresholds.iter().take_while(|&&t| count >= t).count()
    }
}

fn poisson_ln_pmf(mean: f64, n: u32) -> f64 {
    if mean <= 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let nf = n as f64;
    nf * mean.ln() - mean - ln_factorial(n)
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Maximum-likelihood bin boundaries for the three class means: count n is
/// assigned to the class with the largest Poisson likelihood, which is
/// monotone in n, so two thresholds suffice.
fn ml_thresholds(bright: f64, dark: f64) -> Vec<u32> {
    let means: Vec<f64> = (0..TRUE_CLASSES).map(|k| k as f64 * bright + (2 - k) as f64 * dark).collect();
    let max_count = (means[2] + 12.0 * means[2].sqrt().max(1.0)).ceil() as u32;
    let class_of = |n: u32| -> usize {
        (0..TRUE_CLASSES)
            .max_by(|&a, &b| {
                poisson_ln_pmf(means[a], n).partial_cmp(&poisson_ln_pmf(means[b], n)).unwrap()
            })
            .unwrap()
    };
    let mut thresholds = Vec::new();
    let mut current = class_of(0);
    for n in 1..=max_count {
        let c = class_of(n);
        if c != current {
            for _ in 0..(c - current) {
                thresholds.push(n);
            }
            current = c;
        }
    }
    while thresholds.len() < TRUE_CLASSES - 1 {
        thresholds.push(max_count + 1);
    }
    thresholds
}

/// Poisson cumulative sums per bin: exact response matrix of the
/// threshold classifier.
fn analytic_response(bright: f64, dark: f64, thresholds: &[u32]) -> DMatrix<f64> {
    let n_bins = thresholds.len() + 1;
    let mut r = DMatrix::zeros(n_bins, TRUE_CLASSES);
    for k in 0..TRUE_CLASSES {
        let mean = k as f64 * bright + (2 - k) as f64 * dark;
        // Walk the pmf with the multiplicative recurrence; the tail mass
        // beyond the last threshold lands in the top bin.
        let mut pmf = (-mean).exp();
        let mut cum_bin = 0usize;
        let mut acc = 0.0;
        let top = thresholds.last().copied().unwrap_or(0).max(2) * 4 + 200;
        for n in 0..top {
            while cum_bin < thresholds.len() && n >= thresholds[cum_bin] {
                r[(cum_bin, k)] = acc;
                acc = 0.0;
                cum_bin += 1;
            }
            acc += pmf;
            pmf *= mean / (n + 1) as f64;
        }
        r[(cum_bin, k)] = acc;
        // Assign the residual tail to the top bin so columns sum to 1 exactly.
        let col_sum: f64 = (0..n_bins).map(|b| r[(b, k)]).sum();
        r[(n_bins - 1, k)] += 1.0 - col_sum;
    }
    r
}

/// Sample raw observed-bin tallies for given true-outcome shot counts.
pub fn simulate_detector<R: Rng + ?Sized>(
    true_counts: &[u64; TRUE_CLASSES],
    model: &DetectorModel,
    rng: &mut R,
) -> Vec<u64> {
    let mut tallies = vec![0u64; model.n_bins()];
    for (k, &shots) in true_counts.iter().enumerate() {
        let mean = model.class_mean(k);
        for _ in 0..shots {
            let count = if mean < 1e-12 {
                0u32
            } else {
                Poisson::new(mean).expect("positive mean").sample(rng) as u32
            };
            tallies[model.classify(count)] += 1;
        }
    }
    tallies
}

/// Estimate the response matrix from calibration tallies, one observed-bin
/// histogram per true class.
pub fn detector_tomography(calibration: &[Vec<u64>]) -> Result<DMatrix<f64>> {
    if calibration.len() != TRUE_CLASSES {
        return Err(SrbError::InvalidInput(format!(
            "detector_tomography: need {TRUE_CLASSES} calibration classes, got {}",
            calibration.len()
        )));
    }
    let n_bins = calibration[0].len();
    if n_bins < TRUE_CLASSES {
        return Err(SrbError::InvalidInput(
            "detector_tomography: fewer observed bins than true classes".into(),
        ));
    }
    let mut r = DMatrix::zeros(n_bins, TRUE_CLASSES);
    for (k, tallies) in calibration.iter().enumerate() {
        if tallies.len() != n_bins {
            return Err(SrbError::InvalidInput(
                "detector_tomography: ragged calibration histograms".into(),
            ));
        }
        let total: u64 = tallies.iter().sum();
        if total == 0 {
            return Err(SrbError::InvalidInput(format!(
                "detector_tomography: calibration class {k} is empty"
            )));
        }
        for (b, &count) in tallies.iter().enumerate() {
            r[(b, k)] = count as f64 / total as f64;
        }
    }
    Ok(r)
}

/// Least-squares solve R·f = observed frequencies. Returns the raw solution
/// (possibly slightly negative) and a clipped, renormalized view.
pub fn correct_counts(raw: &[u64], response: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    if raw.len() != response.nrows() {
        return Err(SrbError::InvalidInput(format!(
            "correct_counts: {} tallies vs {} response rows",
            raw.len(),
            response.nrows()
        )));
    }
    let total: u64 = raw.iter().sum();
    if total == 0 {
        return Err(SrbError::InvalidInput("correct_counts: zero shots".into()));
    }
    let g = DVector::from_iterator(raw.len(), raw.iter().map(|&c| c as f64 / total as f64));
    let svd = response.clone().svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let min_sv = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_sv < 1e-10 * max_sv.max(1.0) {
        return Err(SrbError::InvalidInput(
            "correct_counts: response matrix is rank deficient".into(),
        ));
    }
    let f = svd.solve(&g, 1e-12).map_err(|e| SrbError::InvalidInput(e.to_string()))?;
    let corrected: Vec<f64> = f.iter().cloned().collect();
    let mut clipped: Vec<f64> = corrected.iter().map(|&v| v.max(0.0)).collect();
    let s: f64 = clipped.iter().sum();
    if s > 0.0 {
        for v in &mut clipped {
            *v /= s;
        }
    }
    Ok((corrected, clipped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::{stream_rng, tag};
    use approx::assert_abs_diff_eq;

    #[test]
    fn default_thresholds_and_response() {
        let m = DetectorModel::default();
        assert_eq!(m.n_bins(), 3);
        // Columns sum to one exactly.
        for k in 0..TRUE_CLASSES {
            let s: f64 = (0..3).map(|b| m.response[(b, k)]).sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        }
        // Defaults leave visible 1↔2 bright confusion but essentially no
        // 0↔2 confusion.
        assert!(m.response[(2, 1)] > 1e-4);
        assert!(m.response[(1, 2)] > 1e-4);
        assert!(m.response[(2, 0)] < 1e-9);
    }

    #[test]
    fn perfect_separation_limit() {
        let m = DetectorModel::new(1000.0, 0.0);
        for k in 0..TRUE_CLASSES {
            assert!((m.response[(k, k)] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn empirical_confusion_matches_analytic() {
        let m = DetectorModel::default();
        let mut rng = stream_rng(77, tag::CALIBRATION, 0, 0);
        let shots = 100_000u64;
        let mut calib = Vec::new();
        for k in 0..TRUE_CLASSES {
            let mut counts = [0u64; TRUE_CLASSES];
            counts[k] = shots;
            calib.push(simulate_detector(&counts, &m, &mut rng));
        }
        let est = detector_tomography(&calib).unwrap();
        for k in 0..TRUE_CLASSES {
            let s: f64 = (0..3).map(|b| est[(b, k)]).sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
            for b in 0..3 {
                assert!(
                    (est[(b, k)] - m.response[(b, k)]).abs() < 0.01,
                    "bin {b} class {k}: {} vs {}",
                    est[(b, k)],
                    m.response[(b, k)]
                );
            }
        }
    }

    #[test]
    fn tomography_input_validation() {
        assert!(detector_tomography(&[vec![1, 2]]).is_err());
        assert!(detector_tomography(&[vec![1, 2], vec![1, 2], vec![1, 2]]).is_err());
        assert!(detector_tomography(&[vec![1, 2, 3], vec![0, 0, 0], vec![1, 2, 3]]).is_err());
    }

    #[test]
    fn identity_response_correction_is_transparent() {
        let r = DMatrix::identity(3, 3);
        let (corrected, _) = correct_counts(&[10, 20, 70], &r).unwrap();
        assert_abs_diff_eq!(corrected[0], 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(corrected[1], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(corrected[2], 0.7, epsilon = 1e-12);
    }

    #[test]
    fn correction_inverts_exact_push_through() {
        let m = DetectorModel::default();
        let p = [0.55, 0.25, 0.2];
        // Push exact probabilities through R, scale to integer-free counts.
        let mut observed = [0f64; 3];
        for b in 0..3 {
            for k in 0..3 {
                observed[b] += m.response[(b, k)] * p[k];
            }
        }
        let scale = 1e9;
        let raw: Vec<u64> = observed.iter().map(|&x| (x * scale).round() as u64).collect();
        let (corrected, _) = correct_counts(&raw, &m.response).unwrap();
        for k in 0..3 {
            assert!((corrected[k] - p[k]).abs() < 1e-7);
        }
    }

    #[test]
    fn sampled_correction_within_three_sigma() {
        let m = DetectorModel::default();
        let mut rng = stream_rng(11, tag::DETECTOR, 1, 2);
        let p = [0.6, 0.3, 0.1];
        let shots = 10_000u64;
        let true_counts = [
            (p[0] * shots as f64) as u64,
            (p[1] * shots as f64) as u64,
            shots - (p[0] * shots as f64) as u64 - (p[1] * shots as f64) as u64,
        ];
        let raw = simulate_detector(&true_counts, &m, &mut rng);
        let (corrected, _) = correct_counts(&raw, &m.response).unwrap();
        for k in 0..3 {
            let sigma = (p[k] * (1.0 - p[k]) / shots as f64).sqrt();
            // Correction inflates variance a little; 3σ on the multinomial
            // scale plus a small floor.
            assert!(
                (corrected[k] - p[k]).abs() < 3.0 * sigma + 0.01,
                "class {k}: {} vs {}",
                corrected[k],
                p[k]
            );
        }
    }

    #[test]
    fn rank_deficient_response_rejected() {
        let mut r = DMatrix::zeros(3, 3);
        for b in 0..3 {
            r[(b, 0)] = 1.0 / 3.0;
            r[(b, 1)] = 1.0 / 3.0;
            r[(b, 2)] = 1.0 / 3.0;
        }
        assert!(correct_counts(&[5, 5, 5], &r).is_err());
    }
}
