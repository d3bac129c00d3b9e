//! Bootstrap calibration of the EL statistic.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::wilks::{asymptotic_law, check_alpha, warning_for, Calibration, TestReport};
use super::{InferenceError, Result};
use crate::book::{el_book, BookElOptions};
use crate::geometry::{BookPoint, Sample};
use crate::rng::{substream, DOMAIN_BOOTSTRAP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCalibration {
    #[serde(rename = "B")]
    pub b: usize,
    /// Sorted replicate statistics `u_(1) <= ... <= u_(B)`.
    #[serde(with = "crate::json::vec")]
    pub statistics: Vec<f64>,
    /// 1-based rank `floor(B (1 - alpha)) + 1`.
    pub rank: usize,
    #[serde(with = "crate::json")]
    pub threshold: f64,
    pub infinite_count: usize,
}

/// Order-statistic threshold of the given replicate statistics.
pub fn threshold_from_statistics(mut statistics: Vec<f64>, alpha: f64) -> Result<BootstrapCalibration> {
    check_alpha(alpha)?;
    let b = statistics.len();
    if b == 0 {
        return Err(InferenceError::EmptyBootstrap);
    }
    if statistics.iter().any(|u| u.is_nan()) {
        return Err(InferenceError::NotANumber);
    }
    let infinite_count = statistics.iter().filter(|u| u.is_infinite()).count();
    if infinite_count == b {
        return Err(InferenceError::AllReplicatesInfeasible);
    }
    statistics.sort_by(f64::total_cmp);
    let rank = (((b as f64) * (1.0 - alpha)).floor() as usize + 1).min(b);
    Ok(BootstrapCalibration {
        b,
        threshold: statistics[rank - 1],
        statistics,
        rank,
        infinite_count,
    })
}

/// Replicate statistics `u_b = -2 log R` of resamples at `centre`, in
/// replicate order. Replicate `b` draws from its own substream of `seed`.
pub fn bootstrap_statistics(
    sample: &Sample,
    centre: &BookPoint,
    b: usize,
    seed: u64,
    opts: &BookElOptions,
) -> Result<Vec<f64>> {
    if b == 0 {
        return Err(InferenceError::EmptyBootstrap);
    }
    let n = sample.len();
    (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = substream(seed, DOMAIN_BOOTSTRAP, rep as u64);
            let indices: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let r = el_book(&sample.resample(&indices), centre, opts)?;
            Ok(if r.log_ratio.is_finite() { r.statistic() } else { f64::INFINITY })
        })
        .collect()
}

/// Bootstrap threshold for the statistic at the sample Fréchet mean.
pub fn bootstrap_calibrate(sample: &Sample, alpha: f64, b: usize, seed: u64) -> Result<BootstrapCalibration> {
    bootstrap_calibrate_with(sample, alpha, b, seed, &BookElOptions::default())
}

pub fn bootstrap_calibrate_with(
    sample: &Sample,
    alpha: f64,
    b: usize,
    seed: u64,
    opts: &BookElOptions,
) -> Result<BootstrapCalibration> {
    check_alpha(alpha)?;
    let centre = sample.frechet_mean()?.mean;
    threshold_from_statistics(bootstrap_statistics(sample, &centre, b, seed, opts)?, alpha)
}

/// Tests `H0: mean = z` against the bootstrap threshold.
///
/// The p-value is the fraction of replicates with `u_b >= statistic`; the
/// reported law is the asymptotic one for reference.
pub fn bootstrap_test(sample: &Sample, z: &BookPoint, alpha: f64, b: usize, seed: u64) -> Result<TestReport> {
    let opts = BookElOptions::default();
    let calibration = bootstrap_calibrate_with(sample, alpha, b, seed, &opts)?;
    let statistic = el_book(sample, z, &opts)?.statistic();
    let (law, regime_source) = asymptotic_law(sample, z, None);
    let at_least = calibration.statistics.iter().filter(|&&u| u >= statistic).count();
    Ok(TestReport {
        statistic,
        law,
        threshold: calibration.threshold,
        p_value: at_least as f64 / calibration.b as f64,
        reject: statistic > calibration.threshold,
        regime_source,
        calibration: Calibration::Bootstrap,
        warning: warning_for(law),
    })
}
