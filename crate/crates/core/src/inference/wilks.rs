//! Wilks tests for the Fréchet mean.

use serde::{Deserialize, Serialize};

use super::laws::LimitLaw;
use super::{InferenceError, Result};
use crate::book::{el_book, BookElOptions};
use crate::geometry::{BookPoint, Page, Sample};

/// Regime assumed for a spine null point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpineRegime {
    Sticky,
    HalfSticky,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeSource {
    UserSpecified,
    DataDriven,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calibration {
    Asymptotic,
    Bootstrap,
}

pub const HALF_STICKY_WARNING: &str =
    "half-sticky calibration: coverage error is of order 1/n and bootstrap calibration helps less here";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    /// `-2 log R`, `inf` when the null point is infeasible.
    #[serde(with = "crate::json")]
    pub statistic: f64,
    pub law: LimitLaw,
    #[serde(with = "crate::json")]
    pub threshold: f64,
    pub p_value: f64,
    pub reject: bool,
    pub regime_source: RegimeSource,
    pub calibration: Calibration,
    pub warning: Option<String>,
}

/// Sticky-versus-half-sticky selector for spine nulls.
///
/// Sticky (`ChiSq(p-1)`) when every folded normal mean satisfies
/// `m_k < -2 sd_k / sqrt(n)`, otherwise `HalfMix(p)`.
pub fn data_driven_spine_law(sample: &Sample) -> LimitLaw {
    let shape = sample.shape();
    let p = shape.dim() as u32;
    let n = sample.len() as f64;
    let sticky = shape.page_iter().all(|k: Page| {
        let z = sample.signed_normals(k);
        let m = z.iter().sum::<f64>() / n;
        let sd = if z.len() > 1 {
            (z.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        m < -2.0 * sd / n.sqrt()
    });
    if sticky {
        LimitLaw::ChiSq(p - 1)
    } else {
        LimitLaw::HalfMix(p)
    }
}

/// Limit law for a null point `z`: `ChiSq(p)` off the spine; on the spine
/// the override when given, otherwise [`data_driven_spine_law`].
pub fn asymptotic_law(sample: &Sample, z: &BookPoint, regime: Option<SpineRegime>) -> (LimitLaw, RegimeSource) {
    let p = sample.shape().dim() as u32;
    if !z.is_spine() {
        return (LimitLaw::ChiSq(p), RegimeSource::DataDriven);
    }
    match regime {
        Some(SpineRegime::Sticky) => (LimitLaw::ChiSq(p - 1), RegimeSource::UserSpecified),
        Some(SpineRegime::HalfSticky) => (LimitLaw::HalfMix(p), RegimeSource::UserSpecified),
        None => (data_driven_spine_law(sample), RegimeSource::DataDriven),
    }
}

pub(crate) fn warning_for(law: LimitLaw) -> Option<String> {
    matches!(law, LimitLaw::HalfMix(_)).then(|| HALF_STICKY_WARNING.to_string())
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(InferenceError::InvalidAlpha(alpha))
    }
}

/// Tests `H0: mean = z` against its asymptotic law at level `alpha`.
pub fn wilks_test(sample: &Sample, z: &BookPoint, alpha: f64, regime: Option<SpineRegime>) -> Result<TestReport> {
    wilks_test_with(sample, z, alpha, regime, &BookElOptions::default())
}

pub fn wilks_test_with(
    sample: &Sample,
    z: &BookPoint,
    alpha: f64,
    regime: Option<SpineRegime>,
    opts: &BookElOptions,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    let statistic = el_book(sample, z, opts)?.statistic();
    let (law, regime_source) = asymptotic_law(sample, z, regime);
    let threshold = law.quantile(alpha)?;
    Ok(TestReport {
        statistic,
        law,
        threshold,
        p_value: law.p_value(statistic),
        reject: statistic > threshold,
        regime_source,
        calibration: Calibration::Asymptotic,
        warning: warning_for(law),
    })
}
