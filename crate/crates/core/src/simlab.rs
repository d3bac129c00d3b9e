//! Exponential mixtures on the 3-spider and Monte Carlo error-rate experiments.
//!
//! Leg `k` is chosen with probability `w_k` and the distance from the centre
//! is exponential with rate `a_k` (mean `1/a_k`).

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::book::{el_book, BookElOptions};
use crate::geometry::{classify_mean, BookPoint, GeometryError, MeanReport, Regime, Sample};
use crate::inference::{self, InferenceError, LimitLaw};
use crate::rng::{derive_seed, substream, DOMAIN_EXPERIMENT_BOOTSTRAP, DOMAIN_SAMPLE};

#[derive(Debug, Error)]
pub enum SimlabError {
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("rate convention check failed: {0}")]
    RateConvention(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

pub type Result<T> = std::result::Result<T, SimlabError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpiderMixture {
    weights: [f64; 3],
    rates: [f64; 3],
}

#[derive(Deserialize)]
struct RawMixture {
    weights: [f64; 3],
    rates: [f64; 3],
}

impl<'de> Deserialize<'de> for SpiderMixture {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawMixture::deserialize(d)?;
        SpiderMixture::new(raw.weights, raw.rates).map_err(serde::de::Error::custom)
    }
}

impl SpiderMixture {
    pub fn new(weights: [f64; 3], rates: [f64; 3]) -> Result<Self> {
        if weights.iter().chain(&rates).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SimlabError::InvalidMixture(
                "weights and rates must be positive and finite".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(SimlabError::InvalidMixture(format!("weights sum to {total}, not 1")));
        }
        Ok(SpiderMixture { weights, rates })
    }

    pub fn weights(&self) -> [f64; 3] {
        self.weights
    }

    pub fn rates(&self) -> [f64; 3] {
        self.rates
    }

    /// Non-sticky, mean at 1/6 on leg 1.
    pub fn setting_a() -> Self {
        SpiderMixture::new([0.5, 1.0 / 3.0, 1.0 / 6.0], [1.0, 2.0, 1.0]).unwrap()
    }

    /// Half-sticky, mean on the spine.
    pub fn setting_b() -> Self {
        SpiderMixture::new([0.5, 0.25, 0.25], [1.0, 1.0, 1.0]).unwrap()
    }

    /// Setting (b) with leg 1 lengthened (rate 3/4) so the mean sits at 1/6 on leg 1.
    pub fn setting_c() -> Self {
        SpiderMixture::new([0.5, 0.25, 0.25], [0.75, 1.0, 1.0]).unwrap()
    }

    /// Sticky, mean on the spine.
    pub fn setting_d() -> Self {
        SpiderMixture::new([1.0 / 3.0; 3], [1.0; 3]).unwrap()
    }

    /// Weights (1/2, 1/4, 1/4), legs 2 and 3 at rate 2, and leg 1 at the rate
    /// putting the mean at `mean` on leg 1. `mean = 9/4` is the Type I model;
    /// 10/4 and 13/4 are the Type II alternatives.
    pub fn leg_one_mean(mean: f64) -> Result<Self> {
        if !(mean.is_finite() && mean > -0.25) {
            return Err(SimlabError::InvalidMixture(format!("no leg-1 rate gives mean {mean}")));
        }
        SpiderMixture::new([0.5, 0.25, 0.25], [0.5 / (mean + 0.25), 2.0, 2.0])
    }

    /// Type I model, mean at 9/4 on leg 1 (leg-1 rate 1/5).
    pub fn type_one() -> Self {
        SpiderMixture::new([0.5, 0.25, 0.25], [0.2, 2.0, 2.0]).unwrap()
    }

    /// Folded normal means `m_k = w_k/a_k - sum_{j != k} w_j/a_j`.
    pub fn folded_means(&self) -> Vec<f64> {
        let leg_means: Vec<f64> = self.weights.iter().zip(&self.rates).map(|(w, a)| w / a).collect();
        let total: f64 = leg_means.iter().sum();
        leg_means.iter().map(|&m| m - (total - m)).collect()
    }
}

/// Population Fréchet mean, located and classified from the exact folded means.
pub fn population_frechet_mean(m: &SpiderMixture) -> MeanReport {
    classify_mean(m.folded_means(), Vec::new(), 1e-12).expect("a mixture has at most one positive folded mean")
}

/// Checks the rate reading of the mixture parameters against the known
/// means of setting (a) (1/6) and of the Type I model (9/4).
pub fn verify_rate_convention() -> Result<()> {
    let expect = |m: SpiderMixture, want: f64, name: &str| -> Result<()> {
        let r = population_frechet_mean(&m);
        match r.regime {
            Regime::NonSticky { page } if page.number() == 1 && (r.mean.normal() - want).abs() <= 1e-12 => Ok(()),
            _ => Err(SimlabError::RateConvention(format!(
                "{name}: expected mean {want} on leg 1, got {}",
                r.mean
            ))),
        }
    };
    expect(SpiderMixture::setting_a(), 1.0 / 6.0, "setting (a)")?;
    expect(SpiderMixture::type_one(), 9.0 / 4.0, "Type I model")
}

/// Maps a leg draw `u_leg` in `[0, 1)` and a length draw `u_len` in `(0, 1]`
/// to a point: the first leg whose cumulative weight exceeds `u_leg`, at
/// distance `-ln(u_len) / a_k`.
pub fn point_from_uniforms(m: &SpiderMixture, u_leg: f64, u_len: f64) -> BookPoint {
    let mut acc = 0.0;
    let mut leg = 2;
    for (k, w) in m.weights.iter().enumerate() {
        acc += w;
        if u_leg < acc {
            leg = k;
            break;
        }
    }
    BookPoint::leg(leg + 1, -u_len.ln() / m.rates[leg])
}

pub fn sample_mixture_with(m: &SpiderMixture, n: usize, rng: &mut ChaCha8Rng) -> Sample {
    let points = (0..n)
        .map(|_| {
            let u_leg: f64 = rng.random();
            let u_len = 1.0 - rng.random::<f64>();
            point_from_uniforms(m, u_leg, u_len)
        })
        .collect();
    Sample::new(crate::geometry::BookShape::spider(3).unwrap(), points).expect("mixture points are valid")
}

/// `n` draws from the mixture, deterministic in `seed`.
pub fn sample_mixture(m: &SpiderMixture, n: usize, seed: u64) -> Result<Sample> {
    if n == 0 {
        return Err(SimlabError::InvalidSpec("sample size must be at least 1".into()));
    }
    Ok(sample_mixture_with(m, n, &mut substream(seed, DOMAIN_SAMPLE, 0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorType {
    #[serde(rename = "I")]
    TypeI,
    #[serde(rename = "II")]
    TypeII,
}

fn default_true() -> bool {
    true
}

fn default_error_type() -> ErrorType {
    ErrorType::TypeI
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub model: SpiderMixture,
    pub n: usize,
    pub runs: usize,
    pub alpha: f64,
    #[serde(rename = "B")]
    pub b: usize,
    pub null_point: BookPoint,
    pub master_seed: u64,
    /// Also calibrate every run by the bootstrap.
    #[serde(default = "default_true")]
    pub with_bootstrap: bool,
    /// Labels the table row; Type II rows report `1 - rejection rate`.
    #[serde(default = "default_error_type")]
    pub error_type: ErrorType,
    #[serde(default)]
    pub retain_statistics: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(SimlabError::InvalidSpec("runs must be at least 1".into()));
        }
        if self.b == 0 {
            return Err(SimlabError::InvalidSpec("B must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(SimlabError::InvalidSpec("n must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(SimlabError::InvalidSpec(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        self.null_point.check(&crate::geometry::BookShape::spider(3)?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub law: LimitLaw,
    #[serde(with = "crate::json")]
    pub chi2_threshold: f64,
    pub rejection_rate_chi2: f64,
    pub se_chi2: f64,
    pub rejection_rate_bootstrap: Option<f64>,
    pub se_bootstrap: Option<f64>,
    /// Runs whose bootstrap replicates were all infeasible (never rejected).
    pub degenerate_bootstrap_runs: usize,
    #[serde(with = "crate::json::opt_vec")]
    pub statistics: Option<Vec<f64>>,
}

/// Binomial standard error `sqrt(r (1 - r) / runs)`.
pub fn standard_error(rate: f64, runs: usize) -> f64 {
    (rate * (1.0 - rate) / runs as f64).sqrt()
}

/// Law for the null point: `ChiSq(1)` off the spine; on the spine from the
/// model's population regime, with the sample rule for non-sticky models.
fn null_law(model: &SpiderMixture, z: &BookPoint) -> Option<LimitLaw> {
    if !z.is_spine() {
        return Some(LimitLaw::ChiSq(1));
    }
    match population_frechet_mean(model).regime {
        Regime::Sticky => Some(LimitLaw::ChiSq(0)),
        Regime::HalfSticky { .. } => Some(LimitLaw::HalfMix(1)),
        Regime::NonSticky { .. } => None,
    }
}

struct RunOutcome {
    statistic: f64,
    reject_chi2: bool,
    reject_bootstrap: Option<bool>,
    degenerate: bool,
}

/// Runs the experiment. Run `r` draws its sample from substream `r` of the
/// master seed and its bootstrap from a seed derived from `(master, r)`, so
/// the report does not depend on the thread count.
pub fn run_error_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let opts = BookElOptions::default();
    let fixed_law = null_law(&spec.model, &spec.null_point);
    let fixed_threshold = fixed_law.map(|l| l.quantile(spec.alpha)).transpose()?;
    let outcomes = (0..spec.runs)
        .into_par_iter()
        .map(|run| -> Result<RunOutcome> {
            let mut rng = substream(spec.master_seed, DOMAIN_SAMPLE, run as u64);
            let sample = sample_mixture_with(&spec.model, spec.n, &mut rng);
            let statistic = el_book(&sample, &spec.null_point, &opts)
                .map_err(InferenceError::from)?
                .statistic();
            let threshold = match fixed_threshold {
                Some(c) => c,
                None => inference::data_driven_spine_law(&sample).quantile(spec.alpha)?,
            };
            let mut degenerate = false;
            let reject_bootstrap = if spec.with_bootstrap {
                let seed = derive_seed(spec.master_seed, DOMAIN_EXPERIMENT_BOOTSTRAP, run as u64);
                match inference::bootstrap_calibrate_with(&sample, spec.alpha, spec.b, seed, &opts) {
                    Ok(cal) => Some(statistic > cal.threshold),
                    Err(InferenceError::AllReplicatesInfeasible) => {
                        degenerate = true;
                        Some(false)
                    }
                    Err(e) => return Err(e.into()),
                }
            } else {
                None
            };
            Ok(RunOutcome {
                statistic,
                reject_chi2: statistic > threshold,
                reject_bootstrap,
                degenerate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let runs = spec.runs;
    let rate = |count: usize| count as f64 / runs as f64;
    let chi2 = rate(outcomes.iter().filter(|o| o.reject_chi2).count());
    let boot = spec
        .with_bootstrap
        .then(|| rate(outcomes.iter().filter(|o| o.reject_bootstrap == Some(true)).count()));
    Ok(ExperimentReport {
        spec: spec.clone(),
        law: fixed_law.unwrap_or(LimitLaw::HalfMix(1)),
        chi2_threshold: fixed_threshold.unwrap_or(f64::NAN),
        rejection_rate_chi2: chi2,
        se_chi2: standard_error(chi2, runs),
        rejection_rate_bootstrap: boot,
        se_bootstrap: boot.map(|r| standard_error(r, runs)),
        degenerate_bootstrap_runs: outcomes.iter().filter(|o| o.degenerate).count(),
        statistics: spec
            .retain_statistics
            .then(|| outcomes.iter().map(|o| o.statistic).collect()),
    })
}

pub const TABLE_HEADER: [&str; 6] = ["error_type", "n", "chi2_rate", "bootstrap_rate", "chi2_se", "bootstrap_se"];

impl ExperimentReport {
    /// Type I rows report the rejection rate, Type II rows the acceptance rate.
    pub fn error_rates(&self) -> (f64, Option<f64>) {
        let flip = |r: f64| match self.spec.error_type {
            ErrorType::TypeI => r,
            ErrorType::TypeII => 1.0 - r,
        };
        (flip(self.rejection_rate_chi2), self.rejection_rate_bootstrap.map(flip))
    }
}

/// Writes one table row per report under [`TABLE_HEADER`]; a missing
/// bootstrap rate is left empty.
pub fn write_table_csv<W: Write>(writer: W, reports: &[ExperimentReport]) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TABLE_HEADER)?;
    for r in reports {
        let (chi2, boot) = r.error_rates();
        let label = match r.spec.error_type {
            ErrorType::TypeI => "I",
            ErrorType::TypeII => "II",
        };
        w.write_record([
            label.to_string(),
            r.spec.n.to_string(),
            format!("{chi2:.4}"),
            boot.map(|v| format!("{v:.4}")).unwrap_or_default(),
            format!("{:.4}", r.se_chi2),
            r.se_bootstrap.map(|v| format!("{v:.4}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn population_means() {
        let a = population_frechet_mean(&SpiderMixture::setting_a());
        assert!(matches!(a.regime, Regime::NonSticky { page } if page.number() == 1));
        assert_abs_diff_eq!(a.mean.normal(), 1.0 / 6.0, epsilon = 1e-15);
        let t = population_frechet_mean(&SpiderMixture::type_one());
        assert_eq!(t.mean.normal(), 2.25);
        let d = population_frechet_mean(&SpiderMixture::setting_d());
        assert_eq!(d.regime, Regime::Sticky);
        for m in d.folded_normal_means {
            assert_abs_diff_eq!(m, -1.0 / 3.0, epsilon = 1e-15);
        }
        let b = population_frechet_mean(&SpiderMixture::setting_b());
        assert!(matches!(b.regime, Regime::HalfSticky { page } if page.number() == 1));
        let c = population_frechet_mean(&SpiderMixture::setting_c());
        assert_abs_diff_eq!(c.mean.normal(), 1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn alternatives() {
        for (mean, rate) in [(2.25, 0.2), (2.5, 2.0 / 11.0), (3.25, 2.0 / 14.0)] {
            let m = SpiderMixture::leg_one_mean(mean).unwrap();
            assert_abs_diff_eq!(m.rates()[0], rate, epsilon = 1e-15);
            assert_abs_diff_eq!(population_frechet_mean(&m).mean.normal(), mean, epsilon = 1e-12);
        }
    }

    #[test]
    fn rate_convention_holds() {
        verify_rate_convention().unwrap();
    }

    #[test]
    fn invalid_mixtures() {
        assert!(SpiderMixture::new([0.5, 0.5, 0.1], [1.0; 3]).is_err());
        assert!(SpiderMixture::new([0.5, 0.5, 0.0], [1.0; 3]).is_err());
        assert!(SpiderMixture::new([1.0 / 3.0; 3], [1.0, -1.0, 1.0]).is_err());
        assert!(serde_json::from_str::<SpiderMixture>(r#"{"weights":[0.5,0.5,0.5],"rates":[1,1,1]}"#).is_err());
    }

    #[test]
    fn forced_uniforms_give_exact_points() {
        let m = SpiderMixture::setting_a();
        assert_eq!(point_from_uniforms(&m, 0.1, 0.5), BookPoint::leg(1, 2f64.ln()));
        assert_eq!(point_from_uniforms(&m, 0.6, 0.5), BookPoint::leg(2, 2f64.ln() / 2.0));
        assert_eq!(point_from_uniforms(&m, 0.9, (-1.0f64).exp()), BookPoint::leg(3, 1.0));
        assert!(point_from_uniforms(&m, 0.2, 1.0).is_spine());
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = SpiderMixture::setting_a();
        assert_eq!(sample_mixture(&m, 50, 11).unwrap(), sample_mixture(&m, 50, 11).unwrap());
        assert_ne!(sample_mixture(&m, 50, 11).unwrap(), sample_mixture(&m, 50, 12).unwrap());
    }

    #[test]
    fn leg_frequencies_sticky_setting() {
        let s = sample_mixture(&SpiderMixture::setting_d(), 100_000, 5).unwrap();
        for k in 1..=3 {
            let f = s.points().iter().filter(|x| x.page().map(|p| p.number()) == Some(k)).count() as f64 / 1e5;
            assert!((f - 1.0 / 3.0).abs() < 0.01, "leg {k}: {f}");
        }
    }

    #[test]
    fn large_sample_mean_setting_a() {
        let s = sample_mixture(&SpiderMixture::setting_a(), 100_000, 9).unwrap();
        let mean = s.frechet_mean().unwrap();
        assert_eq!(mean.mean.page().map(|p| p.number()), Some(1));
        assert!((mean.mean.normal() - 1.0 / 6.0).abs() < 0.02);
    }

    fn small_spec() -> ExperimentSpec {
        ExperimentSpec {
            model: SpiderMixture::type_one(),
            n: 20,
            runs: 40,
            alpha: 0.05,
            b: 30,
            null_point: BookPoint::leg(1, 2.25),
            master_seed: 3,
            with_bootstrap: true,
            error_type: ErrorType::TypeI,
            retain_statistics: true,
        }
    }

    #[test]
    fn experiment_is_reproducible() {
        let a = run_error_experiment(&small_spec()).unwrap();
        let b = run_error_experiment(&small_spec()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.statistics.as_ref().unwrap().len(), 40);
        assert_abs_diff_eq!(a.se_chi2, standard_error(a.rejection_rate_chi2, 40), epsilon = 0.0);
    }

    #[test]
    fn spec_json_defaults_and_validation() {
        let text = r#"{"model":{"weights":[0.5,0.25,0.25],"rates":[0.2,2,2]},"n":10,"runs":5,"alpha":0.05,
            "B":10,"null_point":{"location":"page_interior","page":1,"normal":2.25,"tangential":[]},"master_seed":1}"#;
        let spec: ExperimentSpec = serde_json::from_str(text).unwrap();
        assert!(spec.with_bootstrap);
        assert_eq!(spec.error_type, ErrorType::TypeI);
        let mut bad = spec.clone();
        bad.runs = 0;
        assert!(run_error_experiment(&bad).is_err());
    }

    #[test]
    fn table_row_layout() {
        let mut spec = small_spec();
        spec.with_bootstrap = false;
        spec.error_type = ErrorType::TypeII;
        let r = run_error_experiment(&spec).unwrap();
        let mut buf = Vec::new();
        write_table_csv(&mut buf, &[r.clone()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row = text.lines().nth(1).unwrap();
        assert!(row.starts_with("II,20,"));
        assert!(row.contains(",,"));
        assert_abs_diff_eq!(r.error_rates().0, 1.0 - r.rejection_rate_chi2, epsilon = 0.0);
    }
}
