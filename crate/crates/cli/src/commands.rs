use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use openbook_el::geometry::write_sample_csv;
use openbook_el::inference::{
    bootstrap_calibrate, bootstrap_test, confidence_set_spider, wilks_test, write_profile_csv, BootstrapCalibration,
    GridOptions, InferenceError, SetLaws, SpineRegime, TestReport,
};
use openbook_el::simlab::{run_error_experiment, write_table_csv, ErrorType, ExperimentSpec, SpiderMixture};
use openbook_el::treeio::{ingest_corpus, LegAssignment};
use openbook_el::{el_book, el_spine, BookElOptions, BookPoint, BookShape, ElStatus, Regime, Sample, SpineElBreakdown};
use serde::Serialize;

use crate::input::{parse_point, parse_shape, read_sample};
use crate::{Command, Format, OutputArgs, Preset, RegimeArg, SampleArgs};

pub enum Failure {
    Input(anyhow::Error),
    Degenerate(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Degenerate(_) => 2,
            Failure::Internal(_) => 3,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Input(e) | Failure::Degenerate(e) | Failure::Internal(e) => e,
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn input<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Input(e.into())
}

fn internal<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Internal(e.into())
}

fn inference(e: InferenceError) -> Failure {
    match e {
        InferenceError::AllReplicatesInfeasible | InferenceError::EmptyConfidenceSet => {
            Failure::Degenerate(e.into())
        }
        other => Failure::Input(other.into()),
    }
}

/// Where reports go: files in a directory, or stdout.
struct Sink {
    dir: Option<PathBuf>,
    format: Format,
}

impl Sink {
    fn new(out: &OutputArgs) -> Result<Self> {
        if let Some(dir) = &out.out {
            std::fs::create_dir_all(dir)
                .with_context(|| format!("cannot create output directory `{}`", dir.display()))
                .map_err(input)?;
        }
        Ok(Sink {
            dir: out.out.clone(),
            format: out.format,
        })
    }

    fn write_file(&self, dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, bytes)
            .with_context(|| format!("cannot write `{}`", path.display()))
            .map_err(internal)
    }

    /// Emits the report as `<stem>.json` or `<stem>.csv` (or to stdout).
    fn emit(&self, stem: &str, json: impl FnOnce() -> Result<Vec<u8>>, csv: impl FnOnce() -> Result<Vec<u8>>) -> Result<()> {
        let (bytes, ext) = match self.format {
            Format::Json => (json()?, "json"),
            Format::Csv => (csv()?, "csv"),
        };
        match &self.dir {
            Some(dir) => self.write_file(dir, &format!("{stem}.{ext}"), &bytes),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(&bytes).and_then(|_| out.flush()).map_err(internal)
            }
        }
    }
}

fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(internal)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn csv_bytes(build: impl FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        build(&mut w).map_err(internal)?;
        w.flush().map_err(internal)?;
    }
    Ok(buf)
}

fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn load(sample: &SampleArgs) -> Result<(BookShape, Sample)> {
    let shape = parse_shape(&sample.shape).map_err(input)?;
    let s = read_sample(&sample.sample, shape).map_err(input)?;
    Ok((shape, s))
}

fn regime(arg: Option<RegimeArg>) -> Option<SpineRegime> {
    arg.map(|r| match r {
        RegimeArg::Sticky => SpineRegime::Sticky,
        RegimeArg::HalfSticky => SpineRegime::HalfSticky,
    })
}

pub fn run(command: Command) -> Result<u8> {
    match command {
        Command::El {
            sample,
            point,
            weights,
            output,
        } => cmd_el(&sample, &point, weights, &output),
        Command::Mean { sample, output } => cmd_mean(&sample, &output),
        Command::Test {
            sample,
            point,
            alpha,
            regime: r,
            output,
        } => cmd_test(&sample, &point, alpha, regime(r), &output),
        Command::Cr {
            sample,
            alpha,
            grid,
            extent,
            regime: r,
            output,
        } => cmd_cr(&sample, alpha, grid, extent, regime(r), &output),
        Command::Bootstrap {
            sample,
            point,
            alpha,
            b,
            seed,
            output,
        } => cmd_bootstrap(&sample, point.as_deref(), alpha, b, seed, &output),
        Command::Simulate {
            spec,
            preset,
            n,
            runs,
            b,
            seed,
            no_bootstrap,
            output,
        } => cmd_simulate(spec.as_deref(), preset, &n, runs, b, seed, no_bootstrap, &output),
        Command::Ingest {
            files,
            taxa,
            assignment,
            output,
        } => cmd_ingest(&files, &taxa, assignment.as_deref(), &output),
    }
}

#[derive(Serialize)]
struct ElEvaluation {
    point: BookPoint,
    #[serde(with = "openbook_el::json")]
    log_ratio: f64,
    #[serde(with = "openbook_el::json")]
    statistic: f64,
    status: ElStatus,
    #[serde(with = "openbook_el::json::opt_vec")]
    weights: Option<Vec<f64>>,
    spine_breakdown: Option<SpineElBreakdown>,
}

#[derive(Serialize)]
struct ElReport {
    shape: BookShape,
    n: usize,
    evaluations: Vec<ElEvaluation>,
}

fn cmd_el(args: &SampleArgs, points: &[String], weights: bool, out: &OutputArgs) -> Result<u8> {
    let (shape, sample) = load(args)?;
    let sink = Sink::new(out)?;
    let opts = BookElOptions::default();
    let mut evaluations = Vec::new();
    for text in points {
        let point = parse_point(text, &shape).map_err(input)?;
        let (result, breakdown) = if point.is_spine() {
            el_spine(&sample, point.tangential(), &opts).map_err(input)?
        } else {
            (el_book(&sample, &point, &opts).map_err(input)?, None)
        };
        evaluations.push(ElEvaluation {
            point,
            log_ratio: result.log_ratio,
            statistic: result.statistic(),
            status: result.status,
            weights: if weights { result.weights } else { None },
            spine_breakdown: breakdown,
        });
    }
    let degenerate = evaluations.iter().any(|e| e.statistic == f64::INFINITY);
    let report = ElReport {
        shape,
        n: sample.len(),
        evaluations,
    };
    sink.emit(
        "el",
        || to_json(&report),
        || {
            csv_bytes(|w| {
                w.write_record(["point", "log_ratio", "statistic", "status"])?;
                for e in &report.evaluations {
                    let status = match e.status {
                        ElStatus::Interior => "interior",
                        ElStatus::Boundary => "boundary",
                        ElStatus::Infeasible => "infeasible",
                    };
                    w.write_record([e.point.to_string(), num(e.log_ratio), num(e.statistic), status.to_string()])?;
                }
                Ok(())
            })
        },
    )?;
    if degenerate {
        eprintln!("warning: statistic is infinite at an infeasible point");
        Ok(2)
    } else {
        Ok(0)
    }
}

#[derive(Serialize)]
struct MeanOutput {
    shape: BookShape,
    n: usize,
    summary: String,
    mean: BookPoint,
    regime: Regime,
    folded_normal_means: Vec<f64>,
}

fn summary(shape: &BookShape, mean: &BookPoint, regime: &Regime) -> String {
    let word = if shape.dim() == 1 { "leg" } else { "page" };
    match regime {
        Regime::NonSticky { page } => format!("{word} {page} at {}, non-sticky", mean.normal()),
        Regime::Sticky => "spine, sticky".into(),
        Regime::HalfSticky { page } => format!("spine, half-sticky ({word} {page})"),
    }
}

fn cmd_mean(args: &SampleArgs, out: &OutputArgs) -> Result<u8> {
    let (shape, sample) = load(args)?;
    let sink = Sink::new(out)?;
    let report = sample.frechet_mean().map_err(input)?;
    let output = MeanOutput {
        shape,
        n: sample.len(),
        summary: summary(&shape, &report.mean, &report.regime),
        mean: report.mean,
        regime: report.regime,
        folded_normal_means: report.folded_normal_means,
    };
    eprintln!("mean: {}", output.summary);
    sink.emit(
        "mean",
        || to_json(&output),
        || {
            csv_bytes(|w| {
                let mut header = vec!["location".to_string(), "regime".into(), "page".into(), "normal".into()];
                header.extend((1..shape.dim()).map(|i| format!("t{i}")));
                w.write_record(&header)?;
                let (location, regime) = match output.regime {
                    Regime::NonSticky { .. } => ("page", "non_sticky"),
                    Regime::Sticky => ("spine", "sticky"),
                    Regime::HalfSticky { .. } => ("spine", "half_sticky"),
                };
                let page = output.mean.page().map(|p| p.number().to_string()).unwrap_or_default();
                let mut row = vec![location.to_string(), regime.to_string(), page, num(output.mean.normal())];
                row.extend(output.mean.tangential().iter().map(|&t| num(t)));
                w.write_record(&row)
            })
        },
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct TestOutput<'a> {
    point: &'a BookPoint,
    #[serde(flatten)]
    report: &'a TestReport,
}

fn test_header() -> [&'static str; 8] {
    ["point", "statistic", "law", "threshold", "p_value", "reject", "regime_source", "calibration"]
}

fn test_row(point: &BookPoint, r: &TestReport) -> Vec<String> {
    let source = serde_json::to_value(r.regime_source).ok().and_then(|v| v.as_str().map(String::from));
    let calibration = serde_json::to_value(r.calibration).ok().and_then(|v| v.as_str().map(String::from));
    vec![
        point.to_string(),
        num(r.statistic),
        r.law.to_string(),
        num(r.threshold),
        num(r.p_value),
        r.reject.to_string(),
        source.unwrap_or_default(),
        calibration.unwrap_or_default(),
    ]
}

fn cmd_test(args: &SampleArgs, point: &str, alpha: f64, r: Option<SpineRegime>, out: &OutputArgs) -> Result<u8> {
    let (shape, sample) = load(args)?;
    let sink = Sink::new(out)?;
    let z = parse_point(point, &shape).map_err(input)?;
    let report = wilks_test(&sample, &z, alpha, r).map_err(inference)?;
    if let Some(w) = &report.warning {
        eprintln!("warning: {w}");
    }
    sink.emit(
        "test",
        || to_json(&TestOutput { point: &z, report: &report }),
        || {
            csv_bytes(|w| {
                w.write_record(test_header())?;
                w.write_record(test_row(&z, &report))
            })
        },
    )?;
    Ok(if report.statistic == f64::INFINITY { 2 } else { 0 })
}

fn cmd_cr(
    args: &SampleArgs,
    alpha: f64,
    grid: usize,
    extent: Option<f64>,
    r: Option<SpineRegime>,
    out: &OutputArgs,
) -> Result<u8> {
    let (_, sample) = load(args)?;
    let sink = Sink::new(out)?;
    let laws = SetLaws::for_sample(&sample, r);
    let options = GridOptions {
        points: grid,
        extent,
        ..GridOptions::default()
    };
    let result = confidence_set_spider(&sample, alpha, &laws, &options).map_err(inference)?;
    let json = to_json(&result.set)?;
    let mut profile = Vec::new();
    write_profile_csv(&mut profile, &result.profile).map_err(internal)?;
    match &sink.dir {
        Some(dir) => {
            sink.write_file(dir, "confidence_set.json", &json)?;
            sink.write_file(dir, "profile.csv", &profile)?;
        }
        None => sink.emit("cr", || Ok(json), || Ok(profile))?,
    }
    Ok(0)
}

#[derive(Serialize)]
struct BootstrapOutput {
    point: Option<BookPoint>,
    calibration: BootstrapCalibration,
    test: Option<TestReport>,
}

fn cmd_bootstrap(args: &SampleArgs, point: Option<&str>, alpha: f64, b: usize, seed: u64, out: &OutputArgs) -> Result<u8> {
    let (shape, sample) = load(args)?;
    let sink = Sink::new(out)?;
    let z = point.map(|p| parse_point(p, &shape)).transpose().map_err(input)?;
    let calibration = bootstrap_calibrate(&sample, alpha, b, seed).map_err(inference)?;
    let test = z
        .as_ref()
        .map(|z| bootstrap_test(&sample, z, alpha, b, seed))
        .transpose()
        .map_err(inference)?;
    let output = BootstrapOutput {
        point: z,
        calibration,
        test,
    };
    sink.emit(
        "bootstrap",
        || to_json(&output),
        || {
            csv_bytes(|w| {
                let c = &output.calibration;
                let mut header = vec!["B", "rank", "threshold", "infinite_count"];
                let mut row = vec![c.b.to_string(), c.rank.to_string(), num(c.threshold), c.infinite_count.to_string()];
                if let (Some(z), Some(t)) = (&output.point, &output.test) {
                    header.extend(["point", "statistic", "p_value", "reject"]);
                    row.extend([z.to_string(), num(t.statistic), num(t.p_value), t.reject.to_string()]);
                }
                w.write_record(&header)?;
                w.write_record(&row)
            })
        },
    )?;
    Ok(0)
}

fn table1(ns: &[usize], runs: usize, b: usize, seed: u64, with_bootstrap: bool) -> Vec<ExperimentSpec> {
    let sizes: Vec<usize> = if ns.is_empty() { vec![10, 20, 50, 200] } else { ns.to_vec() };
    let models = [(2.25, ErrorType::TypeI), (2.5, ErrorType::TypeII), (3.25, ErrorType::TypeII)];
    let mut specs = Vec::new();
    for (mean, error_type) in models {
        for &n in &sizes {
            specs.push(ExperimentSpec {
                model: SpiderMixture::leg_one_mean(mean).expect("preset means are valid"),
                n,
                runs,
                alpha: 0.05,
                b,
                null_point: BookPoint::leg(1, 2.25),
                master_seed: seed,
                with_bootstrap,
                error_type,
                retain_statistics: false,
            });
        }
    }
    specs
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    spec: Option<&Path>,
    preset: Option<Preset>,
    ns: &[usize],
    runs: usize,
    b: usize,
    seed: Option<u64>,
    no_bootstrap: bool,
    out: &OutputArgs,
) -> Result<u8> {
    let sink = Sink::new(out)?;
    let specs = match (spec, preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read spec `{}`", path.display()))
                .map_err(input)?;
            let value: serde_json::Value = serde_json::from_str(&text)
                .with_context(|| format!("invalid JSON in `{}`", path.display()))
                .map_err(input)?;
            let mut specs: Vec<ExperimentSpec> = if value.is_array() {
                serde_json::from_value(value)
            } else {
                serde_json::from_value(value).map(|s| vec![s])
            }
            .with_context(|| format!("invalid experiment spec in `{}`", path.display()))
            .map_err(input)?;
            for s in &mut specs {
                if let Some(seed) = seed {
                    s.master_seed = seed;
                }
                if no_bootstrap {
                    s.with_bootstrap = false;
                }
            }
            specs
        }
        (None, Some(Preset::Table1)) => {
            let seed = seed.ok_or_else(|| input(anyhow!("--seed is required")))?;
            table1(ns, runs, b, seed, !no_bootstrap)
        }
        (None, None) => return Err(input(anyhow!("either --spec or --preset is required"))),
    };
    let mut reports = Vec::with_capacity(specs.len());
    for s in &specs {
        let report = run_error_experiment(s).map_err(input)?;
        let (chi2, boot) = report.error_rates();
        eprintln!(
            "{:?} n={}: chi2 {:.4}{}",
            s.error_type,
            s.n,
            chi2,
            boot.map(|v| format!(", bootstrap {v:.4}")).unwrap_or_default()
        );
        reports.push(report);
    }
    sink.emit(
        "simulate",
        || to_json(&reports),
        || {
            let mut buf = Vec::new();
            write_table_csv(&mut buf, &reports).map_err(internal)?;
            Ok(buf)
        },
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct SkipReport<'a> {
    skipped: &'a [openbook_el::treeio::Skip],
    warnings: &'a [String],
}

fn cmd_ingest(files: &[PathBuf], taxa: &[String], assignment: Option<&Path>, out: &OutputArgs) -> Result<u8> {
    let sink = Sink::new(out)?;
    let assignment = match assignment {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read assignment `{}`", path.display()))
                .map_err(input)?;
            serde_json::from_str::<LegAssignment>(&text)
                .with_context(|| format!("invalid assignment in `{}`", path.display()))
                .map_err(input)?
        }
        None => {
            let [a, b, c] = taxa else {
                return Err(input(anyhow!("--taxa needs exactly three names")));
            };
            LegAssignment::lexicographic([a.clone(), b.clone(), c.clone()]).map_err(input)?
        }
    };
    let report = ingest_corpus(files, &assignment);
    for s in &report.skipped {
        let at = s.record.map(|r| format!(" record {r}")).unwrap_or_default();
        eprintln!("skipped {}{at}: {}", s.file, s.reason);
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let sample_csv = || -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        match report.sample() {
            Some(s) => write_sample_csv(&mut buf, &s).map_err(internal)?,
            None => buf.extend_from_slice(b"page,normal\n"),
        }
        Ok(buf)
    };
    match &sink.dir {
        Some(dir) => {
            sink.write_file(dir, "sample.csv", &sample_csv()?)?;
            let skips = SkipReport {
                skipped: &report.skipped,
                warnings: &report.warnings,
            };
            sink.write_file(dir, "skip_report.json", &to_json(&skips)?)?;
        }
        None => sink.emit("ingest", || to_json(&report), sample_csv)?,
    }
    Ok(0)
}
