//! `obel`: empirical likelihood for Fréchet means on open books and spiders.
//!
//! Exit status: 0 success, 1 input error, 2 statistical degeneracy (an
//! infeasible point or calibration), 3 internal error.

mod commands;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "obel", version, about = "Empirical likelihood inference for Fréchet means on open books and spiders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    Sticky,
    HalfSticky,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Type I at 9/4 and Type II at 10/4 and 13/4, n = 10, 20, 50, 200.
    Table1,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// Sample CSV with header `page,normal,t1,...`; page 0 is the spine.
    #[arg(long, value_name = "FILE")]
    pub sample: PathBuf,
    /// Book shape as `L,p`, inline JSON `{"pages":L,"dim":p}`, or a JSON file.
    #[arg(long, value_name = "SHAPE", default_value = "3,1")]
    pub shape: String,
}

#[derive(Args, Debug)]
pub struct OutputArgs {
    /// Directory for output files; without it the report goes to stdout.
    #[arg(long, value_name = "DIR", env = "OBEL_OUT_DIR")]
    pub out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate the EL log-ratio at one or more points.
    El {
        #[command(flatten)]
        sample: SampleArgs,
        /// Evaluation point: `spine [t..]` or `leg<k> x` / `page<k> normal [t..]`. Repeatable.
        #[arg(long, value_name = "POINT", required = true)]
        point: Vec<String>,
        /// Include the optimal weights in the report.
        #[arg(long)]
        weights: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Compute the sample Fréchet mean and its regime.
    Mean {
        #[command(flatten)]
        sample: SampleArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Wilks test of a null point against its limit law.
    Test {
        #[command(flatten)]
        sample: SampleArgs,
        /// Null point.
        #[arg(long, value_name = "POINT")]
        point: String,
        /// Significance level.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Regime of a spine null; chosen from the data when absent.
        #[arg(long, value_enum)]
        regime: Option<RegimeArg>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Confidence set for the Fréchet mean on a spider.
    Cr {
        #[command(flatten)]
        sample: SampleArgs,
        /// Significance level (the set has nominal coverage 1 - alpha).
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Grid points per leg.
        #[arg(long, default_value_t = 512)]
        grid: usize,
        /// Grid extent along each leg [default: twice the largest leg coordinate].
        #[arg(long)]
        extent: Option<f64>,
        /// Regime for the spine threshold; chosen from the data when absent.
        #[arg(long, value_enum)]
        regime: Option<RegimeArg>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Bootstrap calibration at the sample Fréchet mean, optionally testing a point.
    Bootstrap {
        #[command(flatten)]
        sample: SampleArgs,
        /// Null point to test against the bootstrap threshold.
        #[arg(long, value_name = "POINT")]
        point: Option<String>,
        /// Significance level.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Number of bootstrap resamples.
        #[arg(long = "B", value_name = "B", default_value_t = 500)]
        b: usize,
        /// Master seed.
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo Type I / Type II error experiments.
    Simulate {
        /// Experiment spec JSON (one object or an array).
        #[arg(long, value_name = "FILE", conflicts_with = "preset", required_unless_present = "preset")]
        spec: Option<PathBuf>,
        /// Built-in experiment set.
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Restrict a preset to these sample sizes (comma separated).
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        /// Monte Carlo runs per preset row.
        #[arg(long, default_value_t = 500)]
        runs: usize,
        /// Bootstrap resamples per run.
        #[arg(long = "B", value_name = "B", default_value_t = 500)]
        b: usize,
        /// Master seed; overrides `master_seed` of a spec file.
        #[arg(long, required_unless_present = "spec")]
        seed: Option<u64>,
        /// Skip bootstrap calibration.
        #[arg(long)]
        no_bootstrap: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Read Newick files into a 3-spider sample.
    Ingest {
        /// Newick files, one or more trees each.
        #[arg(required = true, value_name = "FILE")]
        files: Vec<PathBuf>,
        /// The three taxa, comma separated; legs follow lexicographic order.
        #[arg(long, value_delimiter = ',', required_unless_present = "assignment")]
        taxa: Vec<String>,
        /// Leg assignment JSON `{"taxa":[..],"legs":[[a,b],[a,c],[b,c]]}`.
        #[arg(long, value_name = "FILE", conflicts_with = "taxa")]
        assignment: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = openbook_el::simlab::verify_rate_convention() {
        eprintln!("error: {e}");
        return ExitCode::from(3);
    }
    match commands::run(cli.command) {
        Ok(status) => ExitCode::from(status),
        Err(failure) => {
            eprintln!("error: {:#}", failure.error());
            ExitCode::from(failure.code())
        }
    }
}
