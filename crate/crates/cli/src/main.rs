#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod artifacts;
mod commands;
mod experiments;
mod failure;
mod inputs;

use failure::{Failure, EXIT_CONFIG};

#[derive(Parser, Debug)]
#[command(
    name = "netchoice",
    version,
    about = "Network formation as discrete choice"
)]
struct Cli {
    /// Random seed for generators, sampling and EM restarts.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Shrinks node counts and replica counts of synthetic runs.
    #[arg(long, global = true, default_value_t = 1.0)]
    scale: f64,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Grow a synthetic graph.
    Synth(SynthArgs),
    /// Validate and canonicalize an edge list.
    Ingest(GraphArgs),
    /// Turn a graph into choice data.
    Extract {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        extract: ExtractArgs,
    },
    /// Fit a conditional logit.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Fit a latent-class mixture by EM.
    Emfit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        em: EmArgs,
    },
    /// Run a named experiment and emit plot-ready data.
    Experiment(ExperimentArgs),
    /// Likelihood-ratio test between two fit reports.
    Lrtest {
        #[arg(long)]
        null: PathBuf,
        #[arg(long)]
        alt: PathBuf,
        /// Degrees of freedom (default: difference in free parameters).
        #[arg(long)]
        df: Option<usize>,
    },
    /// Share of held-out events whose chosen alternative scores highest.
    Accuracy {
        #[arg(long)]
        fit: PathBuf,
        #[command(flatten)]
        data: DataArgs,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ModelName {
    Uniform,
    Pa,
    NonparametricPa,
    Fitness,
    Copy,
    LocalSearch,
    Rp,
    Homophily,
    Latent,
}

#[derive(Args, Debug, Clone, Serialize)]
struct SynthArgs {
    #[arg(long, value_enum)]
    model: ModelName,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    directed: bool,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    /// Homophily strength.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    groups: Option<u32>,
    /// Latent-space decay base.
    #[arg(long)]
    c: Option<f64>,
    /// `circle` or `tree:BRANCHING:DEPTH`.
    #[arg(long)]
    space: Option<String>,
    /// `exp:RATE` or `normal:MEAN:SD`.
    #[arg(long)]
    fitness: Option<String>,
    /// Comma-separated per-degree utilities.
    #[arg(long)]
    theta: Option<String>,
}

#[derive(Args, Debug, Clone)]
struct GraphArgs {
    /// Edge list: `source,target[,timestamp]`.
    #[arg(long)]
    edges: PathBuf,
    /// Node sidecar: `node,arrival[,group][,fitness][,covariate...]`.
    #[arg(long)]
    nodes: Option<PathBuf>,
    /// Override the file's `directed` directive.
    #[arg(long)]
    directed: Option<bool>,
    /// Skip unparseable lines instead of failing.
    #[arg(long)]
    skip_malformed: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
struct ExtractArgs {
    /// Comma-separated extractors, e.g. `logdeg,hasdeg,recip,fof`.
    #[arg(long, default_value = "logdeg")]
    features: String,
    /// `all` or `fof`.
    #[arg(long, default_value = "all")]
    choice_set: String,
    /// Neighborhood traversal for FoF, common-neighbor and hop features.
    #[arg(long, value_parser = ["directed", "undirected"])]
    traversal: Option<String>,
    /// Keep the graph's seeding edges as events.
    #[arg(long)]
    include_bootstrap: bool,
    /// Drop events whose chooser has no earlier edge.
    #[arg(long)]
    exclude_first_seen: bool,
    #[arg(long)]
    from_event: Option<u64>,
    #[arg(long)]
    to_event: Option<u64>,
    /// Timestamp window `START:END` (seconds, end exclusive).
    #[arg(long)]
    window: Option<String>,
    /// Keep each candidate edge with this probability...
    #[arg(long)]
    keep_prob: Option<f64>,
    /// ...until this many events are kept.
    #[arg(long)]
    max_events: Option<usize>,
    /// Merge alternatives with identical feature rows.
    #[arg(long)]
    compress: bool,
    /// Negative sampling: keep the choice plus this many random non-choices.
    #[arg(long)]
    sample: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Choice data (JSON lines) instead of an edge list.
    #[arg(long, conflicts_with_all = ["edges", "nodes"])]
    choices: Option<PathBuf>,
    #[arg(long)]
    edges: Option<PathBuf>,
    #[arg(long)]
    nodes: Option<PathBuf>,
    #[arg(long)]
    directed: Option<bool>,
    #[arg(long)]
    skip_malformed: bool,
    #[command(flatten)]
    extract: ExtractArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
struct FitArgs {
    /// Fit only these columns.
    #[arg(long)]
    columns: Option<String>,
    /// L2 penalty on free coefficients.
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    /// Hold a coefficient fixed: `NAME=VALUE` (repeatable).
    #[arg(long = "fix")]
    fix: Vec<String>,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Per-degree model on the `degree` column.
    #[arg(long)]
    nonparametric: bool,
    /// Top-code degrees above this level (non-parametric fit).
    #[arg(long)]
    max_degree: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MixtureName {
    Copy,
    LocalSearch,
    Rp,
    FreePa,
}

#[derive(Args, Debug, Clone, Serialize)]
struct EmArgs {
    #[arg(long, value_enum, required_unless_present = "spec")]
    model: Option<MixtureName>,
    /// Mixture model as JSON instead of a named model.
    #[arg(long)]
    #[serde(skip)]
    spec: Option<PathBuf>,
    /// Starting uniform weight (copy, rp).
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Starting all-node weight (local-search, rp).
    #[arg(long, default_value_t = 0.5)]
    r: f64,
    /// Starting exponent (free-pa).
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Starting PA weight (free-pa).
    #[arg(long, default_value_t = 0.5)]
    pi: f64,
    #[arg(long, default_value_t = 5)]
    starts: usize,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ExperimentName {
    Surface,
    Kernel,
    GammaGrid,
    ModelCompare,
    DegreeCurve,
}

#[derive(Args, Debug, Clone, Serialize)]
struct ExperimentArgs {
    #[arg(value_enum)]
    name: ExperimentName,
    /// Run degree-curve on this edge list instead of synthetic data.
    #[arg(long)]
    #[serde(skip)]
    edges: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    nodes: Option<PathBuf>,
    /// gamma-grid lower cutoff: `ks` scan or the generator's `m`.
    #[arg(long, default_value = "ks", value_parser = ["ks", "m"])]
    xmin: String,
    /// EM restarts for the surface experiment.
    #[arg(long, default_value_t = 1)]
    starts: usize,
    /// Negative sampling size for the surface experiment.
    #[arg(long, default_value_t = 10)]
    sample: usize,
}

fn setup_threads(threads: Option<usize>) -> Result<(), Failure> {
    let Some(n) = threads else {
        return Ok(());
    };
    if n == 0 {
        return Err(Failure::config("--threads must be at least 1"));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::config(e.to_string()))?;
    if n == 1 {
        netchoice::par::set_sequential(true);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    setup_threads(cli.threads)?;
    if !(cli.scale > 0.0 && cli.scale.is_finite()) {
        return Err(Failure::config("--scale must be positive"));
    }
    let ctx = commands::Context {
        seed: cli.seed,
        scale: cli.scale,
        out: cli.out,
    };
    match cli.command {
        Command::Synth(a) => commands::synth(&ctx, &a),
        Command::Ingest(g) => commands::ingest(&ctx, &g),
        Command::Extract { graph, extract } => commands::extract(&ctx, &graph, &extract),
        Command::Fit { data, fit } => commands::fit(&ctx, &data, &fit),
        Command::Emfit { data, em } => commands::emfit(&ctx, &data, &em),
        Command::Experiment(a) => experiments::run(&ctx, &a),
        Command::Lrtest { null, alt, df } => commands::lrtest(&ctx, &null, &alt, df),
        Command::Accuracy { fit, data } => commands::accuracy(&ctx, &fit, &data),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("netchoice: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
