mod commands;
mod config;
mod files;
mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sigtriage_core::trajectory::SourceFormat;
use sigtriage_core::Strategy;

/// Model-free triage of agent trajectories.
#[derive(Parser)]
#[command(name = "sigtriage", version, about)]
struct Cli {
    /// TOML settings file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse source files into a canonical pool and validate it.
    Ingest(IngestArgs),
    /// Run every detector over a pool.
    Detect(DetectArgs),
    /// Draw a review sample with one strategy.
    Sample(SampleArgs),
    /// Merge samples into one blinded annotation queue.
    Queue(QueueArgs),
    /// Serve the annotation queue over HTTP.
    Serve(ServeArgs),
    /// Append label submissions from a JSONL file, as the server would.
    Submit(SubmitArgs),
    /// Write the unblinded label export.
    Export(ExportArgs),
    /// Compute the analysis report from a label export.
    Analyze(AnalyzeArgs),
    /// Generate synthetic pools.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    TauBench,
    Canonical,
}

impl From<FormatArg> for SourceFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::TauBench => SourceFormat::TauBenchV1,
            FormatArg::Canonical => SourceFormat::CanonicalV1,
        }
    }
}

#[derive(Args)]
struct IngestArgs {
    /// Files or directories; directories are walked for .json and .jsonl.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_enum)]
    format: FormatArg,
    /// Domain tag for documents that carry none.
    #[arg(long)]
    domain: Option<String>,
    /// Prefix generated ids with the source file stem.
    #[arg(long)]
    prefix_ids: bool,
    #[arg(long, short)]
    out: PathBuf,
    /// Also write the violation list as JSONL.
    #[arg(long)]
    violations: Option<PathBuf>,
    /// Exit 0 even when violations were found; unparsable files are skipped.
    #[arg(long)]
    lenient: bool,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    pool: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long)]
    lexicons: Option<PathBuf>,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    workers: Option<usize>,
    /// User-turn baseline for the prolonged rule; defaults to the pool median.
    #[arg(long)]
    baseline: Option<f64>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    pool: PathBuf,
    /// Required for the signal strategy.
    #[arg(long)]
    reports: Option<PathBuf>,
    #[arg(long)]
    strategy: Strategy,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    exemplar_fraction: Option<f64>,
    #[arg(long)]
    min_user_msgs: Option<usize>,
    #[arg(long, short)]
    out: PathBuf,
    /// Human-readable summary; defaults to `<out>.manifest.txt`.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct QueueArgs {
    #[arg(long = "sample", required = true)]
    samples: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    annotators: Vec<String>,
    #[arg(long)]
    seed: u64,
    /// One shared order instead of a shuffle per annotator.
    #[arg(long)]
    global_order: bool,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Clone)]
pub struct StudyFiles {
    #[arg(long)]
    queue: PathBuf,
    #[arg(long)]
    pool: PathBuf,
    #[arg(long)]
    reports: PathBuf,
    /// Append-only label store.
    #[arg(long)]
    labels: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    files: StudyFiles,
    #[arg(long)]
    bind: Option<String>,
    #[arg(long)]
    port: Option<u16>,
    /// Directory holding the review UI bundle.
    #[arg(long)]
    ui: Option<PathBuf>,
    #[arg(long, env = sigtriage_server::ADMIN_TOKEN_ENV, hide_env_values = true)]
    admin_token: Option<String>,
}

#[derive(Args)]
struct SubmitArgs {
    #[command(flatten)]
    files: StudyFiles,
    /// LabelSubmission JSONL.
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    files: StudyFiles,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    export: PathBuf,
    #[arg(long)]
    alpha: Option<f64>,
    /// Report JSON.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Rendered Table 1 and Table 2 text.
    #[arg(long)]
    tables: Option<PathBuf>,
    /// Expected values (.json) or expected table text (anything else).
    #[arg(long)]
    check_against: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Canonical pool with one planted pattern per trajectory plus a clean set.
    Planted {
        #[arg(long)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// τ-bench style study pool, one result file per trajectory.
    Study {
        #[arg(long)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
    },
}

/// Exit status contract: 0 success, 1 validation failure, 2 usage error.
pub enum Failure {
    Validation(anyhow::Error),
    Usage(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Validation(e.into())
    }
}

pub fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow::anyhow!("{msg}"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();

    let file = match config::FileConfig::load(cli.config.as_deref()) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Detect(a) => commands::detect(a, &file),
        Command::Sample(a) => commands::sample(a, &file),
        Command::Queue(a) => commands::queue(a),
        Command::Serve(a) => serve::run(a, &file),
        Command::Submit(a) => commands::submit(a),
        Command::Export(a) => commands::export(a),
        Command::Analyze(a) => commands::analyze(a, &file),
        Command::Synth(c) => commands::synth(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("usage error: {e:#}");
            ExitCode::from(2)
        }
    }
}
