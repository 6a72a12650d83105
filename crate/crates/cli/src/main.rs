mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use auso_core::Family;
use commands::CliError;
use manifest::LevelRange;

#[derive(Parser, Debug)]
#[command(name = "auso", version, about = "Build, run and verify AUSO lower-bound constructions")]
struct Cli {
    /// Directory holding `<family>_<name>.frame` files (defaults to the embedded frames).
    #[arg(long, global = true, env = "AUSO_FRAMES_DIR")]
    frames_dir: Option<PathBuf>,

    /// Directory for level cache files [default: auso-cache].
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Realize levels bottom-up and write their caches.
    Build(BuildArgs),
    /// Run the family's pivot rule on a level and write the trace.
    Run(RunArgs),
    /// Check frames or a built level.
    Verify(VerifyArgs),
    /// Growth table over a range of levels.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    #[arg(long, required_unless_present = "manifest")]
    pub family: Option<Family>,
    /// Inclusive range such as `0..5`, or a single level.
    #[arg(long, required_unless_present = "manifest")]
    pub levels: Option<LevelRange>,
    /// JSON experiment manifest; explicit flags take precedence.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long)]
    pub family: Family,
    #[arg(long)]
    pub level: usize,
    /// JSONL trace output; `-` writes to stdout.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Record Johnson histories without the arrival update.
    #[arg(long)]
    pub raw_snapshots: bool,
    /// Override the default step limit of 4 * 2^n.
    #[arg(long)]
    pub step_limit: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exhaustive,
    Sampled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum UsoCheck {
    GroundTruth,
    Pairwise,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Validate every frame of every family in `--frames-dir`.
    #[arg(long, conflicts_with_all = ["family", "level"])]
    pub all_frames: bool,
    #[arg(long, required_unless_present = "all_frames")]
    pub family: Option<Family>,
    #[arg(long, required_unless_present = "all_frames")]
    pub level: Option<usize>,
    #[arg(long, value_enum, default_value = "exhaustive")]
    pub mode: Mode,
    #[arg(long, value_enum, default_value = "ground-truth")]
    pub uso_check: UsoCheck,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 8)]
    pub max_face_dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Write the JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    pub family: Family,
    #[arg(long)]
    pub levels: LevelRange,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let ctx = commands::Context {
        frames_dir: cli.frames_dir,
        cache_dir: cli.cache_dir,
    };
    let result = match cli.command {
        Command::Build(a) => commands::build(&ctx, a),
        Command::Run(a) => commands::run(&ctx, a),
        Command::Verify(a) => commands::verify(&ctx, a),
        Command::Report(a) => commands::report(&ctx, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
