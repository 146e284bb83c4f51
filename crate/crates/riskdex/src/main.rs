//! Thin command-line front end over the pipeline library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use riskdex::config::{load_config, PipelineConfig};
use riskdex::pipeline::{run_pipeline, run_stage, RunSummary, Stage};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  configuration or validation error
  3  data ingest error (CSV, GeoJSON, gates)
  4  adequacy gate failure under --strict-adequacy
  5  numerical failure (degenerate or singular data)
  6  i/o failure
  7  score/geometry mismatch on export

Log verbosity is controlled by the RISKDEX_LOG environment variable
(error, warn, info, debug, trace). Set RISKDEX_TIMESTAMP to embed a
timestamp in report.json; it is omitted by default so reruns are
byte-identical.";

#[derive(Parser)]
#[command(
    name = "riskdex",
    version,
    about = "Composite regional risk index pipeline",
    after_help = EXIT_CODES
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Pipeline config file (TOML)
    #[arg(short, long, value_name = "FILE")]
    config: PathBuf,
    /// Override the output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override the number of rank bins
    #[arg(long, value_name = "G")]
    bins: Option<usize>,
    /// Abort when the factorability diagnostics fail
    #[arg(long)]
    strict_adequacy: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write every artifact
    Run(CommonArgs),
    /// Write only the normalized table (normalized.csv)
    Normalize(CommonArgs),
    /// Write only the factorability diagnostics (adequacy.json)
    Adequacy(CommonArgs),
    /// Write only the fitted factor blocks (cfa.json)
    Cfa(CommonArgs),
    /// Write only the canonical solution (cca.json)
    Cca(CommonArgs),
    /// Write only the scored table (scores.csv)
    Index(CommonArgs),
    /// Write only the regression significance report (manova.json/.txt)
    Regress(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Run(a)
            | Command::Normalize(a)
            | Command::Adequacy(a)
            | Command::Cfa(a)
            | Command::Cca(a)
            | Command::Index(a)
            | Command::Regress(a) => a,
        }
    }

    fn stage(&self) -> Option<Stage> {
        match self {
            Command::Run(_) => None,
            Command::Normalize(_) => Some(Stage::Normalize),
            Command::Adequacy(_) => Some(Stage::Adequacy),
            Command::Cfa(_) => Some(Stage::Cfa),
            Command::Cca(_) => Some(Stage::Cca),
            Command::Index(_) => Some(Stage::Index),
            Command::Regress(_) => Some(Stage::Regress),
        }
    }
}

fn load_with_overrides(args: &CommonArgs) -> riskdex::Result<PipelineConfig> {
    let mut config = load_config(&args.config)?;
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    if let Some(bins) = args.bins {
        config.bins = bins;
    }
    if args.strict_adequacy {
        config.strict_adequacy = true;
    }
    config.validate()?;
    Ok(config)
}

fn execute(command: &Command) -> riskdex::Result<RunSummary> {
    let config = load_with_overrides(command.common())?;
    match command.stage() {
        None => run_pipeline(&config),
        Some(stage) => run_stage(&config, stage),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RISKDEX_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(summary) => {
            for artifact in &summary.artifacts {
                println!("wrote {}", artifact.display());
            }
            if !summary.warnings.is_empty() {
                println!("{} warning(s); see report or logs", summary.warnings.len());
            }
            println!("config hash {}", summary.config_hash);
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
