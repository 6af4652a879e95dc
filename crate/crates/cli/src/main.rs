use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use prinn::artifacts::{verify_dir, write_atomic, write_run, REPORT};
use prinn::{Experiment, ExperimentConfig, Report, RunError, OUTPUT_ROOT_VAR};

const DEFAULT_OUTPUT_ROOT: &str = "prinn-runs";

#[derive(Parser)]
#[command(name = "prinn", version, about = "Run and verify perception-informed network experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List registered experiments, or describe one.
    List { name: Option<String> },
    /// Run the experiment a config describes and write its artifacts.
    Run { config: PathBuf },
    /// Re-check a run directory's report and files.
    Verify { artifact_dir: PathBuf },
    /// Run a config once per value of one parameter.
    Sweep {
        config: PathBuf,
        /// `section.key`, e.g. `train.learning_rate`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
}

/// Usage and config errors, distinct from a run that fails its checks.
const EXIT_USAGE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List { name } => list(name.as_deref()),
        Command::Run { config } => with_config(&config, &[], |cfg| run_one(cfg, &output_root().join(&cfg.output_dir))),
        Command::Verify { artifact_dir } => verify(&artifact_dir),
        Command::Sweep { config, param, values } => sweep(&config, &param, &values),
    }
}

fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

fn list(name: Option<&str>) -> ExitCode {
    let show = |e: Experiment| {
        println!("{:<22} {}", e.name(), e.description());
        println!("{:<22} {}", "", e.anchor());
    };
    match name {
        None => Experiment::ALL.into_iter().for_each(show),
        Some(n) => match n.parse::<Experiment>() {
            Ok(e) => show(e),
            Err(msg) => {
                eprintln!("error: {msg}");
                return ExitCode::from(EXIT_USAGE);
            }
        },
    }
    ExitCode::SUCCESS
}

fn with_config(path: &Path, overrides: &[(String, String)], f: impl FnOnce(&ExperimentConfig) -> ExitCode) -> ExitCode {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match ExperimentConfig::parse_with_overrides(&text, overrides) {
        Ok(cfg) => f(&cfg),
        Err(errors) => {
            eprintln!("error: invalid config {}:\n{errors}", path.display());
            ExitCode::from(EXIT_USAGE)
        }
    }
}

/// Runs, writes artifacts, prints the report; true iff it passed.
fn execute(cfg: &ExperimentConfig, dir: &Path) -> Result<bool, String> {
    match prinn::run(cfg) {
        Ok(art) => {
            write_run(dir, &art).map_err(|e| format!("writing {}: {e}", dir.display()))?;
            print!("{}", art.report);
            println!("artifacts: {}", dir.display());
            Ok(art.report.passed())
        }
        Err(err) => {
            if let RunError::Training { partial_telemetry, .. } = &err {
                let _ = write_atomic(dir, "telemetry.csv", partial_telemetry);
                let _ = write_atomic(dir, REPORT, &Report::default().to_string());
                eprintln!("partial telemetry kept in {}", dir.display());
            }
            eprintln!("error: {err}");
            Ok(false)
        }
    }
}

fn run_one(cfg: &ExperimentConfig, dir: &Path) -> ExitCode {
    match execute(cfg, dir) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn verify(dir: &Path) -> ExitCode {
    match verify_dir(dir) {
        Ok(report) => {
            print!("{report}");
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn sweep(path: &Path, param: &str, values: &[String]) -> ExitCode {
    if !param.contains('.') {
        eprintln!("error: --param takes `section.key`, got `{param}`");
        return ExitCode::from(EXIT_USAGE);
    }
    // validate every variant before spending time on any run
    let mut configs = Vec::new();
    for v in values {
        let overrides = [(param.to_string(), v.trim().to_string())];
        let code = with_config(path, &overrides, |cfg| {
            configs.push((v.trim().to_string(), cfg.clone()));
            ExitCode::SUCCESS
        });
        if code != ExitCode::SUCCESS {
            return code;
        }
    }
    let mut all = true;
    for (value, cfg) in &configs {
        let dir = output_root().join(&cfg.output_dir).join(format!("{param}={value}"));
        println!("== {param} = {value}");
        all &= matches!(execute(cfg, &dir), Ok(true));
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
