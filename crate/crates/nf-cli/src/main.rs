use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use nf_cli::manifest::{write_run, RunManifest};
use nf_cli::presets::{self, PRESETS};
use nf_cli::run::execute;
use nf_cli::{CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "nf", version, about = "Mean-field neural field experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config file or a preset name; writes CSVs and a manifest.
    Run {
        config: String,
        /// Override the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Parse and validate without running.
    Validate { config: String },
    /// List presets, or print one as TOML.
    Presets {
        #[arg(long)]
        show: Option<String>,
    },
}

fn load(arg: &str) -> Result<ExperimentConfig, CliError> {
    let path = PathBuf::from(arg);
    if path.is_file() {
        return ExperimentConfig::load(&path);
    }
    match presets::find(arg) {
        Some(p) => p.config(),
        None => Err(CliError::validation("config", format!("{arg} is neither a file nor a preset name"))),
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("NF_THREADS") else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::validation("NF_THREADS", format!("expected a positive integer, found `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::validation("NF_THREADS", e.to_string()))
}

fn run(arg: &str, output: Option<PathBuf>) -> Result<(), CliError> {
    let mut cfg = load(arg)?;
    if let Some(dir) = output {
        cfg.output = dir;
    }
    let t0 = Instant::now();
    let out = execute(&cfg)?;
    let manifest = RunManifest::build(&cfg, &out, t0.elapsed().as_secs_f64());
    write_run(&cfg.output, &out, &manifest)?;
    println!("wrote {} files and manifest to {}", out.files.len(), cfg.output.display());
    if out.certification.is_empty() {
        Ok(())
    } else {
        Err(CliError::Certification(out.certification))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Run { config, output } => run(&config, output),
        Command::Validate { config } => load(&config).and_then(|c| c.validate()).map(|()| println!("ok")),
        Command::Presets { show: Some(name) } => match presets::find(&name) {
            Some(p) => {
                print!("{}", p.toml());
                Ok(())
            }
            None => Err(CliError::validation("preset", format!("unknown preset `{name}`"))),
        },
        Command::Presets { show: None } => {
            for p in PRESETS {
                println!("{:<30} {:<48} budget {:>4} s  {}", p.name, p.figure, p.budget_seconds, p.delta);
            }
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
