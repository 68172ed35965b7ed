use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qpulse_sim::commands::{run, write_outputs};
use qpulse_sim::config::{parse_config, ExperimentConfig, Format, RunKind};
use qpulse_sim::recipes::recipe;
use qpulse_sim::validate::run_suite;
use qpulse_sim::{CliError, Result};

#[derive(Parser)]
#[command(name = "qpulse-sim", version, about = "Shaped-pulse driving and emission of a two-level emitter")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pulse spectrum and time-domain envelope.
    Pulse(Common),
    /// Density-matrix trajectory.
    Evolve(Common),
    /// Final-population map over one or two parameters.
    Sweep(Common),
    /// Time-resolved emission spectrum and line fit.
    Spectrum(Common),
    /// Run whatever the configuration's `run` field names.
    Run(Common),
    /// Run the numerical invariant suite.
    Validate {
        #[arg(long, default_value_t = 4)]
        workers: usize,
    },
}

#[derive(Args)]
struct Common {
    /// Configuration file (TOML).
    #[arg(long, conflicts_with = "recipe", required_unless_present = "recipe")]
    config: Option<PathBuf>,
    /// Bundled recipe name, e.g. fig3.
    #[arg(long)]
    recipe: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
    #[arg(long)]
    workers: Option<usize>,
    /// Also write SVG plots.
    #[arg(long)]
    plot: bool,
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let text = match (&c.config, &c.recipe) {
        (Some(path), _) => {
            std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?
        }
        (None, Some(name)) => recipe(name)?.to_string(),
        (None, None) => return Err(CliError::Config("need --config or --recipe".into())),
    };
    parse_config(&text)
}

fn execute(c: &Common, kind: Option<RunKind>) -> Result<()> {
    let mut cfg = load(c)?;
    cfg.output.plot |= c.plot;
    let kind = match kind.or(cfg.run) {
        Some(k) => k,
        None => return Err(CliError::Config("run: missing (valid: pulse, evolve, sweep, spectrum)".into())),
    };
    let workers = match c.workers.or(cfg.sweep.as_ref().and_then(|s| s.workers)) {
        Some(0) => return Err(CliError::Config("--workers must be positive".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    for (k, v) in cfg.echo() {
        println!("{k}: {v}");
    }
    let out = run(&cfg, kind, workers)?;
    let dir = c
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
    let format = c.format.unwrap_or(cfg.output.format);
    for line in &out.summary {
        println!("{line}");
    }
    for p in write_outputs(&dir, format, &out)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Pulse(c) => execute(c, Some(RunKind::Pulse)),
        Command::Evolve(c) => execute(c, Some(RunKind::Evolve)),
        Command::Sweep(c) => execute(c, Some(RunKind::Sweep)),
        Command::Spectrum(c) => execute(c, Some(RunKind::Spectrum)),
        Command::Run(c) => execute(c, None),
        Command::Validate { workers } => {
            let checks = run_suite(*workers);
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            match checks.iter().find(|c| !c.passed) {
                None => Ok(()),
                Some(c) => Err(CliError::Numerical(format!("invariant check {} failed", c.name))),
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
