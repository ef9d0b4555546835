use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use periso_cli::{run, CliError, Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "periso",
    version,
    about = "Periodized Gaussian isoperimetry experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify the truncated periodized Gaussian kernel.
    #[command(name = "kernel_cert", alias = "kernel-cert")]
    KernelCert(Flags),
    /// Surface-area inequalities across a perturbation family.
    #[command(name = "perimeter_sweep", alias = "perimeter-sweep")]
    PerimeterSweep(Flags),
    /// Noise stability of a family against the half space.
    #[command(name = "stability_sweep", alias = "stability-sweep")]
    StabilitySweep(Flags),
    /// Normalized stability deficit as rho approaches 1.
    #[command(name = "limit_check", alias = "limit-check")]
    LimitCheck(Flags),
    /// Boundary-flux against volume form of the divergence identity.
    #[command(name = "divergence_check", alias = "divergence-check")]
    DivergenceCheck(Flags),
}

#[derive(Args)]
struct Flags {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; defaults to the config's `output_path`, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    resolution: Option<usize>,
}

fn load(experiment: Experiment, flags: &Flags) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::parse(&text, Some(experiment))?
        }
        None => ExperimentConfig::new(experiment),
    };
    if let Some(seed) = flags.seed {
        cfg.seed = seed;
    }
    if let Some(samples) = flags.samples {
        cfg.samples = samples;
    }
    if let Some(resolution) = flags.resolution {
        cfg.resolution = resolution;
    }
    if flags.out.is_some() {
        cfg.output_path = flags.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(experiment: Experiment, flags: &Flags) -> Result<bool, CliError> {
    let cfg = load(experiment, flags)?;
    let outcome = run(&cfg)?;
    match &cfg.output_path {
        Some(path) => std::fs::write(path, &outcome.output)?,
        None => print!("{}", outcome.output),
    }
    for failure in &outcome.failures {
        eprintln!("FAIL {experiment}: {failure}");
    }
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, flags) = match &cli.command {
        Command::KernelCert(f) => (Experiment::KernelCert, f),
        Command::PerimeterSweep(f) => (Experiment::PerimeterSweep, f),
        Command::StabilitySweep(f) => (Experiment::StabilitySweep, f),
        Command::LimitCheck(f) => (Experiment::LimitCheck, f),
        Command::DivergenceCheck(f) => (Experiment::DivergenceCheck, f),
    };
    match execute(experiment, flags) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
