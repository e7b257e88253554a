use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dgids_cli::config::{parse_config, RawConfig};
use dgids_cli::report::write_summary;
use dgids_cli::theory_check::{theory_csv, verify_theory, TheorySettings};
use dgids_cli::{run_experiment, run_sweep, CliError};

#[derive(Debug, Parser)]
#[command(name = "dgids", version, about = "Distributed GAN intrusion detection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct ConfigArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides as `--key value` or `--key=value`, e.g. `--epochs 200`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the configured mode(s) and write traces, weights, sweeps and a summary.
    Train(ConfigArgs),
    /// Re-run the attack sweep from saved weights.
    Sweep(ConfigArgs),
    /// Compare trained standalone value estimates with closed-form predictions.
    VerifyTheory(ConfigArgs),
    /// Regenerate summary.md from the seed-*/sweep.csv files under a directory.
    Report {
        dir: PathBuf,
    },
}

fn load(args: &ConfigArgs, default_dataset: bool) -> Result<dgids_cli::ExperimentConfig, CliError> {
    let text = match &args.config {
        Some(path) => Some(
            std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?,
        ),
        None => None,
    };
    if default_dataset {
        let mut raw = match &text {
            Some(t) => RawConfig::parse(t)?,
            None => RawConfig::default(),
        };
        raw.apply_flags(&args.overrides)?;
        if !raw.has("dataset") {
            raw.set("dataset", "synthetic")?;
        }
        return raw.resolve();
    }
    parse_config(text.as_deref(), &args.overrides)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(args) => {
            let config = load(&args, false)?;
            let outcome = run_experiment(&config)?;
            println!("wrote {} seed run(s) to {}", outcome.runs.len(), outcome.output_dir.display());
        }
        Command::Sweep(args) => {
            let config = load(&args, false)?;
            let outcome = run_sweep(&config)?;
            println!("re-swept {} seed run(s) in {}", outcome.runs.len(), outcome.output_dir.display());
        }
        Command::VerifyTheory(args) => {
            let config = load(&args, true)?;
            let settings = TheorySettings {
                gan: config.gan(),
                ..TheorySettings::default()
            };
            let rows = verify_theory(&settings, config.seeds[0])?;
            let csv = theory_csv(&rows, settings.tolerance);
            std::fs::create_dir_all(&config.output_dir)?;
            std::fs::write(config.output_dir.join("theory.csv"), &csv)?;
            print!("{csv}");
        }
        Command::Report { dir } => {
            print!("{}", write_summary(&dir)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
