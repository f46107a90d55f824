use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qprior_cli::config::{parse_config, ExperimentConfig};
use qprior_cli::presets::{self, DEFAULT_PARTICLES, DEFAULT_SEED};
use qprior_cli::{execute, CliError, Report};

const AFTER_HELP: &str = "\
Two-system marginals are written to the JSON summary every 100 iterations.
Default seed for presets: 42 (prior seed; data use seed+1, resampling seed+2).

Exit codes: 0 success, 1 config error, 2 zero-evidence abort, 3 I/O error.";

#[derive(Parser)]
#[command(name = "qprior", version, about = "Sequential quantum Bayesian inference experiments", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Directory that relative output paths are resolved against.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Run one of the canned experiments.
    Preset {
        #[command(subcommand)]
        preset: Preset,
    },
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum Preset {
    /// All-zero z-basis data against the Haar, plus-product and
    /// counter-inductive priors.
    #[command(after_help = AFTER_HELP)]
    ThreePriors {
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = DEFAULT_PARTICLES)]
        particles: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Maximally entangled pair data under product SIC measurements, against
    /// a pairwise and a single-system Hilbert–Schmidt prior.
    #[command(after_help = AFTER_HELP)]
    Entanglement {
        #[arg(long)]
        pairs: usize,
        #[arg(long)]
        particles: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text).map_err(CliError::Config)
}

fn describe(config: &ExperimentConfig, report: &Report) -> String {
    let f = &report.final_summary;
    let mut line = format!(
        "{}: {} updates, td_target {}",
        config.output.json,
        f.iterations,
        f.td_target
            .map(|t| format!("{t:.6e}"))
            .unwrap_or_else(|| "n/a".into())
    );
    if let Some(t) = f.td_target_pair {
        line.push_str(&format!(", td_target_pair {t:.6e}"));
    }
    line
}

fn run_all(configs: &[ExperimentConfig], out_dir: &Path) -> Result<(), CliError> {
    for config in configs {
        let report = execute(config, out_dir)?;
        println!("{}", describe(config, &report));
    }
    Ok(())
}

fn preset_configs(preset: &Preset) -> Result<(Vec<ExperimentConfig>, &Path), CliError> {
    let check = |field: &str, value: usize| {
        if value == 0 {
            Err(CliError::Config(qprior_cli::ConfigErrors(vec![
                qprior_cli::config::FieldError {
                    field: field.into(),
                    message: "must be at least 1".into(),
                },
            ])))
        } else {
            Ok(())
        }
    };
    match preset {
        Preset::ThreePriors {
            m,
            particles,
            seed,
            out_dir,
        } => {
            check("--m", *m)?;
            check("--particles", *particles)?;
            Ok((presets::three_priors(*m, *particles, *seed), out_dir))
        }
        Preset::Entanglement {
            pairs,
            particles,
            seed,
            out_dir,
        } => {
            check("--pairs", *pairs)?;
            check("--particles", *particles)?;
            Ok((presets::entanglement(*pairs, *particles, *seed), out_dir))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, out_dir } => load(config).and_then(|c| run_all(&[c], out_dir)),
        Command::Preset { preset } => {
            preset_configs(preset).and_then(|(configs, dir)| run_all(&configs, dir))
        }
        Command::Validate { config } => load(config).map(|_| println!("{}: ok", config.display())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
