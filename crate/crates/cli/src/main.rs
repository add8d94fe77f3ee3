use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fracphase::Model;
use fracphase_cli::{check_complete, cmd_convergence, cmd_simulate, parse_config, CliError, ConfigError, RunConfig};

#[derive(Parser)]
#[command(name = "fracphase", version, about = "Time-fractional Allen-Cahn and Cahn-Hilliard solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write energy.csv and field snapshots.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_model)]
        model: Option<Model>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long = "N")]
        steps: Option<usize>,
        #[arg(long)]
        gamma: Option<f64>,
        /// Output directory, overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the manufactured-solution convergence study.
    Convergence {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_model(s: &str) -> Result<Model, String> {
    s.parse().map_err(|e: fracphase::Error| e.to_string())
}

fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(parse_config(&text)?)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("FRACPHASE_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError::Range {
            key: "FRACPHASE_THREADS".into(),
            reason: format!("expected a positive integer, got {raw:?}"),
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .expect("global pool is configured once, before any parallel work");
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Simulate {
            config,
            model,
            alpha,
            steps,
            gamma,
            out,
        } => {
            let mut cfg = load(&config)?;
            cfg.model = model.unwrap_or(cfg.model);
            cfg.alpha = alpha.or(cfg.alpha);
            cfg.steps = steps.or(cfg.steps);
            cfg.gamma = gamma.unwrap_or(cfg.gamma);
            cfg.output_dir = out.unwrap_or(cfg.output_dir);
            cfg.validate()?;
            let s = cmd_simulate(&cfg)?;
            println!(
                "{} steps, E {:.6e} -> {:.6e}, max E_mod {:.6e}, max identity residual {:.2e}; output in {}",
                s.steps,
                s.initial_energy,
                s.final_energy,
                s.max_modified_energy,
                s.max_identity_residual,
                s.output_dir.display()
            );
            Ok(())
        }
        Command::Convergence { config } => {
            let cfg = load(&config)?;
            let table = cmd_convergence(&cfg)?;
            print!("{}", table.to_text());
            check_complete(&table)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fracphase: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
