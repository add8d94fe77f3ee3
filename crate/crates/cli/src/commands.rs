use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use fracphase::mms::{run_convergence, ConvergenceTable};
use fracphase::{initial, simulation, Field, Grid, SolverState, StepOptions, Stepper, TimeMesh};
use thiserror::Error;

use crate::config::{ConfigError, InitialCondition, RunConfig};
use crate::output::{energy_row, field_binary, field_csv, ENERGY_HEADER};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("solver error: {0}")]
    Solver(#[from] fracphase::Error),

    #[error("{failed} of {total} convergence cases failed; table written with `failed` cells")]
    PartialTable { failed: usize, total: usize },
}

impl CliError {
    /// 2 config, 3 IO, 4 solver failure, 5 incomplete convergence table.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Solver(_) => 4,
            CliError::PartialTable { .. } => 5,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(io_err(path))
}

fn options(cfg: &RunConfig) -> StepOptions {
    StepOptions {
        tol: cfg.tol,
        maxit: cfg.maxit,
        ..StepOptions::default()
    }
}

fn grid(cfg: &RunConfig) -> Result<Grid, CliError> {
    Ok(Grid::new(cfg.nx, cfg.ny, cfg.lx, cfg.ly)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub steps: usize,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub max_modified_energy: f64,
    pub max_identity_residual: f64,
    pub output_dir: PathBuf,
}

fn snapshot(dir: &Path, step: usize, phi: &Field, binary: bool) -> Result<(), CliError> {
    write_file(&dir.join(format!("phi_{step}.csv")), field_csv(phi).as_bytes())?;
    if binary {
        write_file(&dir.join(format!("phi_{step}.bin")), &field_binary(phi))?;
    }
    Ok(())
}

/// Runs one simulation and writes `energy.csv` plus snapshots into
/// `output_dir`. Rows already computed are kept on a step failure.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulationSummary, CliError> {
    let (alpha, steps) = cfg.simulation_keys()?;
    let grid = grid(cfg)?;
    let params = cfg.params(alpha).validated()?;
    let mesh = TimeMesh::graded(cfg.horizon, steps, cfg.gamma)?;
    let stepper = Stepper::new(&grid, &mesh, params, options(cfg))?;
    let phi0 = match cfg.initial {
        InitialCondition::Ellipse => initial::ellipse(&grid, cfg.eps),
        InitialCondition::Constant(v) => grid.constant(v),
    };
    let mut state: SolverState = stepper.init_state(phi0)?;

    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let energy_path = dir.join("energy.csv");
    let mut energy = BufWriter::new(File::create(&energy_path).map_err(io_err(&energy_path))?);
    writeln!(energy, "{ENERGY_HEADER}").map_err(io_err(&energy_path))?;
    if cfg.snapshot_stride > 0 {
        snapshot(dir, 0, &state.phi, cfg.binary)?;
    }

    let start = simulation::initial_record(&grid, &state, &params)?;
    let mut summary = SimulationSummary {
        steps: 0,
        initial_energy: start.energy,
        final_energy: start.energy,
        max_modified_energy: start.modified_energy,
        max_identity_residual: 0.0,
        output_dir: dir.clone(),
    };
    while state.step < steps {
        let report = match stepper.step(&mut state, None) {
            Ok(r) => r,
            Err(e) => {
                energy.flush().map_err(io_err(&energy_path))?;
                return Err(e.into());
            }
        };
        let rec = simulation::step_record(&stepper, &state, &report, None)?;
        writeln!(energy, "{}", energy_row(&rec)).map_err(io_err(&energy_path))?;
        summary.steps = state.step;
        summary.final_energy = rec.energy;
        summary.max_modified_energy = summary.max_modified_energy.max(rec.modified_energy);
        summary.max_identity_residual = summary.max_identity_residual.max(rec.identity_residual);
        if cfg.snapshot_stride > 0 && state.step.is_multiple_of(cfg.snapshot_stride) {
            snapshot(dir, state.step, &state.phi, cfg.binary)?;
        }
    }
    energy.flush().map_err(io_err(&energy_path))?;
    Ok(summary)
}

/// Runs the manufactured-solution study and writes `table_<model>.csv`.
/// The table is written even when some cases fail.
pub fn cmd_convergence(cfg: &RunConfig) -> Result<ConvergenceTable, CliError> {
    let grid = grid(cfg)?;
    let base = cfg.params(cfg.alphas[0]);
    let table = run_convergence(&base, &cfg.alphas, &cfg.step_counts, &cfg.gamma_map, &grid, options(cfg))?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_file(&dir.join(format!("table_{}.csv", cfg.model)), table.to_csv().as_bytes())?;
    Ok(table)
}

/// Count of failed cases in `table`, as an error when non-zero.
pub fn check_complete(table: &ConvergenceTable) -> Result<(), CliError> {
    let total: usize = table.columns.iter().map(|c| c.rows.len()).sum();
    let failed = table
        .columns
        .iter()
        .flat_map(|c| &c.rows)
        .filter(|r| r.errors.is_none())
        .count();
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::PartialTable { failed, total })
    }
}
