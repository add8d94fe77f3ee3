//! Stepping loop that records per-step diagnostics.

use crate::energy::{self, DiagnosticsRecord};
use crate::error::Result;
use crate::grid::{Field, Grid};
use crate::model::{Model, ModelParams};
use crate::stepper::{Forcing, SolverState, StepReport, Stepper};

/// Diagnostics of the initial state (`t = 0`, `r^{-1/2}`).
pub fn initial_record(grid: &Grid, state: &SolverState, params: &ModelParams) -> Result<DiagnosticsRecord> {
    Ok(DiagnosticsRecord {
        t: 0.0,
        energy: energy::original_energy(grid, &state.phi, params)?,
        modified_energy: energy::modified_energy(grid, &state.phi, &state.r_half, params)?,
        mass: energy::mass(grid, &state.phi)?,
        r_drift: energy::r_drift(grid, &state.phi, &state.r_half, params.stabilization)?,
        identity_residual: 0.0,
        solver_iterations: 0,
    })
}

/// Diagnostics after `report`'s step. `forcing` is the source sampled for
/// that step, if any; it enters the energy identity.
pub fn step_record(
    stepper: &Stepper<'_>,
    state: &SolverState,
    report: &StepReport,
    forcing: Option<&Field>,
) -> Result<DiagnosticsRecord> {
    let grid = stepper.grid();
    let params = stepper.params();
    let phi_half = state.phi.zip_map(&report.prev_phi, |a, b| 0.5 * (a + b))?;
    let before = energy::modified_energy(grid, &report.prev_phi, &report.prev_r_half, params)?;
    let after = energy::modified_energy(grid, &state.phi, &state.r_half, params)?;
    let mut rhs = energy::identity_rhs(grid, &state.history, &report.row, params)?;
    if let Some(g) = forcing {
        // D = G mu + g, so the source adds (1/M) (d, g) or its H^{-1} analogue
        let last = state.history.get(state.history.len()).expect("just pushed");
        let pairing = match params.model {
            Model::AllenCahn => grid.inner(last, g)?,
            Model::CahnHilliard => grid.inner(&grid.inv_neg_laplacian_meanfree(g)?, last)?,
        };
        rhs += pairing / params.mobility;
    }
    Ok(DiagnosticsRecord {
        t: stepper.mesh().t(report.step),
        energy: energy::original_energy(grid, &state.phi, params)?,
        modified_energy: after,
        mass: energy::mass(grid, &state.phi)?,
        r_drift: energy::r_drift(grid, &phi_half, &state.r_half, params.stabilization)?,
        identity_residual: ((after - before) - rhs).abs(),
        solver_iterations: report.stats.iterations,
    })
}

/// Steps to the end of the mesh, calling `observe` after every step with
/// the new state and its diagnostics.
pub fn run(
    stepper: &Stepper<'_>,
    state: &mut SolverState,
    source: Option<&dyn Forcing>,
    mut observe: impl FnMut(&SolverState, &DiagnosticsRecord) -> Result<()>,
) -> Result<Vec<DiagnosticsRecord>> {
    let mut records = Vec::with_capacity(stepper.mesh().steps() - state.step);
    while state.step < stepper.mesh().steps() {
        let forcing = source.map(|s| s.sample(stepper.grid(), stepper.mesh().midpoint(state.step + 1)));
        let report = stepper.step(state, source)?;
        let record = step_record(stepper, state, &report, forcing.as_ref())?;
        observe(state, &record)?;
        records.push(record);
    }
    Ok(records)
}
