//! Energies, mass and consistency diagnostics.

use crate::error::Result;
use crate::grid::{Field, Grid};
use crate::history::HistoryBuffer;
use crate::model::{Model, ModelParams};
use crate::time_mesh::KernelRow;

/// One row of per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub energy: f64,
    pub modified_energy: f64,
    pub mass: f64,
    pub r_drift: f64,
    pub identity_residual: f64,
    pub solver_iterations: usize,
}

/// `E(phi) = int eps^2/2 |grad phi|^2 + (phi^2 - 1)^2 / 4`.
pub fn original_energy(grid: &Grid, phi: &Field, params: &ModelParams) -> Result<f64> {
    let gradient = grid.grad_sq_integral(phi)?;
    let bulk = grid.integrate(&phi.map(|p| 0.25 * (p * p - 1.0).powi(2)))?;
    Ok(0.5 * params.eps * params.eps * gradient + bulk)
}

/// `E~(phi, r) = int eps^2/2 |grad phi|^2 + (r + S)(phi^2 - 1 - S)/2 - r^2/4 + S^2/4`.
pub fn modified_energy(grid: &Grid, phi: &Field, r: &Field, params: &ModelParams) -> Result<f64> {
    let s = params.stabilization;
    let gradient = grid.grad_sq_integral(phi)?;
    let bulk = phi.zip_map(r, |p, r| 0.5 * (r + s) * (p * p - 1.0 - s) - 0.25 * r * r + 0.25 * s * s)?;
    Ok(0.5 * params.eps * params.eps * gradient + grid.integrate(&bulk)?)
}

pub fn mass(grid: &Grid, phi: &Field) -> Result<f64> {
    grid.integrate(phi)
}

/// `|| r - (phi^2 - 1 - S) ||_{L^2}`.
pub fn r_drift(grid: &Grid, phi_half: &Field, r_half: &Field, stabilization: f64) -> Result<f64> {
    let gap = phi_half.zip_map(r_half, |p, r| r - (p * p - 1.0 - stabilization))?;
    grid.norm_l2(&gap)
}

/// Right-hand side of the per-step energy identity.
///
/// With `D = sum_k b_{n-k}^{(n)} (phi^k - phi^{k-1})` the discrete Caputo
/// value of the step just taken and `d = phi^{n} - phi^{n-1}`:
///
/// * Allen-Cahn: `-(1/M) (d, D)`
/// * Cahn-Hilliard: `-(1/M) (grad lap^{-1} d, grad lap^{-1} D)`, evaluated as
///   `-(1/M) ((-lap)^{-1} D, d)`.
pub fn identity_rhs(grid: &Grid, history: &HistoryBuffer, row: &KernelRow, params: &ModelParams) -> Result<f64> {
    let caputo = history.caputo_sum(row)?;
    let last = history
        .get(history.len())
        .expect("caputo_sum checked the history length");
    let pairing = match params.model {
        Model::AllenCahn => grid.inner(last, &caputo)?,
        Model::CahnHilliard => {
            let w = grid.inv_neg_laplacian_meanfree(&caputo)?;
            grid.inner(&w, last)?
        }
    };
    Ok(-pairing / params.mobility)
}

/// `|dE~ - identity_rhs|` for one step `(phi^k, r^{k-1/2}) -> (phi^{k+1}, r^{k+1/2})`.
///
/// `history` must end with the increment `phi^{k+1} - phi^k` and `row` must
/// be the kernel row of step `k + 1`.
#[allow(clippy::too_many_arguments)]
pub fn energy_identity_residual(
    grid: &Grid,
    prev_phi: &Field,
    prev_r: &Field,
    next_phi: &Field,
    next_r: &Field,
    history: &HistoryBuffer,
    row: &KernelRow,
    params: &ModelParams,
) -> Result<f64> {
    let before = modified_energy(grid, prev_phi, prev_r, params)?;
    let after = modified_energy(grid, next_phi, next_r, params)?;
    let rhs = identity_rhs(grid, history, row, params)?;
    Ok(((after - before) - rhs).abs())
}
