//! Initial-condition presets.

use crate::grid::{Field, Grid};

/// Tanh profile around an ellipse with semi-axis scales `0.5` and `0.3`,
/// centred in the domain:
/// `tanh((0.5 - sqrt((dx/0.5)^2 + (dy/0.3)^2)) / (sqrt(2) eps))`.
pub fn ellipse(grid: &Grid, eps: f64) -> Field {
    let (cx, cy) = (0.5 * grid.lx(), 0.5 * grid.ly());
    let width = std::f64::consts::SQRT_2 * eps;
    grid.field_from_fn(|x, y| {
        let rho = (((x - cx) / 0.5).powi(2) + ((y - cy) / 0.3).powi(2)).sqrt();
        ((0.5 - rho) / width).tanh()
    })
}
