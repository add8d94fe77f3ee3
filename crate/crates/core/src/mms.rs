//! Manufactured solution `phi = (1 - t^2.5) (sin(2x) cos(2y) / 4 + 0.45)`
//! and the temporal convergence study built on it.

use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::format::fmt_g17;
use crate::grid::{Field, Grid};
use crate::model::{Model, ModelParams};
use crate::stepper::{Forcing, StepOptions, Stepper};
use crate::time_mesh::TimeMesh;

/// Final time of the convergence study.
pub const HORIZON: f64 = 0.5;

const TIME_POWER: f64 = 2.5;

fn time_factor(t: f64) -> f64 {
    1.0 - t.powf(TIME_POWER)
}

fn spatial_profile(x: f64, y: f64) -> f64 {
    0.25 * (2.0 * x).sin() * (2.0 * y).cos() + 0.45
}

pub fn exact_phi(x: f64, y: f64, t: f64) -> f64 {
    time_factor(t) * spatial_profile(x, y)
}

pub fn exact_field(grid: &Grid, t: f64) -> Field {
    grid.field_from_fn(|x, y| exact_phi(x, y, t))
}

/// Caputo derivative of `t^p`: `Gamma(p+1) / Gamma(p+1-alpha) t^{p-alpha}`.
/// `alpha = 1` gives the ordinary derivative.
pub fn caputo_power(p: f64, alpha: f64, t: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!("power must be positive, got {p}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("time must be non-negative, got {t}")));
    }
    if t == 0.0 && p > alpha {
        return Ok(0.0);
    }
    Ok(gamma(p + 1.0) / gamma(p + 1.0 - alpha) * t.powf(p - alpha))
}

/// Forcing that makes the manufactured solution exact:
/// `g = D^alpha phi_e - G mu_e`, with every spatial derivative analytic.
pub fn source_term(params: &ModelParams, t: f64, grid: &Grid) -> Result<Field> {
    let a = time_factor(t);
    let caputo = -caputo_power(TIME_POWER, params.alpha, t)?;
    let eps2 = params.eps * params.eps;
    let m = params.mobility;
    let model = params.model;
    Ok(grid.field_from_fn(|x, y| {
        let (s2x, c2x) = (2.0 * x).sin_cos();
        let (s2y, c2y) = (2.0 * y).sin_cos();
        let sc = s2x * c2y;
        let phi = a * (0.25 * sc + 0.45);
        let lap = -2.0 * a * sc;
        let mu = -eps2 * lap + phi * phi * phi - phi;
        let forcing_time = caputo * (0.25 * sc + 0.45);
        match model {
            Model::AllenCahn => forcing_time + m * mu,
            Model::CahnHilliard => {
                let bilap = 16.0 * a * sc;
                let grad_sq = 0.25 * a * a * (c2x * c2x * c2y * c2y + s2x * s2x * s2y * s2y);
                let lap_cube = 3.0 * phi * phi * lap + 6.0 * phi * grad_sq;
                let lap_mu = -eps2 * bilap + lap_cube - lap;
                forcing_time - m * lap_mu
            }
        }
    }))
}

/// [`source_term`] as a stepper forcing.
pub struct ManufacturedSource {
    pub params: ModelParams,
}

impl Forcing for ManufacturedSource {
    fn sample(&self, grid: &Grid, t: f64) -> Field {
        source_term(&self.params, t, grid).expect("parameters validated by the stepper")
    }
}

/// Errors of one forced run at `t = T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseErrors {
    /// Max-norm error of `phi^N` against the exact solution at `T`.
    pub phi: f64,
    /// Max-norm error of `r^{N-1/2}` against `phi_e(t_{N-1/2})^2 - 1 - S`.
    pub r: f64,
}

/// Runs the forced problem on a graded mesh and measures the final errors.
pub fn run_case(grid: &Grid, params: &ModelParams, steps: usize, gamma_exp: f64, options: StepOptions) -> Result<CaseErrors> {
    let mesh = TimeMesh::graded(HORIZON, steps, gamma_exp)?;
    let stepper = Stepper::new(grid, &mesh, *params, options)?;
    let source = ManufacturedSource { params: *params };
    let mut state = stepper.init_state(exact_field(grid, 0.0))?;
    for _ in 0..steps {
        stepper.step(&mut state, Some(&source))?;
    }
    let phi = state.phi.max_abs_diff(&exact_field(grid, HORIZON))?;
    let t_half = mesh.midpoint(steps);
    let r_exact = exact_field(grid, t_half).map(|p| params.relaxed(p));
    let r = state.r_half.max_abs_diff(&r_exact)?;
    Ok(CaseErrors { phi, r })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub steps: usize,
    /// `None` when the run failed (see `failure`).
    pub errors: Option<CaseErrors>,
    pub phi_order: Option<f64>,
    pub r_order: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceColumn {
    pub alpha: f64,
    pub gamma: f64,
    pub rows: Vec<ConvergenceRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub model: Model,
    pub columns: Vec<ConvergenceColumn>,
}

fn observed_order(coarse: f64, fine: f64, n_coarse: usize, n_fine: usize) -> f64 {
    (coarse / fine).ln() / (n_fine as f64 / n_coarse as f64).ln()
}

/// Grading exponent paired with `alpha`.
pub fn gamma_for(gamma_of_alpha: &[(f64, f64)], alpha: f64) -> Result<f64> {
    gamma_of_alpha
        .iter()
        .find(|(a, _)| (a - alpha).abs() < 1e-12)
        .map(|&(_, g)| g)
        .ok_or_else(|| Error::InvalidArgument(format!("no grading exponent given for alpha = {alpha}")))
}

/// Grading exponents used for the reference tables.
pub const REFERENCE_GRADING: [(f64, f64); 4] = [(0.3, 8.0), (0.6, 3.0), (0.9, 1.5), (1.0, 1.0)];

/// Errors and observed orders for every `(alpha, N)` pair. Cases run in
/// parallel on the current rayon pool; a failed case leaves its row
/// empty and [`ConvergenceTable::is_partial`] set.
pub fn run_convergence(
    base: &ModelParams,
    alphas: &[f64],
    steps: &[usize],
    gamma_of_alpha: &[(f64, f64)],
    grid: &Grid,
    options: StepOptions,
) -> Result<ConvergenceTable> {
    if steps.is_empty() || steps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("step counts must be strictly increasing".into()));
    }
    let mut cases = Vec::new();
    for &alpha in alphas {
        let params = ModelParams { alpha, ..*base }.validated()?;
        let g = gamma_for(gamma_of_alpha, alpha)?;
        for &n in steps {
            cases.push((params, g, n));
        }
    }
    let outcomes: Vec<Result<CaseErrors>> = cases
        .par_iter()
        .map(|(params, g, n)| run_case(grid, params, *n, *g, options))
        .collect();

    let mut outcomes = outcomes.into_iter();
    let columns = alphas
        .iter()
        .map(|&alpha| {
            let gamma = gamma_for(gamma_of_alpha, alpha).expect("checked above");
            let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(steps.len());
            for &n in steps {
                let outcome = outcomes.next().expect("one outcome per case");
                let (errors, failure) = match outcome {
                    Ok(e) => (Some(e), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                let prev = rows.last().and_then(|r| r.errors.map(|e| (r.steps, e)));
                let (phi_order, r_order) = match (prev, errors) {
                    (Some((pn, pe)), Some(e)) => (
                        Some(observed_order(pe.phi, e.phi, pn, n)),
                        Some(observed_order(pe.r, e.r, pn, n)),
                    ),
                    _ => (None, None),
                };
                rows.push(ConvergenceRow {
                    steps: n,
                    errors,
                    phi_order,
                    r_order,
                    failure,
                });
            }
            ConvergenceColumn { alpha, gamma, rows }
        })
        .collect();
    Ok(ConvergenceTable { model: base.model, columns })
}

impl ConvergenceTable {
    pub fn is_partial(&self) -> bool {
        self.columns.iter().any(|c| c.rows.iter().any(|r| r.errors.is_none()))
    }

    pub fn column(&self, alpha: f64) -> Option<&ConvergenceColumn> {
        self.columns.iter().find(|c| (c.alpha - alpha).abs() < 1e-12)
    }

    fn cells(&self, quantity: &str, row: usize, short: bool) -> Vec<String> {
        let fmt = |v: f64| if short { format!("{v:.2e}") } else { fmt_g17(v) };
        let mut out = Vec::new();
        for col in &self.columns {
            let r = &col.rows[row];
            let (err, order) = match quantity {
                "phi" => (r.errors.map(|e| e.phi), r.phi_order),
                _ => (r.errors.map(|e| e.r), r.r_order),
            };
            out.push(err.map(fmt).unwrap_or_else(|| "failed".into()));
            out.push(match order {
                Some(o) if short => format!("{o:.2}"),
                Some(o) => fmt_g17(o),
                None => "--".into(),
            });
        }
        out
    }

    fn step_counts(&self) -> Vec<usize> {
        self.columns
            .first()
            .map(|c| c.rows.iter().map(|r| r.steps).collect())
            .unwrap_or_default()
    }

    /// `quantity,N,<alpha> error,<alpha> order,...`, `phi` rows then `r` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("quantity,N");
        for col in &self.columns {
            s.push_str(&format!(",alpha={} error,alpha={} order", col.alpha, col.alpha));
        }
        s.push('\n');
        for quantity in ["phi", "r"] {
            for (i, n) in self.step_counts().iter().enumerate() {
                s.push_str(&format!("{quantity},{n},{}\n", self.cells(quantity, i, false).join(",")));
            }
        }
        s
    }

    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let mut lines: Vec<Vec<String>> = Vec::new();
        let mut header = vec![String::new(), "N".into()];
        for col in &self.columns {
            header.push(format!("a={} err", col.alpha));
            header.push("order".into());
        }
        lines.push(header);
        for quantity in ["phi", "r"] {
            for (i, n) in self.step_counts().iter().enumerate() {
                let mut row = vec![if i == 0 { quantity.to_string() } else { String::new() }, n.to_string()];
                row.extend(self.cells(quantity, i, true));
                lines.push(row);
            }
        }
        let widths: Vec<usize> = (0..lines[0].len())
            .map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = format!("model: {}\n", self.model);
        for l in &lines {
            let cells: Vec<String> = l.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}
