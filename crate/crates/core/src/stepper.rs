//! L1+ linear relaxation time stepping.
//!
//! One step from `t_n` to `t_{n+1}`:
//!
//! 1. `r^{n+1/2} = 2 ((phi^n)^2 - 1 - S) - r^{n-1/2}` (explicit, pointwise);
//! 2. solve the linear Crank-Nicolson / L1+ system for `phi^{n+1}`:
//!    `b0 (phi^{n+1} - phi^n) + H^n = G mu^{n+1/2} + g(t_{n+1/2})`, where
//!    `mu^{n+1/2} = A[(phi^n + phi^{n+1}) / 2]`,
//!    `A[v] = -eps^2 lap v + (r^{n+1/2} + S) v`, `G = -M` (Allen-Cahn) or
//!    `G = M lap` (Cahn-Hilliard), and `H^n` is the history part of the
//!    discrete Caputo sum.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::history::HistoryBuffer;
use crate::krylov::{bicgstab, LinearOperator, SolveStats, SpectralPreconditioner};
use crate::model::{Model, ModelParams};
use crate::time_mesh::{KernelRow, KernelRows, TimeMesh};

/// Right-hand side forcing `g(x, y, t)`, evaluated at step midpoints.
pub trait Forcing: Sync {
    fn sample(&self, grid: &Grid, t: f64) -> Field;
}

/// Forcing given pointwise by a closure.
pub struct SourceSpec<F>(pub F);

impl<F> Forcing for SourceSpec<F>
where
    F: Fn(f64, f64, f64) -> f64 + Sync,
{
    fn sample(&self, grid: &Grid, t: f64) -> Field {
        grid.field_from_fn(|x, y| (self.0)(x, y, t))
    }
}

/// Which constant stands in for `r + S` in the preconditioner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PreconditionerShift {
    /// Drop the multiplicative term entirely.
    #[default]
    Zero,
    /// Use `max(mean(r + S), 0)`.
    MeanCoefficient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub tol: f64,
    pub maxit: usize,
    pub shift: PreconditionerShift,
    pub cache_kernels: bool,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            maxit: 500,
            shift: PreconditionerShift::Zero,
            cache_kernels: false,
        }
    }
}

/// `phi^n`, the staggered `r^{n-1/2}` and all increments so far.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub step: usize,
    pub phi: Field,
    pub r_half: Field,
    pub history: HistoryBuffer,
}

/// State at step 0 with `r^{-1/2} = (phi^0)^2 - 1 - S`, which makes the
/// modified energy of the initial pair equal to the original energy.
pub fn init_state(phi0: Field, params: &ModelParams) -> Result<SolverState> {
    if !phi0.is_finite() {
        return Err(Error::InvalidArgument("initial field has non-finite values".into()));
    }
    let r_half = phi0.map(|p| params.relaxed(p));
    let history = HistoryBuffer::new(phi0.nx(), phi0.ny());
    Ok(SolverState {
        step: 0,
        phi: phi0,
        r_half,
        history,
    })
}

/// Staggered update `r^{n+1/2} = 2 ((phi^n)^2 - 1 - S) - r^{n-1/2}`.
pub fn update_r(state: &SolverState, params: &ModelParams) -> Field {
    state
        .phi
        .zip_map(&state.r_half, |p, r| 2.0 * params.relaxed(p) - r)
        .expect("solver state fields share one shape")
}

/// Matrix-free left-hand side of the step system,
/// `L[v] = b0 v + (M/2) A[v]` (Allen-Cahn) or `b0 v - (M/2) lap A[v]`
/// (Cahn-Hilliard), with `A[v] = -eps^2 lap v + (r + S) v`.
pub struct SchemeOperator<'g> {
    grid: &'g Grid,
    coefficient: Vec<f64>,
    b0: f64,
    params: ModelParams,
}

impl<'g> SchemeOperator<'g> {
    pub fn new(grid: &'g Grid, r_half: &Field, b0: f64, params: &ModelParams) -> Result<Self> {
        grid.check(r_half)?;
        let s = params.stabilization;
        Ok(Self {
            grid,
            coefficient: r_half.values().iter().map(|r| r + s).collect(),
            b0,
            params: *params,
        })
    }

    /// `r + S` sampled on the grid.
    pub fn coefficient(&self) -> &[f64] {
        &self.coefficient
    }

    /// `A[x] = -eps^2 lap x + (r + S) x`.
    pub fn chemical_potential(&self, x: &[f64], out: &mut [f64]) {
        self.grid.laplacian_into(x, out);
        let eps2 = self.params.eps * self.params.eps;
        for ((o, xi), c) in out.iter_mut().zip(x).zip(&self.coefficient) {
            *o = -eps2 * *o + c * xi;
        }
    }

    /// `G A[x]`: `-M A[x]` or `M lap A[x]`.
    pub fn flux(&self, x: &[f64], out: &mut [f64]) {
        let m = self.params.mobility;
        match self.params.model {
            Model::AllenCahn => {
                self.chemical_potential(x, out);
                out.iter_mut().for_each(|v| *v *= -m);
            }
            Model::CahnHilliard => {
                let mut mu = vec![0.0; x.len()];
                self.chemical_potential(x, &mut mu);
                self.grid.laplacian_into(&mu, out);
                out.iter_mut().for_each(|v| *v *= m);
            }
        }
    }
}

impl LinearOperator for SchemeOperator<'_> {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.flux(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = self.b0 * xi - 0.5 * *yi;
        }
    }
}

/// `L[phi]` for the given staggered `r` and implicit weight `b0`.
pub fn apply_scheme_operator(grid: &Grid, phi: &Field, r_half: &Field, b0: f64, params: &ModelParams) -> Result<Field> {
    grid.check(phi)?;
    let op = SchemeOperator::new(grid, r_half, b0, params)?;
    let mut out = grid.zeros();
    op.apply(phi.values(), out.values_mut());
    Ok(out)
}

/// Solve/mean-projection rounds for Cahn-Hilliard steps.
const MEAN_ROUNDS: usize = 3;

fn relative_residual(op: &dyn LinearOperator, x: &[f64], rhs: &[f64]) -> f64 {
    let mut lx = vec![0.0; x.len()];
    op.apply(x, &mut lx);
    let res = lx.iter().zip(rhs).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let rhs_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    if rhs_norm > 0.0 {
        res / rhs_norm
    } else {
        res
    }
}

/// What one step did.
#[derive(Debug, Clone)]
pub struct StepReport {
    /// Index of the new state.
    pub step: usize,
    pub stats: SolveStats,
    pub row: KernelRow,
    pub prev_phi: Field,
    pub prev_r_half: Field,
}

/// Advances one simulation over a fixed mesh.
pub struct Stepper<'a> {
    grid: &'a Grid,
    mesh: &'a TimeMesh,
    params: ModelParams,
    options: StepOptions,
    kernels: KernelRows,
}

impl<'a> Stepper<'a> {
    pub fn new(grid: &'a Grid, mesh: &'a TimeMesh, params: ModelParams, options: StepOptions) -> Result<Self> {
        let params = params.validated()?;
        if !(options.tol > 0.0 && options.tol < 1.0) || options.maxit < 1 {
            return Err(Error::InvalidArgument("tol must lie in (0, 1) and maxit >= 1".into()));
        }
        let kernels = if options.cache_kernels {
            KernelRows::cached(mesh, params.alpha)?
        } else {
            KernelRows::on_demand(mesh, params.alpha)
        };
        Ok(Self {
            grid,
            mesh,
            params,
            options,
            kernels,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.grid
    }

    pub fn mesh(&self) -> &TimeMesh {
        self.mesh
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn options(&self) -> &StepOptions {
        &self.options
    }

    pub fn init_state(&self, phi0: Field) -> Result<SolverState> {
        self.grid.check(&phi0)?;
        init_state(phi0, &self.params)
    }

    /// Kernel row used by the step that produces state `n`.
    pub fn kernel_row(&self, n: usize) -> Result<KernelRow> {
        self.kernels.row(n)
    }

    /// Full step: staggered `r` update, then the linear solve for `phi`.
    pub fn step(&self, state: &mut SolverState, source: Option<&dyn Forcing>) -> Result<StepReport> {
        let r_next = update_r(state, &self.params);
        self.advance_with_r(state, r_next, source)
    }

    /// Solves for `phi^{n+1}` with a prescribed `r^{n+1/2}`.
    pub fn advance_with_r(
        &self,
        state: &mut SolverState,
        r_next: Field,
        source: Option<&dyn Forcing>,
    ) -> Result<StepReport> {
        let n = state.step;
        if n >= self.mesh.steps() {
            return Err(Error::InvalidArgument(format!(
                "state is already at the final step {}",
                self.mesh.steps()
            )));
        }
        self.grid.check(&state.phi)?;
        self.grid.check(&r_next)?;

        let row = self.kernels.row(n + 1)?;
        let b0 = row.b0();
        let history = state.history.history_term(&row)?;
        let op = SchemeOperator::new(self.grid, &r_next, b0, &self.params)?;

        // explicit half: b0 phi^n - H^n + (1/2) G A[phi^n] + g
        let mut rhs = vec![0.0; self.grid.len()];
        op.flux(state.phi.values(), &mut rhs);
        for ((r, p), h) in rhs.iter_mut().zip(state.phi.values()).zip(history.values()) {
            *r = b0 * p - h + 0.5 * *r;
        }
        if let Some(src) = source {
            let g = src.sample(self.grid, self.mesh.midpoint(n + 1));
            self.grid.check(&g)?;
            for (r, gv) in rhs.iter_mut().zip(g.values()) {
                *r += gv;
            }
        }

        let shift = match self.options.shift {
            PreconditionerShift::Zero => 0.0,
            PreconditionerShift::MeanCoefficient => {
                let c = op.coefficient();
                (c.iter().sum::<f64>() / c.len() as f64).max(0.0)
            }
        };
        let precond = SpectralPreconditioner::new(b0, &self.params, self.grid, shift);

        let mut x = state.phi.values().to_vec();
        let mut stats = bicgstab(&op, &precond, &rhs, &mut x, self.options.tol, self.options.maxit);

        if self.params.model == Model::CahnHilliard {
            // mean(L[x]) = b0 mean(x) exactly, so the mean is known; shifting
            // it perturbs the other modes slightly, hence the re-solve
            let target = rhs.iter().sum::<f64>() / rhs.len() as f64 / b0;
            for round in 0..MEAN_ROUNDS {
                let shift = target - x.iter().sum::<f64>() / x.len() as f64;
                x.iter_mut().for_each(|v| *v += shift);
                let rel = relative_residual(&op, &x, &rhs);
                stats.final_relative_residual = rel;
                stats.converged = rel <= self.options.tol;
                if stats.converged || round + 1 == MEAN_ROUNDS || stats.iterations >= self.options.maxit {
                    break;
                }
                let more = bicgstab(&op, &precond, &rhs, &mut x, self.options.tol, self.options.maxit - stats.iterations);
                stats.iterations += more.iterations;
                stats.restarts += more.restarts;
            }
        }

        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: n + 1 });
        }
        if !stats.converged {
            return Err(Error::SolveFailed { step: n + 1, stats });
        }

        let phi_next = Field::from_values(self.grid.nx(), self.grid.ny(), x)?;
        let increment = phi_next.zip_map(&state.phi, |a, b| a - b)?;
        state.history.push(increment)?;
        let prev_phi = std::mem::replace(&mut state.phi, phi_next);
        let prev_r_half = std::mem::replace(&mut state.r_half, r_next);
        state.step = n + 1;

        Ok(StepReport {
            step: n + 1,
            stats,
            row,
            prev_phi,
            prev_r_half,
        })
    }
}
