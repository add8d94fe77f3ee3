//! Matrix-free BiCGStab with right preconditioning.

use std::fmt;

use crate::grid::Grid;
use crate::model::{Model, ModelParams};

/// Action `x -> L x` on flattened fields.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn self_adjoint(&self) -> bool {
        false
    }
}

/// The identity map.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }

    fn self_adjoint(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// `||b - L x|| / ||b||`, recomputed from the returned iterate.
    pub final_relative_residual: f64,
    pub converged: bool,
    pub restarts: usize,
}

impl fmt::Display for SolveStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} iterations, relative residual {:.3e}, converged: {}, restarts: {}",
            self.iterations, self.final_relative_residual, self.converged, self.restarts
        )
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual(op: &dyn LinearOperator, x: &[f64], rhs: &[f64], out: &mut [f64]) {
    op.apply(x, out);
    for (o, b) in out.iter_mut().zip(rhs) {
        *o = b - *o;
    }
}

/// Solves `op(x) = rhs` starting from `x` (updated in place).
///
/// Stops once `||rhs - op(x)|| <= tol * ||rhs||`. A breakdown (`rho` or
/// `omega` vanishing) restarts once from the current iterate; a second one
/// ends the solve unconverged.
pub fn bicgstab(
    op: &dyn LinearOperator,
    precond: &dyn LinearOperator,
    rhs: &[f64],
    x: &mut [f64],
    tol: f64,
    maxit: usize,
) -> SolveStats {
    assert!(tol > 0.0 && tol < 1.0, "tolerance must lie in (0, 1)");
    assert!(maxit >= 1);
    let n = op.dim();
    assert_eq!(rhs.len(), n);
    assert_eq!(x.len(), n);

    let rhs_norm = norm(rhs);
    if rhs_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return SolveStats {
            iterations: 0,
            final_relative_residual: 0.0,
            converged: true,
            restarts: 0,
        };
    }
    let target = tol * rhs_norm;

    let mut r = vec![0.0; n];
    let mut iterations = 0;
    let mut restarts = 0;

    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];

    // each pass starts from the true residual; the recursive one drifts
    'outer: loop {
        residual(op, x, rhs, &mut r);
        if norm(&r) <= target || iterations >= maxit {
            break;
        }
        let r_shadow = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        p.iter_mut().for_each(|e| *e = 0.0);
        v.iter_mut().for_each(|e| *e = 0.0);
        let tiny = f64::EPSILON * f64::EPSILON * dot(&r_shadow, &r_shadow);

        while iterations < maxit {
            let rho_next = dot(&r_shadow, &r);
            if rho_next.abs() <= tiny || omega == 0.0 {
                if restarts == 0 {
                    restarts += 1;
                    continue 'outer;
                }
                break 'outer;
            }
            let beta = (rho_next / rho) * (alpha / omega);
            rho = rho_next;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            precond.apply(&p, &mut p_hat);
            op.apply(&p_hat, &mut v);
            let denom = dot(&r_shadow, &v);
            if denom == 0.0 {
                if restarts == 0 {
                    restarts += 1;
                    continue 'outer;
                }
                break 'outer;
            }
            alpha = rho / denom;
            iterations += 1;
            // r now holds s = r - alpha v
            for i in 0..n {
                r[i] -= alpha * v[i];
                x[i] += alpha * p_hat[i];
            }
            if norm(&r) <= target {
                continue 'outer;
            }
            precond.apply(&r, &mut s_hat);
            op.apply(&s_hat, &mut t);
            let tt = dot(&t, &t);
            omega = if tt > 0.0 { dot(&t, &r) / tt } else { 0.0 };
            for i in 0..n {
                x[i] += omega * s_hat[i];
                r[i] -= omega * t[i];
            }
            if norm(&r) <= target {
                continue 'outer;
            }
        }
    }

    residual(op, x, rhs, &mut r);
    let rel = norm(&r) / rhs_norm;
    SolveStats {
        iterations,
        final_relative_residual: rel,
        converged: rel <= tol,
        restarts,
    }
}

/// Exact inverse of the constant-coefficient scheme operator, applied per
/// Fourier mode:
///
/// * Allen-Cahn: `1 / (b0 + M/2 (eps^2 k^2 + c))`
/// * Cahn-Hilliard: `1 / (b0 + M/2 (eps^2 k^4 + c k^2))`
pub struct SpectralPreconditioner<'g> {
    grid: &'g Grid,
    symbol: Vec<f64>,
}

impl<'g> SpectralPreconditioner<'g> {
    /// `c` is a constant surrogate for `r + S`.
    pub fn new(b0: f64, params: &ModelParams, grid: &'g Grid, c: f64) -> Self {
        let half_m = 0.5 * params.mobility;
        let eps2 = params.eps * params.eps;
        let symbol = grid
            .k_squared()
            .iter()
            .map(|&k2| {
                let stiff = match params.model {
                    Model::AllenCahn => eps2 * k2 + c,
                    Model::CahnHilliard => eps2 * k2 * k2 + c * k2,
                };
                1.0 / (b0 + half_m * stiff)
            })
            .collect();
        Self { grid, symbol }
    }

    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }
}

impl LinearOperator for SpectralPreconditioner<'_> {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.grid.apply_symbol_into(x, &self.symbol, y);
    }

    fn self_adjoint(&self) -> bool {
        true
    }
}

/// Convenience constructor mirroring [`SpectralPreconditioner::new`].
pub fn make_preconditioner<'g>(b0: f64, params: &ModelParams, grid: &'g Grid, c: f64) -> SpectralPreconditioner<'g> {
    SpectralPreconditioner::new(b0, params, grid, c)
}
