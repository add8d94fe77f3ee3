#![allow(dead_code)]

use fracphase::krylov::LinearOperator;
use fracphase::{Field, Grid};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn random_field(grid: &Grid, rng: &mut impl Rng, lo: f64, hi: f64) -> Field {
    grid.field_from_fn(|_, _| rng.gen_range(lo..hi))
}

/// Smooth random field built from a handful of low Fourier modes.
pub fn smooth_random_field(grid: &Grid, rng: &mut impl Rng, modes: usize, amplitude: f64) -> Field {
    let terms: Vec<(f64, f64, f64, f64)> = (0..modes)
        .map(|_| {
            (
                rng.gen_range(0..4) as f64 * 2.0,
                rng.gen_range(0..4) as f64 * 2.0,
                rng.gen_range(-amplitude..amplitude),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    grid.field_from_fn(|x, y| terms.iter().map(|&(kx, ky, a, p)| a * (kx * x + ky * y + p).cos()).sum())
}

/// Column-by-column assembly of a matrix-free operator.
pub fn assemble(op: &dyn LinearOperator) -> DMatrix<f64> {
    let n = op.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        e[j] = 0.0;
        for i in 0..n {
            m[(i, j)] = col[i];
        }
    }
    m
}

pub fn dense_solve(op: &dyn LinearOperator, rhs: &[f64]) -> Vec<f64> {
    let m = assemble(op);
    let b = DVector::from_column_slice(rhs);
    m.lu().solve(&b).expect("operator matrix is singular").as_slice().to_vec()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
