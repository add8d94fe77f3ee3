//! Time meshes and the L1+ convolution coefficients.
//!
//! For step `n` the L1+ operator averages the Caputo derivative of the
//! piecewise-linear interpolant over `[t_{n-1}, t_n]`:
//!
//! ```text
//! (D u)^{n-1/2} = sum_{k=1..n} b_{n-k}^{(n)} (u^k - u^{k-1}),
//! b_{n-k}^{(n)} = 1 / (Gamma(1-a) tau_n tau_k) * int_{t_{n-1}}^{t_n} int_{t_{k-1}}^{min(t_k, t)} (t-s)^{-a} ds dt.
//! ```
//!
//! Integrating exactly gives, for `k < n`,
//! `[(t_n-t_{k-1})^{2-a} - (t_{n-1}-t_{k-1})^{2-a} - (t_n-t_k)^{2-a} + (t_{n-1}-t_k)^{2-a}] / (Gamma(3-a) tau_n tau_k)`
//! and `b_0^{(n)} = tau_n^{-a} / Gamma(3-a)`.

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quadrature::GaussRule;

/// Closed-form entries whose grouped differences cancel by more than this
/// factor are recomputed by quadrature.
pub const CANCELLATION_LIMIT: f64 = 1e5;

const ORACLE_POINTS: usize = 24;
const ORACLE_SIGMA: f64 = 0.15;
const ORACLE_LEVELS: usize = 40;

/// Time points `0 = t_0 < t_1 < ... < t_N = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMesh {
    t: Vec<f64>,
    tau: Vec<f64>,
    gamma: f64,
}

impl TimeMesh {
    /// Graded mesh `t_n = T (n/N)^gamma`; `gamma = 1` is uniform.
    pub fn graded(horizon: f64, steps: usize, gamma: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
        }
        if steps < 1 {
            return Err(Error::InvalidArgument("step count must be >= 1".into()));
        }
        if !(gamma >= 1.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("grading exponent must be >= 1, got {gamma}")));
        }
        let n = steps as f64;
        let mut t: Vec<f64> = (0..=steps).map(|k| horizon * (k as f64 / n).powf(gamma)).collect();
        t[steps] = horizon;
        let mut mesh = Self::from_points(t)?;
        mesh.gamma = gamma;
        Ok(mesh)
    }

    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        Self::graded(horizon, steps, 1.0)
    }

    /// Arbitrary strictly increasing points starting at zero.
    pub fn from_points(t: Vec<f64>) -> Result<Self> {
        if t.len() < 2 {
            return Err(Error::InvalidArgument("a mesh needs at least two points".into()));
        }
        if t[0] != 0.0 {
            return Err(Error::InvalidArgument("mesh must start at t = 0".into()));
        }
        let tau: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
        if let Some(k) = tau.iter().position(|&d| !(d > 0.0)) {
            return Err(Error::InvalidArgument(format!("mesh is not strictly increasing at step {}", k + 1)));
        }
        Ok(Self { t, tau, gamma: f64::NAN })
    }

    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.tau.len()
    }

    pub fn horizon(&self) -> f64 {
        self.t[self.steps()]
    }

    /// Grading exponent, `NaN` for meshes built from explicit points.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn t(&self, n: usize) -> f64 {
        self.t[n]
    }

    /// Step size `tau_k = t_k - t_{k-1}` for `k >= 1`.
    pub fn tau(&self, k: usize) -> f64 {
        self.tau[k - 1]
    }

    pub fn steps_sizes(&self) -> &[f64] {
        &self.tau
    }

    /// Midpoint `(t_{n-1} + t_n) / 2` of step `n`.
    pub fn midpoint(&self, n: usize) -> f64 {
        0.5 * (self.t[n - 1] + self.t[n])
    }
}

/// Coefficients `b_{n-k}^{(n)}` for one step `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRow {
    n: usize,
    alpha: f64,
    /// `coeffs[k - 1] = b_{n-k}^{(n)}`, `k = 1..=n`.
    coeffs: Vec<f64>,
}

impl KernelRow {
    pub fn new(n: usize, alpha: f64, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != n || n == 0 {
            return Err(Error::InvalidArgument(format!(
                "kernel row for step {n} needs {n} coefficients, got {}",
                coeffs.len()
            )));
        }
        Ok(Self { n, alpha, coeffs })
    }

    pub fn step(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Weight multiplying the increment `u^k - u^{k-1}`.
    pub fn weight(&self, k: usize) -> f64 {
        self.coeffs[k - 1]
    }

    /// `b_lag^{(n)}`.
    pub fn lag(&self, lag: usize) -> f64 {
        self.coeffs[self.n - 1 - lag]
    }

    /// Implicit coefficient `b_0^{(n)}`.
    pub fn b0(&self) -> f64 {
        self.coeffs[self.n - 1]
    }

    /// Coefficients in increment order `k = 1..=n`.
    pub fn weights(&self) -> &[f64] {
        &self.coeffs
    }
}

fn check_row_args(mesh: &TimeMesh, n: usize, alpha: f64) -> Result<()> {
    if n < 1 || n > mesh.steps() {
        return Err(Error::InvalidArgument(format!(
            "step {n} outside 1..={}",
            mesh.steps()
        )));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

/// `(x + h)^p - x^p` without cancellation for `h << x`.
fn power_increment(x: f64, h: f64, p: f64) -> f64 {
    if x == 0.0 {
        h.powf(p)
    } else {
        x.powf(p) * (p * (h / x).ln_1p()).exp_m1()
    }
}

/// Closed-form coefficient plus its cancellation ratio.
fn closed_form_entry(mesh: &TimeMesh, n: usize, k: usize, alpha: f64, gamma3: f64) -> (f64, f64) {
    let p = 2.0 - alpha;
    let tau_n = mesh.tau(n);
    if k == n {
        return (tau_n.powf(-alpha) / gamma3, 1.0);
    }
    let tau_k = mesh.tau(k);
    // (A - B) - (C - D) with A - B, C - D evaluated as increments in t_n
    let far = power_increment(mesh.t(n - 1) - mesh.t(k - 1), tau_n, p);
    let near = power_increment(mesh.t(n - 1) - mesh.t(k), tau_n, p);
    let diff = far - near;
    let ratio = far.abs().max(near.abs()) / diff.abs();
    (diff / (gamma3 * tau_n * tau_k), ratio)
}

/// Closed-form row without any fallback; the second vector holds the
/// cancellation ratio of each entry.
pub fn kernel_row_closed_form(mesh: &TimeMesh, n: usize, alpha: f64) -> Result<(KernelRow, Vec<f64>)> {
    check_row_args(mesh, n, alpha)?;
    if alpha == 1.0 {
        return Ok((backward_difference_row(mesh, n), vec![1.0; n]));
    }
    let gamma3 = gamma(3.0 - alpha);
    let (coeffs, ratios) = (1..=n).map(|k| closed_form_entry(mesh, n, k, alpha, gamma3)).unzip();
    Ok((KernelRow::new(n, alpha, coeffs)?, ratios))
}

fn backward_difference_row(mesh: &TimeMesh, n: usize) -> KernelRow {
    let mut coeffs = vec![0.0; n];
    coeffs[n - 1] = 1.0 / mesh.tau(n);
    KernelRow { n, alpha: 1.0, coeffs }
}

/// L1+ coefficients for step `n`.
///
/// Closed form, with single entries recomputed by [`kernel_oracle_entry`]
/// when the closed form loses more than five digits. For `alpha = 1` the
/// row degenerates to `b_0 = 1 / tau_n`.
pub fn kernel_row(mesh: &TimeMesh, n: usize, alpha: f64) -> Result<KernelRow> {
    check_row_args(mesh, n, alpha)?;
    if alpha == 1.0 {
        return Ok(backward_difference_row(mesh, n));
    }
    let gamma3 = gamma(3.0 - alpha);
    let mut rule = None;
    let coeffs = (1..=n)
        .map(|k| {
            let (value, ratio) = closed_form_entry(mesh, n, k, alpha, gamma3);
            if ratio.is_finite() && ratio <= CANCELLATION_LIMIT && value > 0.0 {
                value
            } else {
                let rule = rule.get_or_insert_with(|| GaussRule::new(ORACLE_POINTS));
                oracle_entry(rule, mesh, n, k, alpha)
            }
        })
        .collect();
    KernelRow::new(n, alpha, coeffs)
}

/// Inner integral `(1/(1-a)) * [(t - t_{k-1})^{1-a} - (t - t_k)^{1-a}]`,
/// written as an increment so it stays accurate far from `t_k`.
fn inner_integral(t: f64, t_lo: f64, t_hi: f64, alpha: f64) -> f64 {
    let q = 1.0 - alpha;
    let x = (t - t_hi).max(0.0);
    power_increment(x, t_hi - t_lo, q) / q
}

fn oracle_entry(rule: &GaussRule, mesh: &TimeMesh, n: usize, k: usize, alpha: f64) -> f64 {
    let (a, b) = (mesh.t(n - 1), mesh.t(n));
    let q = 1.0 - alpha;
    let outer = if k == n {
        let f = |t: f64| (t - a).max(0.0).powf(q) / q;
        rule.graded_left(&f, a, b, ORACLE_SIGMA, ORACLE_LEVELS)
    } else {
        let (lo, hi) = (mesh.t(k - 1), mesh.t(k));
        let f = |t: f64| inner_integral(t, lo, hi, alpha);
        rule.graded_left(&f, a, b, ORACLE_SIGMA, ORACLE_LEVELS)
    };
    outer / (gamma(q) * mesh.tau(n) * mesh.tau(k))
}

/// One coefficient `b_{n-k}^{(n)}` by direct quadrature of the defining
/// double integral.
pub fn kernel_oracle_entry(mesh: &TimeMesh, n: usize, k: usize, alpha: f64) -> Result<f64> {
    check_row_args(mesh, n, alpha)?;
    if alpha >= 1.0 {
        return Err(Error::Unsupported("quadrature kernel needs alpha < 1".into()));
    }
    if k < 1 || k > n {
        return Err(Error::InvalidArgument(format!("increment index {k} outside 1..={n}")));
    }
    Ok(oracle_entry(&GaussRule::new(ORACLE_POINTS), mesh, n, k, alpha))
}

/// Whole row by quadrature: the inner integral is done analytically and
/// the outer one by Gauss-Legendre panels graded towards `t_{n-1}`.
/// Accurate to about `1e-13` relative.
pub fn kernel_oracle(mesh: &TimeMesh, n: usize, alpha: f64) -> Result<KernelRow> {
    check_row_args(mesh, n, alpha)?;
    if alpha >= 1.0 {
        return Err(Error::Unsupported("quadrature kernel needs alpha < 1".into()));
    }
    let rule = GaussRule::new(ORACLE_POINTS);
    let coeffs = (1..=n).map(|k| oracle_entry(&rule, mesh, n, k, alpha)).collect();
    KernelRow::new(n, alpha, coeffs)
}

/// Source of kernel rows: recomputed on demand, or precomputed for every
/// step of a mesh.
#[derive(Debug, Clone)]
pub enum KernelRows {
    OnDemand { mesh: TimeMesh, alpha: f64 },
    Cached(Vec<KernelRow>),
}

/// Cached tables are only built up to this many steps.
pub const MAX_CACHED_STEPS: usize = 10_000;

impl KernelRows {
    pub fn on_demand(mesh: &TimeMesh, alpha: f64) -> Self {
        Self::OnDemand { mesh: mesh.clone(), alpha }
    }

    pub fn cached(mesh: &TimeMesh, alpha: f64) -> Result<Self> {
        if mesh.steps() > MAX_CACHED_STEPS {
            return Err(Error::InvalidArgument(format!(
                "kernel cache limited to {MAX_CACHED_STEPS} steps"
            )));
        }
        let rows = (1..=mesh.steps())
            .map(|n| kernel_row(mesh, n, alpha))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::Cached(rows))
    }

    pub fn row(&self, n: usize) -> Result<KernelRow> {
        match self {
            Self::OnDemand { mesh, alpha } => kernel_row(mesh, n, *alpha),
            Self::Cached(rows) => rows
                .get(n.wrapping_sub(1))
                .cloned()
                .ok_or_else(|| Error::InvalidArgument(format!("step {n} outside cached rows"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn uniform_and_graded_points() {
        let m = TimeMesh::graded(0.5, 4, 1.0).unwrap();
        let expect = [0.0, 0.125, 0.25, 0.375, 0.5];
        for (a, b) in m.times().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let m = TimeMesh::graded(0.5, 4, 2.0).unwrap();
        let expect = [0.0, 0.03125, 0.125, 0.28125, 0.5];
        for (a, b) in m.times().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let m = TimeMesh::graded(0.5, 8, 8.0).unwrap();
        assert!(rel(m.tau(1), 0.5 * 8f64.powi(-8)) < 1e-14);
        assert!(m.steps_sizes().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(m.horizon(), 0.5);
    }

    #[test]
    fn mesh_errors() {
        assert!(TimeMesh::graded(0.5, 4, 0.9).is_err());
        assert!(TimeMesh::graded(0.5, 0, 1.0).is_err());
        assert!(TimeMesh::graded(-1.0, 4, 1.0).is_err());
        assert!(TimeMesh::from_points(vec![0.0, 0.2, 0.2]).is_err());
    }

    #[test]
    fn first_coefficient_closed_form() {
        let m = TimeMesh::uniform(1.0, 2).unwrap();
        let row = kernel_row(&m, 1, 0.5).unwrap();
        let expected = 0.5f64.powf(-0.5) / gamma(2.5);
        assert!(rel(row.b0(), expected) < 1e-14);
        let oracle = kernel_oracle(&m, 1, 0.5).unwrap();
        assert!(rel(oracle.b0(), expected) < 1e-10);
    }

    #[test]
    fn alpha_one_is_backward_difference() {
        let m = TimeMesh::graded(0.5, 6, 2.0).unwrap();
        for n in 1..=6 {
            let row = kernel_row(&m, n, 1.0).unwrap();
            assert_eq!(row.b0(), 1.0 / m.tau(n));
            assert!(row.weights()[..n - 1].iter().all(|&b| b == 0.0));
        }
        assert!(matches!(kernel_oracle(&m, 2, 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn closed_form_matches_oracle_uniform() {
        let m = TimeMesh::uniform(1.0, 8).unwrap();
        let row = kernel_row(&m, 5, 0.4).unwrap();
        let oracle = kernel_oracle(&m, 5, 0.4).unwrap();
        for (a, b) in row.weights().iter().zip(oracle.weights()) {
            assert!(rel(*a, *b) < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn oracle_positive_and_decreasing_with_lag() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(17);
        for &alpha in &[0.1, 0.5, 0.9] {
            for _ in 0..3 {
                let gamma_exp = rng.gen_range(1.0..4.0);
                let m = TimeMesh::graded(rng.gen_range(0.1..2.0), 12, gamma_exp).unwrap();
                let n = rng.gen_range(1..=12);
                let row = kernel_oracle(&m, n, alpha).unwrap();
                assert!(row.weights().iter().all(|&b| b > 0.0));
            }
            let uniform = TimeMesh::uniform(1.0, 20).unwrap();
            for n in 1..=20 {
                let row = kernel_oracle(&uniform, n, alpha).unwrap();
                // lag 0 weights a half cell, so monotonicity starts at lag 1
                for lag in 1..n.saturating_sub(1) {
                    assert!(row.lag(lag) >= row.lag(lag + 1));
                }
            }
        }
    }

    #[test]
    fn argument_errors() {
        let m = TimeMesh::uniform(1.0, 4).unwrap();
        assert!(kernel_row(&m, 0, 0.5).is_err());
        assert!(kernel_row(&m, 5, 0.5).is_err());
        assert!(kernel_row(&m, 2, 0.0).is_err());
        assert!(kernel_row(&m, 2, 1.2).is_err());
    }

    #[test]
    fn graded_mesh_uses_fallback_without_losing_accuracy() {
        let m = TimeMesh::graded(0.5, 64, 8.0).unwrap();
        let (_, ratios) = kernel_row_closed_form(&m, 64, 0.3).unwrap();
        assert!(ratios.iter().any(|&r| r > CANCELLATION_LIMIT));
        let row = kernel_row(&m, 64, 0.3).unwrap();
        let oracle = kernel_oracle(&m, 64, 0.3).unwrap();
        for (a, b) in row.weights().iter().zip(oracle.weights()) {
            assert!(rel(*a, *b) < 1e-10);
        }
    }

    #[test]
    fn cached_rows_match_on_demand() {
        let m = TimeMesh::graded(0.5, 10, 2.0).unwrap();
        let cache = KernelRows::cached(&m, 0.6).unwrap();
        let lazy = KernelRows::on_demand(&m, 0.6);
        for n in 1..=10 {
            assert_eq!(cache.row(n).unwrap(), lazy.row(n).unwrap());
        }
        assert!(cache.row(11).is_err());
    }
}
