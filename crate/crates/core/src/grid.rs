//! Periodic 2-D collocation grid with Fourier pseudospectral operators.
//!
//! Fields are stored row-major with `ny` rows of `nx` samples each, so the
//! value at `(x_i, y_j)` lives at index `j * nx + i`. Transforms are
//! unnormalized forward / `1/(nx*ny)` inverse.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Largest tolerated imaginary residue after an inverse transform, relative
/// to the magnitude of the transformed data.
const IMAG_RESIDUE_TOL: f64 = 1e-10;

/// Real scalar samples on a [`Grid`].
#[derive(Clone, PartialEq)]
pub struct Field {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("max_abs", &self.max_abs())
            .finish()
    }
}

impl Field {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self::constant(nx, ny, 0.0)
    }

    pub fn constant(nx: usize, ny: usize, value: f64) -> Self {
        Self {
            nx,
            ny,
            values: vec![value; nx * ny],
        }
    }

    /// Wraps row-major samples. Fails if the length does not match.
    pub fn from_values(nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != nx * ny {
            return Err(Error::ShapeMismatch {
                expected: (nx, ny),
                found_len: values.len(),
            });
        }
        Ok(Self { nx, ny, values })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Sample at column `i` (x index), row `j` (y index).
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn same_shape(&self, other: &Field) -> bool {
        self.nx == other.nx && self.ny == other.ny
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            nx: self.nx,
            ny: self.ny,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields of the same shape.
    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.check_same(other)?;
        Ok(Field {
            nx: self.nx,
            ny: self.ny,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &Field) -> Result<()> {
        self.check_same(other)?;
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
        Ok(())
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.values {
            *v *= a;
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Largest pointwise difference.
    pub fn max_abs_diff(&self, other: &Field) -> Result<f64> {
        self.check_same(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    fn check_same(&self, other: &Field) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: (self.nx, self.ny),
                found_len: other.len(),
            })
        }
    }
}

/// Periodic rectangle `[0, lx) x [0, ly)` sampled at `nx x ny` points.
#[derive(Clone)]
pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    kx: Vec<f64>,
    ky: Vec<f64>,
    /// `kx^2 + ky^2` per mode, flattened like a field.
    k_sq: Vec<f64>,
    fft_x: Arc<dyn Fft<f64>>,
    ifft_x: Arc<dyn Fft<f64>>,
    fft_y: Arc<dyn Fft<f64>>,
    ifft_y: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("lx", &self.lx)
            .field("ly", &self.ly)
            .finish()
    }
}

/// Signed wavenumbers `2*pi*m/l`; the Nyquist index maps to `-n/2`.
fn wavenumbers(n: usize, l: f64) -> Vec<f64> {
    let scale = 2.0 * PI / l;
    (0..n)
        .map(|m| {
            let signed = if m < n / 2 {
                m as f64
            } else {
                m as f64 - n as f64
            };
            signed * scale
        })
        .collect()
}

impl Grid {
    /// Builds a grid; sizes must be even and at least 4.
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        for (name, n) in [("nx", nx), ("ny", ny)] {
            if n < 4 || n % 2 != 0 {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be even and >= 4, got {n}"
                )));
            }
        }
        for (name, l) in [("lx", lx), ("ly", ly)] {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {l}"
                )));
            }
        }
        let kx = wavenumbers(nx, lx);
        let ky = wavenumbers(ny, ly);
        let mut k_sq = Vec::with_capacity(nx * ny);
        for kyv in &ky {
            for kxv in &kx {
                k_sq.push(kxv * kxv + kyv * kyv);
            }
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            fft_x: planner.plan_fft_forward(nx),
            ifft_x: planner.plan_fft_inverse(nx),
            fft_y: planner.plan_fft_forward(ny),
            ifft_y: planner.plan_fft_inverse(ny),
            kx,
            ky,
            k_sq,
        })
    }

    /// The `[0, pi]^2` square used throughout the experiments.
    pub fn square_pi(n: usize) -> Result<Self> {
        Self::new(n, n, PI, PI)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn kx(&self) -> &[f64] {
        &self.kx
    }

    pub fn ky(&self) -> &[f64] {
        &self.ky
    }

    /// `kx^2 + ky^2`, flattened in field order.
    pub fn k_squared(&self) -> &[f64] {
        &self.k_sq
    }

    pub fn cell_area(&self) -> f64 {
        (self.lx / self.nx as f64) * (self.ly / self.ny as f64)
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.lx / self.nx as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.ly / self.ny as f64
    }

    pub fn zeros(&self) -> Field {
        Field::zeros(self.nx, self.ny)
    }

    pub fn constant(&self, value: f64) -> Field {
        Field::constant(self.nx, self.ny, value)
    }

    /// Samples `f(x, y)` at the collocation points.
    pub fn field_from_fn(&self, mut f: impl FnMut(f64, f64) -> f64) -> Field {
        let mut values = Vec::with_capacity(self.len());
        for j in 0..self.ny {
            let y = self.y(j);
            for i in 0..self.nx {
                values.push(f(self.x(i), y));
            }
        }
        Field {
            nx: self.nx,
            ny: self.ny,
            values,
        }
    }

    pub fn check(&self, f: &Field) -> Result<()> {
        if f.nx == self.nx && f.ny == self.ny {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: (self.nx, self.ny),
                found_len: f.len(),
            })
        }
    }

    /// Unnormalized forward transform of real samples.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        assert_eq!(values.len(), self.len());
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.fft_x, &self.fft_y);
        data
    }

    /// Inverse transform (with `1/(nx*ny)`), keeping the real part.
    ///
    /// `reference` is the magnitude the result is compared against when
    /// checking that the discarded imaginary part is round-off only.
    pub fn inverse_real(&self, mut data: Vec<Complex64>, reference: f64, out: &mut [f64]) {
        assert_eq!(data.len(), self.len());
        assert_eq!(out.len(), self.len());
        self.transform(&mut data, &self.ifft_x, &self.ifft_y);
        let norm = 1.0 / self.len() as f64;
        let mut max_re: f64 = 0.0;
        let mut max_im: f64 = 0.0;
        for (o, c) in out.iter_mut().zip(&data) {
            *o = c.re * norm;
            max_re = max_re.max(o.abs());
            max_im = max_im.max((c.im * norm).abs());
        }
        let scale = reference.max(max_re);
        assert!(
            max_im <= IMAG_RESIDUE_TOL * scale || max_im < 1e-300,
            "imaginary residue {max_im:e} exceeds tolerance (scale {scale:e})"
        );
    }

    fn transform(&self, data: &mut [Complex64], along_x: &Arc<dyn Fft<f64>>, along_y: &Arc<dyn Fft<f64>>) {
        let (nx, ny) = (self.nx, self.ny);
        along_x.process(data);
        let mut column = vec![Complex64::new(0.0, 0.0); ny];
        for i in 0..nx {
            for j in 0..ny {
                column[j] = data[j * nx + i];
            }
            along_y.process(&mut column);
            for j in 0..ny {
                data[j * nx + i] = column[j];
            }
        }
    }

    /// Multiplies every Fourier mode by a real symbol and transforms back.
    ///
    /// The symbol is indexed in field order (see [`Grid::k_squared`]).
    pub fn apply_symbol_into(&self, input: &[f64], symbol: &[f64], out: &mut [f64]) {
        assert_eq!(symbol.len(), self.len());
        let mut hat = self.forward(input);
        for (c, s) in hat.iter_mut().zip(symbol) {
            *c *= *s;
        }
        let reference = input.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        self.inverse_real(hat, reference, out);
    }

    fn map_symbol(&self, f: &Field, symbol: impl Fn(usize) -> f64) -> Result<Field> {
        self.check(f)?;
        let sym: Vec<f64> = (0..self.len()).map(symbol).collect();
        let mut out = self.zeros();
        self.apply_symbol_into(&f.values, &sym, &mut out.values);
        Ok(out)
    }

    /// Spectral Laplacian: multiplier `-(kx^2 + ky^2)`.
    pub fn laplacian(&self, f: &Field) -> Result<Field> {
        self.map_symbol(f, |m| -self.k_sq[m])
    }

    /// Slice-level Laplacian used by the matrix-free operators.
    pub fn laplacian_into(&self, input: &[f64], out: &mut [f64]) {
        let mut hat = self.forward(input);
        for (c, k2) in hat.iter_mut().zip(&self.k_sq) {
            *c *= -k2;
        }
        let reference = input.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        self.inverse_real(hat, reference, out);
    }

    /// Mean-free solution `w` of `-lap(w) = f - mean(f)`.
    pub fn inv_neg_laplacian_meanfree(&self, f: &Field) -> Result<Field> {
        self.map_symbol(f, |m| if m == 0 { 0.0 } else { 1.0 / self.k_sq[m] })
    }

    /// Spectral first derivatives `(d/dx f, d/dy f)`. Nyquist modes are
    /// zeroed so the results stay real.
    pub fn gradient(&self, f: &Field) -> Result<(Field, Field)> {
        self.check(f)?;
        let hat = self.forward(&f.values);
        let reference = f.max_abs();
        let (nx, ny) = (self.nx, self.ny);
        let mut gx = hat.clone();
        let mut gy = hat;
        for j in 0..ny {
            for i in 0..nx {
                let m = j * nx + i;
                let kx = if i == nx / 2 { 0.0 } else { self.kx[i] };
                let ky = if j == ny / 2 { 0.0 } else { self.ky[j] };
                gx[m] *= Complex64::new(0.0, kx);
                gy[m] *= Complex64::new(0.0, ky);
            }
        }
        let mut dx = self.zeros();
        let mut dy = self.zeros();
        // first derivatives scale with |k|, so compare against |k|max * |f|
        let kmax = self.kx.iter().chain(&self.ky).fold(0.0_f64, |m, k| m.max(k.abs()));
        self.inverse_real(gx, reference * kmax, &mut dx.values);
        self.inverse_real(gy, reference * kmax, &mut dy.values);
        Ok((dx, dy))
    }

    /// Rectangle-rule integral over the domain.
    pub fn integrate(&self, f: &Field) -> Result<f64> {
        self.check(f)?;
        Ok(f.values.iter().sum::<f64>() * self.cell_area())
    }

    /// Discrete `L^2` inner product `(f, g)`.
    pub fn inner(&self, f: &Field, g: &Field) -> Result<f64> {
        self.check(f)?;
        self.check(g)?;
        Ok(f.values.iter().zip(&g.values).map(|(a, b)| a * b).sum::<f64>() * self.cell_area())
    }

    /// Discrete `L^2` norm.
    pub fn norm_l2(&self, f: &Field) -> Result<f64> {
        Ok(self.inner(f, f)?.sqrt())
    }

    /// `integral |grad f|^2` by Parseval: `sum k^2 |f_hat|^2`, scaled.
    ///
    /// The Nyquist modes keep their `k^2` weight, so this equals
    /// `-(f, lap f)` exactly.
    pub fn grad_sq_integral(&self, f: &Field) -> Result<f64> {
        self.check(f)?;
        let hat = self.forward(&f.values);
        let sum: f64 = hat
            .iter()
            .zip(&self.k_sq)
            .map(|(c, k2)| k2 * c.norm_sqr())
            .sum();
        let n = self.len() as f64;
        Ok(sum * self.area() / (n * n))
    }
}
