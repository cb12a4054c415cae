//! Periodic cubic grids, complex fields on them, spectral calculus and weighted Sobolev norms.
//!
//! The box is `[-l, l)³` sampled at `x_i = -l + i·h`, `h = 2l/n`. Fourier indices follow the
//! usual FFT ordering, so `freq(j) = j·π/l` for `j < n/2` and `(j - n)·π/l` otherwise; the
//! Nyquist index therefore carries `-π/h`. All spectral multipliers act on the unitary
//! transform from [`fft`].

pub mod fft;
pub mod snapshot;

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A wavevector offset applied to every Fourier mode. Fields carrying a fast plane-wave factor
/// `exp(i k·x)` are stored by their envelope and differentiated with `ξ + k`.
pub type Carrier = [f64; 3];

pub const NO_CARRIER: Carrier = [0.0; 3];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    l: f64,
}

/// Builds a grid with `n` points per axis on `[-l, l)³`.
pub fn make_grid(n: usize, l: f64) -> Result<Grid> {
    Grid::new(n, l)
}

impl Grid {
    pub fn new(n: usize, l: f64) -> Result<Self> {
        if n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("n must be even (got {n})")));
        }
        if n < 4 {
            return Err(Error::InvalidGrid(format!(
                "n must be at least 4 (got {n})"
            )));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidGrid(format!("l must be positive (got {l})")));
        }
        Ok(Self { n, l })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn h(&self) -> f64 {
        2.0 * self.l / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(3)
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.l + i as f64 * self.h()
    }

    pub fn freq(&self, j: usize) -> f64 {
        let n = self.n as isize;
        let j = j as isize;
        let m = if j < n / 2 { j } else { j - n };
        m as f64 * PI / self.l
    }

    /// Magnitude of the Nyquist wavenumber, `π/h`.
    pub fn nyquist(&self) -> f64 {
        PI / self.h()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n;
        (idx / (n * n), (idx / n) % n, idx % n)
    }

    pub fn position(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.unravel(idx);
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.unravel(idx);
        [self.freq(i), self.freq(j), self.freq(k)]
    }

    /// Same spacing, `factor` times as many points per axis.
    pub fn enlarged(&self, factor: usize) -> Result<Grid> {
        Grid::new(self.n * factor, self.l * factor as f64)
    }

    /// Same box, `factor` times finer spacing.
    pub fn refined(&self, factor: usize) -> Result<Grid> {
        Grid::new(self.n * factor, self.l)
    }

    pub(crate) fn same_as(&self, other: &Grid) -> bool {
        self.n == other.n && self.l == other.l
    }

    pub(crate) fn check(&self, other: &Grid, what: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: (n={}, l={}) vs (n={}, l={})",
                self.n, self.l, other.n, other.l
            )))
        }
    }
}

/// Complex scalar field sampled on a [`Grid`], row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<C64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![C64::default(); grid.len()],
        }
    }

    pub fn constant(grid: Grid, value: C64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if values
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::NonFinite("field values".into()));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_values_unchecked(grid: Grid, values: Vec<C64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut([f64; 3]) -> C64) -> Self {
        let values = (0..grid.len()).map(|idx| f(grid.position(idx))).collect();
        Self { grid, values }
    }

    pub fn from_real_fn(grid: Grid, mut f: impl FnMut([f64; 3]) -> f64) -> Self {
        Self::from_fn(grid, |x| C64::new(f(x), 0.0))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Grid L² norm with measure `h³`.
    pub fn norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    /// `⟨self, other⟩ = Σ conj(self)·other·h³`.
    pub fn inner(&self, other: &Field) -> C64 {
        let s: C64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        s * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, a: C64) -> Field {
        Field::from_values_unchecked(self.grid, self.values.iter().map(|v| v * a).collect())
    }

    pub fn conj(&self) -> Field {
        Field::from_values_unchecked(self.grid, self.values.iter().map(|v| v.conj()).collect())
    }

    /// `self += a·x`
    pub fn axpy(&mut self, a: C64, x: &Field) {
        for (s, v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
    }

    /// Pointwise product with a real field given by values.
    pub fn mul_real(&self, w: &[f64]) -> Field {
        Field::from_values_unchecked(
            self.grid,
            self.values.iter().zip(w).map(|(v, w)| v * w).collect(),
        )
    }

    pub fn mul_pointwise(&self, other: &Field) -> Field {
        Field::from_values_unchecked(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        )
    }

    /// Largest `|x|` among points where `|ψ| > rel·max|ψ|`; 0 for the zero field.
    pub fn support_radius(&self, rel: f64) -> f64 {
        let m = self.max_abs();
        if m == 0.0 {
            return 0.0;
        }
        let cut = rel * m;
        let mut r: f64 = 0.0;
        for (idx, v) in self.values.iter().enumerate() {
            if v.norm() > cut {
                let x = self.grid.position(idx);
                r = r.max((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt());
            }
        }
        r
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        Field::from_values_unchecked(
            self.grid,
            self.values
                .iter()
                .zip(&rhs.values)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        Field::from_values_unchecked(
            self.grid,
            self.values
                .iter()
                .zip(&rhs.values)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }
}

impl Mul<C64> for &Field {
    type Output = Field;
    fn mul(self, rhs: C64) -> Field {
        self.scaled(rhs)
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, rhs: f64) -> Field {
        self.scaled(C64::new(rhs, 0.0))
    }
}

/// Unitary forward transform; the result holds Fourier coefficients in FFT index order.
pub fn fourier(field: &Field) -> Result<Field> {
    check_len(field)?;
    let mut v = field.values.clone();
    fft::forward(&mut v, field.grid.n);
    Ok(Field::from_values_unchecked(field.grid, v))
}

pub fn inverse_fourier(field: &Field) -> Result<Field> {
    check_len(field)?;
    let mut v = field.values.clone();
    fft::inverse(&mut v, field.grid.n);
    Ok(Field::from_values_unchecked(field.grid, v))
}

fn check_len(field: &Field) -> Result<()> {
    if field.values.len() != field.grid.len() {
        return Err(Error::SizeMismatch {
            expected: field.grid.len(),
            got: field.values.len(),
        });
    }
    Ok(())
}

/// Applies the Fourier multiplier `m(ξ + carrier)`.
pub fn apply_multiplier(
    field: &Field,
    carrier: Carrier,
    mut m: impl FnMut([f64; 3]) -> C64,
) -> Field {
    let grid = field.grid;
    let mut v = field.values.clone();
    fft::forward(&mut v, grid.n);
    for (idx, c) in v.iter_mut().enumerate() {
        let xi = grid.wavevector(idx);
        *c *= m([xi[0] + carrier[0], xi[1] + carrier[1], xi[2] + carrier[2]]);
    }
    fft::inverse(&mut v, grid.n);
    Field::from_values_unchecked(grid, v)
}

/// Spectral gradient `(∂₁, ∂₂, ∂₃)ψ` in the frame with the given carrier.
pub fn gradient(field: &Field, carrier: Carrier) -> [Field; 3] {
    let grid = field.grid;
    let mut hat = field.values.clone();
    fft::forward(&mut hat, grid.n);
    let mut out: Vec<Field> = Vec::with_capacity(3);
    for d in 0..3 {
        let mut v: Vec<C64> = hat
            .iter()
            .enumerate()
            .map(|(idx, c)| c * C64::new(0.0, grid.wavevector(idx)[d] + carrier[d]))
            .collect();
        fft::inverse(&mut v, grid.n);
        out.push(Field::from_values_unchecked(grid, v));
    }
    let mut it = out.into_iter();
    [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()]
}

/// Spectral divergence `Σ_d ∂_d u_d`.
pub fn divergence(components: [&Field; 3], carrier: Carrier) -> Field {
    let grid = components[0].grid;
    let mut acc = vec![C64::default(); grid.len()];
    for d in 0..3 {
        let mut v = components[d].values.clone();
        fft::forward(&mut v, grid.n);
        for (idx, (a, c)) in acc.iter_mut().zip(&v).enumerate() {
            *a += c * C64::new(0.0, grid.wavevector(idx)[d] + carrier[d]);
        }
    }
    fft::inverse(&mut acc, grid.n);
    Field::from_values_unchecked(grid, acc)
}

/// Exponents of the weighted Sobolev norm `‖⟨x⟩^σ ⟨∇⟩^s ψ‖`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedNormSpec {
    pub sigma: f64,
    pub s: f64,
}

impl WeightedNormSpec {
    pub fn new(sigma: f64, s: f64) -> Result<Self> {
        if !sigma.is_finite() || !s.is_finite() {
            return Err(Error::InvalidParameter(
                "weighted norm exponents must be finite".into(),
            ));
        }
        Ok(Self { sigma, s })
    }

    /// `L²_σ`, i.e. `s = 0`.
    pub fn l2(sigma: f64) -> Self {
        Self { sigma, s: 0.0 }
    }
}

/// `(1 + |x|²)^{σ/2}` on the grid points.
pub fn spatial_weight(grid: &Grid, sigma: f64) -> Vec<f64> {
    (0..grid.len())
        .map(|idx| {
            let x = grid.position(idx);
            (1.0 + x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).powf(0.5 * sigma)
        })
        .collect()
}

/// `‖⟨x⟩^σ ⟨∇⟩^s ψ‖` on the grid: Fourier multiplier `(1+|ξ|²)^{s/2}`, then the spatial weight
/// on the fundamental cell, then the grid L² norm.
pub fn weighted_norm(field: &Field, spec: WeightedNormSpec) -> f64 {
    weighted_norm_with_carrier(field, spec, NO_CARRIER)
}

/// Weighted norm of `exp(i k·x)·ψ` where `ψ` is the stored envelope.
pub fn weighted_norm_with_carrier(field: &Field, spec: WeightedNormSpec, carrier: Carrier) -> f64 {
    let smoothed;
    let f = if spec.s != 0.0 {
        smoothed = apply_multiplier(field, carrier, |k| {
            C64::new(
                (1.0 + k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).powf(0.5 * spec.s),
                0.0,
            )
        });
        &smoothed
    } else {
        field
    };
    if spec.sigma == 0.0 {
        return f.norm();
    }
    let grid = f.grid;
    let mut acc = 0.0;
    for (idx, v) in f.values.iter().enumerate() {
        let x = grid.position(idx);
        let w = (1.0 + x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).powf(0.5 * spec.sigma);
        acc += (v * w).norm_sqr();
    }
    (acc * grid.cell_volume()).sqrt()
}
