//! Periodic tensor grid, unitary discrete Fourier transform, spectral
//! differentiation and grid quadrature.
//!
//! The box is `[-L, L)^d` sampled at `x_i = -L + i·dx`, `dx = 2L/N`. Fields are
//! stored row-major with axis 0 slowest. Both transform directions carry a
//! `1/√(N^d)` factor so Parseval holds without scale bookkeeping.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::scalar::Real;

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 2;

/// A point (or vector) in the simulation box. Entries past the grid dimension
/// are zero.
pub type Point<T> = [T; MAX_DIM];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("dimension {0} is not supported (expected 1 or 2)")]
    InvalidDimension(usize),
    #[error("points per axis must be a power of two >= 8, got {0}")]
    InvalidPointCount(usize),
    #[error("half width must be positive and finite, got {0}")]
    InvalidHalfWidth(f64),
    #[error("expected {expected} samples, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("fields live on different grids")]
    GridMismatch,
}

struct GridInner<T: Real> {
    dim: usize,
    n: usize,
    half_width: T,
    dx: T,
    x: Vec<T>,
    k: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

/// Uniform periodic grid. Cloning is cheap (shared storage).
#[derive(Clone)]
pub struct Grid<T: Real> {
    inner: Arc<GridInner<T>>,
}

/// Builds the grid `[-L, L)^d` with `N` points per axis.
pub fn make_grid<T: Real>(d: usize, half_width: T, n: usize) -> Result<Grid<T>, SpectralError> {
    if d == 0 || d > MAX_DIM {
        return Err(SpectralError::InvalidDimension(d));
    }
    if n < 8 || !n.is_power_of_two() {
        return Err(SpectralError::InvalidPointCount(n));
    }
    if !(half_width.is_finite() && half_width > T::zero()) {
        return Err(SpectralError::InvalidHalfWidth(half_width.to_f64().unwrap_or(f64::NAN)));
    }
    let nt = T::from_usize_lossy(n);
    let dx = T::lit(2.0) * half_width / nt;
    let x = (0..n).map(|i| -half_width + T::from_usize_lossy(i) * dx).collect();
    let step = T::PI() / half_width;
    let k = (0..n)
        .map(|i| {
            let j = if i < n / 2 { i as i64 } else { i as i64 - n as i64 };
            T::from_i64(j).expect("wavenumber index") * step
        })
        .collect();
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    Ok(Grid {
        inner: Arc::new(GridInner { dim: d, n, half_width, dx, x, k, forward, inverse }),
    })
}

impl<T: Real> Grid<T> {
    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn half_width(&self) -> T {
        self.inner.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.inner.n
    }

    pub fn spacing(&self) -> T {
        self.inner.dx
    }

    /// Total number of samples, `N^d`.
    pub fn len(&self) -> usize {
        self.inner.n.pow(self.inner.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `dx^d`.
    pub fn cell_volume(&self) -> T {
        self.inner.dx.powi(self.inner.dim as i32)
    }

    /// Sample coordinates along one axis (identical for every axis).
    pub fn axis_points(&self) -> &[T] {
        &self.inner.x
    }

    /// Wavenumbers along one axis in FFT ordering.
    pub fn wavenumbers(&self) -> &[T] {
        &self.inner.k
    }

    /// Largest representable wavenumber magnitude, `πN/(2L)`.
    pub fn nyquist(&self) -> T {
        T::PI() / self.inner.dx
    }

    fn split_index(&self, idx: usize) -> [usize; MAX_DIM] {
        let n = self.inner.n;
        match self.inner.dim {
            1 => [idx, 0],
            _ => [idx / n, idx % n],
        }
    }

    /// Physical coordinates of flat sample `idx`.
    pub fn point(&self, idx: usize) -> Point<T> {
        let [i0, i1] = self.split_index(idx);
        match self.inner.dim {
            1 => [self.inner.x[i0], T::zero()],
            _ => [self.inner.x[i0], self.inner.x[i1]],
        }
    }

    /// Wave vector of flat spectral index `idx`.
    pub fn wavevector(&self, idx: usize) -> Point<T> {
        let [i0, i1] = self.split_index(idx);
        match self.inner.dim {
            1 => [self.inner.k[i0], T::zero()],
            _ => [self.inner.k[i0], self.inner.k[i1]],
        }
    }

    pub fn points(&self) -> impl Iterator<Item = Point<T>> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// `|k|²` for every spectral index.
    pub fn k_squared(&self) -> Vec<T> {
        (0..self.len())
            .map(|i| {
                let k = self.wavevector(i);
                k[0] * k[0] + k[1] * k[1]
            })
            .collect()
    }

    /// Whether flat sample `idx` sits on the first slab of some axis, i.e. at
    /// `x_j = -L`, which is the seam of the periodic box.
    pub fn is_boundary(&self, idx: usize) -> bool {
        let s = self.split_index(idx);
        s[..self.inner.dim].iter().any(|&i| i == 0)
    }

    /// In-place unitary forward transform.
    pub fn forward(&self, data: &mut [Complex<T>]) {
        self.transform(data, &self.inner.forward);
    }

    /// In-place unitary inverse transform.
    pub fn inverse(&self, data: &mut [Complex<T>]) {
        self.transform(data, &self.inner.inverse);
    }

    fn transform(&self, data: &mut [Complex<T>], plan: &Arc<dyn Fft<T>>) {
        assert_eq!(data.len(), self.len(), "transform buffer does not match grid");
        let n = self.inner.n;
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        if self.inner.dim == 2 {
            let mut t = transpose(data, n);
            plan.process_with_scratch(&mut t, &mut scratch);
            let back = transpose(&t, n);
            data.copy_from_slice(&back);
        }
        let scale = T::one() / T::from_usize_lossy(self.len()).sqrt();
        data.iter_mut().for_each(|z| *z = z.scale(scale));
    }
}

fn transpose<T: Copy>(data: &[T], n: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(data.len());
    for c in 0..n {
        for r in 0..n {
            out.push(data[r * n + c]);
        }
    }
    out
}

impl<T: Real> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.dim == other.inner.dim
                && self.inner.n == other.inner.n
                && self.inner.half_width == other.inner.half_width)
    }
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.inner.dim)
            .field("half_width", &self.inner.half_width)
            .field("points_per_axis", &self.inner.n)
            .field("spacing", &self.inner.dx)
            .finish()
    }
}

/// Complex samples of a field on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct WaveField<T: Real> {
    grid: Grid<T>,
    values: Vec<Complex<T>>,
}

impl<T: Real> WaveField<T> {
    pub fn new(grid: Grid<T>, values: Vec<Complex<T>>) -> Result<Self, SpectralError> {
        if values.len() != grid.len() {
            return Err(SpectralError::SizeMismatch { expected: grid.len(), actual: values.len() });
        }
        if let Some(i) = values.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(SpectralError::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every grid point. `f` receives the first `d` coordinates.
    pub fn from_fn(grid: &Grid<T>, f: impl Fn(&[T]) -> Complex<T>) -> Self {
        let d = grid.dim();
        let values = grid.points().map(|p| f(&p[..d])).collect();
        Self { grid: grid.clone(), values }
    }

    pub fn from_real_fn(grid: &Grid<T>, f: impl Fn(&[T]) -> T) -> Self {
        Self::from_fn(grid, |x| Complex::new(f(x), T::zero()))
    }

    pub fn zeros(grid: &Grid<T>) -> Self {
        Self { grid: grid.clone(), values: vec![Complex::new(T::zero(), T::zero()); grid.len()] }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex<T>> {
        self.values
    }

    fn check_grid(&self, other: &Self) -> Result<(), SpectralError> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(SpectralError::GridMismatch)
        }
    }

    /// `‖f‖_{L²}` by the rectangle rule, which is spectrally accurate on a
    /// periodic grid.
    pub fn l2_norm(&self) -> T {
        self.l2_norm_sq().sqrt()
    }

    pub fn l2_norm_sq(&self) -> T {
        self.values.iter().map(|z| z.norm_sqr()).sum::<T>() * self.grid.cell_volume()
    }

    /// `∫ conj(f)·g`.
    pub fn inner_product(&self, other: &Self) -> Result<Complex<T>, SpectralError> {
        self.check_grid(other)?;
        let s: Complex<T> = self
            .values
            .iter()
            .zip(&other.values)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b);
        Ok(s.scale(self.grid.cell_volume()))
    }

    /// `‖f‖_{L^p}` for finite `p ≥ 1`.
    pub fn lp_norm(&self, p: T) -> T {
        let s: T = self.values.iter().map(|z| z.norm().powf(p)).sum();
        (s * self.grid.cell_volume()).powf(T::one() / p)
    }

    pub fn l1_norm(&self) -> T {
        self.values.iter().map(|z| z.norm()).sum::<T>() * self.grid.cell_volume()
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    /// `‖f - g‖_{L²}`.
    pub fn l2_distance(&self, other: &Self) -> Result<T, SpectralError> {
        self.check_grid(other)?;
        let s: T = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        Ok((s * self.grid.cell_volume()).sqrt())
    }

    /// Unitary spectrum of the field.
    pub fn transform(&self) -> Vec<Complex<T>> {
        let mut buf = self.values.clone();
        self.grid.forward(&mut buf);
        buf
    }

    /// `‖f̂‖` with the same quadrature weight as [`Self::l2_norm`]; equal to
    /// it by Parseval.
    pub fn spectral_l2_norm(&self) -> T {
        let s: T = self.transform().iter().map(|z| z.norm_sqr()).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    /// `(∑ |k|^{2}|f̂_k|²)·dx^d = ‖∇f‖²`.
    pub fn gradient_norm_sq(&self) -> T {
        let spec = self.transform();
        let s: T = spec
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let k = self.grid.wavevector(i);
                (k[0] * k[0] + k[1] * k[1]) * z.norm_sqr()
            })
            .sum();
        s * self.grid.cell_volume()
    }

    /// `‖f‖_{H^s}` through the multiplier `(1 + |k|²)^{s/2}`.
    pub fn hs_norm(&self, s: T) -> T {
        let spec = self.transform();
        let sum: T = spec
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let k = self.grid.wavevector(i);
                (T::one() + k[0] * k[0] + k[1] * k[1]).powf(s) * z.norm_sqr()
            })
            .sum();
        (sum * self.grid.cell_volume()).sqrt()
    }

    /// Components `∂_j f`, `j < d`, computed as `F⁻¹[(i k_j) F f]`.
    pub fn spectral_gradient(&self) -> Vec<WaveField<T>> {
        let spec = self.transform();
        (0..self.grid.dim())
            .map(|axis| {
                let mut buf: Vec<Complex<T>> = spec
                    .iter()
                    .enumerate()
                    .map(|(i, z)| {
                        let k = self.grid.wavevector(i)[axis];
                        Complex::new(-k * z.im, k * z.re)
                    })
                    .collect();
                self.grid.inverse(&mut buf);
                WaveField { grid: self.grid.clone(), values: buf }
            })
            .collect()
    }

    /// Largest modulus over the seam slabs of the box.
    pub fn boundary_amplitude(&self) -> T {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.is_boundary(*i))
            .map(|(_, z)| z.norm())
            .fold(T::zero(), T::max)
    }

    /// Pointwise product with a real weight evaluated at grid points.
    pub fn weighted(&self, w: impl Fn(&[T]) -> T) -> WaveField<T> {
        let d = self.grid.dim();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, z)| z.scale(w(&self.grid.point(i)[..d])))
            .collect();
        WaveField { grid: self.grid.clone(), values }
    }
}
