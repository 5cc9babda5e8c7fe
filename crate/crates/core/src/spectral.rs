//! Periodic channel discretization: Fourier differentiation, weights,
//! quadrature and dealiased products.
//!
//! The channel is `x ∈ [-M, M)` (periodic truncation of the real line) times
//! `y ∈ [0, 2π)`, where `y` has already been rescaled by the transverse
//! wavenumber `k`, so that on transverse mode `ℓ` the anisotropic Laplacian
//! acts as `∂x² − k²ℓ²`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::error::{QuenchError, Result};

/// Padding factor used by dealiased products (enough for quintic terms).
pub const PAD_FACTOR: usize = 3;

/// Largest number of factors `dealias_product` accepts.
pub const MAX_FACTORS: usize = 5;

#[derive(Clone)]
pub struct ChannelGrid {
    half_width: f64,
    nx: usize,
    ny: usize,
    k: f64,
    x: Vec<f64>,
    xi: Vec<f64>,
    ell: Vec<i64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for ChannelGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChannelGrid")
            .field("half_width", &self.half_width)
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("k", &self.k)
            .finish()
    }
}

impl PartialEq for ChannelGrid {
    fn eq(&self, other: &Self) -> bool {
        self.half_width == other.half_width && self.nx == other.nx && self.ny == other.ny && self.k == other.k
    }
}

fn fft_indices(n: usize) -> impl Iterator<Item = i64> {
    let half = (n / 2) as i64;
    (0..n as i64).map(move |j| if j < half { j } else { j - n as i64 })
}

/// Builds the channel grid. `nx` and `ny` must be powers of two, at least 8.
pub fn make_grid(half_width: f64, nx: usize, ny: usize, k: f64) -> Result<Arc<ChannelGrid>> {
    ChannelGrid::new(half_width, nx, ny, k).map(Arc::new)
}

impl ChannelGrid {
    pub fn new(half_width: f64, nx: usize, ny: usize, k: f64) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(QuenchError::InvalidGrid(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        if !(k.is_finite() && k > 0.0) {
            return Err(QuenchError::InvalidGrid(format!(
                "transverse wavenumber must be positive, got {k}"
            )));
        }
        for (name, n) in [("n_x", nx), ("n_y", ny)] {
            if n < 8 || !n.is_power_of_two() {
                return Err(QuenchError::InvalidGrid(format!(
                    "{name} must be a power of two >= 8, got {n}"
                )));
            }
        }
        let dx = 2.0 * half_width / nx as f64;
        let x = (0..nx).map(|j| -half_width + j as f64 * dx).collect();
        let xi = fft_indices(nx)
            .map(|j| std::f64::consts::PI * j as f64 / half_width)
            .collect();
        let ell = fft_indices(ny).collect();
        let mut planner = FftPlanner::new();
        Ok(ChannelGrid {
            half_width,
            nx,
            ny,
            k,
            x,
            xi,
            ell,
            fwd: planner.plan_fft_forward(nx),
            inv: planner.plan_fft_inverse(nx),
        })
    }

    /// Same box and resolution with a different transverse wavenumber.
    pub fn with_k(&self, k: f64) -> Result<Arc<ChannelGrid>> {
        make_grid(self.half_width, self.nx, self.ny, k)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.nx as f64
    }
    pub fn x(&self) -> &[f64] {
        &self.x
    }
    /// Nodes in y, `2πj/n_y`.
    pub fn y(&self) -> Vec<f64> {
        (0..self.ny)
            .map(|j| 2.0 * std::f64::consts::PI * j as f64 / self.ny as f64)
            .collect()
    }
    /// Wavenumbers `πj/M` in FFT order (`0, 1, …, n/2−1, −n/2, …, −1`).
    pub fn xi(&self) -> &[f64] {
        &self.xi
    }
    /// Wavenumbers with the Nyquist entry zeroed, used for odd derivatives.
    pub fn xi_odd(&self) -> Vec<f64> {
        let mut xi = self.xi.clone();
        xi[self.nx / 2] = 0.0;
        xi
    }
    /// Transverse Fourier indices in FFT order.
    pub fn ell(&self) -> &[i64] {
        &self.ell
    }
    /// Largest transverse index that is resolved symmetrically.
    pub fn max_ell(&self) -> i64 {
        self.ny as i64 / 2 - 1
    }

    pub(crate) fn fft_x(&self, data: &mut [C64]) {
        self.fwd.process(data);
    }

    pub(crate) fn ifft_x(&self, data: &mut [C64]) {
        self.inv.process(data);
        let s = 1.0 / self.nx as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }

    /// Applies a Fourier multiplier given by its value on each FFT index.
    pub fn apply_symbol(&self, v: &[C64], symbol: impl Fn(usize) -> C64) -> Vec<C64> {
        let mut buf = v.to_vec();
        self.fft_x(&mut buf);
        buf.iter_mut().enumerate().for_each(|(j, b)| *b *= symbol(j));
        self.ifft_x(&mut buf);
        buf
    }

    /// Symbol of `∂x^order`, Nyquist removed for odd orders.
    pub fn deriv_symbol(&self, order: u32) -> Vec<C64> {
        let xi = if order % 2 == 1 { self.xi_odd() } else { self.xi.clone() };
        xi.iter().map(|&q| C64::new(0.0, q).powu(order)).collect()
    }

    pub(crate) fn check_same(&self, other: &ChannelGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(QuenchError::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Real field on the channel, row-major with y fastest.
#[derive(Debug, Clone)]
pub struct Field {
    pub grid: Arc<ChannelGrid>,
    pub values: Vec<f64>,
    pub time: f64,
}

impl Field {
    pub fn new(grid: Arc<ChannelGrid>, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.nx() * grid.ny() {
            return Err(QuenchError::GridMismatch(format!(
                "field has {} values, grid needs {}",
                values.len(),
                grid.nx() * grid.ny()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(QuenchError::NonFinite("field"));
        }
        Ok(Field { grid, values, time })
    }

    pub fn zeros(grid: Arc<ChannelGrid>) -> Self {
        let n = grid.nx() * grid.ny();
        Field {
            grid,
            values: vec![0.0; n],
            time: 0.0,
        }
    }

    pub fn from_fn(grid: Arc<ChannelGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let ys = grid.y();
        let values = grid
            .x()
            .iter()
            .flat_map(|&x| ys.iter().map(move |&y| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Field {
            grid,
            values,
            time: 0.0,
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.ny() + j]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Channel L² norm with the normalized measure `(1/2M)(1/2π)∫∫`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    /// Normalized 2D Fourier coefficients, layout `[ix * ny + iy]`, FFT order.
    pub fn coefficients(&self) -> Vec<C64> {
        let mut t = PlaneTransform::new(self.grid.nx(), self.grid.ny());
        let mut buf: Vec<C64> = self.values.iter().map(|&v| C64::new(v, 0.0)).collect();
        t.forward(&mut buf);
        let s = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|v| *v *= s);
        buf
    }

    /// Profile of transverse mode `ell`: `(1/n_y) Σ_y u(x,y) e^{-iℓy}`.
    pub fn transverse_mode(&self, ell: i64) -> ModalProfile {
        let ny = self.grid.ny();
        let ys = self.grid.y();
        let phase: Vec<C64> = ys
            .iter()
            .map(|&y| C64::from_polar(1.0 / ny as f64, -(ell as f64) * y))
            .collect();
        let values = (0..self.grid.nx())
            .map(|i| {
                let row = &self.values[i * ny..(i + 1) * ny];
                row.iter().zip(&phase).map(|(&u, &e)| e * u).sum()
            })
            .collect();
        ModalProfile {
            grid: self.grid.clone(),
            ell,
            values,
        }
    }
}

/// Complex x-profile attached to a transverse index.
#[derive(Debug, Clone)]
pub struct ModalProfile {
    pub grid: Arc<ChannelGrid>,
    pub ell: i64,
    pub values: Vec<C64>,
}

impl ModalProfile {
    pub fn new(grid: Arc<ChannelGrid>, ell: i64, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.nx() {
            return Err(QuenchError::GridMismatch(format!(
                "profile has {} values, grid needs {}",
                values.len(),
                grid.nx()
            )));
        }
        if ell.abs() > grid.ny() as i64 / 2 {
            return Err(QuenchError::param(
                "ell",
                format!("|{ell}| exceeds the resolved range of n_y = {}", grid.ny()),
            ));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(QuenchError::NonFinite("profile"));
        }
        Ok(ModalProfile { grid, ell, values })
    }

    pub fn from_fn(grid: Arc<ChannelGrid>, ell: i64, f: impl Fn(f64) -> C64) -> Self {
        let values = grid.x().iter().map(|&x| f(x)).collect();
        ModalProfile { grid, ell, values }
    }

    pub fn zeros(grid: Arc<ChannelGrid>, ell: i64) -> Self {
        let n = grid.nx();
        ModalProfile {
            grid,
            ell,
            values: vec![C64::new(0.0, 0.0); n],
        }
    }

    /// Unweighted L² norm with the normalized measure.
    pub fn norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: C64) -> Self {
        self.map(|v| v * s)
    }

    pub fn conj(&self) -> Self {
        ModalProfile {
            grid: self.grid.clone(),
            ell: -self.ell,
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        ModalProfile {
            grid: self.grid.clone(),
            ell: self.ell,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise product with a real sampled function.
    pub fn times_real(&self, w: &[f64]) -> Self {
        ModalProfile {
            grid: self.grid.clone(),
            ell: self.ell,
            values: self.values.iter().zip(w).map(|(&v, &w)| v * w).collect(),
        }
    }

    /// Max-norm distance to another profile.
    pub fn distance(&self, other: &ModalProfile) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Spectral interpolation onto a grid with the same box and another `n_x`.
    pub fn resample(&self, grid: Arc<ChannelGrid>) -> Result<Self> {
        if (grid.half_width() - self.grid.half_width()).abs() > 1e-12 * grid.half_width() {
            return Err(QuenchError::GridMismatch("resampling needs the same box".into()));
        }
        let (n, m) = (self.grid.nx(), grid.nx());
        if n == m {
            return Ok(ModalProfile {
                grid,
                ell: self.ell,
                values: self.values.clone(),
            });
        }
        let mut spec = self.values.clone();
        self.grid.fft_x(&mut spec);
        let keep = n.min(m) / 2;
        let mut out = vec![C64::new(0.0, 0.0); m];
        let s = m as f64 / n as f64;
        for j in 0..keep {
            out[j] = spec[j] * s;
            if j > 0 {
                out[m - j] = spec[n - j] * s;
            }
        }
        grid.ifft_x(&mut out);
        Ok(ModalProfile {
            grid,
            ell: self.ell,
            values: out,
        })
    }
}

/// Spectral x-derivative of profiles and fields.
pub trait XDerivative: Sized {
    fn deriv_x(&self, order: u32) -> Result<Self>;
}

impl XDerivative for ModalProfile {
    fn deriv_x(&self, order: u32) -> Result<Self> {
        if order == 0 {
            return Err(QuenchError::param("order", "derivative order must be positive"));
        }
        if self.values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(QuenchError::NonFinite("deriv_x input"));
        }
        let sym = self.grid.deriv_symbol(order);
        Ok(ModalProfile {
            grid: self.grid.clone(),
            ell: self.ell,
            values: self.grid.apply_symbol(&self.values, |j| sym[j]),
        })
    }
}

impl XDerivative for Field {
    fn deriv_x(&self, order: u32) -> Result<Self> {
        if order == 0 {
            return Err(QuenchError::param("order", "derivative order must be positive"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(QuenchError::NonFinite("deriv_x input"));
        }
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let sym = self.grid.deriv_symbol(order);
        let mut out = vec![0.0; nx * ny];
        let mut col = vec![C64::new(0.0, 0.0); nx];
        for j in 0..ny {
            for (i, v) in col.iter_mut().enumerate() {
                *v = C64::new(self.values[i * ny + j], 0.0);
            }
            let d = self.grid.apply_symbol(&col, |m| sym[m]);
            for i in 0..nx {
                out[i * ny + j] = d[i].re;
            }
        }
        Ok(Field {
            grid: self.grid.clone(),
            values: out,
            time: self.time,
        })
    }
}

/// `(∂x² − k²ℓ²)` applied to a profile.
pub fn apply_dell(profile: &ModalProfile) -> ModalProfile {
    let grid = &profile.grid;
    let q = (grid.k() * profile.ell as f64).powi(2);
    let xi = grid.xi();
    ModalProfile {
        grid: grid.clone(),
        ell: profile.ell,
        values: grid.apply_symbol(&profile.values, |j| C64::new(-xi[j] * xi[j] - q, 0.0)),
    }
}

/// Pointwise `exp(η⟨x⟩)` with `⟨x⟩ = √(1+x²)`.
#[derive(Debug, Clone)]
pub struct WeightProfile {
    pub eta: f64,
    pub values: Vec<f64>,
}

pub fn weight_profile(grid: &ChannelGrid, eta: f64) -> Result<WeightProfile> {
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(QuenchError::param("eta", format!("must be >= 0, got {eta}")));
    }
    let values = grid.x().iter().map(|&x| (eta * (1.0 + x * x).sqrt()).exp()).collect();
    Ok(WeightProfile { eta, values })
}

/// `(1/2M) ∫ u v̄ w² dx` by the uniform Riemann sum.
pub fn inner_product(u: &ModalProfile, v: &ModalProfile, weight: Option<&WeightProfile>) -> Result<C64> {
    u.grid.check_same(&v.grid)?;
    let n = u.values.len() as f64;
    let s: C64 = match weight {
        None => u.values.iter().zip(&v.values).map(|(a, b)| a * b.conj()).sum(),
        Some(w) => {
            if w.values.len() != u.values.len() {
                return Err(QuenchError::GridMismatch("weight length".into()));
            }
            u.values
                .iter()
                .zip(&v.values)
                .zip(&w.values)
                .map(|((a, b), w)| a * b.conj() * (w * w))
                .sum()
        }
    };
    Ok(s / n)
}

/// Same as [`inner_product`] without weights, on raw slices.
pub(crate) fn dot(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a * b.conj()).sum::<C64>() / u.len() as f64
}

fn check_factor_count(n: usize) -> Result<()> {
    if n == 0 || n > MAX_FACTORS {
        return Err(QuenchError::param(
            "factors",
            format!("dealiased products take 1 to {MAX_FACTORS} factors, got {n}"),
        ));
    }
    Ok(())
}

/// Copies a spectrum of length `n` into a zero-padded one of length `big`,
/// rescaled so that the inverse transform interpolates the same function.
/// The Nyquist entry is dropped.
pub(crate) fn pad_1d(src: &[C64], big: usize) -> Vec<C64> {
    let n = src.len();
    let s = big as f64 / n as f64;
    let mut out = vec![C64::new(0.0, 0.0); big];
    for j in 0..n / 2 {
        out[j] = src[j] * s;
        if j > 0 {
            out[big - j] = src[n - j] * s;
        }
    }
    out
}

pub(crate) fn truncate_1d(src: &[C64], n: usize) -> Vec<C64> {
    let big = src.len();
    let s = n as f64 / big as f64;
    let mut out = vec![C64::new(0.0, 0.0); n];
    for j in 0..n / 2 {
        out[j] = src[j] * s;
        if j > 0 {
            out[n - j] = src[big - j] * s;
        }
    }
    out
}

/// Pointwise product of profiles on a grid padded by [`PAD_FACTOR`],
/// truncated back. The transverse index of the result is the sum.
pub fn dealias_product_profiles(factors: &[&ModalProfile]) -> Result<ModalProfile> {
    check_factor_count(factors.len())?;
    let grid = factors[0].grid.clone();
    for f in &factors[1..] {
        grid.check_same(&f.grid)?;
    }
    let ell: i64 = factors.iter().map(|f| f.ell).sum();
    let n = grid.nx();
    let big = PAD_FACTOR * n;
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(big);
    let inv = planner.plan_fft_inverse(big);
    let mut acc = vec![C64::new(1.0, 0.0); big];
    for f in factors {
        let mut spec = f.values.clone();
        grid.fft_x(&mut spec);
        let mut fine = pad_1d(&spec, big);
        inv.process(&mut fine);
        let s = 1.0 / big as f64;
        acc.iter_mut().zip(&fine).for_each(|(a, b)| *a *= b * s);
    }
    fwd.process(&mut acc);
    let mut out = truncate_1d(&acc, n);
    grid.ifft_x(&mut out);
    ModalProfile::new(grid, ell, out)
}

/// Pointwise product of fields on a grid padded by [`PAD_FACTOR`] in both
/// directions, truncated back.
pub fn dealias_product(factors: &[&Field]) -> Result<Field> {
    check_factor_count(factors.len())?;
    let grid = factors[0].grid.clone();
    for f in &factors[1..] {
        grid.check_same(&f.grid)?;
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    let (bx, by) = (PAD_FACTOR * nx, PAD_FACTOR * ny);
    let mut coarse = PlaneTransform::new(nx, ny);
    let mut fine_t = PlaneTransform::new(bx, by);
    let mut acc = vec![C64::new(1.0, 0.0); bx * by];
    for f in factors {
        let mut spec: Vec<C64> = f.values.iter().map(|&v| C64::new(v, 0.0)).collect();
        coarse.forward(&mut spec);
        let mut fine = pad_2d(&spec, nx, ny, bx, by);
        fine_t.inverse(&mut fine);
        acc.iter_mut().zip(&fine).for_each(|(a, b)| *a *= b);
    }
    fine_t.forward(&mut acc);
    let mut out = truncate_2d(&acc, bx, by, nx, ny);
    coarse.inverse(&mut out);
    Field::new(grid, out.iter().map(|v| v.re).collect(), factors[0].time)
}

/// Padding of a 2D spectrum (unnormalized forward transform convention).
/// Nyquist rows and columns are dropped.
pub(crate) fn pad_2d(src: &[C64], nx: usize, ny: usize, bx: usize, by: usize) -> Vec<C64> {
    let s = (bx * by) as f64 / (nx * ny) as f64;
    let mut out = vec![C64::new(0.0, 0.0); bx * by];
    for (i, ii) in mode_pairs(nx, bx) {
        for (j, jj) in mode_pairs(ny, by) {
            out[ii * by + jj] = src[i * ny + j] * s;
        }
    }
    out
}

pub(crate) fn truncate_2d(src: &[C64], bx: usize, by: usize, nx: usize, ny: usize) -> Vec<C64> {
    let s = (nx * ny) as f64 / (bx * by) as f64;
    let mut out = vec![C64::new(0.0, 0.0); nx * ny];
    for (i, ii) in mode_pairs(nx, bx) {
        for (j, jj) in mode_pairs(ny, by) {
            out[i * ny + j] = src[ii * by + jj] * s;
        }
    }
    out
}

/// Index pairs (coarse, fine) of the modes kept by padding/truncation.
pub(crate) fn mode_pairs(n: usize, big: usize) -> Vec<(usize, usize)> {
    let mut v: Vec<(usize, usize)> = (0..n / 2).map(|j| (j, j)).collect();
    v.extend((1..n / 2).map(|j| (n - j, big - j)));
    v
}

/// 2D FFT on a row-major `nx × ny` array (y fastest). Unnormalized forward,
/// inverse scaled by `1/(nx·ny)`. Holds its own scratch, so one per worker.
pub struct PlaneTransform {
    nx: usize,
    ny: usize,
    fx: Arc<dyn Fft<f64>>,
    ix: Arc<dyn Fft<f64>>,
    fy: Arc<dyn Fft<f64>>,
    iy: Arc<dyn Fft<f64>>,
    scratch: Vec<C64>,
}

impl PlaneTransform {
    pub fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        PlaneTransform {
            nx,
            ny,
            fx: planner.plan_fft_forward(nx),
            ix: planner.plan_fft_inverse(nx),
            fy: planner.plan_fft_forward(ny),
            iy: planner.plan_fft_inverse(ny),
            scratch: vec![C64::new(0.0, 0.0); nx * ny],
        }
    }

    pub fn forward(&mut self, data: &mut [C64]) {
        let (fx, fy) = (self.fx.clone(), self.fy.clone());
        self.run(data, &*fx, &*fy);
    }

    pub fn inverse(&mut self, data: &mut [C64]) {
        let (ix, iy) = (self.ix.clone(), self.iy.clone());
        self.run(data, &*ix, &*iy);
        let s = 1.0 / (self.nx * self.ny) as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }

    fn run(&mut self, data: &mut [C64], along_x: &dyn Fft<f64>, along_y: &dyn Fft<f64>) {
        let (nx, ny) = (self.nx, self.ny);
        along_y.process(data);
        transpose(data, &mut self.scratch, nx, ny);
        along_x.process(&mut self.scratch);
        transpose(&self.scratch, data, ny, nx);
    }
}

fn transpose(src: &[C64], dst: &mut [C64], rows: usize, cols: usize) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn grid_nodes_and_wavenumbers() {
        let g = make_grid(PI, 8, 8, 1.0).unwrap();
        let expect: Vec<f64> = (0..8).map(|j| -PI + j as f64 * PI / 4.0).collect();
        for (a, b) in g.x().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let mut xi: Vec<i64> = g.xi().iter().map(|v| v.round() as i64).collect();
        xi.sort();
        assert_eq!(xi, (-4..4).collect::<Vec<_>>());

        let g = make_grid(10.0, 8, 8, 1.0).unwrap();
        assert!((g.xi()[1] - PI / 10.0).abs() < 1e-15);

        let g = make_grid(30.0 * PI, 1024, 64, 0.5).unwrap();
        assert!((g.dx() - 60.0 * PI / 1024.0).abs() < 1e-14);
        assert!((g.dx() * 1024.0 - 60.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(make_grid(PI, 12, 8, 1.0).is_err());
        assert!(make_grid(PI, 8, 4, 1.0).is_err());
        assert!(make_grid(-1.0, 8, 8, 1.0).is_err());
        assert!(make_grid(PI, 8, 8, 0.0).is_err());
    }

    #[test]
    fn derivatives_of_resolved_modes() {
        let m = 7.0;
        let g = make_grid(m, 64, 8, 0.5).unwrap();
        let s = ModalProfile::from_fn(g.clone(), 0, |x| C64::new((PI * x / m).sin(), 0.0));
        let ds = s.deriv_x(1).unwrap();
        for (x, v) in g.x().iter().zip(&ds.values) {
            assert!((v.re - PI / m * (PI * x / m).cos()).abs() < 1e-13);
        }
        let c = ModalProfile::from_fn(g.clone(), 0, |_| C64::new(3.0, 0.0));
        assert!(c.deriv_x(2).unwrap().max_abs() < 1e-13);

        let xi5 = g.xi()[5];
        let e = ModalProfile::from_fn(g.clone(), 0, |x| C64::from_polar(1.0, xi5 * x));
        let de = e.deriv_x(1).unwrap();
        for (a, b) in de.values.iter().zip(&e.values) {
            assert!((a - C64::new(0.0, xi5) * b).norm() < 1e-12);
        }
    }

    #[test]
    fn field_derivative_matches_profile_derivative() {
        let g = make_grid(5.0, 32, 8, 1.0).unwrap();
        let f = Field::from_fn(g.clone(), |x, y| (0.4 * x).sin().powi(2) * y.cos() + (-x * x).exp());
        let df = f.deriv_x(3).unwrap();
        for j in 0..8 {
            let col = ModalProfile::from_fn(g.clone(), 0, |_| C64::new(0.0, 0.0));
            let vals: Vec<C64> = (0..32).map(|i| C64::new(f.at(i, j), 0.0)).collect();
            let col = ModalProfile { values: vals, ..col };
            let d = col.deriv_x(3).unwrap();
            for i in 0..32 {
                assert!((d.values[i].re - df.at(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dell_examples() {
        let g = make_grid(4.0, 32, 8, 0.5).unwrap();
        let one = ModalProfile::from_fn(g.clone(), 0, |_| C64::new(1.0, 0.0));
        assert!(apply_dell(&one).max_abs() < 1e-14);
        let one1 = ModalProfile { ell: 1, ..one.clone() };
        for v in apply_dell(&one1).values {
            assert!((v - C64::new(-0.25, 0.0)).norm() < 1e-14);
        }
        let xi = g.xi()[3];
        let e = ModalProfile::from_fn(g.clone(), 2, |x| C64::from_polar(1.0, xi * x));
        let d = apply_dell(&e);
        for (a, b) in d.values.iter().zip(&e.values) {
            assert!((a - b * (-xi * xi - 1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn weights() {
        let g = make_grid(10.0, 64, 8, 0.5).unwrap();
        let w0 = weight_profile(&g, 0.0).unwrap();
        assert!(w0.values.iter().all(|&v| v == 1.0));
        let w = weight_profile(&g, 0.2).unwrap();
        assert!((w.values[32] - 0.2f64.exp()).abs() < 1e-15);
        assert!((0.2f64.exp() - 1.2214).abs() < 1e-4);
        for j in 1..64 {
            assert!((w.values[j] - w.values[64 - j]).abs() < 1e-12 * w.values[j]);
            assert!(w.values[j] >= 1.0);
        }
        assert!(weight_profile(&g, -0.1).is_err());
    }

    /// Adaptive Simpson quadrature, used as an independent oracle.
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn rec(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                    + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 40)
    }

    #[test]
    fn inner_products() {
        let g = make_grid(10.0, 256, 8, 0.5).unwrap();
        let one = ModalProfile::from_fn(g.clone(), 0, |_| C64::new(1.0, 0.0));
        assert!((inner_product(&one, &one, None).unwrap() - 1.0).norm() < 1e-14);
        let (x1, x2) = (g.xi()[3], g.xi()[7]);
        let e1 = ModalProfile::from_fn(g.clone(), 0, |x| C64::from_polar(1.0, x1 * x));
        let e2 = ModalProfile::from_fn(g.clone(), 0, |x| C64::from_polar(1.0, x2 * x));
        assert!(inner_product(&e1, &e2, None).unwrap().norm() < 1e-14);

        // integrand is even, so the one-sided Riemann sum is the trapezoid rule
        let g = make_grid(10.0, 1 << 14, 8, 0.5).unwrap();
        let one = ModalProfile::from_fn(g.clone(), 0, |_| C64::new(1.0, 0.0));
        let w = weight_profile(&g, 0.2).unwrap();
        let num = inner_product(&one, &one, Some(&w)).unwrap();
        let oracle = simpson(&|x| (0.4 * (1.0 + x * x).sqrt()).exp(), -10.0, 10.0, 1e-12) / 20.0;
        assert!((num.re - oracle).abs() < 1e-7 * oracle, "{} vs {oracle}", num.re);
    }

    #[test]
    fn dealiased_products() {
        let g = make_grid(PI, 32, 8, 1.0).unwrap();
        let (a, b) = (g.xi()[3], g.xi()[5]);
        let ea = ModalProfile::from_fn(g.clone(), 0, |x| C64::from_polar(1.0, a * x));
        let eb = ModalProfile::from_fn(g.clone(), 0, |x| C64::from_polar(1.0, b * x));
        let p = dealias_product_profiles(&[&ea, &eb]).unwrap();
        for (x, v) in g.x().iter().zip(&p.values) {
            assert!((v - C64::from_polar(1.0, (a + b) * x)).norm() < 1e-13);
        }
        let one = Field::from_fn(g.clone(), |_, _| 1.0);
        let p = dealias_product(&[&one, &one, &one]).unwrap();
        assert!(p.values.iter().all(|v| (v - 1.0).abs() < 1e-14));

        // cos^5 = (10 cos x + 5 cos 3x + cos 5x)/16; with 5ξ₁ beyond the
        // grid only the first two survive, without aliasing
        let xi1 = g.xi()[4];
        let c = ModalProfile::from_fn(g.clone(), 0, |x| C64::new((xi1 * x).cos(), 0.0));
        let p = dealias_product_profiles(&[&c, &c, &c, &c, &c]).unwrap();
        for (x, v) in g.x().iter().zip(&p.values) {
            let exact = (10.0 * (xi1 * x).cos() + 5.0 * (3.0 * xi1 * x).cos()) / 16.0;
            assert!((v.re - exact).abs() < 1e-13 && v.im.abs() < 1e-13);
        }
        let many: Vec<&ModalProfile> = std::iter::repeat_n(&c, 6).collect();
        assert!(dealias_product_profiles(&many).is_err());
    }

    #[test]
    fn resample_roundtrip() {
        let g = make_grid(8.0, 64, 8, 1.0).unwrap();
        let h = make_grid(8.0, 256, 8, 1.0).unwrap();
        let p = ModalProfile::from_fn(g.clone(), 1, |x| {
            C64::new((-x * x / 2.0).exp(), x.sin() * (-x * x / 2.0).exp())
        });
        let q = p.resample(h.clone()).unwrap();
        for (x, v) in h.x().iter().zip(&q.values) {
            let exact = C64::new((-x * x / 2.0).exp(), x.sin() * (-x * x / 2.0).exp());
            assert!((v - exact).norm() < 1e-10);
        }
        let back = q.resample(g).unwrap();
        assert!(back.distance(&p) < 1e-12);
    }

    #[test]
    fn plane_transform_roundtrip_and_transverse_mode() {
        let g = make_grid(6.0, 32, 16, 0.5).unwrap();
        let f = Field::from_fn(g.clone(), |x, y| {
            (-x * x).exp() * (2.0 * y).cos() + 0.3 * (0.5 * x).sin()
        });
        let mut t = PlaneTransform::new(32, 16);
        let mut buf: Vec<C64> = f.values.iter().map(|&v| C64::new(v, 0.0)).collect();
        t.forward(&mut buf);
        t.inverse(&mut buf);
        for (a, b) in buf.iter().zip(&f.values) {
            assert!((a.re - b).abs() < 1e-14 && a.im.abs() < 1e-14);
        }
        let m2 = f.transverse_mode(2);
        for (x, v) in g.x().iter().zip(&m2.values) {
            assert!((v.re - 0.5 * (-x * x).exp()).abs() < 1e-14 && v.im.abs() < 1e-14);
        }
    }

    fn arb_field() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-1.0f64..1.0, 16 * 8)
    }

    proptest! {
        #[test]
        fn parseval(vals in arb_field()) {
            let g = make_grid(3.0, 16, 8, 0.7).unwrap();
            let f = Field::new(g, vals, 0.0).unwrap();
            let c = f.coefficients();
            let spec: f64 = c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            prop_assert!(close(f.l2_norm(), spec, 1e-12));
        }

        #[test]
        fn deriv_commutes_with_dell(re in proptest::collection::vec(-1.0f64..1.0, 32),
                                    im in proptest::collection::vec(-1.0f64..1.0, 32),
                                    ell in -3i64..4) {
            let g = make_grid(4.0, 32, 8, 0.5).unwrap();
            let vals: Vec<C64> = re.iter().zip(&im).map(|(&a, &b)| C64::new(a, b)).collect();
            let p = ModalProfile::new(g, ell, vals).unwrap();
            let a = apply_dell(&p.deriv_x(1).unwrap());
            let b = apply_dell(&p).deriv_x(1).unwrap();
            let scale = a.max_abs().max(1.0);
            prop_assert!(a.distance(&b) < 1e-12 * scale);
            // apply_dell equals second derivative minus k²ℓ²
            let c = p.deriv_x(2).unwrap();
            let q = 0.25 * (ell * ell) as f64;
            let d = apply_dell(&p);
            for ((cv, dv), pv) in c.values.iter().zip(&d.values).zip(&p.values) {
                prop_assert!((cv - pv * q - dv).norm() < 1e-12 * scale);
            }
        }

        #[test]
        fn deriv_is_linear(a in proptest::collection::vec(-1.0f64..1.0, 32),
                           b in proptest::collection::vec(-1.0f64..1.0, 32),
                           s in -3.0f64..3.0) {
            let g = make_grid(4.0, 32, 8, 0.5).unwrap();
            let pa = ModalProfile::new(g.clone(), 0, a.iter().map(|&v| C64::new(v, 0.0)).collect()).unwrap();
            let pb = ModalProfile::new(g.clone(), 0, b.iter().map(|&v| C64::new(0.0, v)).collect()).unwrap();
            let comb = ModalProfile::new(g, 0, pa.values.iter().zip(&pb.values).map(|(x, y)| x + y * s).collect()).unwrap();
            let lhs = comb.deriv_x(2).unwrap();
            let da = pa.deriv_x(2).unwrap();
            let db = pb.deriv_x(2).unwrap();
            for ((l, x), y) in lhs.values.iter().zip(&da.values).zip(&db.values) {
                prop_assert!((l - x - y * s).norm() < 1e-11 * (1.0 + l.norm()));
            }
        }

        #[test]
        fn weighted_inner_product_is_weighted_profiles(re in proptest::collection::vec(-1.0f64..1.0, 32),
                                                        im in proptest::collection::vec(-1.0f64..1.0, 32),
                                                        eta in 0.0f64..0.5) {
            let g = make_grid(4.0, 32, 8, 0.5).unwrap();
            let u = ModalProfile::new(g.clone(), 0, re.iter().zip(&im).map(|(&a, &b)| C64::new(a, b)).collect()).unwrap();
            let v = ModalProfile::new(g.clone(), 0, im.iter().zip(&re).map(|(&a, &b)| C64::new(a * a, b)).collect()).unwrap();
            let w = weight_profile(&g, eta).unwrap();
            let lhs = inner_product(&u, &v, Some(&w)).unwrap();
            let rhs = inner_product(&u.times_real(&w.values), &v.times_real(&w.values), None).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-13 * lhs.norm().max(1e-300) + 1e-15);
            let sym = inner_product(&v, &u, Some(&w)).unwrap().conj();
            prop_assert!((lhs - sym).norm() < 1e-14);
        }

        #[test]
        fn dealias_pure_modes_support(a in -7i64..8, b in -7i64..8) {
            let g = make_grid(PI, 16, 8, 1.0).unwrap();
            let ea = ModalProfile::from_fn(g.clone(), 0, |x| C64::from_polar(1.0, a as f64 * x));
            let eb = ModalProfile::from_fn(g.clone(), 0, |x| C64::from_polar(1.0, b as f64 * x));
            let p = dealias_product_profiles(&[&ea, &eb]).unwrap();
            let mut spec = p.values.clone();
            g.fft_x(&mut spec);
            let target = a + b;
            for (j, v) in spec.iter().enumerate() {
                let idx = if j < 8 { j as i64 } else { j as i64 - 16 };
                let expect = if idx == target && target.abs() < 8 { 16.0 } else { 0.0 };
                prop_assert!((v.norm() - expect).abs() < 1e-11);
            }
        }
    }
}
