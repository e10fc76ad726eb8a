//! Periodic grids, sampled fields and their spectra.
//!
//! A [`GridSpec`] describes the torus `[0, L)^d` sampled with `n` points per
//! axis. Samples are stored row-major with axis 0 slowest. Spectra are stored
//! in the same layout, indexed by the integer multi-index `m` in FFT order;
//! coefficient `m` multiplies the mode `exp(i x·f)` with physical frequency
//! `f = 2π m / L`. The forward transform carries the `1/n^d` factor, so a pure
//! mode `exp(i x·f)` transforms to a single unit coefficient.
//!
//! Points and frequencies are handed to callbacks as `[f64; 3]` with unused
//! trailing components set to zero, so 2-d and 3-d code share one path.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("dimension must be 2 or 3, got {0}")]
    UnsupportedDimension(usize),
    #[error("points per axis must be a power of two and at least 8, got {0}")]
    InvalidResolution(usize),
    #[error("domain length must be positive and finite, got {0}")]
    InvalidLength(f64),
    #[error("expected {expected} samples, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("sample {0} is not finite")]
    NonFinite(usize),
    #[error("operands live on different grids")]
    SpecMismatch,
    #[error("norm exponent must be at least 1, got {0}")]
    InvalidExponent(f64),
    #[error("at least one field is required")]
    Empty,
}

/// Sampling of the torus `[0, L)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    points_per_axis: usize,
    domain_length: f64,
}

pub fn make_grid(dim: usize, points_per_axis: usize, domain_length: f64) -> Result<GridSpec, GridError> {
    GridSpec::new(dim, points_per_axis, domain_length)
}

impl GridSpec {
    pub fn new(dim: usize, points_per_axis: usize, domain_length: f64) -> Result<Self, GridError> {
        if !(2..=3).contains(&dim) {
            return Err(GridError::UnsupportedDimension(dim));
        }
        if points_per_axis < 8 || !points_per_axis.is_power_of_two() {
            return Err(GridError::InvalidResolution(points_per_axis));
        }
        if !(domain_length.is_finite() && domain_length > 0.0) {
            return Err(GridError::InvalidLength(domain_length));
        }
        Ok(Self {
            dim,
            points_per_axis,
            domain_length,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    /// Total number of samples, `n^d`.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.domain_length / self.points_per_axis as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.domain_length.powi(self.dim as i32)
    }

    /// Largest representable frequency per axis, `π n / L`.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI * self.points_per_axis as f64 / self.domain_length
    }

    /// Largest frequency norm present on the grid (a corner of the cube).
    pub fn max_frequency_norm(&self) -> f64 {
        self.nyquist() * (self.dim as f64).sqrt()
    }

    /// Frequency spacing `2π / L`.
    pub fn frequency_step(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.domain_length
    }

    /// Signed integer frequency of an FFT-ordered index; the Nyquist index maps to `-n/2`.
    pub fn signed_index(&self, idx: usize) -> i64 {
        let n = self.points_per_axis;
        if idx < n / 2 {
            idx as i64
        } else {
            idx as i64 - n as i64
        }
    }

    /// FFT-ordered index of a signed integer frequency (taken modulo `n`).
    pub fn wrap_index(&self, m: i64) -> usize {
        m.rem_euclid(self.points_per_axis as i64) as usize
    }

    pub fn is_nyquist_index(&self, idx: usize) -> bool {
        idx == self.points_per_axis / 2
    }

    /// Physical frequency of an FFT-ordered index.
    pub fn frequency(&self, idx: usize) -> f64 {
        self.signed_index(idx) as f64 * self.frequency_step()
    }

    pub fn axis_frequencies(&self) -> Vec<f64> {
        (0..self.points_per_axis).map(|i| self.frequency(i)).collect()
    }

    pub fn coordinate(&self, idx: usize) -> f64 {
        idx as f64 * self.spacing()
    }

    /// Splits a flat index into per-axis indices (unused axes are zero).
    pub fn unflatten(&self, flat: usize) -> [usize; 3] {
        let n = self.points_per_axis;
        match self.dim {
            2 => [flat / n, flat % n, 0],
            _ => [flat / (n * n), (flat / n) % n, flat % n],
        }
    }

    pub fn flatten(&self, idx: [usize; 3]) -> usize {
        let n = self.points_per_axis;
        match self.dim {
            2 => idx[0] * n + idx[1],
            _ => (idx[0] * n + idx[1]) * n + idx[2],
        }
    }

    /// Flat index of a signed frequency multi-index.
    pub fn frequency_flat_index(&self, m: [i64; 3]) -> usize {
        self.flatten([self.wrap_index(m[0]), self.wrap_index(m[1]), self.wrap_index(m[2])])
    }

    /// Visits every multi-index in storage order.
    pub fn for_each_index(&self, mut f: impl FnMut(usize, [usize; 3])) {
        let n = self.points_per_axis;
        let mut flat = 0;
        match self.dim {
            2 => {
                for i0 in 0..n {
                    for i1 in 0..n {
                        f(flat, [i0, i1, 0]);
                        flat += 1;
                    }
                }
            }
            _ => {
                for i0 in 0..n {
                    for i1 in 0..n {
                        for i2 in 0..n {
                            f(flat, [i0, i1, i2]);
                            flat += 1;
                        }
                    }
                }
            }
        }
    }

    /// Visits every grid point with its physical coordinates.
    pub fn for_each_point(&self, mut f: impl FnMut(usize, [f64; 3])) {
        let h = self.spacing();
        let dim = self.dim;
        self.for_each_index(|flat, idx| {
            let mut x = [0.0; 3];
            for a in 0..dim {
                x[a] = idx[a] as f64 * h;
            }
            f(flat, x)
        });
    }

    /// Visits every grid frequency with its physical value.
    pub fn for_each_frequency(&self, mut f: impl FnMut(usize, [f64; 3])) {
        let freqs = self.axis_frequencies();
        let dim = self.dim;
        self.for_each_index(|flat, idx| {
            let mut xi = [0.0; 3];
            for a in 0..dim {
                xi[a] = freqs[idx[a]];
            }
            f(flat, xi)
        });
    }

    pub(crate) fn check_same(&self, other: &GridSpec) -> Result<(), GridError> {
        if self == other {
            Ok(())
        } else {
            Err(GridError::SpecMismatch)
        }
    }
}

/// Real samples of a function on the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    spec: GridSpec,
    samples: Vec<f64>,
}

impl Field {
    pub fn new(spec: GridSpec, samples: Vec<f64>) -> Result<Self, GridError> {
        if samples.len() != spec.len() {
            return Err(GridError::ShapeMismatch {
                expected: spec.len(),
                actual: samples.len(),
            });
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        Ok(Self { spec, samples })
    }

    pub(crate) fn from_vec_unchecked(spec: GridSpec, samples: Vec<f64>) -> Self {
        debug_assert_eq!(samples.len(), spec.len());
        Self { spec, samples }
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self::constant(spec, 0.0)
    }

    pub fn constant(spec: GridSpec, value: f64) -> Self {
        Self {
            spec,
            samples: vec![value; spec.len()],
        }
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(spec: GridSpec, f: impl Fn([f64; 3]) -> f64) -> Result<Self, GridError> {
        let mut samples = vec![0.0; spec.len()];
        spec.for_each_point(|flat, x| samples[flat] = f(x));
        Self::new(spec, samples)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_values(self) -> Vec<f64> {
        self.samples
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_vec_unchecked(self.spec, self.samples.iter().map(|&v| f(v)).collect())
    }

    pub fn abs(&self) -> Field {
        self.map(f64::abs)
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field, GridError> {
        self.spec.check_same(&other.spec)?;
        let samples = self.samples.iter().zip(&other.samples).map(|(&a, &b)| f(a, b)).collect();
        Ok(Field::from_vec_unchecked(self.spec, samples))
    }

    pub fn add(&self, other: &Field) -> Result<Field, GridError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field, GridError> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Cell-volume weighted inner product.
    pub fn inner(&self, other: &Field) -> Result<f64, GridError> {
        self.spec.check_same(&other.spec)?;
        let s: f64 = self.samples.iter().zip(&other.samples).map(|(a, b)| a * b).sum();
        Ok(s * self.spec.cell_volume())
    }

    /// Measure of `{x : pred(F(x))}` by cell counting.
    pub fn measure_where(&self, pred: impl Fn(f64) -> bool) -> f64 {
        self.samples.iter().filter(|&&v| pred(v)).count() as f64 * self.spec.cell_volume()
    }
}

/// Cell-volume weighted discrete `L^p` norm; `p = f64::INFINITY` gives the sup norm.
pub fn norm(field: &Field, p: f64) -> Result<f64, GridError> {
    if p.is_nan() || p < 1.0 {
        return Err(GridError::InvalidExponent(p));
    }
    if p.is_infinite() {
        return Ok(field.max_abs());
    }
    let cell = field.spec.cell_volume();
    let s: f64 = if p == 2.0 {
        field.samples.iter().map(|v| v * v).sum()
    } else if p == 1.0 {
        field.samples.iter().map(|v| v.abs()).sum()
    } else {
        field.samples.iter().map(|v| v.abs().powf(p)).sum()
    };
    Ok((s * cell).powf(1.0 / p))
}

/// Pointwise maximum of absolute values.
pub fn pointwise_reduce_max<'a, I>(fields: I) -> Result<Field, GridError>
where
    I: IntoIterator<Item = &'a Field>,
{
    let mut iter = fields.into_iter();
    let first = iter.next().ok_or(GridError::Empty)?;
    let mut acc = first.abs();
    for f in iter {
        acc.spec.check_same(&f.spec)?;
        for (a, b) in acc.samples.iter_mut().zip(&f.samples) {
            *a = a.max(b.abs());
        }
    }
    Ok(acc)
}

/// Fourier coefficients of a field on the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    spec: GridSpec,
    coefficients: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(spec: GridSpec, coefficients: Vec<Complex64>) -> Result<Self, GridError> {
        if coefficients.len() != spec.len() {
            return Err(GridError::ShapeMismatch {
                expected: spec.len(),
                actual: coefficients.len(),
            });
        }
        Ok(Self { spec, coefficients })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            spec,
            coefficients: vec![Complex64::new(0.0, 0.0); spec.len()],
        }
    }

    /// Spectrum holding the given `(signed multi-index, coefficient)` pairs.
    pub fn from_modes(spec: GridSpec, modes: &[([i64; 3], Complex64)]) -> Self {
        let mut s = Self::zeros(spec);
        for &(m, c) in modes {
            let idx = spec.frequency_flat_index(m);
            s.coefficients[idx] += c;
        }
        s
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coefficients
    }

    pub fn coefficient(&self, m: [i64; 3]) -> Complex64 {
        self.coefficients[self.spec.frequency_flat_index(m)]
    }

    /// `Σ_m |c_m|^2 · volume`, equal to the squared `L^2` norm of the field.
    pub fn norm_sq(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.spec.volume()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn add(&self, other: &Spectrum) -> Result<Spectrum, GridError> {
        self.spec.check_same(&other.spec)?;
        let c = self.coefficients.iter().zip(&other.coefficients).map(|(a, b)| a + b).collect();
        Ok(Spectrum {
            spec: self.spec,
            coefficients: c,
        })
    }

    pub fn sub(&self, other: &Spectrum) -> Result<Spectrum, GridError> {
        self.spec.check_same(&other.spec)?;
        let c = self.coefficients.iter().zip(&other.coefficients).map(|(a, b)| a - b).collect();
        Ok(Spectrum {
            spec: self.spec,
            coefficients: c,
        })
    }

    pub fn scaled(&self, s: f64) -> Spectrum {
        Spectrum {
            spec: self.spec,
            coefficients: self.coefficients.iter().map(|c| c * s).collect(),
        }
    }

    /// Multiplies by a function of the frequency norm.
    pub fn multiply_radial(&self, m: impl Fn(f64) -> f64) -> Spectrum {
        let mut out = self.clone();
        self.spec.for_each_frequency(|flat, f| {
            let r = (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt();
            out.coefficients[flat] *= m(r);
        });
        out
    }

    /// Multiplies by an even multiplier `m(f) = m(-f)`.
    ///
    /// On Nyquist planes the index `-n/2` is its own negative, so the value
    /// is averaged over the sign flips of the Nyquist components. This keeps
    /// the product conjugate-symmetric, i.e. real fields stay real.
    pub fn multiply_even(&self, m: impl Fn([f64; 3]) -> f64) -> Spectrum {
        let mut out = self.clone();
        let sym = EvenMultiplier::new(&self.spec);
        self.spec.for_each_index(|flat, idx| {
            out.coefficients[flat] *= sym.eval(idx, &m);
        });
        out
    }

    /// Keeps the coefficients at the listed flat indices and zeroes the rest.
    pub fn restrict_to(&self, indices: &[usize]) -> Spectrum {
        let mut out = Spectrum::zeros(self.spec);
        for &i in indices {
            out.coefficients[i] = self.coefficients[i];
        }
        out
    }

    /// Real part of the inverse transform.
    pub fn inverse(&self) -> Field {
        inverse_transform(self)
    }
}

/// Evaluates even multipliers with the Nyquist-plane symmetrization.
pub(crate) struct EvenMultiplier {
    freqs: Vec<f64>,
    nyquist: usize,
    dim: usize,
}

impl EvenMultiplier {
    pub(crate) fn new(spec: &GridSpec) -> Self {
        Self {
            freqs: spec.axis_frequencies(),
            nyquist: spec.points_per_axis() / 2,
            dim: spec.dim(),
        }
    }

    #[inline]
    pub(crate) fn frequency(&self, idx: [usize; 3]) -> [f64; 3] {
        let mut f = [0.0; 3];
        for a in 0..self.dim {
            f[a] = self.freqs[idx[a]];
        }
        f
    }

    #[inline]
    pub(crate) fn eval(&self, idx: [usize; 3], m: &impl Fn([f64; 3]) -> f64) -> f64 {
        let f = self.frequency(idx);
        let mut mask = 0u8;
        for (a, &i) in idx.iter().enumerate().take(self.dim) {
            if i == self.nyquist {
                mask |= 1 << a;
            }
        }
        if mask == 0 {
            return m(f);
        }
        let mut total = 0.0;
        let mut count = 0.0;
        for flips in 0..8u8 {
            if flips & !mask != 0 {
                continue;
            }
            let mut g = f;
            for (a, c) in g.iter_mut().enumerate() {
                if flips & (1 << a) != 0 {
                    *c = -*c;
                }
            }
            total += m(g);
            count += 1.0;
        }
        total / count
    }
}

/// Forward transform with the unit-mode normalization.
pub fn transform(field: &Field) -> Spectrum {
    let mut data: Vec<Complex64> = field.samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    SpectralPlan::new(field.spec).forward(&mut data);
    Spectrum {
        spec: field.spec,
        coefficients: data,
    }
}

/// Inverse transform, keeping the real part.
pub fn inverse_transform(spectrum: &Spectrum) -> Field {
    let data = inverse_transform_complex(spectrum);
    Field::from_vec_unchecked(spectrum.spec, data.into_iter().map(|c| c.re).collect())
}

/// Inverse transform of an arbitrary (not necessarily conjugate-symmetric) spectrum.
pub fn inverse_transform_complex(spectrum: &Spectrum) -> Vec<Complex64> {
    let mut data = spectrum.coefficients.clone();
    SpectralPlan::new(spectrum.spec).inverse(&mut data);
    data
}

/// Reusable d-dimensional FFT on a cubic grid.
///
/// Each pass transforms all contiguous rows along the last axis and then
/// transposes the `(n^{d-1}) × n` matrix, which rotates the axes cyclically.
/// After `d` passes every axis has been transformed and the layout is back
/// in storage order.
pub struct SpectralPlan {
    spec: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    swap: Vec<Complex64>,
}

impl SpectralPlan {
    pub fn new(spec: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let n = spec.points_per_axis();
        Self {
            spec,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            swap: Vec::new(),
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// In-place forward transform, scaled by `1/n^d`.
    pub fn forward(&mut self, data: &mut Vec<Complex64>) {
        let fft = Arc::clone(&self.forward);
        self.run(fft, data);
        let scale = 1.0 / self.spec.len() as f64;
        data.par_iter_mut().for_each(|c| *c *= scale);
    }

    /// In-place unnormalized inverse transform.
    pub fn inverse(&mut self, data: &mut Vec<Complex64>) {
        let fft = Arc::clone(&self.inverse);
        self.run(fft, data);
    }

    fn run(&mut self, fft: Arc<dyn Fft<f64>>, data: &mut Vec<Complex64>) {
        assert_eq!(data.len(), self.spec.len(), "buffer does not match grid");
        let n = self.spec.points_per_axis();
        let rows = self.spec.len() / n;
        let scratch_len = fft.get_inplace_scratch_len();
        // Batch many rows per task so the per-task scratch allocation is amortized.
        let chunk = n * (rows / rayon::current_num_threads().max(1) / 4).clamp(1, rows);
        self.swap.resize(data.len(), Complex64::new(0.0, 0.0));
        for _ in 0..self.spec.dim() {
            data.par_chunks_mut(chunk).for_each_init(
                || vec![Complex64::new(0.0, 0.0); scratch_len],
                |scratch, block| fft.process_with_scratch(block, scratch),
            );
            transpose(data, &mut self.swap, rows, n);
            std::mem::swap(data, &mut self.swap);
        }
    }
}

/// Out-of-place transpose of a `rows × cols` row-major matrix.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const TILE: usize = 32;
    for r0 in (0..rows).step_by(TILE) {
        let r1 = (r0 + TILE).min(rows);
        for c0 in (0..cols).step_by(TILE) {
            let c1 = (c0 + TILE).min(cols);
            for r in r0..r1 {
                let row = &src[r * cols..(r + 1) * cols];
                for c in c0..c1 {
                    dst[c * rows + r] = row[c];
                }
            }
        }
    }
}
