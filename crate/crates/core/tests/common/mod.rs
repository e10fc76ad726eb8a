//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use dirmax::directions::Vec3;
use dirmax::grid::{Field, GridSpec, Spectrum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite Gauss-Legendre quadrature of `f` over `[a, b]` with `panels` panels.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, rule: &[(f64, f64)]) -> f64 {
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for &(x, w) in rule {
            acc += w * f(mid + 0.5 * h * x);
        }
    }
    acc * 0.5 * h
}

/// Fejér kernel in physical space, written without cancellation near 0.
pub fn fejer(t: f64) -> f64 {
    if t == 0.0 {
        return 1.0 / (2.0 * PI);
    }
    let s = (0.5 * t).sin();
    2.0 * s * s / (PI * t * t)
}

/// Sine integral `Si(x) = ∫_0^x sin t / t dt` by panel quadrature.
pub fn sine_integral(x: f64, rule: &[(f64, f64)]) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let panels = (x.abs().ceil() as usize).max(1);
    integrate(|t| if t == 0.0 { 1.0 } else { t.sin() / t }, 0.0, x, panels, rule)
}

/// `∫_T^∞ cos(βt) / t² dt`.
fn cos_over_t2_tail(beta: f64, t: f64, rule: &[(f64, f64)]) -> f64 {
    let b = beta.abs();
    (b * t).cos() / t - b * (0.5 * PI - sine_integral(b * t, rule))
}

/// `∫_ℝ ψ(t) cos(αt) dt` computed in physical space: quadrature on `[-T, T]`
/// plus the exact tail, since `ψ(t) = (1 - cos t) / (π t²)`.
pub fn fejer_average_of_cosine(alpha: f64, rule: &[(f64, f64)]) -> f64 {
    let t = 50.0;
    let body = integrate(|s| fejer(s) * (alpha * s).cos(), -t, t, 400, rule);
    let tail = (2.0 / PI)
        * (cos_over_t2_tail(alpha, t, rule) - 0.5 * cos_over_t2_tail(alpha + 1.0, t, rule) - 0.5 * cos_over_t2_tail(alpha - 1.0, t, rule));
    body + tail
}

/// Real field given as an explicit sum of plane waves `c e^{i f·x}` plus conjugates.
#[derive(Debug, Clone)]
pub struct PlaneWaves {
    pub spec: GridSpec,
    pub modes: Vec<([i64; 3], Complex64)>,
}

impl PlaneWaves {
    /// `count` random modes (with their conjugates) of norm at most `radius`.
    pub fn random(spec: GridSpec, count: usize, radius: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let step = spec.frequency_step();
        let bound = (radius / step).floor() as i64;
        let mut available = 0;
        spec.for_each_frequency(|_, f| available += (f[0] * f[0] + f[1] * f[1] + f[2] * f[2] <= radius * radius) as usize);
        assert!(2 * count < available, "only {available} frequencies within {radius}");
        let mut modes = Vec::new();
        while modes.len() < 2 * count {
            let mut m = [0i64; 3];
            for a in m.iter_mut().take(spec.dim()) {
                *a = rng.random_range(-bound..=bound);
            }
            let r = step * ((m[0] * m[0] + m[1] * m[1] + m[2] * m[2]) as f64).sqrt();
            if r == 0.0 || r > radius || modes.iter().any(|(q, _)| *q == m || *q == [-m[0], -m[1], -m[2]]) {
                continue;
            }
            let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            modes.push((m, c));
            modes.push(([-m[0], -m[1], -m[2]], c.conj()));
        }
        Self { spec, modes }
    }

    pub fn frequency(&self, m: [i64; 3]) -> Vec3 {
        let s = self.spec.frequency_step();
        [s * m[0] as f64, s * m[1] as f64, s * m[2] as f64]
    }

    pub fn field(&self) -> Field {
        Spectrum::from_modes(self.spec, &self.modes).inverse()
    }

    /// Direct evaluation of `Σ c · weight(f) · e^{i f·x}` at every grid point.
    pub fn evaluate_weighted(&self, weight: impl Fn(Vec3) -> f64) -> Vec<f64> {
        let waves: Vec<(Vec3, Complex64)> = self
            .modes
            .iter()
            .map(|&(m, c)| (self.frequency(m), c * weight(self.frequency(m))))
            .collect();
        let mut out = vec![0.0; self.spec.len()];
        self.spec.for_each_point(|flat, x| {
            out[flat] = waves
                .iter()
                .map(|(f, c)| (c * Complex64::from_polar(1.0, f[0] * x[0] + f[1] * x[1] + f[2] * x[2])).re)
                .sum();
        });
        out
    }
}

pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}
