//! Directional averages and the maximal operators built from them.
//!
//! Smoothed operators are Fourier multipliers evaluated on the grid spectrum.
//! Maximal operators stream one multiplier at a time into a running pointwise
//! maximum. Two directions share each inverse transform: for a real field and
//! even multipliers `m₁`, `m₂`, the inverse transform of `F̂·(m₁ + i m₂)` has
//! real part `T₁F` and imaginary part `T₂F`.

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::directions::{cross, dot, normalized, DirectionKind, DirectionSet, Vec3};
use crate::freqdecomp::Profile;
use crate::grid::{transform, EvenMultiplier, Field, GridError, GridSpec, SpectralPlan, Spectrum};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MaxOpError {
    #[error("direction set is empty")]
    EmptyDirections,
    #[error("direction has norm {0}, expected 1")]
    NotUnit(f64),
    #[error("field has dimension {field}, directions have dimension {directions}")]
    DimensionMismatch { field: usize, directions: usize },
    #[error("delta must lie in (0, 1/2], got {0}")]
    InvalidDelta(f64),
    #[error("Simpson rule needs an odd node count of at least 3, got {0}")]
    InvalidNodes(usize),
    #[error("spectrum is not the spectrum of a real field")]
    NotReal,
    #[error(transparent)]
    Grid(#[from] GridError),
}

fn check_unit(v: &Vec3) -> Result<(), MaxOpError> {
    let n = dot(v, v).sqrt();
    if (n - 1.0).abs() > 1e-9 {
        return Err(MaxOpError::NotUnit(n));
    }
    Ok(())
}

fn check_directions(spec: &GridSpec, ds: &DirectionSet) -> Result<(), MaxOpError> {
    if ds.is_empty() {
        return Err(MaxOpError::EmptyDirections);
    }
    if ds.dim() != spec.dim() {
        return Err(MaxOpError::DimensionMismatch {
            field: spec.dim(),
            directions: ds.dim(),
        });
    }
    Ok(())
}

fn check_real(spectrum: &Spectrum) -> Result<(), MaxOpError> {
    let spec = spectrum.spec();
    let c = spectrum.coefficients();
    let scale = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let n = spec.points_per_axis();
    let mut worst: f64 = 0.0;
    spec.for_each_index(|flat, idx| {
        let mut neg = [0usize; 3];
        for a in 0..spec.dim() {
            neg[a] = (n - idx[a]) % n;
        }
        worst = worst.max((c[flat] - c[spec.flatten(neg)].conj()).norm());
    });
    if worst > 1e-9 * scale.max(f64::MIN_POSITIVE) {
        return Err(MaxOpError::NotReal);
    }
    Ok(())
}

/// Pointwise `max_j |T_j F|` for the even multipliers `multiplier(j, ·)`, `j < count`.
///
/// `spectrum` must be the spectrum of a real field.
pub fn max_over_multipliers<M>(spectrum: &Spectrum, count: usize, multiplier: M) -> Field
where
    M: Fn(usize, [f64; 3]) -> f64 + Sync,
{
    struct State {
        plan: SpectralPlan,
        buf: Vec<Complex64>,
        max: Vec<f64>,
    }
    let spec = *spectrum.spec();
    let sym = EvenMultiplier::new(&spec);
    let coeffs = spectrum.coefficients();
    let pairs: Vec<(usize, Option<usize>)> = (0..count).step_by(2).map(|a| (a, (a + 1 < count).then_some(a + 1))).collect();

    let result = pairs
        .par_iter()
        .fold(
            || None::<State>,
            |state, &(a, b)| {
                let mut st = state.unwrap_or_else(|| State {
                    plan: SpectralPlan::new(spec),
                    buf: vec![Complex64::new(0.0, 0.0); spec.len()],
                    max: vec![0.0; spec.len()],
                });
                spec.for_each_index(|flat, idx| {
                    let ma = sym.eval(idx, &|f| multiplier(a, f));
                    let mb = match b {
                        Some(b) => sym.eval(idx, &|f| multiplier(b, f)),
                        None => 0.0,
                    };
                    st.buf[flat] = coeffs[flat] * Complex64::new(ma, mb);
                });
                st.plan.inverse(&mut st.buf);
                for (m, z) in st.max.iter_mut().zip(&st.buf) {
                    *m = m.max(z.re.abs());
                    if b.is_some() {
                        *m = m.max(z.im.abs());
                    }
                }
                Some(st)
            },
        )
        .map(|st| st.map(|s| s.max))
        .reduce(
            || None,
            |a, b| match (a, b) {
                (Some(mut x), Some(y)) => {
                    x.iter_mut().zip(&y).for_each(|(p, q)| *p = p.max(*q));
                    Some(x)
                }
                (x, None) => x,
                (None, y) => y,
            },
        );
    Field::from_vec_unchecked(spec, result.unwrap_or_else(|| vec![0.0; spec.len()]))
}

/// `T_v F`: multiplier `ψ̂(f·v)`.
pub fn apply_t_v<P: Profile + ?Sized>(spectrum: &Spectrum, v: &Vec3, profile: &P) -> Result<Field, MaxOpError> {
    check_unit(v)?;
    Ok(spectrum.multiply_even(|f| profile.psi_hat(dot(&f, v))).inverse())
}

/// `M₀F = max_{v∈Σ} |T_v F|`.
pub fn apply_m0<P: Profile + ?Sized>(field: &Field, ds: &DirectionSet, profile: &P) -> Result<Field, MaxOpError> {
    check_directions(field.spec(), ds)?;
    Ok(m0_unchecked(&transform(field), ds, profile))
}

/// [`apply_m0`] starting from the spectrum of a real field.
pub fn apply_m0_spectrum<P: Profile + ?Sized>(spectrum: &Spectrum, ds: &DirectionSet, profile: &P) -> Result<Field, MaxOpError> {
    check_directions(spectrum.spec(), ds)?;
    check_real(spectrum)?;
    Ok(m0_unchecked(spectrum, ds, profile))
}

pub(crate) fn m0_unchecked<P: Profile + ?Sized>(spectrum: &Spectrum, ds: &DirectionSet, profile: &P) -> Field {
    let vs = ds.vectors();
    max_over_multipliers(spectrum, vs.len(), |j, f| profile.psi_hat(dot(&f, &vs[j])))
}

/// Default node count of the unsmoothed quadrature.
pub const RAW_NODES: usize = 129;

/// `max_{v∈Σ} |∫_{-1/2}^{1/2} F(x+tv) dt|` by Simpson's rule on multilinear interpolation.
pub fn apply_m0_raw(field: &Field, ds: &DirectionSet) -> Result<Field, MaxOpError> {
    apply_m0_raw_with_nodes(field, ds, RAW_NODES)
}

pub fn apply_m0_raw_with_nodes(field: &Field, ds: &DirectionSet, nodes: usize) -> Result<Field, MaxOpError> {
    let spec = *field.spec();
    check_directions(&spec, ds)?;
    if nodes < 3 || nodes % 2 == 0 {
        return Err(MaxOpError::InvalidNodes(nodes));
    }
    let h = 1.0 / (nodes - 1) as f64;
    let rule: Vec<(f64, f64)> = (0..nodes)
        .map(|i| {
            let w = if i == 0 || i == nodes - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (-0.5 + i as f64 * h, w * h / 3.0)
        })
        .collect();
    let inv_dx = 1.0 / spec.spacing();
    let mut out = vec![0.0; spec.len()];
    let chunk = spec.points_per_axis();
    out.par_chunks_mut(chunk).enumerate().for_each(|(row, block)| {
        for (j, slot) in block.iter_mut().enumerate() {
            let idx = spec.unflatten(row * chunk + j);
            let mut best: f64 = 0.0;
            for v in ds.vectors() {
                let mut acc = 0.0;
                for &(t, w) in &rule {
                    let mut u = [0.0; 3];
                    for a in 0..spec.dim() {
                        u[a] = idx[a] as f64 + t * v[a] * inv_dx;
                    }
                    acc += w * interpolate(field, &u);
                }
                best = best.max(acc.abs());
            }
            *slot = best;
        }
    });
    Ok(Field::from_vec_unchecked(spec, out))
}

/// Periodic multilinear interpolation at fractional grid index `u`.
fn interpolate(field: &Field, u: &[f64; 3]) -> f64 {
    let spec = field.spec();
    let n = spec.points_per_axis();
    let d = spec.dim();
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..d {
        let fl = u[a].floor();
        frac[a] = u[a] - fl;
        base[a] = (fl as i64).rem_euclid(n as i64) as usize;
    }
    let values = field.values();
    let mut total = 0.0;
    for corner in 0..(1usize << d) {
        let mut w = 1.0;
        let mut idx = [0usize; 3];
        for a in 0..d {
            if corner & (1 << a) != 0 {
                w *= frac[a];
                idx[a] = (base[a] + 1) % n;
            } else {
                w *= 1.0 - frac[a];
                idx[a] = base[a];
            }
        }
        if w != 0.0 {
            total += w * values[spec.flatten(idx)];
        }
    }
    total
}

/// Cube radii (in cells) used by [`apply_m_star`]: `0, 1, 2, 4, …, n/4`.
pub fn cube_radii(spec: &GridSpec) -> Vec<usize> {
    let mut radii = vec![0];
    let mut r = 1;
    while r <= spec.points_per_axis() / 4 {
        radii.push(r);
        r *= 2;
    }
    radii
}

/// Average of `values` over the centered periodic cube of radius `r` cells.
fn box_average(spec: &GridSpec, values: &[f64], r: usize) -> Vec<f64> {
    let n = spec.points_per_axis();
    let side = 2 * r + 1;
    let mut cur = values.to_vec();
    let mut next = vec![0.0; cur.len()];
    let mut line = vec![0.0; n];
    for axis in 0..spec.dim() {
        let stride = n.pow((spec.dim() - 1 - axis) as u32);
        for start in 0..spec.len() {
            // visit each line along `axis` once, from its first element
            if (start / stride) % n != 0 {
                continue;
            }
            for (i, slot) in line.iter_mut().enumerate() {
                *slot = cur[start + i * stride];
            }
            let mut sum: f64 = (0..side).map(|o| line[(o + n * side - r) % n]).sum();
            for i in 0..n {
                next[start + i * stride] = sum;
                sum += line[(i + r + 1) % n] - line[(i + n * side - r) % n];
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let scale = 1.0 / (side as f64).powi(spec.dim() as i32);
    cur.iter_mut().for_each(|x| *x *= scale);
    cur
}

/// Hardy–Littlewood maximal function over centered cubes of side `2r+1`, `r ∈ cube_radii`.
pub fn apply_m_star(field: &Field) -> Field {
    let spec = *field.spec();
    let abs: Vec<f64> = field.values().iter().map(|x| x.abs()).collect();
    let mut best = abs.clone();
    for r in cube_radii(&spec).into_iter().skip(1) {
        for (b, a) in best.iter_mut().zip(box_average(&spec, &abs, r)) {
            *b = b.max(a);
        }
    }
    Field::from_vec_unchecked(spec, best)
}

/// `M₂g = (M*(g²))^{1/2}`.
pub fn apply_m2(field: &Field) -> Field {
    apply_m_star(&field.map(|x| x * x)).map(f64::sqrt)
}

/// `O = M₂ ∘ M*`.
pub fn apply_o(field: &Field) -> Field {
    apply_m2(&apply_m_star(field))
}

/// Planar maximal operator with multiplier `ψ̂(f·v) ψ̂(2^{-k} f·v^⊥)`, `v^⊥ = (-v₂, v₁)`.
pub fn apply_m_starstar_2d<P: Profile + ?Sized>(field: &Field, ds: &DirectionSet, k: i32, profile: &P) -> Result<Field, MaxOpError> {
    let spec = field.spec();
    if spec.dim() != 2 {
        return Err(MaxOpError::DimensionMismatch {
            field: spec.dim(),
            directions: 2,
        });
    }
    check_directions(spec, ds)?;
    let scale = 2f64.powi(-k);
    let vs = ds.vectors();
    Ok(max_over_multipliers(&transform(field), vs.len(), |j, f| {
        let v = vs[j];
        let along = f[0] * v[0] + f[1] * v[1];
        let across = -f[0] * v[1] + f[1] * v[0];
        profile.psi_hat(along) * profile.psi_hat(scale * across)
    }))
}

/// Orthonormal frame `(v^⊥, v^⊥⊥)` completing `v`: `v^⊥ ∝ v × e` for the
/// coordinate axis `e` least aligned with `v`, `v^⊥⊥ = v × v^⊥`.
pub fn nikodym_frame(v: &Vec3) -> (Vec3, Vec3) {
    let mut axis = 0;
    for a in 1..3 {
        if v[a].abs() < v[axis].abs() {
            axis = a;
        }
    }
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let p = normalized(&cross(v, &e));
    (p, cross(v, &p))
}

/// Directions `Σ_δ`: a separated set of `⌈δ^{-2}⌉` directions.
pub fn nikodym_directions(delta: f64) -> Result<DirectionSet, MaxOpError> {
    check_delta(delta)?;
    crate::directions::gen_separated(3, (delta.powi(-2)).ceil() as usize).map_err(|_| MaxOpError::EmptyDirections)
}

fn check_delta(delta: f64) -> Result<(), MaxOpError> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(MaxOpError::InvalidDelta(delta));
    }
    Ok(())
}

/// Smooth Nikodym maximal function `N* F = max_{v∈Σ_δ} |N_v F|` with multiplier
/// `ψ̂(f·v) ψ̂(δ f·v^⊥) ψ̂(δ f·v^⊥⊥)`; it vanishes for `‖f‖ ≥ √(1 + 2δ^{-2})`.
pub fn apply_nikodym<P: Profile + ?Sized>(field: &Field, delta: f64, ds: &DirectionSet, profile: &P) -> Result<Field, MaxOpError> {
    check_delta(delta)?;
    if field.spec().dim() != 3 {
        return Err(MaxOpError::DimensionMismatch {
            field: field.spec().dim(),
            directions: 3,
        });
    }
    check_directions(field.spec(), ds)?;
    let frames: Vec<(Vec3, Vec3, Vec3)> = ds
        .vectors()
        .iter()
        .map(|v| {
            let (p, q) = nikodym_frame(v);
            (*v, p, q)
        })
        .collect();
    Ok(max_over_multipliers(&transform(field), frames.len(), |j, f| {
        let (v, p, q) = &frames[j];
        profile.psi_hat(dot(&f, v)) * profile.psi_hat(delta * dot(&f, p)) * profile.psi_hat(delta * dot(&f, q))
    }))
}

/// Frequency regime an operator was applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Full,
    Scale(i32),
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::Full => write!(f, "full"),
            Regime::Scale(k) => write!(f, "{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorReport {
    pub input_norm: f64,
    pub output_norm: f64,
    pub ratio: f64,
    pub direction_count: usize,
    pub kind: DirectionKind,
    pub grid: GridSpec,
    pub regime: Regime,
    pub seconds: f64,
}

impl OperatorReport {
    /// Times `op` and records `‖op(input)‖₂ / ‖input‖₂`.
    pub fn measure(
        input: &Field,
        ds: &DirectionSet,
        regime: Regime,
        op: impl FnOnce() -> Result<Field, MaxOpError>,
    ) -> Result<Self, MaxOpError> {
        let start = Instant::now();
        let out = op()?;
        let seconds = start.elapsed().as_secs_f64();
        let input_norm = crate::grid::norm(input, 2.0)?;
        let output_norm = crate::grid::norm(&out, 2.0)?;
        Ok(Self {
            input_norm,
            output_norm,
            ratio: if input_norm > 0.0 { output_norm / input_norm } else { 0.0 },
            direction_count: ds.len(),
            kind: ds.kind(),
            grid: *input.spec(),
            regime,
            seconds,
        })
    }

    pub const CSV_HEADER: [&'static str; 8] = ["grid", "N", "kind", "k", "input_norm", "output_norm", "ratio", "seconds"];

    pub fn csv_record(&self) -> [String; 8] {
        let kind = serde_json::to_value(self.kind)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        [
            format!("{}^{}@{}", self.grid.points_per_axis(), self.grid.dim(), self.grid.domain_length()),
            self.direction_count.to_string(),
            kind,
            self.regime.to_string(),
            self.input_norm.to_string(),
            self.output_norm.to_string(),
            self.ratio.to_string(),
            self.seconds.to_string(),
        ]
    }

    pub fn write_csv<W: std::io::Write>(reports: &[OperatorReport], out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        for r in reports {
            w.write_record(r.csv_record())?;
        }
        w.flush()?;
        Ok(())
    }
}
