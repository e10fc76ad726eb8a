//! The sharpness example and the versioned test family.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::ExperimentError;
use crate::combinat::incidences;
use crate::directions::{dot, DirectionSet};
use crate::freqdecomp::{grid_scales, make_tube_system, project_s_k};
use crate::grid::{norm, transform, Field, GridSpec, Spectrum};

/// Identifier of the member list built by [`build_family`].
pub const FAMILY_VERSION: &str = "tf-v1";

/// Smallest torus side holding the support `‖x‖ < 2` around the center.
pub const SHARPNESS_MIN_LENGTH: f64 = 4.0;

/// `F(x) = N^{-1/2} ‖x - c‖^{-2}` on `N^{-1/2} < ‖x - c‖ < 2`, `c` the torus center.
///
/// Requires the spacing to resolve the inner radius: `h ≤ N^{-1/2} / 2`.
pub fn sharpness_field(n: usize, spec: &GridSpec) -> Result<Field, ExperimentError> {
    let inner = (n as f64).powf(-0.5);
    if spec.spacing() > inner / 2.0 {
        return Err(ExperimentError::GridTooCoarse {
            num_dirs: n,
            spacing: spec.spacing(),
            required: inner / 2.0,
        });
    }
    sampled_sharpness_field(n, spec)
}

/// [`sharpness_field`] without the resolution check; the inner shell may be
/// under-sampled, which is acceptable when the field only serves as a test input.
pub fn sampled_sharpness_field(n: usize, spec: &GridSpec) -> Result<Field, ExperimentError> {
    if spec.dim() != 3 {
        return Err(ExperimentError::InvalidConfig(format!(
            "sharpness field needs a 3-d grid, got {}",
            spec.dim()
        )));
    }
    if n == 0 {
        return Err(ExperimentError::InvalidConfig("sharpness field needs N ≥ 1".into()));
    }
    if spec.domain_length() < SHARPNESS_MIN_LENGTH {
        return Err(ExperimentError::DomainTooSmall(spec.domain_length()));
    }
    let inner = (n as f64).powf(-0.5);
    let c = spec.domain_length() / 2.0;
    Ok(Field::from_fn(*spec, |x| {
        let r2 = (x[0] - c).powi(2) + (x[1] - c).powi(2) + (x[2] - c).powi(2);
        let r = r2.sqrt();
        if r > inner && r < 2.0 {
            inner / r2
        } else {
            0.0
        }
    })?)
}

/// `‖F‖₂² = ∫_{N^{-1/2}}^{2} N^{-1} r^{-4} 4π r² dr = 4π (N^{-1/2} - N^{-1}/2)`.
pub fn sharpness_norm_analytic(n: usize) -> f64 {
    let n = n as f64;
    (4.0 * PI * (n.powf(-0.5) - 0.5 / n)).sqrt()
}

#[derive(Debug, Clone)]
pub struct FamilyMember {
    pub name: String,
    pub field: Field,
}

/// Frequency region the family is drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Band {
    /// `‖f‖ ≤ radius`.
    Ball(f64),
    /// The annulus `A_k`.
    Scale(i32),
}

impl Band {
    /// Default band of a full-range experiment: half the Nyquist frequency.
    pub fn half_nyquist(spec: &GridSpec) -> Self {
        Band::Ball(spec.nyquist() / 2.0)
    }

    fn contains(&self, r: f64) -> bool {
        match *self {
            Band::Ball(radius) => r > 0.0 && r <= radius,
            Band::Scale(k) => r >= 2f64.powi(k - 1) && r <= 2f64.powi(k + 1),
        }
    }

    fn outer(&self) -> f64 {
        match *self {
            Band::Ball(radius) => radius,
            Band::Scale(k) => 2f64.powi(k + 1),
        }
    }

    /// Scale whose tubes generate the single-tube members.
    fn tube_scale(&self, spec: &GridSpec) -> Option<i32> {
        match *self {
            Band::Scale(k) => Some(k),
            Band::Ball(radius) => {
                let k = (radius.log2().floor() as i32 - 1).min(*grid_scales(spec).end());
                (k >= 0).then_some(k)
            }
        }
    }
}

fn normal_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Real part of a field whose spectrum is complex white noise on the listed frequencies,
/// scaled to unit `L²` norm. `None` if the list is empty.
fn white_noise_on(spec: &GridSpec, indices: &[usize], rng: &mut ChaCha8Rng) -> Option<Field> {
    if indices.is_empty() {
        return None;
    }
    let mut s = Spectrum::zeros(*spec);
    for &i in indices {
        s.coefficients_mut()[i] = normal_complex(rng);
    }
    let f = s.inverse();
    let nrm = norm(&f, 2.0).ok()?;
    (nrm > 0.0).then(|| f.scaled(1.0 / nrm))
}

fn band_indices(spec: &GridSpec, band: Band) -> Vec<usize> {
    let mut out = Vec::new();
    spec.for_each_frequency(|flat, f| {
        if band.contains((f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt()) {
            out.push(flat);
        }
    });
    out
}

/// Seeded random field with white spectrum in `band`, unit `L²` norm.
pub fn random_band_limited(spec: &GridSpec, band: Band, seed: u64) -> Option<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    white_noise_on(spec, &band_indices(spec, band), &mut rng)
}

/// Sum of up to 8 cosines whose frequencies lie in `band` and are nearly
/// orthogonal to `v` (`|f·v| ≤ 1/4`), so that `T_v` leaves them almost intact.
pub fn aligned_comb(spec: &GridSpec, band: Band, v: &[f64; 3], rng: &mut ChaCha8Rng) -> Option<Field> {
    let inner = band.outer() / 4.0;
    let mut candidates = Vec::new();
    spec.for_each_index(|_, idx| {
        let m: Vec<i64> = (0..3).map(|a| if a < spec.dim() { spec.signed_index(idx[a]) } else { 0 }).collect();
        let f = [
            spec.frequency(idx[0]),
            spec.frequency(idx[1]),
            if spec.dim() == 3 { spec.frequency(idx[2]) } else { 0.0 },
        ];
        let r = dot(&f, &f).sqrt();
        // one representative per ± pair, away from Nyquist planes
        let positive = m.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0);
        let nyq = (0..spec.dim()).any(|a| spec.is_nyquist_index(idx[a]));
        if positive && !nyq && band.contains(r) && r >= inner && dot(&f, v).abs() <= 0.25 {
            candidates.push([m[0], m[1], m[2]]);
        }
    });
    if candidates.is_empty() {
        return None;
    }
    let mut modes = Vec::new();
    for _ in 0..8.min(candidates.len()) {
        let m = candidates.swap_remove(rng.random_range(0..candidates.len()));
        let phase = Complex64::from_polar(0.5, rng.random_range(0.0..2.0 * PI));
        modes.push((m, phase));
        modes.push(([-m[0], -m[1], -m[2]], phase.conj()));
    }
    Some(Spectrum::from_modes(*spec, &modes).inverse())
}

/// The test family: the sharpness field, `random` band-limited fields,
/// two single-tube fields and two aligned combs.
///
/// With a scale band the members live in (or around) `A_k`; callers apply
/// `S_k` themselves. The sharpness member is included on 3-d grids with
/// side at least [`SHARPNESS_MIN_LENGTH`].
pub fn build_family(
    spec: &GridSpec,
    ds: &DirectionSet,
    band: Band,
    random: usize,
    seed: u64,
) -> Result<Vec<FamilyMember>, ExperimentError> {
    let mut members = Vec::new();
    if spec.dim() == 3 && spec.domain_length() >= SHARPNESS_MIN_LENGTH {
        let field = sampled_sharpness_field(ds.len(), spec)?;
        let field = match band {
            Band::Scale(k) => project_s_k(&transform(&field), k).inverse(),
            Band::Ball(_) => field,
        };
        members.push(FamilyMember {
            name: "sharpness".into(),
            field,
        });
    }
    let indices = band_indices(spec, band);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..random {
        if let Some(field) = white_noise_on(spec, &indices, &mut rng) {
            members.push(FamilyMember {
                name: format!("random-{i}"),
                field,
            });
        }
    }
    if spec.dim() == 3 {
        if let Some(k) = band.tube_scale(spec) {
            let ts = make_tube_system(k, spec)?;
            let table = incidences(ds, &ts)?;
            let nonempty: Vec<usize> = (0..ts.len()).filter(|&id| !ts.tubes()[id].frequencies.is_empty()).collect();
            if !nonempty.is_empty() {
                // the tube whose strip holds the most directions, then a random one
                let busiest = *nonempty
                    .iter()
                    .max_by_key(|&&id| (table.counts[id], std::cmp::Reverse(id)))
                    .unwrap();
                let other = nonempty[rng.random_range(0..nonempty.len())];
                for id in [busiest, other] {
                    if let Some(field) = white_noise_on(spec, &ts.tubes()[id].frequencies, &mut rng) {
                        members.push(FamilyMember {
                            name: format!("tube-{k}-{id}"),
                            field,
                        });
                    }
                }
            }
        }
    }
    for c in 0..2 {
        let j = rng.random_range(0..ds.len());
        if let Some(field) = aligned_comb(spec, band, &ds.vectors()[j], &mut rng) {
            members.push(FamilyMember {
                name: format!("comb-{c}-v{j}"),
                field,
            });
        }
    }
    Ok(members)
}
