//! Frequency-side geometry: the averaging profile, the dyadic annulus
//! partition, cap/tube decompositions of an annulus and the strips of
//! directions that see a tube.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::directions::{dot, Vec3};
use crate::grid::{GridSpec, Spectrum};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecompError {
    #[error("scale must be non-negative, got {0}")]
    NegativeScale(i32),
    #[error("tube systems live in three dimensions, grid has dimension {0}")]
    NotThreeDimensional(usize),
    #[error("tube {0} does not exist")]
    UnknownTube(usize),
    #[error("spectrum grid does not match the tube system grid")]
    GridMismatch,
    #[error("direction has norm {0}, expected 1")]
    NotUnit(f64),
    #[error("direction count must be at least 2, got {0}")]
    TooFewDirections(usize),
}

/// An even averaging profile `ψ` whose transform `ψ̂` is supported in `[-1, 1]`.
pub trait Profile: Send + Sync {
    fn psi_hat(&self, tau: f64) -> f64;
    fn psi(&self, t: f64) -> f64;
}

/// Fejér kernel: `ψ̂(τ) = max(0, 1 - |τ|)`, `ψ(t) = (1 - cos t) / (π t²)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Fejer;

pub fn make_profile() -> Fejer {
    Fejer
}

impl Profile for Fejer {
    #[inline]
    fn psi_hat(&self, tau: f64) -> f64 {
        (1.0 - tau.abs()).max(0.0)
    }

    fn psi(&self, t: f64) -> f64 {
        if t.abs() < 1e-8 {
            return 1.0 / (2.0 * PI);
        }
        // 1 - cos t = 2 sin²(t/2) avoids cancellation near zero.
        let s = (0.5 * t).sin();
        2.0 * s * s / (PI * t * t)
    }
}

/// `C^∞` step: 0 for `r ≤ 1`, 1 for `r ≥ 2`.
pub fn smooth_step(r: f64) -> f64 {
    fn glue(x: f64) -> f64 {
        if x > 0.0 {
            (-1.0 / x).exp()
        } else {
            0.0
        }
    }
    if r <= 1.0 {
        0.0
    } else if r >= 2.0 {
        1.0
    } else {
        let a = glue(r - 1.0);
        a / (a + glue(2.0 - r))
    }
}

/// Annulus bump `μ(r) = s(2r) - s(r)`, supported in `[1/2, 2]`.
pub fn mu(r: f64) -> f64 {
    smooth_step(2.0 * r) - smooth_step(r)
}

/// `μ_k(r) = μ(2^{-k} r)`, supported in `A_k = [2^{k-1}, 2^{k+1}]`.
pub fn mu_k(k: i32, r: f64) -> f64 {
    mu(r * 2f64.powi(-k))
}

/// `Σ_{k ≤ k_max} μ_k(r)` in closed form (telescoping); equals 1 at `r = 0`.
pub fn mu_sum_up_to(k_max: i32, r: f64) -> f64 {
    1.0 - smooth_step(r * 2f64.powi(-k_max))
}

/// Scales `k` whose annulus meets a nonzero frequency of the grid.
pub fn grid_scales(spec: &GridSpec) -> std::ops::RangeInclusive<i32> {
    let lo = (spec.frequency_step() / 2.0).log2().ceil() as i32;
    let hi = (2.0 * spec.max_frequency_norm()).log2().floor() as i32;
    lo..=hi
}

/// `Ŝ_k F = F̂ · μ_k`.
pub fn project_s_k(spectrum: &Spectrum, k: i32) -> Spectrum {
    spectrum.multiply_radial(|r| mu_k(k, r))
}

/// Last scale of the intermediate regime, `⌊3 log₂ N⌋`.
pub fn regime_cutoff(n: usize) -> i32 {
    if n.is_power_of_two() {
        3 * n.trailing_zeros() as i32
    } else {
        (3.0 * (n as f64).log2()).floor() as i32
    }
}

/// Low (`k < 0`), intermediate (`0 ≤ k ≤ 3 log₂ N`) and high frequency parts.
pub fn split_regimes(spectrum: &Spectrum, n: usize) -> Result<(Spectrum, Spectrum, Spectrum), DecompError> {
    if n < 2 {
        return Err(DecompError::TooFewDirections(n));
    }
    let cut = regime_cutoff(n);
    let low = spectrum.multiply_radial(|r| mu_sum_up_to(-1, r));
    let mid = spectrum.multiply_radial(|r| mu_sum_up_to(cut, r) - mu_sum_up_to(-1, r));
    let high = spectrum.multiply_radial(|r| 1.0 - mu_sum_up_to(cut, r));
    Ok((low, mid, high))
}

fn to_polar(u: &Vec3) -> (f64, f64) {
    let theta = u[2].clamp(-1.0, 1.0).acos();
    let mut phi = u[1].atan2(u[0]);
    if phi < 0.0 {
        phi += 2.0 * PI;
    }
    if phi >= 2.0 * PI {
        phi = 0.0;
    }
    (theta, phi)
}

fn from_polar(theta: f64, phi: f64) -> Vec3 {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    dot(a, b).clamp(-1.0, 1.0).acos()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CapShape {
    /// `θ ∈ [0, θ_max)`.
    North { theta_max: f64 },
    /// `θ ∈ [θ_min, π]`.
    South { theta_min: f64 },
    /// `θ ∈ [θ_lo, θ_hi)`, `φ ∈ [φ_lo, φ_hi)`.
    Cell {
        theta_lo: f64,
        theta_hi: f64,
        phi_lo: f64,
        phi_hi: f64,
    },
}

/// A region of the unit sphere; the physical cap is its dilate by the partition radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cap {
    pub shape: CapShape,
    /// Unit center direction `c_ω / |c_ω|`.
    pub center: Vec3,
    /// Largest angle between the center and a point of the cap.
    pub angular_radius: f64,
}

impl Cap {
    fn new(shape: CapShape) -> Self {
        let center = match shape {
            CapShape::North { .. } => [0.0, 0.0, 1.0],
            CapShape::South { .. } => [0.0, 0.0, -1.0],
            CapShape::Cell {
                theta_lo,
                theta_hi,
                phi_lo,
                phi_hi,
            } => from_polar(best_center_theta(theta_lo, theta_hi, phi_hi - phi_lo), 0.5 * (phi_lo + phi_hi)),
        };
        let mut cap = Cap {
            shape,
            center,
            angular_radius: 0.0,
        };
        cap.angular_radius = cap
            .boundary_points(64)
            .iter()
            .map(|p| angle_between(&center, p))
            .fold(0.0, f64::max);
        cap
    }

    /// Area on the unit sphere.
    pub fn unit_area(&self) -> f64 {
        match self.shape {
            CapShape::North { theta_max } => 2.0 * PI * (1.0 - theta_max.cos()),
            CapShape::South { theta_min } => 2.0 * PI * (1.0 + theta_min.cos()),
            CapShape::Cell {
                theta_lo,
                theta_hi,
                phi_lo,
                phi_hi,
            } => (phi_hi - phi_lo) * (theta_lo.cos() - theta_hi.cos()),
        }
    }

    /// Points on the boundary, `per_edge` per edge.
    pub fn boundary_points(&self, per_edge: usize) -> Vec<Vec3> {
        let lin = |a: f64, b: f64, i: usize| a + (b - a) * i as f64 / per_edge as f64;
        let mut pts = Vec::new();
        match self.shape {
            CapShape::North { theta_max: t } | CapShape::South { theta_min: t } => {
                for i in 0..4 * per_edge {
                    pts.push(from_polar(t, lin(0.0, 2.0 * PI, i) / 4.0));
                }
            }
            CapShape::Cell {
                theta_lo,
                theta_hi,
                phi_lo,
                phi_hi,
            } => {
                for i in 0..=per_edge {
                    let phi = lin(phi_lo, phi_hi, i);
                    let theta = lin(theta_lo, theta_hi, i);
                    pts.push(from_polar(theta_lo, phi));
                    pts.push(from_polar(theta_hi, phi));
                    pts.push(from_polar(theta, phi_lo));
                    pts.push(from_polar(theta, phi_hi));
                }
            }
        }
        pts
    }

    /// Exact `max_{u ∈ cap} u·p` for a unit vector `p`.
    pub fn max_dot(&self, p: &Vec3) -> f64 {
        let (tp, pp) = to_polar(p);
        match self.shape {
            CapShape::North { theta_max } => (tp - theta_max).max(0.0).cos(),
            CapShape::South { theta_min } => (theta_min - tp).max(0.0).cos(),
            CapShape::Cell {
                theta_lo,
                theta_hi,
                phi_lo,
                phi_hi,
            } => {
                let mut best = f64::NEG_INFINITY;
                if pp >= phi_lo && pp <= phi_hi {
                    let gap = (theta_lo - tp).max(tp - theta_hi).max(0.0);
                    best = gap.cos();
                }
                for phi_e in [phi_lo, phi_hi] {
                    best = best.max(meridian_max_dot(p, tp, pp, phi_e, theta_lo, theta_hi));
                }
                best
            }
        }
    }

    /// Range `[min, max]` of `u·p` over the cap.
    pub fn dot_range(&self, p: &Vec3) -> (f64, f64) {
        let neg = [-p[0], -p[1], -p[2]];
        (-self.max_dot(&neg), self.max_dot(p))
    }
}

/// Max of `u·p` over the meridian arc `φ = φ_e`, `θ ∈ [θ_lo, θ_hi]`.
fn meridian_max_dot(p: &Vec3, tp: f64, pp: f64, phi_e: f64, theta_lo: f64, theta_hi: f64) -> f64 {
    let a = tp.sin() * (pp - phi_e).cos();
    let b = tp.cos();
    let beta = a.atan2(b);
    if beta >= theta_lo && beta <= theta_hi {
        return a.hypot(b);
    }
    dot(&from_polar(theta_lo, phi_e), p).max(dot(&from_polar(theta_hi, phi_e), p))
}

/// Center colatitude minimizing the larger of the top and bottom corner distances.
fn best_center_theta(theta_lo: f64, theta_hi: f64, width: f64) -> f64 {
    let half = 0.5 * width;
    let corner = |tc: f64, te: f64| {
        let c = tc.cos() * te.cos() + tc.sin() * te.sin() * half.cos();
        c.clamp(-1.0, 1.0).acos()
    };
    let (mut lo, mut hi) = (theta_lo, theta_hi);
    for _ in 0..100 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        let f1 = corner(m1, theta_lo).max(corner(m1, theta_hi));
        let f2 = corner(m2, theta_lo).max(corner(m2, theta_hi));
        if f1 < f2 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, PartialEq)]
struct Collar {
    theta_lo: f64,
    theta_hi: f64,
    count: usize,
    first: usize,
}

/// Zonal equal-area partition of the unit sphere into collars split in longitude.
#[derive(Debug, Clone, PartialEq)]
pub struct CapPartition {
    caps: Vec<Cap>,
    collars: Vec<Collar>,
}

impl CapPartition {
    /// Equal-area partition into `regions` pieces: two polar caps and collars whose
    /// cell counts follow the ideal collar areas with carried rounding error.
    pub fn equal_area(regions: usize) -> Self {
        assert!(regions >= 1, "a partition needs at least one region");
        if regions == 1 {
            let cap = Cap::new(CapShape::North { theta_max: PI + 1e-12 });
            return Self {
                caps: vec![cap],
                collars: vec![Collar {
                    theta_lo: 0.0,
                    theta_hi: PI,
                    count: 1,
                    first: 0,
                }],
            };
        }
        let m = regions as f64;
        let area = 4.0 * PI / m;
        let polar = 2.0 * (1.0 / m.sqrt()).asin();
        let mut collars = vec![Collar {
            theta_lo: 0.0,
            theta_hi: polar,
            count: 1,
            first: 0,
        }];
        if regions > 2 {
            let ideal_angle = area.sqrt();
            let n_collars = (((PI - 2.0 * polar) / ideal_angle).round() as usize).max(1);
            let fit_angle = (PI - 2.0 * polar) / n_collars as f64;
            let cap_area = |t: f64| 2.0 * PI * (1.0 - t.cos());
            let mut carry = 0.0;
            let mut cumulative = 1usize;
            let mut theta_prev = polar;
            for i in 1..=n_collars {
                let ideal = (cap_area(polar + i as f64 * fit_angle) - cap_area(polar + (i - 1) as f64 * fit_angle)) / area;
                let count = (ideal + carry).round().max(0.0) as usize;
                carry += ideal - count as f64;
                if count == 0 {
                    continue;
                }
                cumulative += count;
                let theta_hi = if i == n_collars {
                    PI - polar
                } else {
                    (1.0 - cumulative as f64 * area / (2.0 * PI)).clamp(-1.0, 1.0).acos()
                };
                collars.push(Collar {
                    theta_lo: theta_prev,
                    theta_hi,
                    count,
                    first: 0,
                });
                theta_prev = theta_hi;
            }
        }
        collars.push(Collar {
            theta_lo: PI - polar,
            theta_hi: PI,
            count: 1,
            first: 0,
        });

        let mut caps = Vec::new();
        let last = collars.len() - 1;
        for (ci, collar) in collars.iter_mut().enumerate() {
            collar.first = caps.len();
            if ci == 0 {
                caps.push(Cap::new(CapShape::North {
                    theta_max: collar.theta_hi,
                }));
            } else if ci == last {
                caps.push(Cap::new(CapShape::South {
                    theta_min: collar.theta_lo,
                }));
            } else {
                let width = 2.0 * PI / collar.count as f64;
                for j in 0..collar.count {
                    let phi_hi = if j + 1 == collar.count { 2.0 * PI } else { (j + 1) as f64 * width };
                    caps.push(Cap::new(CapShape::Cell {
                        theta_lo: collar.theta_lo,
                        theta_hi: collar.theta_hi,
                        phi_lo: j as f64 * width,
                        phi_hi,
                    }));
                }
            }
        }
        Self { caps, collars }
    }

    pub fn caps(&self) -> &[Cap] {
        &self.caps
    }

    pub fn len(&self) -> usize {
        self.caps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.caps.is_empty()
    }

    /// Index of the unique cap containing the unit vector `u`.
    pub fn locate(&self, u: &Vec3) -> usize {
        let (theta, phi) = to_polar(u);
        // First collar whose upper boundary lies above θ; the last collar is closed at π.
        let ci = self.collars.partition_point(|c| c.theta_hi <= theta).min(self.collars.len() - 1);
        let collar = &self.collars[ci];
        let j = ((phi * collar.count as f64 / (2.0 * PI)) as usize).min(collar.count - 1);
        collar.first + j
    }
}

/// Radial extrusion of one cap through the annulus `A_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tube {
    pub id: usize,
    pub cap: Cap,
    /// Flat indices of the grid frequencies owned by this tube.
    pub frequencies: Vec<usize>,
}

/// Cap partition of the sphere of radius `2^{k-1}` and the induced tubes of `A_k`.
#[derive(Debug, Clone)]
pub struct TubeSystem {
    k: i32,
    spec: GridSpec,
    partition: CapPartition,
    tubes: Vec<Tube>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeSystemSummary {
    pub k: i32,
    pub radius: f64,
    pub cap_count: usize,
    pub max_cap_radius: f64,
    pub frequency_counts: Vec<usize>,
}

pub fn make_tube_system(k: i32, spec: &GridSpec) -> Result<TubeSystem, DecompError> {
    TubeSystem::new(k, spec)
}

impl TubeSystem {
    pub fn new(k: i32, spec: &GridSpec) -> Result<Self, DecompError> {
        if k < 0 {
            return Err(DecompError::NegativeScale(k));
        }
        if spec.dim() != 3 {
            return Err(DecompError::NotThreeDimensional(spec.dim()));
        }
        let partition = Self::partition_for_scale(k);
        let mut tubes: Vec<Tube> = partition
            .caps()
            .iter()
            .enumerate()
            .map(|(id, cap)| Tube {
                id,
                cap: cap.clone(),
                frequencies: Vec::new(),
            })
            .collect();
        let (r_lo, r_hi) = (2f64.powi(k - 1), 2f64.powi(k + 1));
        spec.for_each_frequency(|flat, f| {
            let r = (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt();
            if r >= r_lo && r <= r_hi {
                let u = [f[0] / r, f[1] / r, f[2] / r];
                tubes[partition.locate(&u)].frequencies.push(flat);
            }
        });
        Ok(Self {
            k,
            spec: *spec,
            partition,
            tubes,
        })
    }

    /// Smallest equal-area partition (grown in 5% steps) whose caps fit in a
    /// geodesic disk of radius 1 on the sphere of radius `2^{k-1}`.
    fn partition_for_scale(k: i32) -> CapPartition {
        let radius = 2f64.powi(k - 1);
        let limit = 1.0 / radius;
        let mut regions = ((PI / 2.0) * 4f64.powi(k)).ceil().max(2.0) as usize;
        loop {
            let p = CapPartition::equal_area(regions);
            if p.caps().iter().all(|c| c.angular_radius <= limit) {
                return p;
            }
            regions = (regions as f64 * 1.05).ceil() as usize + 1;
        }
    }

    pub fn k(&self) -> i32 {
        self.k
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Radius `2^{k-1}` of the partitioned sphere.
    pub fn radius(&self) -> f64 {
        2f64.powi(self.k - 1)
    }

    pub fn tubes(&self) -> &[Tube] {
        &self.tubes
    }

    pub fn len(&self) -> usize {
        self.tubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tubes.is_empty()
    }

    pub fn partition(&self) -> &CapPartition {
        &self.partition
    }

    pub fn tube(&self, id: usize) -> Result<&Tube, DecompError> {
        self.tubes.get(id).ok_or(DecompError::UnknownTube(id))
    }

    /// Physical cap area on the sphere of radius `2^{k-1}`.
    pub fn cap_area(&self, id: usize) -> f64 {
        self.tubes[id].cap.unit_area() * self.radius().powi(2)
    }

    /// Whether `w` lies in the strip `A(ω)`: some `f ∈ ω` has `|f·w| ≤ 1`.
    ///
    /// `|f·w|` over the tube is smallest on the inner sphere, so the test reduces
    /// to whether the exact range of `u·w` over the cap meets `[-1/R, 1/R]`.
    pub fn strip_contains(&self, id: usize, w: &Vec3) -> bool {
        let (lo, hi) = self.tubes[id].cap.dot_range(w);
        let band = 1.0 / self.radius();
        lo <= band && hi >= -band
    }

    pub fn summary(&self) -> TubeSystemSummary {
        TubeSystemSummary {
            k: self.k,
            radius: self.radius(),
            cap_count: self.tubes.len(),
            max_cap_radius: self.tubes.iter().map(|t| t.cap.angular_radius * self.radius()).fold(0.0, f64::max),
            frequency_counts: self.tubes.iter().map(|t| t.frequencies.len()).collect(),
        }
    }
}

/// `F̂_ω = F̂ · 1_ω` (sharp cutoff to the frequencies owned by the tube).
pub fn project_tube(spectrum: &Spectrum, system: &TubeSystem, id: usize) -> Result<Spectrum, DecompError> {
    if spectrum.spec() != system.spec() {
        return Err(DecompError::GridMismatch);
    }
    Ok(spectrum.restrict_to(&system.tube(id)?.frequencies))
}

pub fn strip_membership(system: &TubeSystem, id: usize, w: &Vec3) -> Result<bool, DecompError> {
    let n = dot(w, w).sqrt();
    if (n - 1.0).abs() > 1e-9 {
        return Err(DecompError::NotUnit(n));
    }
    system.tube(id)?;
    Ok(system.strip_contains(id, w))
}
