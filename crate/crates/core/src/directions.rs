//! Finite direction sets on the unit sphere (or circle).

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Unit vectors are stored padded to three components; 2-d sets have a zero third entry.
pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DirectionError {
    #[error("need at least {min} directions, got {got}")]
    TooFew { min: usize, got: usize },
    #[error("dimension must be 2 or 3, got {0}")]
    UnsupportedDimension(usize),
    #[error("cluster width must lie in (0, π], got {0}")]
    InvalidWidth(f64),
    #[error("vector {index} has norm {norm}, expected 1")]
    NotUnit { index: usize, norm: f64 },
    #[error("vector {index} has {got} components, expected {expected}")]
    WrongArity { index: usize, expected: usize, got: usize },
    #[error("malformed direction JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionKind {
    Separated,
    Random,
    Clustered,
    Explicit,
}

/// `N` unit vectors with their minimum pairwise distance.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    dim: usize,
    vectors: Vec<Vec3>,
    kind: DirectionKind,
    min_separation: f64,
}

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn length(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalized(a: &Vec3) -> Vec3 {
    let l = length(a);
    [a[0] / l, a[1] / l, a[2] / l]
}

fn distance(a: &Vec3, b: &Vec3) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    length(&d)
}

/// Exact minimum pairwise Euclidean distance by brute force; `∞` for fewer than two vectors.
pub fn min_separation_of(vectors: &[Vec3]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in vectors.iter().enumerate() {
        for b in &vectors[i + 1..] {
            best = best.min(distance(a, b));
        }
    }
    best
}

/// Fibonacci lattice on `S^2` (d = 3) or equispaced points on `S^1` (d = 2).
pub fn gen_separated(dim: usize, n: usize) -> Result<DirectionSet, DirectionError> {
    check_count(n, 2)?;
    let vectors = match dim {
        2 => (0..n)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / n as f64;
                [a.cos(), a.sin(), 0.0]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    [r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        d => return Err(DirectionError::UnsupportedDimension(d)),
    };
    Ok(DirectionSet::build(dim, vectors, DirectionKind::Separated))
}

/// Independent uniform directions.
pub fn gen_random(dim: usize, n: usize, seed: u64) -> Result<DirectionSet, DirectionError> {
    check_count(n, 1)?;
    if !(2..=3).contains(&dim) {
        return Err(DirectionError::UnsupportedDimension(dim));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vectors = (0..n)
        .map(|_| loop {
            let mut v = [0.0; 3];
            for c in v.iter_mut().take(dim) {
                *c = rng.sample(StandardNormal);
            }
            let l = length(&v);
            if l > 1e-8 {
                break [v[0] / l, v[1] / l, v[2] / l];
            }
        })
        .collect();
    Ok(DirectionSet::build(dim, vectors, DirectionKind::Random))
}

/// Directions in `S^2` whose latitude is at most `cluster_width / 2` away from the
/// equator `z = 0`, i.e. concentrated near one great circle.
pub fn gen_clustered(n: usize, cluster_width: f64, seed: u64) -> Result<DirectionSet, DirectionError> {
    check_count(n, 2)?;
    if !(cluster_width > 0.0 && cluster_width <= PI) {
        return Err(DirectionError::InvalidWidth(cluster_width));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = cluster_width / 2.0;
    let vectors = (0..n)
        .map(|_| {
            let lon = rng.random_range(0.0..2.0 * PI);
            let lat = rng.random_range(-half..=half);
            [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
        })
        .collect();
    Ok(DirectionSet::build(3, vectors, DirectionKind::Clustered))
}

fn check_count(n: usize, min: usize) -> Result<(), DirectionError> {
    if n < min {
        Err(DirectionError::TooFew { min, got: n })
    } else {
        Ok(())
    }
}

impl DirectionSet {
    fn build(dim: usize, vectors: Vec<Vec3>, kind: DirectionKind) -> Self {
        let min_separation = min_separation_of(&vectors);
        Self {
            dim,
            vectors,
            kind,
            min_separation,
        }
    }

    /// Wraps user-supplied vectors. Norms within `1e-6` of one are renormalized
    /// unless already unit to `1e-12`.
    pub fn explicit(dim: usize, vectors: Vec<Vec3>) -> Result<Self, DirectionError> {
        if !(2..=3).contains(&dim) {
            return Err(DirectionError::UnsupportedDimension(dim));
        }
        check_count(vectors.len(), 1)?;
        let mut out = Vec::with_capacity(vectors.len());
        for (index, v) in vectors.into_iter().enumerate() {
            if dim == 2 && v[2] != 0.0 {
                return Err(DirectionError::WrongArity {
                    index,
                    expected: 2,
                    got: 3,
                });
            }
            let norm = length(&v);
            if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
                return Err(DirectionError::NotUnit { index, norm });
            }
            out.push(if (norm - 1.0).abs() > 1e-12 { normalized(&v) } else { v });
        }
        Ok(Self::build(dim, out, DirectionKind::Explicit))
    }

    /// Subset of this set, tagged explicit.
    pub fn subset(&self, indices: &[usize]) -> Result<Self, DirectionError> {
        check_count(indices.len(), 1)?;
        let vectors = indices.iter().map(|&i| self.vectors[i]).collect();
        Ok(Self::build(self.dim, vectors, DirectionKind::Explicit))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec3] {
        &self.vectors
    }

    pub fn kind(&self) -> DirectionKind {
        self.kind
    }

    pub fn min_separation(&self) -> f64 {
        self.min_separation
    }

    /// Separation constant `min_separation · √N`.
    pub fn c_sep(&self) -> f64 {
        self.min_separation * (self.len() as f64).sqrt()
    }

    /// JSON array of unit vectors with `dim` components each.
    pub fn to_json(&self) -> String {
        let rows: Vec<Vec<f64>> = self.vectors.iter().map(|v| v[..self.dim].to_vec()).collect();
        serde_json::to_string(&rows).expect("finite floats always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, DirectionError> {
        let rows: Vec<Vec<f64>> = serde_json::from_str(text).map_err(|e| DirectionError::Json(e.to_string()))?;
        let dim = rows.first().map(Vec::len).ok_or(DirectionError::TooFew { min: 1, got: 0 })?;
        if !(2..=3).contains(&dim) {
            return Err(DirectionError::UnsupportedDimension(dim));
        }
        let mut vectors = Vec::with_capacity(rows.len());
        for (index, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(DirectionError::WrongArity {
                    index,
                    expected: dim,
                    got: row.len(),
                });
            }
            let mut v = [0.0; 3];
            v[..dim].copy_from_slice(row);
            vectors.push(v);
        }
        Self::explicit(dim, vectors)
    }
}

/// Minimum pairwise distance of a set (cached at construction).
pub fn min_separation(ds: &DirectionSet) -> f64 {
    ds.min_separation
}
