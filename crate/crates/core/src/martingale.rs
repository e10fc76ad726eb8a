//! Dyadic conditional expectations on the torus, martingale differences, the
//! square function and an empirical good-lambda check.
//!
//! Level `j` cubes have side `L / 2^j`, so `E₀` is the mean. Block averages are
//! built level by level with balanced pairwise sums of the `2^d` children, which
//! makes `E_j E_{j'} = E_{min(j, j')}` hold bit for bit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::{Field, GridSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MartingaleError {
    #[error("level {j} needs 2^{j} to divide {n}")]
    NotDivisible { j: u32, n: usize },
    #[error("square function level {j_max} exceeds the finest difference {max}")]
    LevelTooLarge { j_max: u32, max: u32 },
    #[error("lambda must be positive, got {0}")]
    InvalidLambda(f64),
    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
}

/// Finest dyadic level `log₂ n`, whose cubes are single cells.
pub fn finest_level(spec: &GridSpec) -> u32 {
    spec.points_per_axis().trailing_zeros()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DyadicLevel {
    pub j: u32,
    pub spec: GridSpec,
}

impl DyadicLevel {
    pub fn new(spec: &GridSpec, j: u32) -> Result<Self, MartingaleError> {
        if j > finest_level(spec) {
            return Err(MartingaleError::NotDivisible {
                j,
                n: spec.points_per_axis(),
            });
        }
        Ok(Self { j, spec: *spec })
    }

    pub fn cubes_per_axis(&self) -> usize {
        1 << self.j
    }

    pub fn cells_per_side(&self) -> usize {
        self.spec.points_per_axis() >> self.j
    }

    pub fn cube_side(&self) -> f64 {
        self.spec.domain_length() / self.cubes_per_axis() as f64
    }
}

/// Block averages of a field at every level `0..=J`.
#[derive(Debug, Clone)]
pub struct DyadicPyramid {
    spec: GridSpec,
    /// `levels[j]` holds `(2^j)^d` averages, row-major.
    levels: Vec<Vec<f64>>,
}

impl DyadicPyramid {
    pub fn new(field: &Field) -> Self {
        let spec = *field.spec();
        let d = spec.dim();
        let top = finest_level(&spec);
        // grids have power-of-two resolution, so the finest cubes are the cells
        let finest = field.values().to_vec();

        let mut levels = vec![finest];
        for j in (0..top).rev() {
            let child = levels.last().unwrap();
            let m = 1usize << j;
            let parent: Vec<f64> = (0..m.pow(d as u32))
                .into_par_iter()
                .map(|p| {
                    let mut idx = [0usize; 3];
                    let mut rest = p;
                    for a in (0..d).rev() {
                        idx[a] = rest % m;
                        rest /= m;
                    }
                    pairwise_children(child, &idx, d, 2 * m, 0, [0; 3]) / (1usize << d) as f64
                })
                .collect();
            levels.push(parent);
        }
        levels.reverse();
        Self { spec, levels }
    }

    pub fn finest(&self) -> u32 {
        (self.levels.len() - 1) as u32
    }

    /// `E_j F` broadcast back to the grid.
    pub fn expectation(&self, j: u32) -> Field {
        let spec = self.spec;
        let m = 1usize << j;
        let b = spec.points_per_axis() / m;
        let level = &self.levels[j as usize];
        let mut out = vec![0.0; spec.len()];
        spec.for_each_index(|flat, idx| {
            let mut cube = 0;
            for &i in idx.iter().take(spec.dim()) {
                cube = cube * m + i / b;
            }
            out[flat] = level[cube];
        });
        Field::from_vec_unchecked(spec, out)
    }
}

/// Balanced sum of the `2^d` children of parent `idx` on a child grid of `m` cubes per axis.
fn pairwise_children(child: &[f64], idx: &[usize; 3], d: usize, m: usize, axis: usize, offs: [usize; 3]) -> f64 {
    if axis == d {
        let mut flat = 0;
        for a in 0..d {
            flat = flat * m + 2 * idx[a] + offs[a];
        }
        return child[flat];
    }
    let mut lo = offs;
    let mut hi = offs;
    lo[axis] = 0;
    hi[axis] = 1;
    pairwise_children(child, idx, d, m, axis + 1, lo) + pairwise_children(child, idx, d, m, axis + 1, hi)
}

/// `E_j F`: average over the level-`j` cube containing each point.
pub fn cond_expect(field: &Field, j: u32) -> Result<Field, MartingaleError> {
    let top = finest_level(field.spec());
    if j > top {
        return Err(MartingaleError::NotDivisible {
            j,
            n: field.spec().points_per_axis(),
        });
    }
    Ok(DyadicPyramid::new(field).expectation(j))
}

/// `Δ_j F = E_{j+1}F - E_jF` for `j = 0..=j_max`.
pub fn martingale_differences(field: &Field, j_max: u32) -> Result<Vec<Field>, MartingaleError> {
    let top = finest_level(field.spec());
    if top == 0 || j_max > top - 1 {
        return Err(MartingaleError::LevelTooLarge {
            j_max,
            max: top.saturating_sub(1),
        });
    }
    let pyr = DyadicPyramid::new(field);
    let mut prev = pyr.expectation(0);
    let mut out = Vec::with_capacity(j_max as usize + 1);
    for j in 0..=j_max {
        let next = pyr.expectation(j + 1);
        out.push(next.sub(&prev).expect("same grid"));
        prev = next;
    }
    Ok(out)
}

/// `Δ(F) = (Σ_{j ≤ j_max} |Δ_j F|²)^{1/2}`.
pub fn square_function(field: &Field, j_max: u32) -> Result<Field, MartingaleError> {
    let diffs = martingale_differences(field, j_max)?;
    let mut acc = vec![0.0; field.spec().len()];
    for d in &diffs {
        acc.iter_mut().zip(d.values()).for_each(|(a, x)| *a += x * x);
    }
    Ok(Field::from_vec_unchecked(*field.spec(), acc.into_iter().map(f64::sqrt).collect()))
}

/// One evaluation of the good-lambda inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CwwReport {
    pub lambda: f64,
    pub epsilon: f64,
    pub c1: f64,
    /// `|{|F - E₀F| > 2λ, Δ(F) < ελ}|`.
    pub lhs_measure: f64,
    /// `|{sup_k |E_k F| > ελ}|`.
    pub rhs_measure: f64,
    /// `lhs / (rhs · e^{-c₁/ε²})`; zero when the left set is empty.
    pub implied_c2: f64,
}

impl CwwReport {
    pub const CSV_HEADER: [&'static str; 5] = ["lambda", "epsilon", "lhs", "rhs", "implied_c2"];

    pub fn csv_record(&self) -> [String; 5] {
        [
            self.lambda.to_string(),
            self.epsilon.to_string(),
            self.lhs_measure.to_string(),
            self.rhs_measure.to_string(),
            self.implied_c2.to_string(),
        ]
    }

    pub fn write_csv<W: std::io::Write>(reports: &[CwwReport], out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        for r in reports {
            w.write_record(r.csv_record())?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Measures both sides of the good-lambda inequality by counting cells.
/// The supremum runs over the levels `0..=j_max+1` seen by the square function.
pub fn cww_check(field: &Field, lambda: f64, epsilon: f64, j_max: u32, c1: f64) -> Result<CwwReport, MartingaleError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(MartingaleError::InvalidLambda(lambda));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(MartingaleError::InvalidEpsilon(epsilon));
    }
    let sq = square_function(field, j_max)?;
    let pyr = DyadicPyramid::new(field);
    let mean = pyr.expectation(0);
    let mut sup = vec![0.0f64; field.spec().len()];
    for j in 0..=j_max + 1 {
        let e = pyr.expectation(j);
        sup.iter_mut().zip(e.values()).for_each(|(s, x)| *s = s.max(x.abs()));
    }
    let cell = field.spec().cell_volume();
    let lhs = field
        .values()
        .iter()
        .zip(mean.values())
        .zip(sq.values())
        .filter(|((f, m), s)| (*f - *m).abs() > 2.0 * lambda && **s < epsilon * lambda)
        .count() as f64
        * cell;
    let rhs = sup.iter().filter(|&&s| s > epsilon * lambda).count() as f64 * cell;
    let implied_c2 = if lhs == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / (rhs * (-c1 / (epsilon * epsilon)).exp())
    };
    Ok(CwwReport {
        lambda,
        epsilon,
        c1,
        lhs_measure: lhs,
        rhs_measure: rhs,
        implied_c2,
    })
}

/// Largest `c₁` such that every report satisfies `lhs ≤ c₂_cap · e^{-c₁/ε²} · rhs`,
/// returned with the smallest admissible `c₂` for that `c₁`. `None` if even
/// `c₁ = 0` fails.
pub fn fit_cww_envelope(reports: &[CwwReport], c2_cap: f64) -> Option<(f64, f64)> {
    let mut c1 = f64::INFINITY;
    for r in reports.iter().filter(|r| r.lhs_measure > 0.0) {
        if r.rhs_measure == 0.0 {
            return None;
        }
        let ratio = r.lhs_measure / r.rhs_measure;
        if ratio > c2_cap {
            return None;
        }
        c1 = c1.min(r.epsilon * r.epsilon * (c2_cap / ratio).ln());
    }
    if c1.is_infinite() {
        return Some((f64::INFINITY, 0.0));
    }
    let c2 = reports
        .iter()
        .filter(|r| r.lhs_measure > 0.0)
        .map(|r| r.lhs_measure / r.rhs_measure * (c1 / (r.epsilon * r.epsilon)).exp())
        .fold(0.0, f64::max);
    Some((c1, c2))
}
