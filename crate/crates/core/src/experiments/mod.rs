//! Experiment drivers producing long-format CSV rows.

mod config;
mod family;
mod rows;
mod runs;

pub use config::{DirsKind, ExperimentConfig, ExperimentKind};
pub use family::{
    aligned_comb, build_family, random_band_limited, sampled_sharpness_field, sharpness_field, sharpness_norm_analytic, Band, FamilyMember,
    FAMILY_VERSION, SHARPNESS_MIN_LENGTH,
};
pub use rows::{read_rows, rows_to_csv, write_rows, ResultRow, HEADER, SCHEMA_VERSION};
pub use runs::*;

use crate::combinat::CombinatError;
use crate::directions::DirectionError;
use crate::freqdecomp::DecompError;
use crate::grid::GridError;
use crate::martingale::MartingaleError;
use crate::maxop::MaxOpError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Direction(#[from] DirectionError),
    #[error(transparent)]
    Decomp(#[from] DecompError),
    #[error(transparent)]
    MaxOp(#[from] MaxOpError),
    #[error(transparent)]
    Combinat(#[from] CombinatError),
    #[error(transparent)]
    Martingale(#[from] MartingaleError),
    #[error("grid spacing {spacing} does not resolve N = {num_dirs}: need at most {required}")]
    GridTooCoarse { num_dirs: usize, spacing: f64, required: f64 },
    #[error("domain length {0} is below the sharpness support diameter 4")]
    DomainTooSmall(f64),
    #[error("annulus {k} exceeds the Nyquist frequency {nyquist}")]
    BeyondNyquist { k: i32, nyquist: f64 },
    #[error("N = {num_dirs} needs frequencies above {needed}, grid reaches {available}")]
    InfeasibleRegimes { num_dirs: usize, needed: f64, available: f64 },
    #[error("grid spacing {spacing} does not resolve delta = {delta}")]
    UnresolvedDelta { delta: f64, spacing: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("io: {0}")]
    Io(String),
    #[error("schema: {0}")]
    Schema(String),
}
