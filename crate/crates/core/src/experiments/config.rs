use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::directions::{gen_clustered, gen_random, gen_separated, DirectionSet};
use crate::grid::{make_grid, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Sharpness,
    Sweep,
    Annulus,
    Combinatorics,
    Cww,
    Nikodym,
    Regimes,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Sharpness => "sharpness",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::Annulus => "annulus",
            ExperimentKind::Combinatorics => "combinatorics",
            ExperimentKind::Cww => "cww",
            ExperimentKind::Nikodym => "nikodym",
            ExperimentKind::Regimes => "regimes",
        }
    }
}

/// How the direction set of an experiment is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirsKind {
    #[default]
    Fibonacci,
    Random,
    Clustered,
}

impl DirsKind {
    pub fn name(&self) -> &'static str {
        match self {
            DirsKind::Fibonacci => "fibonacci",
            DirsKind::Random => "random",
            DirsKind::Clustered => "clustered",
        }
    }
}

/// Parameters of one experiment run. Every field but `experiment` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub grid_n: usize,
    pub domain_length: f64,
    pub dirs: DirsKind,
    pub num_dirs: Vec<usize>,
    /// Scales; empty means the experiment's default range.
    pub k: Vec<i32>,
    pub cluster_width: f64,
    pub delta: Vec<f64>,
    pub seed: u64,
    pub family: String,
    /// Random band-limited members in the test family.
    pub random_members: usize,
    /// Annulus runs: use the coarsest grid resolving each `A_k` instead of `grid_n`.
    pub per_scale_grid: bool,
    /// Good-lambda constant `c₁` (regimes and cww).
    pub c1: f64,
    /// Constant `c₃` in the large-regime sets.
    pub c3: f64,
    /// Cap on `c₂` when fitting the good-lambda envelope.
    pub c2_cap: f64,
    /// Explicit λ grid; empty means automatic.
    pub lambdas: Vec<f64>,
    pub out: Option<String>,
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Sweep,
            grid_n: 64,
            domain_length: 8.0,
            dirs: DirsKind::Fibonacci,
            num_dirs: vec![16],
            k: Vec::new(),
            cluster_width: 0.1,
            delta: vec![0.25],
            seed: 0,
            family: super::family::FAMILY_VERSION.to_owned(),
            random_members: 10,
            per_scale_grid: false,
            c1: 1.0,
            c3: 1.0,
            c2_cap: 10.0,
            lambdas: Vec::new(),
            out: None,
            threads: None,
        }
    }
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn grid(&self) -> Result<GridSpec, ExperimentError> {
        Ok(make_grid(3, self.grid_n, self.domain_length)?)
    }

    /// Direction set of size `n` with the configured kind and seed.
    pub fn directions(&self, n: usize) -> Result<DirectionSet, ExperimentError> {
        Ok(match self.dirs {
            DirsKind::Fibonacci => gen_separated(3, n)?,
            DirsKind::Random => gen_random(3, n, self.seed)?,
            DirsKind::Clustered => gen_clustered(n, self.cluster_width, self.seed)?,
        })
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::InvalidConfig(msg));
        self.grid()?;
        if self.family != super::family::FAMILY_VERSION {
            return bad(format!("unknown test family {:?}", self.family));
        }
        if self.num_dirs.is_empty() || self.num_dirs.contains(&0) {
            return bad("num_dirs must be a nonempty list of positive counts".into());
        }
        if self.experiment == ExperimentKind::Sweep && self.num_dirs.windows(2).any(|w| w[0] >= w[1]) {
            return bad("sweep needs num_dirs strictly ascending".into());
        }
        if !(self.cluster_width > 0.0 && self.cluster_width <= std::f64::consts::PI) {
            return bad(format!("cluster_width must lie in (0, π], got {}", self.cluster_width));
        }
        if let Some(&d) = self.delta.iter().find(|&&d| !(d > 0.0 && d <= 0.5)) {
            return bad(format!("delta must lie in (0, 1/2], got {d}"));
        }
        if self.experiment == ExperimentKind::Nikodym && self.delta.is_empty() {
            return bad("nikodym needs at least one delta".into());
        }
        for (name, v) in [("c1", self.c1), ("c3", self.c3), ("c2_cap", self.c2_cap)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return bad("lambdas must be positive".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        Ok(())
    }
}
