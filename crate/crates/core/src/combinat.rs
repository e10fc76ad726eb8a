//! Incidences between directions and tube strips, and the greedy selection of
//! bad tubes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::directions::DirectionSet;
use crate::freqdecomp::TubeSystem;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CombinatError {
    #[error("incidences need three-dimensional directions, got dimension {0}")]
    DimensionMismatch(usize),
    #[error("selection invariant violated: {0}")]
    Invariant(String),
}

/// `⌈√n⌉`, the integer threshold for "at least √N".
pub fn sqrt_ceil(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r < n {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= n {
        r -= 1;
    }
    r
}

/// Which direction lies in which strip at one scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidenceTable {
    pub k: i32,
    pub direction_count: usize,
    /// `n(ω)` per tube.
    pub counts: Vec<usize>,
    /// Directions in each strip `A(ω)`, ascending.
    pub strips: Vec<Vec<usize>>,
    /// `Ω_{v,k}`: tubes whose strip contains `v`, ascending.
    pub tubes_of_vector: Vec<Vec<usize>>,
}

impl IncidenceTable {
    pub fn max_count(&self) -> usize {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn max_tubes_per_vector(&self) -> usize {
        self.tubes_of_vector.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("table serializes")
    }
}

/// Exact strip membership for every (direction, tube) pair.
pub fn incidences(ds: &DirectionSet, system: &TubeSystem) -> Result<IncidenceTable, CombinatError> {
    if ds.dim() != 3 {
        return Err(CombinatError::DimensionMismatch(ds.dim()));
    }
    let strips: Vec<Vec<usize>> = (0..system.len())
        .into_par_iter()
        .map(|id| {
            ds.vectors()
                .iter()
                .enumerate()
                .filter(|(_, w)| system.strip_contains(id, w))
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    let mut tubes_of_vector = vec![Vec::new(); ds.len()];
    for (id, members) in strips.iter().enumerate() {
        for &v in members {
            tubes_of_vector[v].push(id);
        }
    }
    Ok(IncidenceTable {
        k: system.k(),
        direction_count: ds.len(),
        counts: strips.iter().map(Vec::len).collect(),
        strips,
        tubes_of_vector,
    })
}

/// Tubes with `n(ω) ≥ ⌈√N⌉`.
pub fn bad_tubes(table: &IncidenceTable, n: usize) -> Vec<usize> {
    let t = sqrt_ceil(n);
    table.counts.iter().enumerate().filter(|(_, &c)| c >= t).map(|(i, _)| i).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPolicy {
    /// Pick the eligible tube with the smallest index.
    LowestIndex,
    /// Pick uniformly among eligible tubes.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub direction_count: usize,
    pub threshold: usize,
    pub selected_tubes: Vec<usize>,
    /// `V_l`: the directions claimed by `selected_tubes[l]`.
    pub classes: Vec<Vec<usize>>,
    /// `V`: incident directions never claimed.
    pub residual: Vec<usize>,
}

impl SelectionResult {
    /// Number of selected tubes `L`.
    pub fn len(&self) -> usize {
        self.selected_tubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected_tubes.is_empty()
    }

    /// Largest `|V ∩ A(ω)|` over all tubes.
    pub fn max_residual_count(&self, table: &IncidenceTable) -> usize {
        let mut in_residual = vec![false; table.direction_count];
        for &v in &self.residual {
            in_residual[v] = true;
        }
        table
            .strips
            .iter()
            .map(|s| s.iter().filter(|&&v| in_residual[v]).count())
            .max()
            .unwrap_or(0)
    }

    /// Checks disjointness, coverage, class sizes, `L ≤ √N` and the residual strip bound.
    pub fn verify(&self, table: &IncidenceTable) -> Result<(), CombinatError> {
        let fail = |msg: String| Err(CombinatError::Invariant(msg));
        let n = table.direction_count;
        let t = sqrt_ceil(n);
        if self.classes.len() != self.selected_tubes.len() {
            return fail("one class per selected tube".into());
        }
        let mut owner = vec![usize::MAX; n];
        let parts = self.classes.iter().chain(std::iter::once(&self.residual));
        for (p, part) in parts.enumerate() {
            for &v in part {
                if v >= n {
                    return fail(format!("direction {v} out of range"));
                }
                if owner[v] != usize::MAX {
                    return fail(format!("direction {v} claimed twice"));
                }
                owner[v] = p;
            }
        }
        for (v, tubes) in table.tubes_of_vector.iter().enumerate() {
            if tubes.is_empty() != (owner[v] == usize::MAX) {
                return fail(format!("direction {v}: claimed iff incident fails"));
            }
        }
        for (l, (class, &tube)) in self.classes.iter().zip(&self.selected_tubes).enumerate() {
            if class.len() < t {
                return fail(format!("class {l} has {} < {t} directions", class.len()));
            }
            if class.iter().any(|v| table.strips[tube].binary_search(v).is_err()) {
                return fail(format!("class {l} leaves the strip of tube {tube}"));
            }
        }
        if self.len() * self.len() > n {
            return fail(format!("L = {} exceeds √{n}", self.len()));
        }
        let worst = self.max_residual_count(table);
        if worst >= t {
            return fail(format!("a strip keeps {worst} ≥ {t} residual directions"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("selection serializes")
    }
}

/// Greedy selection with lowest-index tie-breaking.
pub fn greedy_select(ds: &DirectionSet, system: &TubeSystem) -> Result<SelectionResult, CombinatError> {
    Ok(greedy_select_table(&incidences(ds, system)?, SelectionPolicy::LowestIndex))
}

/// Repeatedly claims the unclaimed directions of a strip holding at least
/// `⌈√N⌉` of them, until no strip does.
pub fn greedy_select_table(table: &IncidenceTable, policy: SelectionPolicy) -> SelectionResult {
    let n = table.direction_count;
    let t = sqrt_ceil(n);
    let mut claimed = vec![false; n];
    let mut rng = match policy {
        SelectionPolicy::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        SelectionPolicy::LowestIndex => None,
    };
    let mut selected_tubes = Vec::new();
    let mut classes = Vec::new();
    loop {
        let unclaimed = |id: usize| table.strips[id].iter().filter(|&&v| !claimed[v]).count();
        let eligible: Vec<usize> = (0..table.strips.len()).filter(|&id| t > 0 && unclaimed(id) >= t).collect();
        let Some(&first) = eligible.first() else { break };
        let pick = match rng.as_mut() {
            Some(r) => eligible[r.random_range(0..eligible.len())],
            None => first,
        };
        let class: Vec<usize> = table.strips[pick].iter().copied().filter(|&v| !claimed[v]).collect();
        for &v in &class {
            claimed[v] = true;
        }
        selected_tubes.push(pick);
        classes.push(class);
    }
    let residual = (0..n).filter(|&v| !claimed[v] && !table.tubes_of_vector[v].is_empty()).collect();
    SelectionResult {
        direction_count: n,
        threshold: t,
        selected_tubes,
        classes,
        residual,
    }
}
