use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::ExperimentError;

pub const SCHEMA_VERSION: u32 = 1;

/// One long-format output record. `value` is empty when a quantity does not apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub schema_version: u32,
    pub experiment: String,
    pub family: String,
    pub seed: u64,
    pub grid_n: usize,
    pub domain_length: f64,
    pub dir_kind: String,
    pub num_dirs: Option<usize>,
    pub k: Option<i32>,
    pub delta: Option<f64>,
    pub lambda: Option<f64>,
    pub epsilon: Option<f64>,
    pub member: String,
    pub quantity: String,
    pub value: Option<f64>,
    pub seconds: f64,
}

impl ResultRow {
    /// Same record with the timing column cleared, for reproducibility comparisons.
    pub fn without_timing(&self) -> ResultRow {
        ResultRow {
            seconds: 0.0,
            ..self.clone()
        }
    }
}

/// Builds rows that share the run-level columns.
#[derive(Debug, Clone)]
pub(crate) struct RowContext {
    base: ResultRow,
}

impl RowContext {
    pub(crate) fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            base: ResultRow {
                schema_version: SCHEMA_VERSION,
                experiment: cfg.experiment.name().to_owned(),
                family: cfg.family.clone(),
                seed: cfg.seed,
                grid_n: cfg.grid_n,
                domain_length: cfg.domain_length,
                dir_kind: cfg.dirs.name().to_owned(),
                num_dirs: None,
                k: None,
                delta: None,
                lambda: None,
                epsilon: None,
                member: String::new(),
                quantity: String::new(),
                value: None,
                seconds: 0.0,
            },
        }
    }

    pub(crate) fn with_grid(&self, grid_n: usize) -> Self {
        let mut c = self.clone();
        c.base.grid_n = grid_n;
        c
    }

    pub(crate) fn with_dirs(&self, n: Option<usize>) -> Self {
        let mut c = self.clone();
        c.base.num_dirs = n;
        c
    }

    pub(crate) fn with_k(&self, k: Option<i32>) -> Self {
        let mut c = self.clone();
        c.base.k = k;
        c
    }

    pub(crate) fn with_delta(&self, delta: Option<f64>) -> Self {
        let mut c = self.clone();
        c.base.delta = delta;
        c
    }

    pub(crate) fn with_lambda(&self, lambda: Option<f64>, epsilon: Option<f64>) -> Self {
        let mut c = self.clone();
        c.base.lambda = lambda;
        c.base.epsilon = epsilon;
        c
    }

    /// A row; non-finite values are recorded as not applicable.
    pub(crate) fn row(&self, member: &str, quantity: &str, value: Option<f64>, seconds: f64) -> ResultRow {
        ResultRow {
            member: member.to_owned(),
            quantity: quantity.to_owned(),
            value: value.filter(|v| v.is_finite()),
            seconds,
            ..self.base.clone()
        }
    }
}

pub fn write_rows<W: std::io::Write>(rows: &[ResultRow], out: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        // serde only emits headers together with a first record
        w.write_record(HEADER).map_err(csv_error)?;
    }
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush().map_err(|e| ExperimentError::Io(e.to_string()))?;
    Ok(())
}

pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_rows(rows, &mut buf).expect("writing to memory succeeds");
    String::from_utf8(buf).expect("csv output is UTF-8")
}

pub const HEADER: [&str; 16] = [
    "schema_version",
    "experiment",
    "family",
    "seed",
    "grid_n",
    "domain_length",
    "dir_kind",
    "num_dirs",
    "k",
    "delta",
    "lambda",
    "epsilon",
    "member",
    "quantity",
    "value",
    "seconds",
];

/// Parses and validates rows written by [`write_rows`].
pub fn read_rows<R: std::io::Read>(input: R) -> Result<Vec<ResultRow>, ExperimentError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_error)?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(ExperimentError::Schema(format!(
            "unexpected header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut rows = Vec::new();
    for rec in r.deserialize::<ResultRow>() {
        let row = rec.map_err(csv_error)?;
        if row.schema_version != SCHEMA_VERSION {
            return Err(ExperimentError::Schema(format!(
                "schema version {} is not {SCHEMA_VERSION}",
                row.schema_version
            )));
        }
        let finite = row.value.is_none_or(f64::is_finite)
            && row.delta.is_none_or(f64::is_finite)
            && row.lambda.is_none_or(f64::is_finite)
            && row.epsilon.is_none_or(f64::is_finite)
            && row.domain_length.is_finite()
            && row.seconds.is_finite()
            && row.seconds >= 0.0;
        if !finite {
            return Err(ExperimentError::Schema("non-finite number in row".into()));
        }
        rows.push(row);
    }
    Ok(rows)
}

fn csv_error(e: csv::Error) -> ExperimentError {
    ExperimentError::Csv(e.to_string())
}
