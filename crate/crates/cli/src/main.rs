//! `dirmax`: runs one experiment and writes its rows as CSV.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dirmax::experiments::{
    run_annulus, run_combinatorics, run_cww, run_nikodym, run_regimes, run_sharpness, run_sweep, write_rows, DirsKind, ExperimentConfig,
    ExperimentError, ExperimentKind, ResultRow,
};

#[derive(Parser, Debug)]
#[command(name = "dirmax", version, about = "Directional maximal operator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Norms of the radial sharpness field and of its maximal function.
    Sharpness(Opts),
    /// Max ratio over the test family for each N, with the fitted exponent.
    Sweep(Opts),
    /// Ratios on single frequency annuli against both envelopes.
    Annulus(Opts),
    /// Strip incidences, bad tubes and the greedy selection.
    Combinatorics(Opts),
    /// Good-lambda measurements for the dyadic square function.
    Cww(Opts),
    /// Nikodym maximal function against the scale-by-scale domination.
    Nikodym(Opts),
    /// Low, intermediate and high frequency instrumentation.
    Regimes(Opts),
}

impl Command {
    fn split(self) -> (ExperimentKind, Opts) {
        match self {
            Command::Sharpness(o) => (ExperimentKind::Sharpness, o),
            Command::Sweep(o) => (ExperimentKind::Sweep, o),
            Command::Annulus(o) => (ExperimentKind::Annulus, o),
            Command::Combinatorics(o) => (ExperimentKind::Combinatorics, o),
            Command::Cww(o) => (ExperimentKind::Cww, o),
            Command::Nikodym(o) => (ExperimentKind::Nikodym, o),
            Command::Regimes(o) => (ExperimentKind::Regimes, o),
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum DirsArg {
    Fibonacci,
    Random,
    Clustered,
}

impl From<DirsArg> for DirsKind {
    fn from(d: DirsArg) -> Self {
        match d {
            DirsArg::Fibonacci => DirsKind::Fibonacci,
            DirsArg::Random => DirsKind::Random,
            DirsArg::Clustered => DirsKind::Clustered,
        }
    }
}

/// Flags override values from `--config`, which override the defaults.
#[derive(Args, Debug, Default)]
struct Opts {
    /// JSON configuration file with the same fields as the flags.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Grid points per axis (power of two).
    #[arg(long)]
    grid_n: Option<usize>,
    /// Side length of the periodic domain.
    #[arg(long)]
    domain_length: Option<f64>,
    #[arg(long, value_enum)]
    dirs: Option<DirsArg>,
    /// Direction count; repeat for several.
    #[arg(long = "num-dirs", value_name = "N")]
    num_dirs: Vec<usize>,
    /// Frequency scale; repeat for several.
    #[arg(long = "k", value_name = "K", allow_negative_numbers = true)]
    k: Vec<i32>,
    /// Half-width of the latitude band for clustered directions.
    #[arg(long)]
    cluster_width: Option<f64>,
    /// Tube radius for the Nikodym experiment; repeat for several.
    #[arg(long = "delta", value_name = "DELTA")]
    delta: Vec<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Random band-limited members of the test family.
    #[arg(long)]
    random_members: Option<usize>,
    /// Annulus runs: pick the coarsest grid resolving each scale.
    #[arg(long)]
    per_scale_grid: bool,
    /// CSV destination; standard output when absent.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug)]
enum CliError {
    Experiment(ExperimentError),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Experiment(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        CliError::Experiment(e)
    }
}

fn build_config(kind: ExperimentKind, opts: &Opts) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            // the subcommand decides the experiment, whatever the file says
            let mut value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| ExperimentError::InvalidConfig(format!("{}: {e}", path.display())))?;
            if let Some(obj) = value.as_object_mut() {
                obj.insert("experiment".into(), serde_json::Value::String(kind.name().into()));
            }
            ExperimentConfig::from_json(&value.to_string())?
        }
        None => ExperimentConfig::new(kind),
    };
    if let Some(v) = opts.grid_n {
        cfg.grid_n = v;
    }
    if let Some(v) = opts.domain_length {
        cfg.domain_length = v;
    }
    if let Some(v) = opts.dirs {
        cfg.dirs = v.into();
    }
    if !opts.num_dirs.is_empty() {
        cfg.num_dirs = opts.num_dirs.clone();
    }
    if !opts.k.is_empty() {
        cfg.k = opts.k.clone();
    }
    if let Some(v) = opts.cluster_width {
        cfg.cluster_width = v;
    }
    if !opts.delta.is_empty() {
        cfg.delta = opts.delta.clone();
    }
    if let Some(v) = opts.seed {
        cfg.seed = v;
    }
    if let Some(v) = opts.random_members {
        cfg.random_members = v;
    }
    if opts.per_scale_grid {
        cfg.per_scale_grid = true;
    }
    if let Some(p) = &opts.out {
        cfg.out = Some(p.display().to_string());
    }
    if opts.threads.is_some() {
        cfg.threads = opts.threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_owned(), |x| format!("{x:.4}"))
}

/// Runs the experiment, returning its rows and a human-readable summary.
fn execute(cfg: &ExperimentConfig) -> Result<(Vec<ResultRow>, Vec<String>), ExperimentError> {
    let mut lines = Vec::new();
    let rows = match cfg.experiment {
        ExperimentKind::Sharpness => {
            let o = run_sharpness(cfg)?;
            for p in &o.points {
                lines.push(format!(
                    "N={:<5} |F|={:.4} |F|*N^(1/4)={:.4} analytic={:.4} |M0 F|={:.4} ratio={:.4}",
                    p.num_dirs, p.norm, p.scaled_norm, p.analytic_norm, p.m0_norm, p.ratio
                ));
            }
            o.rows
        }
        ExperimentKind::Sweep => {
            let o = run_sweep(cfg)?;
            for p in &o.points {
                lines.push(format!("N={:<5} max ratio={:.4} ({})", p.num_dirs, p.max_ratio, p.argmax));
            }
            lines.push(format!("fitted exponent: {}", fmt_opt(o.slope)));
            o.rows
        }
        ExperimentKind::Annulus => {
            let o = run_annulus(cfg)?;
            for p in &o.points {
                lines.push(format!(
                    "k={:<2} N={:<5} grid={:<4} max ratio={:.4} 2^(k/2)={:.4} sqrt(max(N2^-k, sqrt N))={:.4}",
                    p.k, p.num_dirs, p.grid_n, p.max_ratio, p.envelope_scale, p.envelope_count
                ));
            }
            o.rows
        }
        ExperimentKind::Combinatorics => {
            let o = run_combinatorics(cfg)?;
            for p in &o.points {
                lines.push(format!(
                    "k={:<2} N={:<5} L={} sqrtN={} max residual={} max n(w)={} bound={:.1} bad={} verified={}",
                    p.k,
                    p.num_dirs,
                    p.selected,
                    dirmax::combinat::sqrt_ceil(p.num_dirs),
                    p.max_residual,
                    p.max_count,
                    p.count_bound,
                    p.bad_tubes,
                    p.verified
                ));
            }
            o.rows
        }
        ExperimentKind::Cww => {
            let o = run_cww(cfg)?;
            lines.push(format!("{} measurements", o.reports.len()));
            match o.fit {
                Some((c1, c2)) => lines.push(format!("envelope: c1={c1:.4} c2={c2:.4}")),
                None => lines.push(format!("no envelope with c2 <= {}", cfg.c2_cap)),
            }
            o.rows
        }
        ExperimentKind::Nikodym => {
            let o = run_nikodym(cfg)?;
            for p in &o.points {
                lines.push(format!(
                    "delta={:<6} {:<16} N*/F={:.4} M0/F={:.4} domination={:.4}",
                    p.delta, p.member, p.ratio_nikodym, p.ratio_m0, p.domination
                ));
            }
            o.rows
        }
        ExperimentKind::Regimes => {
            let o = run_regimes(cfg)?;
            for p in &o.points {
                lines.push(format!(
                    "N={:<3} {:<16} small={} intermediate={} sum={} high={} eps_N={:.4}",
                    p.num_dirs,
                    p.member,
                    fmt_opt(p.ratio_small),
                    fmt_opt(p.ratio_intermediate),
                    fmt_opt(p.intermediate_sum),
                    fmt_opt(p.ratio_high),
                    p.epsilon_n
                ));
            }
            o.rows
        }
    };
    Ok((rows, lines))
}

fn write_output(cfg: &ExperimentConfig, rows: &[ResultRow]) -> Result<(), CliError> {
    match &cfg.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
            write_rows(rows, BufWriter::new(file))?;
        }
        None => write_rows(rows, io::stdout().lock())?,
    }
    Ok(())
}

fn main_inner(cli: Cli) -> Result<(), CliError> {
    let (kind, opts) = cli.command.split();
    let cfg = build_config(kind, &opts)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| CliError::Io(e.to_string()))?;
    let (rows, summary) = pool.install(|| execute(&cfg))?;
    write_output(&cfg, &rows)?;
    let mut err = io::stderr().lock();
    for line in summary {
        let _ = writeln!(err, "{line}");
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dirmax: {e}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_defaults() {
        let cli = Cli::parse_from([
            "dirmax",
            "annulus",
            "--grid-n",
            "32",
            "--num-dirs",
            "16",
            "--num-dirs",
            "64",
            "--k",
            "-1",
            "--k",
            "2",
        ]);
        let (kind, opts) = cli.command.split();
        let cfg = build_config(kind, &opts).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Annulus);
        assert_eq!(cfg.grid_n, 32);
        assert_eq!(cfg.num_dirs, vec![16, 64]);
        assert_eq!(cfg.k, vec![-1, 2]);
    }
}
