use std::time::Instant;

use super::config::{ExperimentConfig, ExperimentKind};
use super::family::{build_family, sharpness_field, sharpness_norm_analytic, Band};
use super::rows::{ResultRow, RowContext};
use super::ExperimentError;
use crate::combinat::{bad_tubes, greedy_select_table, incidences, sqrt_ceil, SelectionPolicy};
use crate::directions::DirectionSet;
use crate::freqdecomp::{grid_scales, make_profile, make_tube_system, mu_sum_up_to, project_s_k, regime_cutoff, split_regimes};
use crate::grid::{make_grid, norm, transform, Field, GridSpec, Spectrum};
use crate::martingale::{cww_check, finest_level, fit_cww_envelope, CwwReport};
use crate::maxop::{apply_m0, apply_m0_spectrum, apply_nikodym, apply_o, apply_t_v, nikodym_directions};

fn l2(f: &Field) -> f64 {
    norm(f, 2.0).expect("p = 2 is valid")
}

/// `M₀` of a spectrum obtained from a real field by even multipliers, so the
/// symmetry check of [`apply_m0_spectrum`] can be skipped; it would misfire on
/// spectra that consist of round-off only.
fn m0_of(spectrum: &Spectrum, ds: &DirectionSet) -> Result<Field, ExperimentError> {
    if ds.dim() != spectrum.spec().dim() {
        // reuse the operator's own error reporting
        return Ok(apply_m0_spectrum(spectrum, ds, &make_profile())?);
    }
    Ok(crate::maxop::m0_unchecked(spectrum, ds, &make_profile()))
}

/// Least-squares slope of `ln ratio` against `ln N`; `None` with fewer than two distinct `N`.
pub fn fit_slope(ns: &[usize], ratios: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = ns.iter().zip(ratios).map(|(&n, &r)| ((n as f64).ln(), r.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if pts.len() < 2 || sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Fit `ratio ≈ C · N^{1/4}` (times `√ln N` when `log_factor`); returns `C` and
/// the RMS residual in log space.
pub fn fit_quarter_law(ns: &[usize], ratios: &[f64], log_factor: bool) -> Option<(f64, f64)> {
    if ns.is_empty() {
        return None;
    }
    let model = |n: usize| {
        let n = n as f64;
        0.25 * n.ln() + if log_factor { 0.5 * n.ln().ln() } else { 0.0 }
    };
    let resid: Vec<f64> = ns.iter().zip(ratios).map(|(&n, &r)| r.ln() - model(n)).collect();
    let log_c = resid.iter().sum::<f64>() / resid.len() as f64;
    let rms = (resid.iter().map(|x| (x - log_c).powi(2)).sum::<f64>() / resid.len() as f64).sqrt();
    Some((log_c.exp(), rms))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharpnessPoint {
    pub num_dirs: usize,
    pub norm: f64,
    pub scaled_norm: f64,
    pub analytic_norm: f64,
    pub m0_norm: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct SharpnessOutcome {
    pub rows: Vec<ResultRow>,
    pub points: Vec<SharpnessPoint>,
}

pub fn run_sharpness(cfg: &ExperimentConfig) -> Result<SharpnessOutcome, ExperimentError> {
    let grid = cfg.grid()?;
    let ctx = RowContext::new(cfg);
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &n in &cfg.num_dirs {
        let start = Instant::now();
        let ctx = ctx.with_dirs(Some(n));
        let field = sharpness_field(n, &grid)?;
        let ds = cfg.directions(n)?;
        let nrm = l2(&field);
        let m0 = l2(&apply_m0(&field, &ds, &make_profile())?);
        drop(field);
        let p = SharpnessPoint {
            num_dirs: n,
            norm: nrm,
            scaled_norm: nrm * (n as f64).powf(0.25),
            analytic_norm: sharpness_norm_analytic(n),
            m0_norm: m0,
            ratio: m0 / nrm,
        };
        let secs = start.elapsed().as_secs_f64();
        for (q, v) in [
            ("norm", p.norm),
            ("norm_scaled", p.scaled_norm),
            ("norm_analytic", p.analytic_norm),
            ("m0_norm", p.m0_norm),
            ("ratio", p.ratio),
        ] {
            rows.push(ctx.row("sharpness", q, Some(v), secs));
        }
        points.push(p);
    }
    Ok(SharpnessOutcome { rows, points })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub num_dirs: usize,
    pub max_ratio: f64,
    pub argmax: String,
    pub ratios: Vec<(String, f64)>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<ResultRow>,
    pub points: Vec<SweepPoint>,
    pub slope: Option<f64>,
}

/// Max of `‖M₀F‖₂/‖F‖₂` over the test family, per `N`, and the fitted exponent.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutcome, ExperimentError> {
    let grid = cfg.grid()?;
    let ctx = RowContext::new(cfg);
    let mut rows = Vec::new();
    let mut points = Vec::new();
    let sweep_start = Instant::now();
    for &n in &cfg.num_dirs {
        let ctx = ctx.with_dirs(Some(n));
        let ds = cfg.directions(n)?;
        let family = build_family(&grid, &ds, Band::half_nyquist(&grid), cfg.random_members, cfg.seed)?;
        let mut ratios = Vec::new();
        for m in &family {
            let start = Instant::now();
            let spec = transform(&m.field);
            let ratio = l2(&m0_of(&spec, &ds)?) / l2(&m.field);
            rows.push(ctx.row(&m.name, "ratio", Some(ratio), start.elapsed().as_secs_f64()));
            ratios.push((m.name.clone(), ratio));
        }
        let (argmax, max_ratio) = ratios
            .iter()
            .cloned()
            .fold((String::new(), f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        rows.push(ctx.row("family", "max_ratio", Some(max_ratio), 0.0));
        points.push(SweepPoint {
            num_dirs: n,
            max_ratio,
            argmax,
            ratios,
        });
    }
    let ns: Vec<usize> = points.iter().map(|p| p.num_dirs).collect();
    let maxes: Vec<f64> = points.iter().map(|p| p.max_ratio).collect();
    let slope = fit_slope(&ns, &maxes);
    let secs = sweep_start.elapsed().as_secs_f64();
    rows.extend(summary_rows(&ctx, &ns, &maxes, slope, secs));
    Ok(SweepOutcome { rows, points, slope })
}

fn summary_rows(ctx: &RowContext, ns: &[usize], maxes: &[f64], slope: Option<f64>, secs: f64) -> Vec<ResultRow> {
    let mut rows = vec![ctx.row("family", "slope", slope, secs)];
    let quarter = fit_quarter_law(ns, maxes, false);
    let quarter_log = fit_quarter_law(ns, maxes, true);
    rows.push(ctx.row("family", "fit_const_quarter", quarter.map(|q| q.0), secs));
    rows.push(ctx.row("family", "rms_resid_quarter", quarter.map(|q| q.1), secs));
    rows.push(ctx.row("family", "fit_const_quarter_sqrtlog", quarter_log.map(|q| q.0), secs));
    rows.push(ctx.row("family", "rms_resid_quarter_sqrtlog", quarter_log.map(|q| q.1), secs));
    rows
}

/// Rows summarizing externally supplied ratios, as appended by [`run_sweep`].
pub fn sweep_summary(cfg: &ExperimentConfig, ns: &[usize], maxes: &[f64]) -> (Option<f64>, Vec<ResultRow>) {
    let slope = fit_slope(ns, maxes);
    (slope, summary_rows(&RowContext::new(cfg), ns, maxes, slope, 0.0))
}

/// Coarsest power-of-two grid on the torus of side `length` whose Nyquist
/// frequency is at least `1.5 · 2^{k+1}` (and at least 16 points per axis).
pub fn annulus_grid(k: i32, length: f64) -> Result<GridSpec, ExperimentError> {
    let mut n = 16;
    while std::f64::consts::PI * n as f64 / length < 1.5 * 2f64.powi(k + 1) {
        n *= 2;
    }
    Ok(make_grid(3, n, length)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnulusPoint {
    pub num_dirs: usize,
    pub k: i32,
    pub grid_n: usize,
    pub max_ratio: f64,
    /// `2^{k/2}`.
    pub envelope_scale: f64,
    /// `√max{N 2^{-k}, √N}`.
    pub envelope_count: f64,
    pub ratios: Vec<(String, f64)>,
}

#[derive(Debug, Clone)]
pub struct AnnulusOutcome {
    pub rows: Vec<ResultRow>,
    pub points: Vec<AnnulusPoint>,
}

/// Per `(N, k)`: max over the family of `‖M₀(S_kF)‖₂/‖S_kF‖₂`, with both envelopes.
pub fn run_annulus(cfg: &ExperimentConfig) -> Result<AnnulusOutcome, ExperimentError> {
    let ks: Vec<i32> = if cfg.k.is_empty() { (1..=5).collect() } else { cfg.k.clone() };
    let ctx = RowContext::new(cfg);
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &k in &ks {
        let grid = if cfg.per_scale_grid {
            annulus_grid(k, cfg.domain_length)?
        } else {
            cfg.grid()?
        };
        if 2f64.powi(k + 1) > grid.nyquist() {
            return Err(ExperimentError::BeyondNyquist {
                k,
                nyquist: grid.nyquist(),
            });
        }
        let ctx = ctx.with_grid(grid.points_per_axis()).with_k(Some(k));
        for &n in &cfg.num_dirs {
            let ctx = ctx.with_dirs(Some(n));
            let ds = cfg.directions(n)?;
            let family = build_family(&grid, &ds, Band::Scale(k), cfg.random_members, cfg.seed)?;
            let mut ratios = Vec::new();
            for m in &family {
                let start = Instant::now();
                let sk = project_s_k(&transform(&m.field), k);
                let input = sk.norm();
                let ratio = if input > 0.0 { Some(l2(&m0_of(&sk, &ds)?) / input) } else { None };
                rows.push(ctx.row(&m.name, "ratio", ratio, start.elapsed().as_secs_f64()));
                if let Some(r) = ratio {
                    ratios.push((m.name.clone(), r));
                }
            }
            let max_ratio = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
            let nf = n as f64;
            let p = AnnulusPoint {
                num_dirs: n,
                k,
                grid_n: grid.points_per_axis(),
                max_ratio,
                envelope_scale: 2f64.powf(k as f64 / 2.0),
                envelope_count: (nf * 2f64.powi(-k)).max(nf.sqrt()).sqrt(),
                ratios,
            };
            rows.push(ctx.row("family", "max_ratio", Some(p.max_ratio), 0.0));
            rows.push(ctx.row("family", "envelope_scale", Some(p.envelope_scale), 0.0));
            rows.push(ctx.row("family", "envelope_count", Some(p.envelope_count), 0.0));
            points.push(p);
        }
    }
    Ok(AnnulusOutcome { rows, points })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinatoricsPoint {
    pub num_dirs: usize,
    pub k: i32,
    pub max_count: usize,
    /// `8 · max(N 2^{-k}, √N)`.
    pub count_bound: f64,
    pub bad_tubes: usize,
    pub selected: usize,
    pub max_residual: usize,
    pub max_tubes_per_vector: usize,
    pub verified: bool,
}

#[derive(Debug, Clone)]
pub struct CombinatoricsOutcome {
    pub rows: Vec<ResultRow>,
    pub points: Vec<CombinatoricsPoint>,
}

pub fn run_combinatorics(cfg: &ExperimentConfig) -> Result<CombinatoricsOutcome, ExperimentError> {
    let ks: Vec<i32> = if cfg.k.is_empty() { (1..=5).collect() } else { cfg.k.clone() };
    // caps do not depend on the grid; a small grid keeps frequency ownership cheap
    let tiny = make_grid(3, 8, cfg.domain_length)?;
    let ctx = RowContext::new(cfg).with_grid(tiny.points_per_axis());
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &k in &ks {
        let ts = make_tube_system(k, &tiny)?;
        for &n in &cfg.num_dirs {
            let start = Instant::now();
            let ds = cfg.directions(n)?;
            let table = incidences(&ds, &ts)?;
            let sel = greedy_select_table(&table, SelectionPolicy::LowestIndex);
            let nf = n as f64;
            let p = CombinatoricsPoint {
                num_dirs: n,
                k,
                max_count: table.max_count(),
                count_bound: 8.0 * (nf * 2f64.powi(-k)).max(nf.sqrt()),
                bad_tubes: bad_tubes(&table, n).len(),
                selected: sel.len(),
                max_residual: sel.max_residual_count(&table),
                max_tubes_per_vector: table.max_tubes_per_vector(),
                verified: sel.verify(&table).is_ok(),
            };
            let secs = start.elapsed().as_secs_f64();
            let ctx = ctx.with_dirs(Some(n)).with_k(Some(k));
            for (q, v) in [
                ("tube_count", ts.len() as f64),
                ("max_count", p.max_count as f64),
                ("count_bound", p.count_bound),
                ("bad_tubes", p.bad_tubes as f64),
                ("selected", p.selected as f64),
                ("sqrt_n", sqrt_ceil(n) as f64),
                ("max_residual", p.max_residual as f64),
                ("max_tubes_per_vector", p.max_tubes_per_vector as f64),
                ("verified", if p.verified { 1.0 } else { 0.0 }),
            ] {
                rows.push(ctx.row("directions", q, Some(v), secs));
            }
            points.push(p);
        }
    }
    Ok(CombinatoricsOutcome { rows, points })
}

#[derive(Debug, Clone)]
pub struct CwwOutcome {
    pub rows: Vec<ResultRow>,
    pub reports: Vec<CwwReport>,
    /// Fitted `(c₁, c₂)` with `c₂` capped by the configuration.
    pub fit: Option<(f64, f64)>,
}

pub const CWW_EPSILONS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Good-lambda measurements on random band-limited fields; λ defaults to
/// multiples of the field's RMS value.
pub fn run_cww(cfg: &ExperimentConfig) -> Result<CwwOutcome, ExperimentError> {
    let grid = cfg.grid()?;
    let ctx = RowContext::new(cfg);
    let j_max = finest_level(&grid) - 1;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for i in 0..cfg.random_members {
        let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
        let Some(field) = super::family::random_band_limited(&grid, Band::half_nyquist(&grid), seed) else {
            continue;
        };
        let rms = l2(&field) / grid.volume().sqrt();
        let lambdas: Vec<f64> = if cfg.lambdas.is_empty() {
            [0.25, 0.5, 1.0, 1.5, 2.0].iter().map(|m| m * rms).collect()
        } else {
            cfg.lambdas.clone()
        };
        let name = format!("random-{i}");
        for &lambda in &lambdas {
            for &eps in &CWW_EPSILONS {
                let start = Instant::now();
                let r = cww_check(&field, lambda, eps, j_max, cfg.c1)?;
                let secs = start.elapsed().as_secs_f64();
                let ctx = ctx.with_lambda(Some(lambda), Some(eps));
                rows.push(ctx.row(&name, "lhs", Some(r.lhs_measure), secs));
                rows.push(ctx.row(&name, "rhs", Some(r.rhs_measure), secs));
                rows.push(ctx.row(&name, "implied_c2", Some(r.implied_c2), secs));
                reports.push(r);
            }
        }
    }
    let fit = fit_cww_envelope(&reports, cfg.c2_cap);
    rows.push(ctx.row("family", "fit_c1", fit.map(|f| f.0), 0.0));
    rows.push(ctx.row("family", "fit_c2", fit.map(|f| f.1), 0.0));
    Ok(CwwOutcome { rows, reports, fit })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NikodymPoint {
    pub delta: f64,
    pub member: String,
    pub ratio_nikodym: f64,
    pub ratio_m0: f64,
    /// `max_x N*F(x) / (M₀F^s + Σ_{0≤k≤log₂(1/δ)} M₀(S_kF))(x)`.
    pub domination: f64,
}

#[derive(Debug, Clone)]
pub struct NikodymOutcome {
    pub rows: Vec<ResultRow>,
    pub points: Vec<NikodymPoint>,
}

/// Pointwise `max N*/RHS` of the Nikodym domination, where the right side is
/// `M₀F^s + Σ_{0≤k≤⌊log₂(1/δ)⌋} M₀(S_kF)`.
pub fn nikodym_domination(field: &Field, delta: f64, ds: &DirectionSet) -> Result<(Field, Field, f64), ExperimentError> {
    let nik = apply_nikodym(field, delta, ds, &make_profile())?;
    let spec = transform(field);
    let low = spec.multiply_radial(|r| mu_sum_up_to(-1, r));
    let mut rhs = m0_of(&low, ds)?;
    let top = (1.0 / delta).log2().floor() as i32;
    for k in 0..=top {
        rhs = rhs.add(&m0_of(&project_s_k(&spec, k), ds)?)?;
    }
    let floor = 1e-12 * rhs.max_abs().max(nik.max_abs());
    let mut worst: f64 = 0.0;
    for (a, b) in nik.values().iter().zip(rhs.values()) {
        if *a <= floor {
            continue;
        }
        worst = worst.max(if *b <= floor { f64::INFINITY } else { a / b });
    }
    Ok((nik, rhs, worst))
}

pub fn run_nikodym(cfg: &ExperimentConfig) -> Result<NikodymOutcome, ExperimentError> {
    let grid = cfg.grid()?;
    let ctx = RowContext::new(cfg);
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &delta in &cfg.delta {
        if grid.spacing() > delta {
            return Err(ExperimentError::UnresolvedDelta {
                delta,
                spacing: grid.spacing(),
            });
        }
        let ds = nikodym_directions(delta)?;
        let ctx = ctx.with_delta(Some(delta)).with_dirs(Some(ds.len()));
        let family = build_family(&grid, &ds, Band::half_nyquist(&grid), cfg.random_members, cfg.seed)?;
        for m in &family {
            let start = Instant::now();
            let input = l2(&m.field);
            let (nik, _, domination) = nikodym_domination(&m.field, delta, &ds)?;
            let m0 = apply_m0(&m.field, &ds, &make_profile())?;
            let p = NikodymPoint {
                delta,
                member: m.name.clone(),
                ratio_nikodym: l2(&nik) / input,
                ratio_m0: l2(&m0) / input,
                domination,
            };
            let secs = start.elapsed().as_secs_f64();
            rows.push(ctx.row(&m.name, "ratio_nikodym", Some(p.ratio_nikodym), secs));
            rows.push(ctx.row(&m.name, "ratio_m0", Some(p.ratio_m0), secs));
            rows.push(ctx.row(&m.name, "domination", Some(p.domination), secs));
            points.push(p);
        }
    }
    Ok(NikodymOutcome { rows, points })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSets {
    pub lambda: f64,
    /// `|{max_v |T_v^l F| > 4λ}|`.
    pub target: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    /// Measure of the target set outside `E₁ ∪ E₂ ∪ E₃`.
    pub uncovered: f64,
    /// `|{G(F) > Nλ}|`.
    pub g_tail: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimePoint {
    pub num_dirs: usize,
    pub member: String,
    pub ratio_small: Option<f64>,
    pub ratio_intermediate: Option<f64>,
    /// `Σ_{0≤k≤K} ‖M₀S_kF‖₂ / ‖F^i‖₂`.
    pub intermediate_sum: Option<f64>,
    pub ratio_high: Option<f64>,
    pub high_norm_sq: f64,
    pub epsilon_n: f64,
    pub sets: Vec<LambdaSets>,
    /// `∫ λ |E_{λ,i}| dλ`, `i = 1, 2, 3`, by the trapezoid rule on the λ grid.
    pub integrals: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct RegimesOutcome {
    pub rows: Vec<ResultRow>,
    pub points: Vec<RegimePoint>,
}

/// `None` when the input part is round-off relative to `total`.
fn ratio_or_none(out: &Field, input: f64, total: f64) -> Option<f64> {
    (input > 1e-12 * total).then(|| l2(out) / input)
}

/// Instruments the split into low, intermediate and high frequencies.
pub fn run_regimes(cfg: &ExperimentConfig) -> Result<RegimesOutcome, ExperimentError> {
    let grid = cfg.grid()?;
    let ctx = RowContext::new(cfg);
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &n in &cfg.num_dirs {
        if n < 2 {
            return Err(ExperimentError::InvalidConfig("regimes need N ≥ 2".into()));
        }
        let cut = regime_cutoff(n);
        let needed = 2f64.powi(cut);
        if grid.max_frequency_norm() <= needed {
            return Err(ExperimentError::InfeasibleRegimes {
                num_dirs: n,
                needed,
                available: grid.max_frequency_norm(),
            });
        }
        let ds = cfg.directions(n)?;
        let ctx = ctx.with_dirs(Some(n));
        let family = build_family(&grid, &ds, Band::Ball(grid.max_frequency_norm()), cfg.random_members, cfg.seed)?;
        for m in &family {
            let start = Instant::now();
            let p = instrument_regimes(&m.field, &ds, cfg, &m.name)?;
            let secs = start.elapsed().as_secs_f64();
            for (q, v) in [
                ("ratio_small", p.ratio_small),
                ("ratio_intermediate", p.ratio_intermediate),
                ("intermediate_sum", p.intermediate_sum),
                ("ratio_high", p.ratio_high),
                ("high_norm_sq", Some(p.high_norm_sq)),
                ("epsilon_n", Some(p.epsilon_n)),
                ("integral_e1", Some(p.integrals[0])),
                ("integral_e2", Some(p.integrals[1])),
                ("integral_e3", Some(p.integrals[2])),
            ] {
                rows.push(ctx.row(&m.name, q, v, secs));
            }
            for s in &p.sets {
                let ctx = ctx.with_lambda(Some(s.lambda), Some(p.epsilon_n));
                for (q, v) in [
                    ("target", s.target),
                    ("e1", s.e1),
                    ("e2", s.e2),
                    ("e3", s.e3),
                    ("uncovered", s.uncovered),
                    ("g_tail", s.g_tail),
                ] {
                    rows.push(ctx.row(&m.name, q, Some(v), secs));
                }
            }
            points.push(p);
        }
    }
    Ok(RegimesOutcome { rows, points })
}

/// Regime measurements for a single field.
pub fn instrument_regimes(field: &Field, ds: &DirectionSet, cfg: &ExperimentConfig, name: &str) -> Result<RegimePoint, ExperimentError> {
    let grid = *field.spec();
    let n = ds.len();
    let cut = regime_cutoff(n);
    let profile = make_profile();
    let spectrum = transform(field);
    let (s, i, l) = split_regimes(&spectrum, n)?;

    let total = spectrum.norm();
    let ratio_small = ratio_or_none(&m0_of(&s, ds)?, s.norm(), total);
    let ratio_intermediate = ratio_or_none(&m0_of(&i, ds)?, i.norm(), total);
    let mut sum = 0.0;
    for k in 0..=cut {
        sum += l2(&m0_of(&project_s_k(&spectrum, k), ds)?);
    }
    let intermediate_sum = (i.norm() > 1e-12 * total).then(|| sum / i.norm());
    let ratio_high = ratio_or_none(&m0_of(&l, ds)?, l.norm(), total);

    // G(F) = (Σ_{k > K} O(M₀ S_k F)²)^{1/2}
    let mut g2 = vec![0.0; grid.len()];
    for k in (cut + 1)..=*grid_scales(&grid).end() {
        let o = apply_o(&m0_of(&project_s_k(&spectrum, k), ds)?);
        g2.iter_mut().zip(o.values()).for_each(|(a, x)| *a += x * x);
    }
    let g: Vec<f64> = g2.into_iter().map(f64::sqrt).collect();

    // T_v^l F, its mean and the pointwise maxima over Σ
    let mut target = vec![0.0f64; grid.len()];
    let mut centered = vec![0.0f64; grid.len()];
    let mut mean_max: f64 = 0.0;
    for v in ds.vectors() {
        let t = apply_t_v(&l, v, &profile)?;
        let mean = t.mean();
        mean_max = mean_max.max(mean.abs());
        for ((tg, c), x) in target.iter_mut().zip(centered.iter_mut()).zip(t.values()) {
            *tg = tg.max(x.abs());
            *c = c.max((x - mean).abs());
        }
    }

    let eps_n = 1.0 / (cfg.c1 * (n as f64).ln()).sqrt();
    let c3 = cfg.c3;
    let g_max = g.iter().cloned().fold(0.0, f64::max);
    let t_max = target.iter().cloned().fold(0.0, f64::max);
    let lambdas: Vec<f64> = if cfg.lambdas.is_empty() {
        let top = (t_max).max(c3 * g_max / eps_n).max(f64::MIN_POSITIVE) * 4.0;
        let bottom = top * 1e-4;
        (0..48).map(|j| bottom * (top / bottom).powf(j as f64 / 47.0)).collect()
    } else {
        cfg.lambdas.clone()
    };
    let cell = grid.cell_volume();
    let mut sets = Vec::new();
    for &lambda in &lambdas {
        let g_cut = eps_n * lambda / c3;
        let mut counts = [0usize; 6];
        for x in 0..grid.len() {
            let in_target = target[x] > 4.0 * lambda;
            let in_e1 = centered[x] > 2.0 * lambda && g[x] <= g_cut;
            let in_e2 = g[x] > g_cut;
            let in_e3 = mean_max > 2.0 * lambda;
            for (c, hit) in counts.iter_mut().zip([
                in_target,
                in_e1,
                in_e2,
                in_e3,
                in_target && !(in_e1 || in_e2 || in_e3),
                g[x] > n as f64 * lambda,
            ]) {
                *c += hit as usize;
            }
        }
        let m = |c: usize| c as f64 * cell;
        sets.push(LambdaSets {
            lambda,
            target: m(counts[0]),
            e1: m(counts[1]),
            e2: m(counts[2]),
            e3: m(counts[3]),
            uncovered: m(counts[4]),
            g_tail: m(counts[5]),
        });
    }
    let mut integrals = [0.0; 3];
    for w in sets.windows(2) {
        let h = w[1].lambda - w[0].lambda;
        for (i, (a, b)) in [(w[0].e1, w[1].e1), (w[0].e2, w[1].e2), (w[0].e3, w[1].e3)].into_iter().enumerate() {
            integrals[i] += 0.5 * h * (w[0].lambda * a + w[1].lambda * b);
        }
    }
    Ok(RegimePoint {
        num_dirs: n,
        member: name.to_owned(),
        ratio_small,
        ratio_intermediate,
        intermediate_sum,
        ratio_high,
        high_norm_sq: l.norm_sq(),
        epsilon_n: eps_n,
        sets,
        integrals,
    })
}

/// Runs the configured experiment and returns its rows.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, ExperimentError> {
    cfg.validate()?;
    Ok(match cfg.experiment {
        ExperimentKind::Sharpness => run_sharpness(cfg)?.rows,
        ExperimentKind::Sweep => run_sweep(cfg)?.rows,
        ExperimentKind::Annulus => run_annulus(cfg)?.rows,
        ExperimentKind::Combinatorics => run_combinatorics(cfg)?.rows,
        ExperimentKind::Cww => run_cww(cfg)?.rows,
        ExperimentKind::Nikodym => run_nikodym(cfg)?.rows,
        ExperimentKind::Regimes => run_regimes(cfg)?.rows,
    })
}
