//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Set `DIRMAX_ACCEPTANCE_ONLY=3,7` to run a subset.

mod common;

use std::time::Instant;

use common::*;
use dirmax::combinat::{greedy_select_table, incidences, sqrt_ceil, SelectionPolicy};
use dirmax::directions::{dot, gen_clustered, gen_random, gen_separated, DirectionSet};
use dirmax::experiments::*;
use dirmax::freqdecomp::{grid_scales, make_tube_system, mu_k, project_s_k, project_tube, TubeSystem};
use dirmax::grid::{make_grid, norm, transform, Field, Spectrum};
use dirmax::make_profile;
use dirmax::martingale::{cond_expect, finest_level, martingale_differences};
use dirmax::maxop::{apply_nikodym, apply_t_v, nikodym_directions};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn spread(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

fn sharpness() -> Outcome {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Sharpness);
    cfg.grid_n = 256;
    cfg.domain_length = 8.0;
    cfg.num_dirs = vec![16, 64, 256];
    let out = run_sharpness(&cfg).map_err(|e| e.to_string())?;
    let scaled: Vec<f64> = out.points.iter().map(|p| p.scaled_norm).collect();
    let m0: Vec<f64> = out.points.iter().map(|p| p.m0_norm).collect();
    let ok = spread(&scaled) - 1.0 < 0.25 && m0.iter().all(|&x| (0.05..=20.0).contains(&x)) && spread(&m0) < 3.0;
    check(
        ok,
        format!(
            "|F|·N^(1/4) = {scaled:.4?} (spread {:.3}), |M0 F| = {m0:.4?} (spread {:.3})",
            spread(&scaled),
            spread(&m0)
        ),
    )
}

fn scaling_law() -> Outcome {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Sweep);
    cfg.grid_n = 64;
    cfg.domain_length = 8.0;
    cfg.num_dirs = vec![16, 32, 64, 128, 256, 512, 1024];
    let out = run_sweep(&cfg).map_err(|e| e.to_string())?;
    let slope = out.slope.ok_or("no slope")?;
    let maxes: Vec<f64> = out.points.iter().map(|p| p.max_ratio).collect();
    check((0.15..=0.35).contains(&slope), format!("slope {slope:.4}, max ratios {maxes:.3?}"))
}

fn per_annulus() -> Outcome {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Annulus);
    cfg.domain_length = 4.0;
    cfg.per_scale_grid = true;
    cfg.num_dirs = vec![16, 64, 256];
    cfg.k = (1..=5).collect();
    let out = run_annulus(&cfg).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for p in &out.points {
        let bound = 20.0 * p.envelope_scale.min(p.envelope_count);
        for (name, r) in &p.ratios {
            worst = worst.max(r / bound);
            if *r > bound {
                failures.push(format!("N={} k={} {name}: {r:.3} > {bound:.3}", p.num_dirs, p.k));
            }
        }
    }
    check(
        failures.is_empty(),
        format!("{} (N, k) pairs, worst ratio/bound {worst:.4}; {failures:?}", out.points.len()),
    )
}

fn oracle() -> Outcome {
    let spec = make_grid(3, 16, 16.0).unwrap();
    let rule = gauss_legendre(16);
    let mut worst: f64 = 0.0;
    for field_seed in 0..20u64 {
        let waves = PlaneWaves::random(spec, 12, 1.5, field_seed);
        let spectrum = transform(&waves.field());
        let ds = gen_random(3, 20, 1000 + field_seed).unwrap();
        for v in ds.vectors() {
            let got = apply_t_v(&spectrum, v, &make_profile()).map_err(|e| e.to_string())?;
            let want = waves.evaluate_weighted(|f| fejer_average_of_cosine(dot(&f, v), &rule));
            worst = worst.max(relative_l2(got.values(), &want));
        }
    }
    check(
        worst < 1e-5,
        format!("20 fields × 20 directions, worst relative L2 error {worst:.2e}"),
    )
}

fn random_field(spec: dirmax::grid::GridSpec, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::new(spec, (0..spec.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn invariants() -> Outcome {
    let spec = make_grid(3, 16, 4.0).unwrap();
    let mut parseval: f64 = 0.0;
    let mut tubes: f64 = 0.0;
    let mut unity: f64 = 0.0;
    let mut ortho: f64 = 0.0;
    let mut tower = true;
    for seed in 0..20 {
        let f = random_field(spec, seed);
        let s = transform(&f);
        let n2 = norm(&f, 2.0).unwrap().powi(2);
        parseval = parseval.max((n2 - s.norm_sq()).abs() / n2);
        for k in grid_scales(&spec).filter(|&k| 2f64.powi(k + 1) <= spec.nyquist()) {
            let ts = make_tube_system(k, &spec).unwrap();
            let sk = project_s_k(&s, k);
            let total: f64 = (0..ts.len()).map(|id| project_tube(&sk, &ts, id).unwrap().norm_sq()).sum();
            tubes = tubes.max((total - sk.norm_sq()).abs() / sk.norm_sq());
        }
        let diffs = martingale_differences(&f, finest_level(&spec) - 1).unwrap();
        for i in 0..diffs.len() {
            for j in 0..i {
                ortho = ortho.max(diffs[i].inner(&diffs[j]).unwrap().abs() / n2);
            }
        }
        let top = finest_level(&spec);
        let levels: Vec<Field> = (0..=top).map(|j| cond_expect(&f, j).unwrap()).collect();
        for i in 0..=top {
            for j in 0..=top {
                tower &= cond_expect(&levels[j as usize], i).unwrap().values() == levels[i.min(j) as usize].values();
            }
        }
    }
    spec.for_each_frequency(|_, f| {
        let r = dot(&f, &f).sqrt();
        if r > 0.0 {
            let sum: f64 = (-10..=20).map(|k| mu_k(k, r)).sum();
            unity = unity.max((sum - 1.0).abs());
        }
    });
    let ok = parseval < 1e-10 && tubes < 1e-10 && unity < 1e-10 && ortho < 1e-10 && tower;
    check(
        ok,
        format!("parseval {parseval:.1e}, tubes {tubes:.1e}, unity {unity:.1e}, differences {ortho:.1e}, tower exact {tower}"),
    )
}

fn combinatorics() -> Outcome {
    let tiny = make_grid(3, 8, 4.0).unwrap();
    let systems: Vec<TubeSystem> = (1..=5).map(|k| make_tube_system(k, &tiny).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failures = Vec::new();
    for instance in 0..200 {
        let n = rng.random_range(2..=512);
        let k = rng.random_range(1..=5usize);
        let seed = rng.random::<u64>();
        let ds: DirectionSet = match instance % 3 {
            0 => gen_separated(3, n).unwrap(),
            1 => gen_random(3, n, seed).unwrap(),
            _ => gen_clustered(n, rng.random_range(0.02..1.5), seed).unwrap(),
        };
        let table = incidences(&ds, &systems[k - 1]).unwrap();
        let policy = if instance % 2 == 0 {
            SelectionPolicy::LowestIndex
        } else {
            SelectionPolicy::Random { seed }
        };
        let sel = greedy_select_table(&table, policy);
        let t = sqrt_ceil(n);
        let ok = sel.verify(&table).is_ok()
            && sel.classes.iter().all(|c| c.len() >= t)
            && sel.len() * sel.len() <= n
            && sel.max_residual_count(&table) < t;
        if !ok {
            failures.push(format!("instance {instance}: N={n} k={k}"));
        }
    }
    let mut worst: f64 = 0.0;
    for (k, ts) in (1..=5).zip(&systems) {
        for n in [16usize, 32, 64, 128, 256, 512, 1024] {
            let table = incidences(&gen_separated(3, n).unwrap(), ts).unwrap();
            let nf = n as f64;
            let bound = 8.0 * (nf * 2f64.powi(-k)).max(nf.sqrt());
            worst = worst.max(table.max_count() as f64 / bound);
            if table.max_count() as f64 > bound {
                failures.push(format!("separated N={n} k={k}: {} > {bound}", table.max_count()));
            }
        }
    }
    check(
        failures.is_empty(),
        format!("200 instances; separated max n(ω)/bound {worst:.3}; {failures:?}"),
    )
}

fn nikodym() -> Outcome {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Nikodym);
    cfg.grid_n = 64;
    cfg.domain_length = 8.0;
    cfg.delta = vec![0.25, 0.125];
    cfg.random_members = 10;
    let out = run_nikodym(&cfg).map_err(|e| e.to_string())?;
    let random: Vec<&NikodymPoint> = out.points.iter().filter(|p| p.member.starts_with("random-")).collect();
    let worst = out.points.iter().map(|p| p.domination).fold(0.0, f64::max);
    let worst_random = random.iter().map(|p| p.domination).fold(0.0, f64::max);
    check(
        random.len() == 20 && worst <= 8.0,
        format!(
            "{} random fields, worst constant {worst_random:.3} (all members {worst:.3})",
            random.len()
        ),
    )
}

fn frequency_support() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (delta, n) in [(0.25, 32usize), (0.125, 64)] {
        let spec = make_grid(3, n, 2.0).unwrap();
        let ds = nikodym_directions(delta).unwrap();
        let step = spec.frequency_step();
        let lim = (n / 2 - 1) as i64;
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        while count < if delta == 0.25 { 10 } else { 20 } {
            let m = [
                rng.random_range(-lim..=lim),
                rng.random_range(-lim..=lim),
                rng.random_range(-lim..=lim),
            ];
            let r = step * ((m[0] * m[0] + m[1] * m[1] + m[2] * m[2]) as f64).sqrt();
            if r < 10.0 / delta {
                continue;
            }
            let c = Complex64::from_polar(0.5, rng.random_range(0.0..6.3));
            let f = Spectrum::from_modes(spec, &[(m, c), ([-m[0], -m[1], -m[2]], c.conj())]).inverse();
            let out = apply_nikodym(&f, delta, &ds, &make_profile()).map_err(|e| e.to_string())?;
            worst = worst.max(out.max_abs());
            count += 1;
        }
    }
    check(
        worst < 1e-12,
        format!("{count} pure modes with |f| ≥ 10/δ, max |N* F| = {worst:.1e}"),
    )
}

fn determinism() -> Outcome {
    let mut mismatched = Vec::new();
    for kind in [
        ExperimentKind::Sharpness,
        ExperimentKind::Sweep,
        ExperimentKind::Annulus,
        ExperimentKind::Combinatorics,
        ExperimentKind::Cww,
        ExperimentKind::Nikodym,
        ExperimentKind::Regimes,
    ] {
        let mut cfg = ExperimentConfig::new(kind);
        cfg.grid_n = 32;
        cfg.domain_length = 4.0;
        cfg.num_dirs = vec![8, 16];
        cfg.random_members = 3;
        cfg.seed = 77;
        match kind {
            ExperimentKind::Sharpness => cfg.num_dirs = vec![4, 16],
            ExperimentKind::Annulus => cfg.k = vec![1, 2],
            ExperimentKind::Regimes => {
                cfg.domain_length = 1.0;
                cfg.num_dirs = vec![4];
            }
            _ => {}
        }
        let csv = || -> Result<String, String> {
            let rows = run(&cfg).map_err(|e| format!("{kind:?}: {e}"))?;
            Ok(rows_to_csv(&rows.iter().map(ResultRow::without_timing).collect::<Vec<_>>()))
        };
        if csv()? != csv()? {
            mismatched.push(kind.name());
        }
    }
    check(mismatched.is_empty(), format!("7 experiments re-run; mismatched: {mismatched:?}"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let only: Option<Vec<usize>> = std::env::var("DIRMAX_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let criteria: [Criterion; 9] = [
        ("sharpness example", sharpness),
        ("scaling law", scaling_law),
        ("per-annulus bounds", per_annulus),
        ("oracle equivalence", oracle),
        ("exact invariants", invariants),
        ("combinatorial invariants", combinatorics),
        ("Nikodym domination", nikodym),
        ("frequency support", frequency_support),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let (status, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{status} {id}. {name} [{:.1}s]: {detail}", start.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
