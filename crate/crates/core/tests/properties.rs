use std::sync::OnceLock;

use dirmax::combinat::{greedy_select_table, incidences, sqrt_ceil, IncidenceTable, SelectionPolicy};
use dirmax::directions::{dot, gen_clustered, gen_random, gen_separated, DirectionSet, Vec3};
use dirmax::freqdecomp::{make_tube_system, mu_k, project_s_k, project_tube, TubeSystem};
use dirmax::grid::{make_grid, norm, pointwise_reduce_max, transform, Field, GridSpec};
use dirmax::make_profile;
use dirmax::martingale::{cond_expect, finest_level, martingale_differences};
use dirmax::maxop::apply_m0;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(spec: GridSpec, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::new(spec, (0..spec.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let l2 = dot(&v, &v);
        if l2 > 1e-4 && l2 <= 1.0 {
            let l = l2.sqrt();
            return [v[0] / l, v[1] / l, v[2] / l];
        }
    }
}

fn small_grid() -> GridSpec {
    make_grid(3, 16, 4.0).unwrap()
}

/// Tube systems for `k = 1..=5` on an 8³ grid; caps do not depend on the grid.
fn tube_systems() -> &'static Vec<TubeSystem> {
    static CELL: OnceLock<Vec<TubeSystem>> = OnceLock::new();
    CELL.get_or_init(|| {
        let spec = make_grid(3, 8, 4.0).unwrap();
        (1..=5).map(|k| make_tube_system(k, &spec).unwrap()).collect()
    })
}

fn direction_set(kind: u8, n: usize, seed: u64) -> DirectionSet {
    match kind {
        0 => gen_separated(3, n).unwrap(),
        1 => gen_random(3, n, seed).unwrap(),
        _ => gen_clustered(n, 0.05 + (seed % 10) as f64 * 0.05, seed).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn parseval_and_round_trip(seed in any::<u64>(), dim in 2usize..=3, n in prop::sample::select(vec![8usize, 16])) {
        let spec = make_grid(dim, n, 3.0).unwrap();
        let f = random_field(spec, seed);
        let s = transform(&f);
        let lhs = norm(&f, 2.0).unwrap().powi(2);
        let rhs = s.norm_sq();
        prop_assert!((lhs - rhs).abs() / lhs < 1e-10);
        let back = s.inverse();
        let err = norm(&back.sub(&f).unwrap(), 2.0).unwrap() / norm(&f, 2.0).unwrap();
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn reduce_max_ignores_order_and_duplicates(seed in any::<u64>(), count in 1usize..5, rot in 0usize..5) {
        let spec = make_grid(2, 8, 1.0).unwrap();
        let fields: Vec<Field> = (0..count).map(|i| random_field(spec, seed.wrapping_add(i as u64))).collect();
        let base = pointwise_reduce_max(fields.iter()).unwrap();
        let mut rotated = fields.clone();
        rotated.rotate_left(rot % count);
        let r = pointwise_reduce_max(rotated.iter()).unwrap();
        prop_assert_eq!(r.values(), base.values());
        let doubled: Vec<&Field> = fields.iter().chain(fields.iter()).collect();
        let d = pointwise_reduce_max(doubled).unwrap();
        prop_assert_eq!(d.values(), base.values());
    }

    #[test]
    fn generated_directions_are_unit_and_seeded(kind in 0u8..3, n in 2usize..300, seed in any::<u64>()) {
        let a = direction_set(kind, n, seed);
        let b = direction_set(kind, n, seed);
        prop_assert_eq!(a.vectors(), b.vectors());
        prop_assert_eq!(a.len(), n);
        for v in a.vectors() {
            prop_assert!((dot(v, v).sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn separated_directions_are_spread(n in 4usize..=4096) {
        let ds = gen_separated(3, n).unwrap();
        let c = ds.min_separation() * (n as f64).sqrt();
        prop_assert!((0.5..=4.0).contains(&c), "N={} c={}", n, c);
    }

    #[test]
    fn multipliers_sum_to_one(log_r in -8.0f64..20.0) {
        let r = log_r.exp2();
        let sum: f64 = (-40..=40).map(|k| mu_k(k, r)).sum();
        prop_assert!((sum - 1.0).abs() < 1e-10);
    }

    #[test]
    fn tubes_partition_caps(seed in any::<u64>(), k in 1usize..=5) {
        let ts = &tube_systems()[k - 1];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_unit(&mut rng);
        let id = ts.partition().locate(&u);
        prop_assert!(id < ts.len());
        prop_assert!(ts.partition().caps()[id].max_dot(&u) >= 1.0 - 1e-12);
    }

    #[test]
    fn strips_hug_a_great_circle(seed in any::<u64>(), k in 1usize..=5) {
        let ts = &tube_systems()[k - 1];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let id = rng.random_range(0..ts.len());
        let cap = &ts.tubes()[id].cap;
        let inv_r = 1.0 / ts.radius();
        for _ in 0..200 {
            let w = random_unit(&mut rng);
            let c = dot(&cap.center, &w).abs();
            let inside = ts.strip_contains(id, &w);
            if inside {
                prop_assert!(c <= inv_r + cap.angular_radius + 1e-12, "|c·w| = {} for k = {}", c, k);
            }
            if c <= inv_r {
                prop_assert!(inside);
            }
        }
    }

    #[test]
    fn owned_frequencies_certify_strip_membership(seed in any::<u64>(), k in 1i32..=3) {
        let spec = make_grid(3, 32, 4.0).unwrap();
        let ts = make_tube_system(k, &spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tube = &ts.tubes()[rng.random_range(0..ts.len())];
        let inv_r = 1.0 / ts.radius();
        for &flat in &tube.frequencies {
            let idx = spec.unflatten(flat);
            let f = [spec.frequency(idx[0]), spec.frequency(idx[1]), spec.frequency(idx[2])];
            let l = dot(&f, &f).sqrt();
            let u = [f[0] / l, f[1] / l, f[2] / l];
            prop_assert!(tube.cap.max_dot(&u) >= 1.0 - 1e-12);
            // any direction orthogonal to an owned frequency lies in the strip
            let a = if u[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            let w = dirmax::directions::normalized(&dirmax::directions::cross(&u, &a));
            prop_assert!(dot(&u, &w).abs() <= inv_r);
            prop_assert!(ts.strip_contains(tube.id, &w));
        }
    }

    #[test]
    fn selection_invariants(kind in 0u8..3, n in 2usize..400, seed in any::<u64>(), k in 1usize..=5, random_policy in any::<bool>()) {
        let ts = &tube_systems()[k - 1];
        let ds = direction_set(kind, n, seed);
        let table = incidences(&ds, ts).unwrap();
        let policy = if random_policy { SelectionPolicy::Random { seed } } else { SelectionPolicy::LowestIndex };
        let sel = greedy_select_table(&table, policy);
        prop_assert!(sel.verify(&table).is_ok(), "{:?}", sel.verify(&table));
        let t = sqrt_ceil(n);
        prop_assert!(sel.len() * sel.len() <= n);
        prop_assert!(sel.max_residual_count(&table) < t);
        for class in &sel.classes {
            prop_assert!(class.len() >= t);
        }
    }

    #[test]
    fn incidences_follow_relabeling(n in 2usize..200, seed in any::<u64>(), k in 1usize..=4) {
        let ts = &tube_systems()[k - 1];
        let ds = gen_random(3, n, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let shuffled = ds.subset(&perm).unwrap();
        let a = incidences(&ds, ts).unwrap();
        let b = incidences(&shuffled, ts).unwrap();
        prop_assert_eq!(&a.counts, &b.counts);
        for (tube, strip) in b.strips.iter().enumerate() {
            let mut mapped: Vec<usize> = strip.iter().map(|&i| perm[i]).collect();
            mapped.sort_unstable();
            prop_assert_eq!(&mapped, &a.strips[tube]);
        }
    }

    #[test]
    fn tower_property_and_contraction(seed in any::<u64>(), dim in 2usize..=3, n in prop::sample::select(vec![8usize, 16])) {
        let spec = make_grid(dim, n, 2.0).unwrap();
        let f = random_field(spec, seed);
        let top = finest_level(&spec);
        let levels: Vec<Field> = (0..=top).map(|j| cond_expect(&f, j).unwrap()).collect();
        for i in 0..=top {
            for j in 0..=top {
                let composed = cond_expect(&levels[j as usize], i).unwrap();
                prop_assert_eq!(composed.values(), levels[i.min(j) as usize].values());
            }
            for p in [1.0, 2.0, f64::INFINITY] {
                prop_assert!(norm(&levels[i as usize], p).unwrap() <= norm(&f, p).unwrap() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn martingale_differences_are_orthogonal(seed in any::<u64>()) {
        let spec = make_grid(3, 16, 2.0).unwrap();
        let f = random_field(spec, seed);
        let diffs = martingale_differences(&f, finest_level(&spec) - 1).unwrap();
        let scale = norm(&f, 2.0).unwrap().powi(2);
        for i in 0..diffs.len() {
            for j in 0..i {
                prop_assert!(diffs[i].inner(&diffs[j]).unwrap().abs() < 1e-10 * scale);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn tube_pieces_are_orthogonal(seed in any::<u64>(), k in 0i32..=2) {
        let spec = small_grid();
        let f = random_field(spec, seed);
        let s = transform(&f);
        let ts = make_tube_system(k, &spec).unwrap();
        let sk = project_s_k(&s, k);
        let total: f64 = (0..ts.len()).map(|id| project_tube(&sk, &ts, id).unwrap().norm_sq()).sum();
        prop_assert!((total - sk.norm_sq()).abs() < 1e-10 * sk.norm_sq());
    }

    #[test]
    fn m0_is_homogeneous_and_sublinear(seed in any::<u64>(), c in -8.0f64..8.0, n in 1usize..12) {
        let spec = small_grid();
        let f = random_field(spec, seed);
        let g = random_field(spec, seed.wrapping_add(1));
        let ds = gen_random(3, n, seed).unwrap();
        let p = make_profile();
        let mf = apply_m0(&f, &ds, &p).unwrap();
        let mg = apply_m0(&g, &ds, &p).unwrap();
        let mcf = apply_m0(&f.scaled(c), &ds, &p).unwrap();
        let msum = apply_m0(&f.add(&g).unwrap(), &ds, &p).unwrap();
        let tol = 1e-12 * (mf.max_abs() + mg.max_abs()).max(1.0);
        for i in 0..spec.len() {
            prop_assert!((mcf.values()[i] - c.abs() * mf.values()[i]).abs() <= tol * c.abs().max(1.0));
            prop_assert!(msum.values()[i] <= mf.values()[i] + mg.values()[i] + tol);
        }
    }
}

#[test]
fn separated_incidence_counts_stay_below_bound() {
    for (k, ts) in (1..=5).zip(tube_systems()) {
        for n in [16usize, 64, 256, 1024] {
            let table: IncidenceTable = incidences(&gen_separated(3, n).unwrap(), ts).unwrap();
            let nf = n as f64;
            let bound = 8.0 * (nf * 2f64.powi(-k)).max(nf.sqrt());
            assert!((table.max_count() as f64) <= bound, "k={k} N={n}: {} > {bound}", table.max_count());
        }
    }
}
