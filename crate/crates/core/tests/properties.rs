mod common;

use common::{hc_value, la_pairs, la_value, random_metric, random_order, random_tree, rng};
use multipeel::format::{parse_metric, write_metric};
use multipeel::hc_dense::{has_not_all_small_weights, solve_hc_dense, DenseHcConfig};
use multipeel::hc_peeling::{solve_hc, HcPeelConfig};
use multipeel::instances::{generate, GeneratorSpec};
use multipeel::la_dense::{solve_la_dense, DenseLaConfig};
use multipeel::la_peeling::{solve_la, LaPeelConfig};
use multipeel::metric::{find_core, full_stats, Density, Metric};
use multipeel::objectives::{evaluate_hc, evaluate_la, HcTree, LinearArrangement};
use multipeel::oracles::{average_linkage_hc, brute_force_hc, brute_force_la, random_bisection_la};
use multipeel::partition::{search_partition, PartitionSpec, SearchBudget, SearchOutcome, WeightBound};
use multipeel::trace::RecursionTrace;
use proptest::prelude::*;

fn family_metric() -> impl Strategy<Value = Metric> {
    (0usize..7, 2usize..40, any::<u64>()).prop_map(|(f, n, s)| {
        let spec = GeneratorSpec { family: common::family(f, n, s), n, dim: 1 + (s % 3) as usize, seed: s };
        generate(&spec).unwrap()
    })
}

fn small_metric() -> impl Strategy<Value = Metric> {
    prop_oneof![
        (0usize..7, 3usize..=7, any::<u64>()).prop_map(|(f, n, s)| {
            generate(&GeneratorSpec { family: common::family(f, n, s), n, dim: 2, seed: s }).unwrap()
        }),
        (3usize..=7, 0.5f64..0.95, any::<u64>()).prop_map(|(n, lo, s)| random_metric(n, lo, &mut rng(s))),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn core_meets_size_and_diameter_bounds(m in family_metric()) {
        let s = full_stats(&m);
        if let Density::Value(rho) = s.density {
            let core = find_core(&m).unwrap();
            let n = m.n() as f64;
            prop_assert!(core.core.len() as f64 >= n * (1.0 - rho.sqrt()) - 1e-9);
            prop_assert!(m.diameter_of(&core.core) <= 4.0 * s.diameter * rho.sqrt() + 1e-9 * s.diameter);
            prop_assert!(rho >= 1.0 / (2.0 * n) - 1e-12);
        }
    }

    #[test]
    fn matrix_text_round_trip_is_idempotent(m in family_metric()) {
        let text = write_metric(&m);
        let back = parse_metric(&text).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(write_metric(&back), text);
    }

    #[test]
    fn evaluators_match_pair_loops(m in family_metric(), s in any::<u64>()) {
        let mut r = rng(s);
        let order = random_order(m.n(), &mut r);
        let y = LinearArrangement::from_order(&order).unwrap();
        let v = evaluate_la(&m, &y).unwrap();
        prop_assert!((v - la_pairs(&m, &order)).abs() <= 1e-12 * v.max(1.0));
        prop_assert!((evaluate_la(&m, &y.reversed()).unwrap() - v).abs() <= 1e-12 * v.max(1.0));

        let t = random_tree(&(0..m.n()).collect::<Vec<_>>(), &mut r);
        let h = evaluate_hc(&m, &t).unwrap();
        prop_assert!((h - hc_value(&m, &t)).abs() <= 1e-12 * h.max(1.0));
        let canon = t.canonical();
        prop_assert!((evaluate_hc(&m, &canon).unwrap() - h).abs() <= 1e-12 * h.max(1.0));
        let parsed: HcTree = t.to_newick().parse().unwrap();
        prop_assert_eq!(parsed, t);
    }

    #[test]
    fn not_all_small_weights_holds_when_dense(m in family_metric(), eps in 0.05f64..0.9) {
        if full_stats(&m).density.at_least(eps * eps) {
            prop_assert!(has_not_all_small_weights(&m, eps * eps, eps * eps));
        }
    }

    #[test]
    fn peeling_outputs_are_valid_and_traced(m in family_metric(), eps in 0.2f64..0.6, seed in 0u64..4) {
        let mut la = LaPeelConfig::new(eps);
        la.dense.budget = SearchBudget { exhaustive_n: 8, restarts: 2, moves_per_point: 10 };
        la.dense.seed = seed;
        let (y, trace) = solve_la(&m, &la).unwrap();
        prop_assert_eq!(y.len(), m.n());
        prop_assert!(trace.well_formed());
        prop_assert!((trace.levels[0].value - la_value(&m, &y)).abs() <= 1e-9 * trace.levels[0].value.max(1.0));
        let back = RecursionTrace::from_json_lines(&trace.to_json_lines()).unwrap();
        prop_assert_eq!(back, trace);

        let mut hc = HcPeelConfig::new(eps);
        hc.dense.budget = la.dense.budget;
        hc.dense.seed = seed;
        let (t, trace) = solve_hc(&m, &hc).unwrap();
        t.validate_for(m.n()).unwrap();
        prop_assert!(trace.well_formed());
        prop_assert!((trace.levels[0].value - hc_value(&m, &t)).abs() <= 1e-9 * trace.levels[0].value.max(1.0));
    }

    #[test]
    fn solvers_never_beat_oracles(m in small_metric(), seed in 0u64..8) {
        let la_opt = brute_force_la(&m).unwrap();
        let hc_opt = brute_force_hc(&m).unwrap();
        let tol = |v: f64| v * (1.0 + 1e-9) + 1e-12;
        prop_assert!((la_value(&m, &la_opt.witness) - la_opt.value).abs() <= 1e-9 * la_opt.value.max(1.0));
        prop_assert!((hc_value(&m, &hc_opt.witness) - hc_opt.value).abs() <= 1e-9 * hc_opt.value.max(1.0));

        let y = solve_la_dense(&m, &DenseLaConfig { seed, ..DenseLaConfig::new(0.5) }).unwrap();
        prop_assert!(la_value(&m, &y) <= tol(la_opt.value));
        let y = random_bisection_la(&m, seed);
        prop_assert!(la_value(&m, &y) <= tol(la_opt.value));

        let t = solve_hc_dense(&m, &DenseHcConfig { seed, ..DenseHcConfig::new(0.5) }).unwrap();
        prop_assert!(hc_value(&m, &t) <= tol(hc_opt.value));
        let avg = hc_value(&m, &average_linkage_hc(&m));
        prop_assert!(avg <= tol(hc_opt.value));
        prop_assert!(avg >= 2.0 / 3.0 * hc_opt.value - 1e-9);
    }

    #[test]
    fn reduced_la_never_loses_to_its_identity_start(m in family_metric(), seed in any::<u64>()) {
        let mut cfg = DenseLaConfig::new(0.5);
        cfg.seed = seed;
        cfg.budget = SearchBudget { exhaustive_n: 8, restarts: 3, moves_per_point: 20 };
        let y = solve_la_dense(&m, &cfg).unwrap();
        prop_assert!(la_value(&m, &y) >= la_value(&m, &LinearArrangement::identity(m.n())) - 1e-9);
    }

    #[test]
    fn more_restarts_never_hurt(m in family_metric(), seed in any::<u64>()) {
        let run = |restarts| {
            let mut cfg = DenseLaConfig::new(0.5);
            cfg.seed = seed;
            cfg.budget = SearchBudget { exhaustive_n: 8, restarts, moves_per_point: 10 };
            la_value(&m, &solve_la_dense(&m, &cfg).unwrap())
        };
        prop_assert!(run(6) >= run(2) - 1e-9);
    }

    #[test]
    fn found_partitions_reverify(m in small_metric(), k in 1usize..=3, lo in 0.0f64..0.3, slack in 0.0f64..0.05) {
        prop_assume!(k <= m.n());
        let spec = PartitionSpec {
            k,
            size_bounds: vec![(lo / k as f64, 1.0); k],
            weight_bounds: if k > 1 {
                vec![WeightBound { parts: (0, 1), lower: lo / 4.0, upper: 1.0 }]
            } else {
                vec![]
            },
        };
        let back = PartitionSpec::from_json(&spec.to_json()).unwrap();
        prop_assert_eq!(&back, &spec);
        if let SearchOutcome::Found(p) = search_partition(&m, &spec, slack, &SearchBudget::default(), 0).unwrap() {
            let n = m.n() as f64;
            let scale = n * n * m.diameter();
            for (j, &(l, u)) in spec.size_bounds.iter().enumerate() {
                let f = p.part_sizes[j] as f64 / n;
                prop_assert!(f >= l - slack - 1e-12 && f <= u + slack + 1e-12);
            }
            if k > 1 {
                let w01 = m.weight_between(&p.parts()[0], &p.parts()[1]) / scale;
                prop_assert!(w01 >= lo / 4.0 - slack - 1e-12);
            }
        }
    }
}

#[test]
fn generator_specs_round_trip_through_json() {
    for i in 0..7 {
        let spec = GeneratorSpec { family: common::family(i, 9, 3), n: 9, dim: 2, seed: 3 };
        let text = serde_json::to_string(&spec).unwrap();
        let back: GeneratorSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(generate(&back).unwrap(), generate(&spec).unwrap());
    }
}
