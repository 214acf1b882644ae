mod common;

use proptest::prelude::*;

use common::{archs, instances};
use union_dse::cost::{evaluate, Metric};
use union_dse::ir::{lower_to_problem, parse_loop_nest};
use union_dse::mappers::{search, SearchConfig, Strategy};
use union_dse::mapping::{check_legality, is_legal, parse_mapping, print_mapping};
use union_dse::mapspace::ConstraintSet;
use union_dse::oracle::{diff, simulate};
use union_dse::problem::{parse_problem, print_problem};
use union_dse::workloads::gemm;
use union_dse::MapSpace;

fn pick<T: Clone>(v: &[T], i: usize) -> T {
    v[i % v.len()].clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn samples_are_legal_contained_and_reproducible(inst in 0usize..6, arch in 0usize..3, seed: u64, index in 0u64..1000) {
        let (_, p) = pick(&instances(), inst);
        let (_, a) = pick(&archs(), arch);
        let s = MapSpace::new(&p, &a, &ConstraintSet::default()).unwrap();
        let m = s.sample_at(seed, index).unwrap();
        prop_assert!(check_legality(&m, &p, &a).unwrap().is_empty());
        prop_assert!(s.contains(&m));
        prop_assert_eq!(&m, &s.sample_at(seed, index).unwrap());
    }

    #[test]
    fn mapping_text_round_trips(inst in 0usize..6, arch in 0usize..3, seed: u64) {
        let (_, p) = pick(&instances(), inst);
        let (_, a) = pick(&archs(), arch);
        let s = MapSpace::new(&p, &a, &ConstraintSet::default()).unwrap();
        let m = s.sample_at(seed, 0).unwrap();
        let back = parse_mapping(&print_mapping(&m)).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn problem_text_round_trips(inst in 0usize..6) {
        let (_, p) = pick(&instances(), inst);
        prop_assert_eq!(parse_problem(&print_problem(&p)).unwrap(), p);
    }

    #[test]
    fn footprint_is_monotone(inst in 0usize..6, picks in proptest::collection::vec((0u64..64, 0u64..64), 7)) {
        let (_, p) = pick(&instances(), inst);
        let sizes = p.sizes();
        let (small, large): (Vec<u64>, Vec<u64>) = sizes
            .iter()
            .zip(&picks)
            .map(|(&s, &(x, y))| {
                let a = 1 + x % s;
                let b = 1 + y % s;
                (a.min(b), a.max(b))
            })
            .unzip();
        prop_assert!(p.total_footprint(&small) <= p.total_footprint(&large));
    }

    #[test]
    fn model_matches_oracle(inst in 0usize..6, arch in 0usize..3, seed: u64) {
        let (_, p) = pick(&instances(), inst);
        let (_, a) = pick(&archs(), arch);
        let s = MapSpace::new(&p, &a, &ConstraintSet::default()).unwrap();
        let m = s.sample_at(seed, 0).unwrap();
        let t = simulate(&m, &p, &a).unwrap();
        prop_assert!(t.covers(&p));
        let r = evaluate(&m, &p, &a).unwrap();
        let mismatches = diff(&t, &r, &p, &a);
        prop_assert!(mismatches.is_empty(), "{:?}", mismatches);
    }

    #[test]
    fn legality_and_cost_ignore_dimension_order(seed: u64, m_ in 1u64..4, n_ in 1u64..4, k_ in 1u64..4) {
        let (m_, n_, k_) = (1 << m_, 1 << n_, 1 << k_);
        let p = gemm(m_, n_, k_);
        let nest = format!(
            "for k = 0 to {}\nfor n = 0 to {}\nfor m = 0 to {}\nstmt C[m][n] += A[m][k] * B[k][n]\n",
            k_ - 1, n_ - 1, m_ - 1
        );
        let q = lower_to_problem(&parse_loop_nest(&nest).unwrap()).unwrap();
        let (_, a) = pick(&archs(), seed as usize);
        let s = MapSpace::new(&p, &a, &ConstraintSet::default()).unwrap();
        let m = s.sample_at(seed, 1).unwrap();
        let renamed = m.aligned_to(&q).unwrap();
        prop_assert_eq!(is_legal(&m, &p, &a), is_legal(&renamed, &q, &a));
        let (r1, r2) = (evaluate(&m, &p, &a).unwrap(), evaluate(&renamed, &q, &a).unwrap());
        prop_assert_eq!(r1.latency_cycles, r2.latency_cycles);
        prop_assert_eq!(r1.energy, r2.energy);
        prop_assert_eq!(r1.utilized_pes, r2.utilized_pes);
    }

    #[test]
    fn tighter_utilization_shrinks_the_space(lo in 0u32..=4, hi in 0u32..=4) {
        let (lo, hi) = (lo.min(hi) as f64 / 4.0, lo.max(hi) as f64 / 4.0);
        let p = gemm(4, 4, 2);
        let a = common::three_level(256, 32);
        let loose = MapSpace::new(&p, &a, &ConstraintSet { min_utilization: Some(lo), ..Default::default() }).unwrap();
        let tight = MapSpace::new(&p, &a, &ConstraintSet { min_utilization: Some(hi), ..Default::default() }).unwrap();
        let all = loose.enumerate();
        let sub = tight.enumerate();
        prop_assert!(sub.len() <= all.len());
        for m in &sub {
            prop_assert!(loose.contains(m));
        }
    }

    #[test]
    fn more_bandwidth_never_slows_a_mapping(inst in 0usize..6, seed: u64, factor in 1u32..8) {
        let (_, p) = pick(&instances(), inst);
        let (_, a) = pick(&archs(), 1);
        let fast = a.map_bandwidth(|_, bw| bw * factor as f64);
        let s = MapSpace::new(&p, &a, &ConstraintSet::default()).unwrap();
        let m = s.sample_at(seed, 2).unwrap();
        let (slow, quick) = (evaluate(&m, &p, &a).unwrap(), evaluate(&m, &p, &fast).unwrap());
        prop_assert!(quick.latency_cycles <= slow.latency_cycles);
        prop_assert_eq!(quick.energy, slow.energy);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn search_is_deterministic_across_workers(seed: u64, n in 1usize..200) {
        let p = gemm(8, 4, 4);
        let a = common::three_level(256, 32);
        let s = MapSpace::new(&p, &a, &ConstraintSet::default()).unwrap();
        for strategy in [Strategy::RandomSample { n, seed }, Strategy::HillClimb { restarts: 2, seed }] {
            let mut one = SearchConfig::new(strategy, Metric::Edp);
            one.workers = Some(1);
            let mut three = one.clone();
            three.workers = Some(3);
            let (x, y) = (search(&s, &one).unwrap(), search(&s, &three).unwrap());
            prop_assert_eq!(&x.best, &y.best);
            prop_assert_eq!(x.report.edp, y.report.edp);
            prop_assert_eq!(x.evaluated, y.evaluated);
        }
    }
}
