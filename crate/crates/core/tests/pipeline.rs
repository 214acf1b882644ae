mod common;

use union_dse::arch::{make_grid_arch, GridConfig};
use union_dse::casestudy::{self, CaseConfig};
use union_dse::cost::{evaluate, Metric};
use union_dse::ir::{
    check_conformability, classify_operation, lower_to_problem, parse_loop_nest, reformulate_ttgt,
    CostModelTarget, OperationTag,
};
use union_dse::mappers::{search, SearchConfig, Strategy};
use union_dse::mapping::{parse_mapping, print_mapping, render_loop_nest};
use union_dse::mapspace::{parse_constraints, ConstraintSet};
use union_dse::workloads::TcKernel;
use union_dse::{Architecture, MapSpace};

#[test]
fn nest_to_best_mapping() {
    let ir = parse_loop_nest(&TcKernel::Ccsd7.nest(4)).unwrap();
    assert!(check_conformability(&ir, CostModelTarget::LoopLevel).is_conformable());
    assert!(!check_conformability(&ir, CostModelTarget::OperationLevel).is_conformable());
    assert_eq!(classify_operation(&ir), OperationTag::Tc);
    let p = lower_to_problem(&ir).unwrap();
    let g = reformulate_ttgt(&p).unwrap();
    assert_eq!(g.total_macs(), p.total_macs());
    let a: Architecture = make_grid_arch(&GridConfig::edge(4, 4)).unwrap();
    let s = MapSpace::new(&g, &a, &ConstraintSet::default()).unwrap();
    let r = search(&s, &SearchConfig::new(Strategy::HillClimb { restarts: 2, seed: 9 }, Metric::Edp)).unwrap();
    let again = parse_mapping(&print_mapping(&r.best)).unwrap();
    assert_eq!(evaluate(&again, &g, &a).unwrap().edp, r.report.edp);
    let text = render_loop_nest(&r.best, &g);
    assert!(text.contains("for"));
}

#[test]
fn constraint_file_restricts_search() {
    let p = union_dse::workloads::gemm(8, 8, 4);
    let a = common::three_level(512, 64);
    let c = parse_constraints("min_utilization = 1.0\nparallel_dims = [\"m\", \"n\"]\n").unwrap();
    let s = MapSpace::new(&p, &a, &c).unwrap();
    let r = search(&s, &SearchConfig::new(Strategy::Exhaustive, Metric::Latency)).unwrap();
    assert_eq!(r.report.utilized_pes, 4);
    for l in 0..3 {
        assert!(!r.best.parallel_dims(l).contains(&2));
    }
}

#[test]
fn case_study_tables_are_normalized() {
    let cfg = CaseConfig {
        scale: 8,
        only: vec!["DLRM-3".into()],
        ..Default::default()
    };
    for id in [2, 3] {
        let t = casestudy::run(id, &cfg).unwrap();
        let norm = t.floats("norm_edp").unwrap();
        assert!(!norm.is_empty());
        assert!(norm.iter().all(|&x| x > 0.0 && x <= 1.0));
        assert!(norm.iter().any(|&x| x == 1.0));
        let svg = casestudy::svg::render(id, &t).unwrap();
        assert_eq!(svg, casestudy::svg::render(id, &casestudy::Table::from_csv(&t.to_csv()).unwrap()).unwrap());
    }
}
