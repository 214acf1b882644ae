use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use union_dse::cost::{report_csv_row, Metric};
use union_dse::mappers::{search, SearchConfig, Strategy};
use union_dse::mapping::parse_mapping;
use union_dse::mapspace::ConstraintSet;
use union_dse::problem::parse_problem;
use union_dse::workloads::gemm;
use union_dse::{arch::parse_architecture, Architecture, MapSpace};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_union-dse"))
        .args(args)
        .current_dir(root())
        .env_remove("UNION_DSE_WORKERS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn small_arch() -> Architecture {
    parse_architecture(&std::fs::read_to_string(root().join("inputs/small.arch")).unwrap()).unwrap()
}

const SMALL: [&str; 4] = ["--problem", "inputs/gemm_small.nest", "--arch", "inputs/small.arch"];

#[test]
fn check_exit_codes() {
    assert_eq!(run(&["check", "inputs/intensli2.nest"]).status.code(), Some(0));
    let op = run(&["check", "inputs/intensli2.nest", "--target", "operation-level"]);
    assert_eq!(op.status.code(), Some(1));
    assert!(stdout(&op).contains("supported-operation"));
    assert_eq!(run(&["check", "inputs/conv.nest", "--target", "operation-level"]).status.code(), Some(0));
    assert_eq!(run(&["check", "inputs/missing.nest"]).status.code(), Some(3));
}

#[test]
fn non_conformable_nest_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.nest");
    std::fs::write(&f, "for i = 0 to 3\nfor j = 0 to 3\nstmt A[i] += A[j] * B[j]\n").unwrap();
    let o = run(&["check", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["lower", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn syntax_errors_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.nest");
    std::fs::write(&f, "for i = 0 to\n").unwrap();
    assert_eq!(run(&["check", f.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn lower_matches_builtin_workload() {
    let o = run(&["lower", "inputs/gemm.nest"]);
    assert!(o.status.success());
    assert_eq!(parse_problem(&stdout(&o)).unwrap(), gemm(32, 32, 32));
    let t = run(&["lower", "inputs/intensli2.nest", "--ttgt"]);
    assert_eq!(parse_problem(&stdout(&t)).unwrap().sizes(), vec![4096, 16, 16]);
}

#[test]
fn search_matches_library() {
    let o = run(&[&["search"][..], &SMALL[..], &["--strategy", "exhaustive", "--metric", "edp"]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let row = text.lines().last().unwrap().trim_start_matches("# ").to_string();
    let p = gemm(4, 4, 4);
    let a = small_arch();
    let s = MapSpace::new(&p, &a, &ConstraintSet::default()).unwrap();
    let r = search(&s, &SearchConfig::new(Strategy::Exhaustive, Metric::Edp)).unwrap();
    assert_eq!(row, report_csv_row(&r.report));
    assert_eq!(parse_mapping(&text).unwrap(), r.best);
}

#[test]
fn full_utilization_constraint_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&[&["search"][..], &SMALL[..], &["--constraints", "inputs/full_util.cons", "--out-dir", out, "--pareto"]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("best.csv")).unwrap();
    let (head, row) = csv.split_once('\n').unwrap();
    let col = head.split(',').position(|c| c == "utilization").unwrap();
    assert_eq!(row.trim().split(',').nth(col), Some("1"));
    assert!(dir.path().join("best.map").exists());
    assert!(std::fs::read_to_string(dir.path().join("pareto.csv")).unwrap().lines().count() >= 2);
}

#[test]
fn unsatisfiable_constraints_report_empty_space() {
    let o = run(&[&["search"][..], &SMALL[..], &["--constraints", "inputs/unsat.cons"]].concat());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("empty map space"));
}

#[test]
fn eval_and_oracle_diff() {
    let map = ["--map", "inputs/gemm_small.map"];
    let e = run(&[&["eval"][..], &SMALL[..], &map[..]].concat());
    assert!(e.status.success(), "{}", stderr(&e));
    assert!(stdout(&e).starts_with("latency_cycles,"));
    let ok = run(&[&["oracle-diff"][..], &SMALL[..], &map[..]].concat());
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    // both PEs read the same A tile; without multicast the model double counts
    let sabotaged = run(&[&["oracle-diff"][..], &SMALL[..], &map[..], &["--no-multicast"]].concat());
    assert_eq!(sabotaged.status.code(), Some(1));
    assert!(stdout(&sabotaged).contains("oracle"));
    let capped = run(&[&["oracle-diff"][..], &SMALL[..], &map[..], &["--cap", "10"]].concat());
    assert_eq!(capped.status.code(), Some(1));
    assert!(stderr(&capped).contains("cap"));
}

#[test]
fn illegal_mapping_fails_eval() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(root().join("inputs/gemm_small.map")).unwrap();
    // an L1 tile larger than what its parent hands down
    let bad = text.replacen("temporal_tile_sizes: 1 2 4", "temporal_tile_sizes: 4 4 4", 1);
    let bad = bad.replacen("spatial_tile_sizes: 1 2 4", "spatial_tile_sizes: 4 4 4", 1);
    assert_ne!(bad, text);
    let f = dir.path().join("bad.map");
    std::fs::write(&f, bad).unwrap();
    let o = run(&[&["eval"][..], &SMALL[..], &["--map", f.to_str().unwrap()]].concat());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("illegal"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["search", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["casestudy", "4"]).status.code(), Some(2));
    assert_eq!(run(&[&["search"][..], &SMALL[..], &["--strategy", "annealing"]].concat()).status.code(), Some(2));
}

#[test]
fn workers_env_var_is_a_fallback() {
    let base = run(&[&["search"][..], &SMALL[..], &["--strategy", "random", "--samples", "50"]].concat());
    let env = Command::new(env!("CARGO_BIN_EXE_union-dse"))
        .args([&["search"][..], &SMALL[..], &["--strategy", "random", "--samples", "50"]].concat())
        .current_dir(root())
        .env("UNION_DSE_WORKERS", "2")
        .output()
        .unwrap();
    assert!(env.status.success());
    assert_eq!(base.stdout, env.stdout);
}

#[test]
fn built_in_grids_and_plot() {
    let o = run(&["search", "--problem", "inputs/gemm_small.nest", "--arch", "edge:2x2", "--strategy", "hillclimb"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(run(&["search", "--problem", "inputs/gemm_small.nest", "--arch", "edge:2by2"]).status.code(), Some(3));
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    std::fs::write(&csv, "layer,fill_bw_gbps,norm_edp\nA,1,1\nA,2,0.5\n").unwrap();
    let svg = run(&["plot", csv.to_str().unwrap(), "--case", "3"]);
    assert!(svg.status.success());
    assert!(stdout(&svg).starts_with("<svg"));
}
