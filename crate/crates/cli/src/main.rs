//! `union-dse` command-line driver.
//!
//! Exit codes: 0 ok, 1 domain failure (not conformable, empty map space,
//! illegal mapping, oracle mismatch or cap), 2 usage, 3 IO or parse error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

use union_dse::arch::{make_grid_arch, parse_architecture, GridConfig};
use union_dse::casestudy::{self, svg, CaseConfig, Table};
use union_dse::cost::{evaluate_with, report_csv_row, CostOptions, Metric, CSV_HEADER};
use union_dse::ir::{
    check_conformability, lower_to_problem, parse_loop_nest, reformulate_ttgt, CostModelTarget,
    LowerError,
};
use union_dse::mappers::{search, SearchConfig, SearchError, Strategy};
use union_dse::mapping::{parse_mapping, print_mapping, Mapping};
use union_dse::mapspace::{parse_constraints, ConstraintSet, MapSpaceError};
use union_dse::oracle::{self, OracleError, DEFAULT_CAP};
use union_dse::problem::{parse_problem, print_problem, ProblemInstance};
use union_dse::{Architecture, MapSpace};

#[derive(Debug)]
struct Failure {
    code: u8,
    err: anyhow::Error,
}

type CliResult<T> = Result<T, Failure>;

fn domain(err: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 1, err: err.into() }
}

fn input(err: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 3, err: err.into() }
}

#[derive(Parser)]
#[command(name = "union-dse", version, about = "Mapping and design-space exploration for spatial accelerators")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    LoopLevel,
    OperationLevel,
}

impl From<Target> for CostModelTarget {
    fn from(t: Target) -> Self {
        match t {
            Target::LoopLevel => CostModelTarget::LoopLevel,
            Target::OperationLevel => CostModelTarget::OperationLevel,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Exhaustive,
    Random,
    Decoupled,
    Hillclimb,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Latency,
    Energy,
    Edp,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Latency => Metric::Latency,
            MetricArg::Energy => Metric::Energy,
            MetricArg::Edp => Metric::Edp,
        }
    }
}

#[derive(clap::Args)]
struct StrategyOpts {
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    /// Draws for `random` and per phase for `decoupled`.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Restarts for `hillclimb`.
    #[arg(long, default_value_t = 4)]
    restarts: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl StrategyOpts {
    fn resolve(&self, default: StrategyArg) -> Strategy {
        let (n, seed) = (self.samples, self.seed);
        match self.strategy.unwrap_or(default) {
            StrategyArg::Exhaustive => Strategy::Exhaustive,
            StrategyArg::Random => Strategy::RandomSample { n, seed },
            StrategyArg::Decoupled => Strategy::Decoupled { n, seed },
            StrategyArg::Hillclimb => Strategy::HillClimb {
                restarts: self.restarts,
                seed,
            },
        }
    }
}

#[derive(clap::Args)]
struct Inputs {
    /// `.prob` file, or a `.nest` loop nest to lower.
    #[arg(long)]
    problem: PathBuf,
    /// `.arch` file, or a built-in grid `edge:RxC` / `cloud:RxC`.
    #[arg(long)]
    arch: String,
    /// Apply the TTGT reformulation to the problem first.
    #[arg(long)]
    ttgt: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a loop nest against a cost-model family.
    Check {
        nest: PathBuf,
        #[arg(long, value_enum, default_value = "loop-level")]
        target: Target,
    },
    /// Lower a loop nest to a `.prob` file.
    Lower {
        nest: PathBuf,
        #[arg(long)]
        ttgt: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Search the map space for the best mapping.
    Search {
        #[command(flatten)]
        inputs: Inputs,
        /// `.cons` constraint file.
        #[arg(long)]
        constraints: Option<PathBuf>,
        #[command(flatten)]
        strategy: StrategyOpts,
        #[arg(long, value_enum, default_value = "edp")]
        metric: MetricArg,
        #[arg(long, env = "UNION_DSE_WORKERS")]
        workers: Option<usize>,
        /// Write best.map, best.csv and (with --pareto) pareto.csv here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        pareto: bool,
    },
    /// Evaluate one mapping with the analytical model.
    Eval {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        map: PathBuf,
    },
    /// Compare the analytical model against the reference simulator.
    OracleDiff {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        map: PathBuf,
        /// Largest MAC count the simulator accepts.
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u64,
        /// Print the simulator's counters as CSV.
        #[arg(long)]
        trace: bool,
        #[arg(long, hide = true)]
        no_multicast: bool,
    },
    /// Run a case study and emit its CSV table and SVG chart.
    Casestudy {
        #[arg(value_parser = clap::value_parser!(u32).range(1..=3))]
        id: u32,
        /// Divide workload dimensions by this factor.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        scale: u64,
        #[command(flatten)]
        strategy: StrategyOpts,
        #[arg(long, env = "UNION_DSE_WORKERS")]
        workers: Option<usize>,
        /// Comma-separated kernel or layer names.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        /// Write caseN.csv and caseN.svg here instead of printing the CSV.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Render the chart for a case-study CSV.
    Plot {
        csv: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=3))]
        case: u32,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(input)
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(input)
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn out_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .map_err(input)
}

fn lower_nest(path: &Path) -> CliResult<ProblemInstance> {
    let ir = parse_loop_nest(&read(path)?)
        .with_context(|| format!("{}", path.display()))
        .map_err(input)?;
    lower_to_problem(&ir).map_err(|e| match e {
        LowerError::NotConformable(_) => domain(e),
        other => input(other),
    })
}

fn load_problem(path: &Path, ttgt: bool) -> CliResult<ProblemInstance> {
    let p = if path.extension().is_some_and(|e| e == "nest") {
        lower_nest(path)?
    } else {
        parse_problem(&read(path)?)
            .with_context(|| format!("{}", path.display()))
            .map_err(input)?
    };
    if ttgt {
        reformulate_ttgt(&p).map_err(domain)
    } else {
        Ok(p)
    }
}

fn parse_grid(spec: &str) -> Option<CliResult<Architecture>> {
    let (kind, dims) = spec.split_once(':')?;
    let cfg: fn(u64, u64) -> GridConfig = match kind {
        "edge" => GridConfig::edge,
        "cloud" => GridConfig::cloud,
        _ => return None,
    };
    let grid = dims
        .split_once(['x', 'X'])
        .and_then(|(r, c)| Some((r.parse().ok()?, c.parse().ok()?)));
    Some(match grid {
        Some((r, c)) => make_grid_arch(&cfg(r, c)).map_err(input),
        None => Err(input(anyhow!("bad grid `{spec}` (expected {kind}:RxC)"))),
    })
}

fn load_arch(spec: &str) -> CliResult<Architecture> {
    if let Some(a) = parse_grid(spec) {
        return a;
    }
    let path = Path::new(spec);
    parse_architecture(&read(path)?)
        .with_context(|| format!("{}", path.display()))
        .map_err(input)
}

fn load_mapping(path: &Path, p: &ProblemInstance) -> CliResult<Mapping> {
    let m = parse_mapping(&read(path)?)
        .with_context(|| format!("{}", path.display()))
        .map_err(input)?;
    m.aligned_to(p).map_err(domain)
}

fn csv_report(r: &union_dse::CostReport) -> String {
    format!("{CSV_HEADER}\n{}\n", report_csv_row(r))
}

fn cmd_check(nest: &Path, target: Target) -> CliResult<()> {
    let ir = parse_loop_nest(&read(nest)?)
        .with_context(|| format!("{}", nest.display()))
        .map_err(input)?;
    let report = check_conformability(&ir, target.into());
    if report.is_conformable() {
        println!("conformable ({})", report.target);
        return Ok(());
    }
    for v in &report.violations {
        println!("{v}");
    }
    Err(domain(anyhow!("not conformable for the {} model", report.target)))
}

fn map_search_error(e: SearchError) -> Failure {
    match e {
        SearchError::Space(MapSpaceError::Empty) => domain(anyhow!("empty map space")),
        SearchError::Space(MapSpaceError::Constraint(c)) => input(c),
        other => domain(other),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_search(
    inputs: &Inputs,
    constraints: Option<&Path>,
    strategy: &StrategyOpts,
    metric: MetricArg,
    workers: Option<usize>,
    out: Option<&Path>,
    pareto: bool,
) -> CliResult<()> {
    let p = load_problem(&inputs.problem, inputs.ttgt)?;
    let a = load_arch(&inputs.arch)?;
    let cons = match constraints {
        Some(path) => parse_constraints(&read(path)?)
            .with_context(|| format!("{}", path.display()))
            .map_err(input)?,
        None => ConstraintSet::unconstrained(),
    };
    let space = MapSpace::new(&p, &a, &cons).map_err(|e| map_search_error(e.into()))?;
    if space.is_empty() {
        return Err(domain(anyhow!("empty map space")));
    }
    let mut cfg = SearchConfig::new(strategy.resolve(StrategyArg::Exhaustive), metric.into());
    cfg.workers = workers;
    cfg.pareto = pareto;
    let r = search(&space, &cfg).map_err(map_search_error)?;
    eprintln!(
        "evaluated {} mappings in {:.3}s",
        r.evaluated,
        r.wall_time.as_secs_f64()
    );
    let map = print_mapping(&r.best);
    let csv = csv_report(&r.report);
    match out {
        Some(dir) => {
            out_dir(dir)?;
            write(&dir.join("best.map"), &map)?;
            write(&dir.join("best.csv"), &csv)?;
            if let Some(front) = &r.pareto {
                let mut s = String::from("energy,latency_cycles\n");
                for pt in front {
                    let _ = writeln!(s, "{},{}", pt.energy, pt.latency);
                }
                write(&dir.join("pareto.csv"), &s)?;
            }
        }
        None => {
            print!("{map}");
            for line in csv.lines() {
                println!("# {line}");
            }
        }
    }
    Ok(())
}

fn cmd_eval(inputs: &Inputs, map: &Path) -> CliResult<()> {
    let p = load_problem(&inputs.problem, inputs.ttgt)?;
    let a = load_arch(&inputs.arch)?;
    let m = load_mapping(map, &p)?;
    let r = evaluate_with(&m, &p, &a, CostOptions::default()).map_err(domain)?;
    print!("{}", csv_report(&r));
    Ok(())
}

fn cmd_oracle_diff(inputs: &Inputs, map: &Path, cap: u64, trace: bool, no_multicast: bool) -> CliResult<()> {
    let p = load_problem(&inputs.problem, inputs.ttgt)?;
    let a = load_arch(&inputs.arch)?;
    let m = load_mapping(map, &p)?;
    let t = oracle::simulate_capped(&m, &p, &a, cap).map_err(|e| match e {
        OracleError::CapExceeded { .. } | OracleError::Illegal(_) => domain(e),
        OracleError::Shape(_) => input(e),
    })?;
    let opts = CostOptions {
        multicast: !no_multicast,
    };
    let r = evaluate_with(&m, &p, &a, opts).map_err(domain)?;
    if trace {
        print!("{}", oracle::trace_csv(&t, &p, &a));
    }
    let mismatches = oracle::diff(&t, &r, &p, &a);
    if mismatches.is_empty() {
        println!("ok: model matches oracle");
        return Ok(());
    }
    for mm in &mismatches {
        println!("{mm}");
    }
    Err(domain(anyhow!("{} counter mismatches", mismatches.len())))
}

fn cmd_casestudy(
    id: u32,
    scale: u64,
    strategy: &StrategyOpts,
    workers: Option<usize>,
    only: Vec<String>,
    out: Option<&Path>,
) -> CliResult<()> {
    let cfg = CaseConfig {
        scale,
        strategy: strategy.resolve(StrategyArg::Hillclimb),
        workers,
        only,
    };
    let table = casestudy::run(id, &cfg).map_err(domain)?;
    let csv = table.to_csv();
    match out {
        Some(dir) => {
            out_dir(dir)?;
            let chart = svg::render(id, &table).map_err(domain)?;
            write(&dir.join(format!("case{id}.csv")), &csv)?;
            write(&dir.join(format!("case{id}.svg")), &chart)
        }
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn cmd_plot(csv: &Path, case: u32, out: Option<&Path>) -> CliResult<()> {
    let table = Table::from_csv(&read(csv)?).map_err(input)?;
    let chart = svg::render(case, &table).map_err(input)?;
    emit(out, &chart)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.cmd {
        Cmd::Check { nest, target } => cmd_check(&nest, target),
        Cmd::Lower { nest, ttgt, out } => {
            let mut p = lower_nest(&nest)?;
            if ttgt {
                p = reformulate_ttgt(&p).map_err(domain)?;
            }
            emit(out.as_deref(), &print_problem(&p))
        }
        Cmd::Search {
            inputs,
            constraints,
            strategy,
            metric,
            workers,
            out_dir,
            pareto,
        } => cmd_search(
            &inputs,
            constraints.as_deref(),
            &strategy,
            metric,
            workers,
            out_dir.as_deref(),
            pareto,
        ),
        Cmd::Eval { inputs, map } => cmd_eval(&inputs, &map),
        Cmd::OracleDiff {
            inputs,
            map,
            cap,
            trace,
            no_multicast,
        } => cmd_oracle_diff(&inputs, &map, cap, trace, no_multicast),
        Cmd::Casestudy {
            id,
            scale,
            strategy,
            workers,
            only,
            out_dir,
        } => cmd_casestudy(id, scale, &strategy, workers, only, out_dir.as_deref()),
        Cmd::Plot { csv, case, out } => cmd_plot(&csv, case, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
