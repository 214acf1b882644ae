//! Search strategies over a [`MapSpace`].
//!
//! Every strategy reduces candidates with the same total order: metric
//! first, then the canonical mapping order. The reduction is associative
//! and commutative, so results do not depend on the worker count.

mod hillclimb;

pub use hillclimb::neighbors;

use std::cmp::Ordering;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::cost::{evaluate_legal, CostOptions, CostReport, Metric};
use crate::mapping::Mapping;
use crate::mapspace::{MapSpace, MapSpaceError};
use crate::scalar::Scalar;

const MAX_CLIMB_STEPS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Exhaustive,
    RandomSample { n: usize, seed: u64 },
    /// Fix the off-chip tiles and orders first, then search the rest. `n`
    /// bounds the candidates drawn in each phase.
    Decoupled { n: usize, seed: u64 },
    HillClimb { restarts: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub strategy: Strategy,
    pub metric: Metric,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Collect the (energy, latency) Pareto front of all evaluations.
    pub pareto: bool,
}

impl SearchConfig {
    pub fn new(strategy: Strategy, metric: Metric) -> Self {
        SearchConfig {
            strategy,
            metric,
            workers: None,
            pareto: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParetoPoint {
    pub energy: f64,
    pub latency: f64,
    pub mapping: Mapping,
}

#[derive(Clone, Debug)]
pub struct SearchResult<T> {
    pub best: Mapping,
    pub report: CostReport<T>,
    pub evaluated: u64,
    pub wall_time: Duration,
    pub pareto: Option<Vec<ParetoPoint>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error(transparent)]
    Space(#[from] MapSpaceError),
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

#[derive(Clone, Debug)]
struct Cand<T> {
    key: f64,
    m: Mapping,
    r: CostReport<T>,
}

fn cmp_key(a: f64, am: &Mapping, b: f64, bm: &Mapping) -> Ordering {
    a.total_cmp(&b).then_with(|| am.cmp(bm))
}

fn min_cand<T>(a: Option<Cand<T>>, b: Option<Cand<T>>) -> Option<Cand<T>> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => {
            if cmp_key(a.key, &a.m, b.key, &b.m) == Ordering::Greater {
                Some(b)
            } else {
                Some(a)
            }
        }
    }
}

/// Partial result: best candidate, evaluation count, evaluated points.
struct Acc<T> {
    best: Option<Cand<T>>,
    count: u64,
    points: Vec<ParetoPoint>,
}

impl<T> Acc<T> {
    fn empty() -> Self {
        Acc {
            best: None,
            count: 0,
            points: Vec::new(),
        }
    }

    fn merge(mut self, o: Acc<T>) -> Self {
        self.best = min_cand(self.best, o.best);
        self.count += o.count;
        self.points.extend(o.points);
        self
    }
}

struct Ctx<'a, T> {
    space: &'a MapSpace<T>,
    metric: Metric,
    pareto: bool,
}

impl<T: Scalar> Ctx<'_, T> {
    fn eval(&self, m: Mapping) -> Cand<T> {
        let r = evaluate_legal(&m, self.space.problem(), self.space.arch(), CostOptions::default());
        Cand {
            key: r.metric(self.metric).to_f64_lossy(),
            m,
            r,
        }
    }

    fn add(&self, acc: &mut Acc<T>, m: Mapping) {
        let c = self.eval(m);
        if self.pareto {
            acc.points.push(ParetoPoint {
                energy: c.r.energy.to_f64_lossy(),
                latency: c.r.latency_cycles.to_f64_lossy(),
                mapping: c.m.clone(),
            });
        }
        acc.count += 1;
        acc.best = min_cand(acc.best.take(), Some(c));
    }

    fn exhaustive(&self, space: &MapSpace<T>) -> Acc<T> {
        space
            .tilings()
            .par_iter()
            .map(|t| {
                let mut acc = Acc::empty();
                space.for_each_mapping_of(t, &mut |m| self.add(&mut acc, m));
                acc
            })
            .reduce(Acc::empty, Acc::merge)
    }

    fn sampled(&self, space: &MapSpace<T>, n: usize, seed: u64) -> Result<Acc<T>, SearchError> {
        let ms = space.sample(n, seed)?;
        Ok(ms
            .into_par_iter()
            .map(|m| {
                let mut acc = Acc::empty();
                self.add(&mut acc, m);
                acc
            })
            .reduce(Acc::empty, Acc::merge))
    }

    fn climb(&self, start: Mapping) -> Acc<T> {
        let sizes = self.space.problem().sizes();
        let mut acc = Acc::empty();
        self.add(&mut acc, start.clone());
        let mut cur = acc.best.clone().unwrap();
        for _ in 0..MAX_CLIMB_STEPS {
            let mut ns = neighbors(&cur.m, &sizes);
            ns.sort();
            ns.dedup();
            let step = ns
                .into_par_iter()
                .filter(|n| self.space.contains(n))
                .map(|n| {
                    let mut a = Acc::empty();
                    self.add(&mut a, n);
                    a
                })
                .reduce(Acc::empty, Acc::merge);
            let next = step.best.clone();
            acc = acc.merge(step);
            match next {
                Some(n) if n.key < cur.key => cur = n,
                _ => break,
            }
        }
        acc
    }

    fn decoupled(&self, n: usize, seed: u64) -> Result<Acc<T>, SearchError> {
        let space = self.space;
        let a = space.arch();
        let upto = (1..a.levels.len())
            .find(|&p| !a.levels[p].is_virtual)
            .unwrap_or(0);
        let phase1: Vec<Mapping> = if space.raw_size() <= n as u128 {
            space.enumerate()
        } else {
            space.sample(n, seed)?
        };
        if phase1.is_empty() {
            return Err(MapSpaceError::Empty.into());
        }
        let mut acc = Acc::empty();
        acc.count += phase1.len() as u64;
        let anchor = phase1
            .into_par_iter()
            .map(|m| {
                let r = evaluate_legal(&m, space.problem(), a, CostOptions::default());
                (r.top_boundary_words(a), m)
            })
            .min()
            .map(|(_, m)| m)
            .unwrap();
        let inner = space.fix_outer(&anchor, upto);
        let rest = if inner.raw_size() <= n as u128 {
            self.exhaustive(&inner)
        } else {
            self.sampled(&inner, n, seed.wrapping_add(1))?
        };
        let mut acc2 = Acc::empty();
        self.add(&mut acc2, anchor);
        Ok(acc.merge(acc2).merge(rest))
    }
}

/// Non-dominated subset under (energy, latency), sorted by energy. Equal
/// points keep the smallest mapping.
pub fn pareto_front(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut v: Vec<&ParetoPoint> = points.iter().collect();
    v.sort_by(|a, b| {
        a.energy
            .total_cmp(&b.energy)
            .then(a.latency.total_cmp(&b.latency))
            .then_with(|| a.mapping.cmp(&b.mapping))
    });
    let mut out: Vec<ParetoPoint> = Vec::new();
    for p in v {
        if out.last().is_none_or(|l| p.latency < l.latency) {
            out.push(p.clone());
        }
    }
    out
}

fn run<T: Scalar>(
    space: &MapSpace<T>,
    cfg: &SearchConfig,
    warm: &[Mapping],
) -> Result<SearchResult<T>, SearchError> {
    let start = Instant::now();
    let ctx = Ctx {
        space,
        metric: cfg.metric,
        pareto: cfg.pareto,
    };
    let mut acc = match cfg.strategy {
        Strategy::Exhaustive => ctx.exhaustive(space),
        Strategy::RandomSample { n, seed } => {
            if n == 0 {
                return Err(SearchError::Config("sample count must be at least 1".into()));
            }
            ctx.sampled(space, n, seed)?
        }
        Strategy::Decoupled { n, seed } => {
            if n == 0 {
                return Err(SearchError::Config("sample count must be at least 1".into()));
            }
            ctx.decoupled(n, seed)?
        }
        Strategy::HillClimb { restarts, seed } => {
            let sizes = space.problem().sizes();
            let mut starts: Vec<Mapping> = warm
                .iter()
                .filter(|m| space.contains(m))
                .map(|m| m.clone().canonical(&sizes))
                .collect();
            if restarts > 0 {
                starts.extend(space.sample(restarts, seed)?);
            }
            if starts.is_empty() {
                return Err(if space.is_empty() {
                    MapSpaceError::Empty.into()
                } else {
                    SearchError::Config("hill climbing needs a restart or a warm start".into())
                });
            }
            starts
                .into_par_iter()
                .map(|m| ctx.climb(m))
                .reduce(Acc::empty, Acc::merge)
        }
    };
    if !matches!(cfg.strategy, Strategy::HillClimb { .. }) {
        for m in warm.iter().filter(|m| space.contains(m)) {
            ctx.add(&mut acc, m.clone().canonical(&space.problem().sizes()));
        }
    }
    let best = acc.best.ok_or(MapSpaceError::Empty)?;
    let pareto = cfg.pareto.then(|| pareto_front(&acc.points));
    Ok(SearchResult {
        best: best.m,
        report: best.r,
        evaluated: acc.count,
        wall_time: start.elapsed(),
        pareto,
    })
}

pub fn search<T: Scalar>(space: &MapSpace<T>, cfg: &SearchConfig) -> Result<SearchResult<T>, SearchError> {
    search_warm(space, cfg, &[])
}

/// Like [`search`], additionally evaluating `warm` mappings that belong to
/// the space. Hill climbing also starts a climb from each of them.
pub fn search_warm<T: Scalar>(
    space: &MapSpace<T>,
    cfg: &SearchConfig,
    warm: &[Mapping],
) -> Result<SearchResult<T>, SearchError> {
    match cfg.workers {
        None => run(space, cfg, warm),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| SearchError::Pool(e.to_string()))?
            .install(|| run(space, cfg, warm)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{Architecture, Axis, ClusterLevel, UNBOUNDED};
    use crate::cost::evaluate;
    use crate::mapspace::ConstraintSet;
    use crate::workloads::gemm;

    fn arch() -> Architecture<f64> {
        Architecture::new(
            vec![
                ClusterLevel::memory("DRAM", UNBOUNDED, 4, Axis::X, 2.0, 200.0),
                ClusterLevel::pe("L1", 16, 1.0, 1.0),
            ],
            1e9,
            0.5,
        )
        .unwrap()
    }

    fn space() -> MapSpace<f64> {
        MapSpace::new(&gemm(4, 4, 4), &arch(), &ConstraintSet::default()).unwrap()
    }

    #[test]
    fn exhaustive_matches_scan() {
        let s = space();
        let cfg = SearchConfig::new(Strategy::Exhaustive, Metric::Edp);
        let r = search(&s, &cfg).unwrap();
        let min = s
            .enumerate()
            .iter()
            .map(|m| evaluate(m, s.problem(), s.arch()).unwrap().edp)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(r.report.edp, min);
        assert_eq!(r.evaluated as u128, s.size());
    }

    #[test]
    fn other_strategies_never_beat_exhaustive() {
        let s = space();
        let best = search(&s, &SearchConfig::new(Strategy::Exhaustive, Metric::Edp))
            .unwrap()
            .report
            .edp;
        for strat in [
            Strategy::RandomSample { n: 30, seed: 1 },
            Strategy::HillClimb { restarts: 3, seed: 2 },
            Strategy::Decoupled { n: 30, seed: 3 },
        ] {
            let r = search(&s, &SearchConfig::new(strat, Metric::Edp)).unwrap();
            assert!(r.report.edp >= best, "{strat:?}");
            assert!(s.contains(&r.best));
        }
    }

    #[test]
    fn deterministic_across_workers() {
        let s = space();
        let mut cfg = SearchConfig::new(Strategy::RandomSample { n: 50, seed: 7 }, Metric::Energy);
        cfg.workers = Some(1);
        let a = search(&s, &cfg).unwrap();
        cfg.workers = Some(4);
        let b = search(&s, &cfg).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.report, b.report);
        assert_eq!(a.evaluated, b.evaluated);
    }

    #[test]
    fn pareto_front_drops_dominated() {
        let m = Mapping::new(vec![], vec![]);
        let pt = |e, l| ParetoPoint {
            energy: e,
            latency: l,
            mapping: m.clone(),
        };
        let f = pareto_front(&[pt(1.0, 5.0), pt(2.0, 4.0), pt(2.0, 6.0), pt(3.0, 4.0), pt(4.0, 1.0)]);
        let got: Vec<(f64, f64)> = f.iter().map(|p| (p.energy, p.latency)).collect();
        assert_eq!(got, vec![(1.0, 5.0), (2.0, 4.0), (4.0, 1.0)]);
        assert_eq!(pareto_front(&[pt(1.0, 1.0)]).len(), 1);
    }

    #[test]
    fn zero_samples_rejected() {
        let cfg = SearchConfig::new(Strategy::RandomSample { n: 0, seed: 0 }, Metric::Edp);
        assert!(matches!(search(&space(), &cfg), Err(SearchError::Config(_))));
    }
}
