//! Analytical latency/energy model.
//!
//! For a legal mapping, every physical level `j` below the top and every data
//! space `v`:
//!
//! * `refetch(v, j)` is the product of the trip counts of the temporal loops
//!   at levels `<= j` that sit at or outside the innermost `v`-relevant loop
//!   (program order, trip-1 loops ignored); 1 if no such loop exists.
//! * `fills[j][v] = active_instances(j) * refetch(v, j) * footprint_v(TT^j)`.
//! * The parent `p` (closest physical ancestor) serves those fills with
//!   `fills / mc` reads, where `mc` is the product of fan-outs over
//!   `v`-irrelevant dimensions at levels `p..j` (multicast).
//! * The output is written back on every eviction: `writebacks[j] =
//!   fills[j]`, each merged into the parent as an update. Partial sums of
//!   spatially split reductions are therefore merged at the parent.
//! * The PE level reads each operand and updates the output once per MAC.
//!
//! Latency is the maximum of compute cycles and, per level, the words that
//! cross its fill boundary divided by its fill bandwidth.

mod csv;

pub use csv::{report_csv_row, CSV_HEADER};

use std::fmt;

use thiserror::Error;

use crate::arch::Architecture;
use crate::mapping::{check_legality, LegalityViolation, Mapping, ShapeError};
use crate::problem::ProblemInstance;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Counters {
    pub fills: u64,
    pub reads: u64,
    pub updates: u64,
    pub writebacks: u64,
}

impl Counters {
    pub fn total(&self) -> u64 {
        self.fills + self.reads + self.updates + self.writebacks
    }

    pub fn get(&self, c: Counter) -> u64 {
        match c {
            Counter::Fills => self.fills,
            Counter::Reads => self.reads,
            Counter::Updates => self.updates,
            Counter::Writebacks => self.writebacks,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Counter {
    Fills,
    Reads,
    Updates,
    Writebacks,
}

impl Counter {
    pub const ALL: [Counter; 4] = [
        Counter::Fills,
        Counter::Reads,
        Counter::Updates,
        Counter::Writebacks,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Counter::Fills => "fills",
            Counter::Reads => "reads",
            Counter::Updates => "updates",
            Counter::Writebacks => "writebacks",
        }
    }
}

impl fmt::Display for Counter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Word counts indexed `[level][data space]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AccessCounts {
    pub per_level: Vec<Vec<Counters>>,
}

impl AccessCounts {
    pub fn zeros(levels: usize, data_spaces: usize) -> Self {
        AccessCounts {
            per_level: vec![vec![Counters::default(); data_spaces]; levels],
        }
    }

    pub fn at(&self, level: usize, ds: usize) -> &Counters {
        &self.per_level[level][ds]
    }

    pub fn total(&self, c: Counter) -> u64 {
        self.per_level
            .iter()
            .flatten()
            .map(|x| x.get(c))
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Bound {
    Compute,
    /// Fill boundary of the level at this position.
    Level(usize),
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Compute => f.write_str("compute"),
            Bound::Level(j) => write!(f, "level{j}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostReport<T> {
    pub latency_cycles: T,
    pub latency_seconds: T,
    pub energy: T,
    pub edp: T,
    pub utilization: T,
    pub utilized_pes: u64,
    pub total_pes: u64,
    pub compute_cycles: u64,
    /// Words crossing each level's fill boundary (0 at the top and at
    /// virtual levels).
    pub boundary_words: Vec<u64>,
    pub transfer_cycles: Vec<T>,
    pub counts: AccessCounts,
    pub bound: Bound,
}

impl<T: Scalar> CostReport<T> {
    pub fn metric(&self, m: Metric) -> T {
        match m {
            Metric::Latency => self.latency_cycles,
            Metric::Energy => self.energy,
            Metric::Edp => self.edp,
        }
    }

    /// Words crossing the boundary directly below the top level.
    pub fn top_boundary_words(&self, a: &Architecture<T>) -> u64 {
        (1..a.levels.len())
            .filter(|&j| !a.levels[j].is_virtual && a.parent_buffer(j) == Some(0))
            .map(|j| self.boundary_words[j])
            .sum()
    }
}

/// `energy * latency_seconds`
pub fn edp<T: Scalar>(r: &CostReport<T>) -> T {
    r.energy * r.latency_seconds
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Metric {
    Latency,
    Energy,
    Edp,
}

impl Metric {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "latency" => Some(Metric::Latency),
            "energy" => Some(Metric::Energy),
            "edp" => Some(Metric::Edp),
            _ => None,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Latency => "latency",
            Metric::Energy => "energy",
            Metric::Edp => "edp",
        })
    }
}

/// Knobs for testing the model against the oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CostOptions {
    /// When false, every child fill costs its own parent read.
    pub multicast: bool,
}

impl Default for CostOptions {
    fn default() -> Self {
        CostOptions { multicast: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CostError {
    #[error("illegal mapping: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Illegal(Vec<LegalityViolation>),
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

pub fn evaluate<T: Scalar>(
    m: &Mapping,
    p: &ProblemInstance,
    a: &Architecture<T>,
) -> Result<CostReport<T>, CostError> {
    evaluate_with(m, p, a, CostOptions::default())
}

pub fn evaluate_with<T: Scalar>(
    m: &Mapping,
    p: &ProblemInstance,
    a: &Architecture<T>,
    opts: CostOptions,
) -> Result<CostReport<T>, CostError> {
    let v = check_legality(m, p, a)?;
    if !v.is_empty() {
        return Err(CostError::Illegal(v));
    }
    Ok(evaluate_legal(m, p, a, opts))
}

/// Evaluates a mapping already known to be legal.
pub(crate) fn evaluate_legal<T: Scalar>(
    m: &Mapping,
    p: &ProblemInstance,
    a: &Architecture<T>,
    opts: CostOptions,
) -> CostReport<T> {
    let sizes = p.sizes();
    let nl = a.levels.len();
    let nd = sizes.len();
    let spaces = p.data_spaces();
    let relevant: Vec<Vec<bool>> = spaces
        .iter()
        .map(|ds| {
            let r = ds.relevant_dimensions();
            (0..nd).map(|d| r.contains(&d)).collect()
        })
        .collect();
    let fanouts: Vec<Vec<u64>> = (0..nl).map(|q| m.fanouts(q)).collect();
    let par: Vec<u64> = fanouts.iter().map(|f| f.iter().product()).collect();
    // Temporal loops in program order, trip > 1.
    let mut temporal: Vec<(usize, usize, u64)> = Vec::new();
    let mut temporal_end = vec![0; nl];
    for q in 0..nl {
        let trips = m.temporal_trips(q, &sizes);
        for &d in &m.levels[q].temporal_order {
            if trips[d] > 1 {
                temporal.push((q, d, trips[d]));
            }
        }
        temporal_end[q] = temporal.len();
    }

    let mut counts = AccessCounts::zeros(nl, spaces.len());
    let mut boundary_words = vec![0u64; nl];
    let mut active = 1u64;
    for j in 0..nl {
        if j > 0 {
            active *= par[j - 1];
        }
        if j == 0 || a.levels[j].is_virtual {
            continue;
        }
        let parent = a.parent_buffer(j).expect("top level is physical");
        let tile = &m.levels[j].temporal_tiles;
        let loops = &temporal[..temporal_end[j]];
        for (v, ds) in spaces.iter().enumerate() {
            let rel = &relevant[v];
            let refetch: u64 = match loops.iter().rposition(|&(_, d, _)| rel[d]) {
                Some(last) => loops[..=last].iter().map(|&(_, _, t)| t).product(),
                None => 1,
            };
            let fills = active * refetch * crate::problem::footprint_unchecked(ds, tile);
            let mc: u64 = if opts.multicast {
                (parent..j)
                    .flat_map(|q| (0..nd).filter(|&d| !rel[d]).map(move |d| (q, d)))
                    .map(|(q, d)| fanouts[q][d])
                    .product()
            } else {
                1
            };
            let served = fills / mc;
            counts.per_level[j][v].fills += fills;
            counts.per_level[parent][v].reads += served;
            boundary_words[j] += served;
            if ds.is_output() {
                counts.per_level[j][v].writebacks += fills;
                counts.per_level[parent][v].updates += fills;
                boundary_words[j] += fills;
            }
        }
    }
    let macs = p.total_macs();
    let leaf = nl - 1;
    for (v, ds) in spaces.iter().enumerate() {
        if ds.is_output() {
            counts.per_level[leaf][v].updates += macs;
        } else {
            counts.per_level[leaf][v].reads += macs;
        }
    }

    let utilized: u64 = par.iter().product();
    let compute_cycles = macs / utilized;
    let mut latency = T::from_count(compute_cycles);
    let mut bound = Bound::Compute;
    let mut transfer_cycles = vec![T::zero(); nl];
    for j in 1..nl {
        if a.levels[j].is_virtual {
            continue;
        }
        let t = T::from_count(boundary_words[j]) / a.levels[j].fill_bandwidth;
        transfer_cycles[j] = t;
        if t > latency {
            latency = t;
            bound = Bound::Level(j);
        }
    }
    let mut energy = T::from_count(macs) * a.mac_energy;
    for (j, lvl) in counts.per_level.iter().enumerate() {
        let words: u64 = lvl.iter().map(Counters::total).sum();
        energy = energy + T::from_count(words) * a.levels[j].access_energy;
    }
    let latency_seconds = latency / a.clock_hz;
    let total_pes = a.total_pes();
    CostReport {
        latency_cycles: latency,
        latency_seconds,
        energy,
        edp: energy * latency_seconds,
        utilization: T::from_count(utilized) / T::from_count(total_pes),
        utilized_pes: utilized,
        total_pes,
        compute_cycles,
        boundary_words,
        transfer_cycles,
        counts,
        bound,
    }
}
