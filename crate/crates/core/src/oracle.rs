//! Brute-force replay of a mapping, used as ground truth for the cost model.
//!
//! The simulator walks the explicit loop list of a mapping one MAC at a time.
//! Every physical buffer instance keeps the identity of the tile it holds per
//! data space (the origins of the tile along the data space's relevant
//! dimensions). A change of identity is a fill; for the output it is also a
//! writeback of the evicted tile, and resident output tiles are flushed at
//! the end. A fill is served by one parent read per distinct
//! (parent instance, time, tile) so sibling instances requesting the same
//! tile at the same time share it. Tile sizes are measured by enumerating the
//! tile's tensor coordinates and taking the span per rank.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::arch::Architecture;
use crate::cost::{AccessCounts, Counter, CostReport};
use crate::mapping::{check_legality, loop_list, LegalityViolation, LoopKind, Mapping, ShapeError};
use crate::problem::{DataSpace, ProblemInstance};
use crate::scalar::Scalar;

pub const DEFAULT_CAP: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("problem has {macs} MACs, above the simulation cap of {cap}")]
    CapExceeded { macs: u64, cap: u64 },
    #[error("illegal mapping: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Illegal(Vec<LegalityViolation>),
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimTrace {
    pub counts: AccessCounts,
    /// MACs per PE, keyed by the PE's spatial coordinates.
    pub pe_macs: BTreeMap<Vec<u64>, u64>,
    pub executed: HashSet<Vec<u64>>,
}

impl SimTrace {
    /// True when the executed iteration vectors are exactly the full space.
    pub fn covers(&self, p: &ProblemInstance) -> bool {
        self.executed.len() as u64 == p.total_macs()
            && self
                .executed
                .iter()
                .all(|v| v.iter().zip(p.dims()).all(|(&x, d)| x < d.size))
    }

    pub fn total_macs(&self) -> u64 {
        self.pe_macs.values().sum()
    }
}

pub fn simulate<T: Scalar>(
    m: &Mapping,
    p: &ProblemInstance,
    a: &Architecture<T>,
) -> Result<SimTrace, OracleError> {
    simulate_capped(m, p, a, DEFAULT_CAP)
}

/// Footprint by coordinate enumeration: span of each rank over the tile.
fn measured_footprint(ds: &DataSpace, tile: &[u64]) -> u64 {
    ds.projection
        .ranks
        .iter()
        .map(|r| {
            let mut lo = u64::MAX;
            let mut hi = 0;
            let mut idx = vec![0u64; r.terms.len()];
            loop {
                let c: u64 = r
                    .terms
                    .iter()
                    .zip(&idx)
                    .map(|(t, &i)| t.coeff * i)
                    .sum();
                lo = lo.min(c);
                hi = hi.max(c);
                let mut k = 0;
                loop {
                    if k == idx.len() {
                        return hi - lo + 1;
                    }
                    idx[k] += 1;
                    if idx[k] < tile[r.terms[k].dim] {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
            }
        })
        .product()
}

type Key = Vec<u64>;

pub fn simulate_capped<T: Scalar>(
    m: &Mapping,
    p: &ProblemInstance,
    a: &Architecture<T>,
    cap: u64,
) -> Result<SimTrace, OracleError> {
    let macs = p.total_macs();
    if macs > cap {
        return Err(OracleError::CapExceeded { macs, cap });
    }
    let violations = check_legality(m, p, a)?;
    if !violations.is_empty() {
        return Err(OracleError::Illegal(violations));
    }
    let sizes = p.sizes();
    let nl = a.levels.len();
    let nd = sizes.len();
    let spaces = p.data_spaces();
    let loops = loop_list(m, &sizes);
    let strides: Vec<u64> = loops
        .iter()
        .map(|l| match l.kind {
            LoopKind::Temporal => m.levels[l.pos].temporal_tiles[l.dim],
            LoopKind::Spatial => m.levels[l.pos].spatial_tiles[l.dim],
            LoopKind::Intra => 1,
        })
        .collect();
    let relevant: Vec<Vec<usize>> = spaces
        .iter()
        .map(|ds| ds.relevant_dimensions().into_iter().collect())
        .collect();
    let footprints: Vec<Vec<u64>> = (0..nl)
        .map(|j| {
            spaces
                .iter()
                .map(|ds| measured_footprint(ds, &m.levels[j].temporal_tiles))
                .collect()
        })
        .collect();
    let buffers: Vec<(usize, usize)> = (1..nl)
        .filter(|&j| !a.levels[j].is_virtual)
        .map(|j| (j, a.parent_buffer(j).expect("top level is physical")))
        .collect();
    let out_v = p.output_index();
    let leaf = nl - 1;

    let mut counts = AccessCounts::zeros(nl, spaces.len());
    let mut resident: HashMap<(usize, Vec<u64>), Vec<Option<Key>>> = HashMap::new();
    let mut served: HashSet<(usize, Vec<u64>, usize, Vec<u64>, Key)> = HashSet::new();
    let mut pe_macs = BTreeMap::new();
    let mut executed = HashSet::new();

    let mut idx = vec![0u64; loops.len()];
    loop {
        let mut point = vec![0u64; nd];
        for (k, l) in loops.iter().enumerate() {
            point[l.dim] += idx[k] * strides[k];
        }
        for &(j, parent) in &buffers {
            let mut origin = vec![0u64; nd];
            let mut instance = Vec::new();
            let mut parent_instance = Vec::new();
            let mut time = Vec::new();
            for (k, l) in loops.iter().enumerate() {
                match l.kind {
                    LoopKind::Temporal if l.pos <= j => {
                        origin[l.dim] += idx[k] * strides[k];
                        time.push(idx[k]);
                    }
                    LoopKind::Spatial if l.pos < j => {
                        origin[l.dim] += idx[k] * strides[k];
                        instance.push(idx[k]);
                        if l.pos < parent {
                            parent_instance.push(idx[k]);
                        }
                    }
                    _ => {}
                }
            }
            let slots = resident
                .entry((j, instance))
                .or_insert_with(|| vec![None; spaces.len()]);
            for v in 0..spaces.len() {
                let key: Key = relevant[v].iter().map(|&d| origin[d]).collect();
                if slots[v].as_ref() == Some(&key) {
                    continue;
                }
                let fp = footprints[j][v];
                if v == out_v && slots[v].is_some() {
                    counts.per_level[j][v].writebacks += fp;
                    counts.per_level[parent][v].updates += fp;
                }
                counts.per_level[j][v].fills += fp;
                if served.insert((j, parent_instance.clone(), v, time.clone(), key.clone())) {
                    counts.per_level[parent][v].reads += fp;
                }
                slots[v] = Some(key);
            }
        }
        for v in 0..spaces.len() {
            if v == out_v {
                counts.per_level[leaf][v].updates += 1;
            } else {
                counts.per_level[leaf][v].reads += 1;
            }
        }
        let pe: Vec<u64> = loops
            .iter()
            .zip(&idx)
            .filter(|(l, _)| l.kind == LoopKind::Spatial)
            .map(|(_, &i)| i)
            .collect();
        *pe_macs.entry(pe).or_insert(0) += 1;
        executed.insert(point);

        let mut k = loops.len();
        loop {
            if k == 0 {
                for ((j, _), slots) in &resident {
                    if slots[out_v].is_some() {
                        let parent = a.parent_buffer(*j).expect("top level is physical");
                        counts.per_level[*j][out_v].writebacks += footprints[*j][out_v];
                        counts.per_level[parent][out_v].updates += footprints[*j][out_v];
                    }
                }
                return Ok(SimTrace {
                    counts,
                    pe_macs,
                    executed,
                });
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < loops[k].trip {
                break;
            }
            idx[k] = 0;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    /// Level name, or `PE` for per-PE MAC checks.
    pub level: String,
    pub data_space: String,
    pub counter: String,
    /// Oracle value.
    pub expected: u64,
    /// Model value.
    pub actual: u64,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}: oracle {} model {}",
            self.level, self.data_space, self.counter, self.expected, self.actual
        )
    }
}

/// Compares a trace against a model report for the same problem and
/// architecture. Empty means every counter agrees.
pub fn diff<T: Scalar>(
    t: &SimTrace,
    r: &CostReport<T>,
    p: &ProblemInstance,
    a: &Architecture<T>,
) -> Vec<Mismatch> {
    let mut out = Vec::new();
    for (j, lvl) in a.levels.iter().enumerate() {
        for (v, ds) in p.data_spaces().iter().enumerate() {
            let (o, mdl) = (t.counts.at(j, v), r.counts.at(j, v));
            for c in Counter::ALL {
                if o.get(c) != mdl.get(c) {
                    out.push(Mismatch {
                        level: lvl.name.clone(),
                        data_space: ds.name.clone(),
                        counter: c.to_string(),
                        expected: o.get(c),
                        actual: mdl.get(c),
                    });
                }
            }
        }
    }
    if t.pe_macs.len() as u64 != r.utilized_pes {
        out.push(Mismatch {
            level: "PE".into(),
            data_space: "-".into(),
            counter: "active_pes".into(),
            expected: t.pe_macs.len() as u64,
            actual: r.utilized_pes,
        });
    }
    for (pe, &n) in &t.pe_macs {
        if n != r.compute_cycles {
            out.push(Mismatch {
                level: "PE".into(),
                data_space: format!("{pe:?}"),
                counter: "macs".into(),
                expected: n,
                actual: r.compute_cycles,
            });
        }
    }
    out
}

/// Debug dump of the trace counters, one row per (level, data space).
pub fn trace_csv<T: Scalar>(t: &SimTrace, p: &ProblemInstance, a: &Architecture<T>) -> String {
    let mut s = String::from("level,data_space,fills,reads,updates,writebacks\n");
    for (j, lvl) in a.levels.iter().enumerate() {
        for (v, ds) in p.data_spaces().iter().enumerate() {
            let c = t.counts.at(j, v);
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                lvl.name, ds.name, c.fills, c.reads, c.updates, c.writebacks
            ));
        }
    }
    s
}
