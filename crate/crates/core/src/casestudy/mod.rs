//! Drivers for the three exploration studies.
//!
//! 1. Algorithm exploration: each tensor-contraction kernel run natively and
//!    through its GEMM reformulation on the cloud 32×64 accelerator.
//! 2. Mapping exploration: DNN layers on every aspect ratio of the edge and
//!    cloud PE arrays.
//! 3. Hardware exploration: DNN layers on a 16-chiplet accelerator while the
//!    per-chiplet global-buffer fill bandwidth doubles.
//!
//! Each driver returns rows; [`Table::to_csv`] renders them. EDP is
//! normalized by the maximum EDP of its group.

pub mod svg;

use thiserror::Error;

use crate::arch::{make_grid_arch, Architecture, GridConfig, GridError};
use crate::cost::Metric;
use crate::ir::{reformulate_ttgt, ttgt_grouping, TtgtError};
use crate::mappers::{search_warm, SearchConfig, SearchError, SearchResult, Strategy};
use crate::mapping::Mapping;
use crate::mapspace::{ConstraintSet, MapSpace, MapSpaceError};
use crate::problem::ProblemInstance;
use crate::workloads::{TcKernel, DNN_LAYERS};

pub const EDGE_ASPECTS: [(u64, u64); 5] = [(1, 256), (2, 128), (4, 64), (8, 32), (16, 16)];
pub const CLOUD_ASPECTS: [(u64, u64); 6] =
    [(1, 2048), (2, 1024), (4, 512), (8, 256), (16, 128), (32, 64)];
/// Per-chiplet fill bandwidths in GB/s (words per cycle).
pub const FILL_BANDWIDTHS: [f64; 8] = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
pub const CHIPLETS: u64 = 16;
/// Relative EDP gain per doubling below which a curve counts as saturated.
pub const KNEE_THRESHOLD: f64 = 0.01;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Space(#[from] MapSpaceError),
    #[error(transparent)]
    Ttgt(#[from] TtgtError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("unknown case study {0} (expected 1, 2 or 3)")]
    UnknownCase(u32),
    #[error("bad case-study table: {0}")]
    Table(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaseConfig {
    /// Divides workload dimensions; 1 runs the full sizes.
    pub scale: u64,
    pub strategy: Strategy,
    pub workers: Option<usize>,
    /// Restrict to these workloads (kernel or layer names); empty = all.
    pub only: Vec<String>,
}

impl Default for CaseConfig {
    fn default() -> Self {
        CaseConfig {
            scale: 1,
            strategy: Strategy::HillClimb {
                restarts: 4,
                seed: 1,
            },
            workers: None,
            only: Vec::new(),
        }
    }
}

impl CaseConfig {
    fn wants(&self, name: &str) -> bool {
        self.only.is_empty() || self.only.iter().any(|o| o == name)
    }

    fn search(
        &self,
        p: &ProblemInstance,
        a: &Architecture<f64>,
        c: &ConstraintSet,
        warm: &[Mapping],
    ) -> Result<(SearchResult<f64>, MapSpace<f64>), CaseError> {
        let space = MapSpace::new(p, a, c)?;
        let mut cfg = SearchConfig::new(self.strategy, Metric::Edp);
        cfg.workers = self.workers;
        let mut starts = warm.to_vec();
        starts.extend(space.max_utilization_mapping());
        let r = search_warm(&space, &cfg, &starts)?;
        Ok((r, space))
    }
}

/// A header plus rows of already formatted cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, CaseError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| CaseError::Table("empty file".into()))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, l) in lines.enumerate() {
            let r: Vec<String> = l.split(',').map(str::to_string).collect();
            if r.len() != header.len() {
                return Err(CaseError::Table(format!(
                    "row {} has {} cells, header has {}",
                    i + 2,
                    r.len(),
                    header.len()
                )));
            }
            rows.push(r);
        }
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize, CaseError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CaseError::Table(format!("missing column `{name}`")))
    }

    /// Cell `name` of every row parsed as `f64`.
    pub fn floats(&self, name: &str) -> Result<Vec<f64>, CaseError> {
        let c = self.column(name)?;
        self.rows
            .iter()
            .map(|r| {
                r[c].parse::<f64>()
                    .map_err(|_| CaseError::Table(format!("`{}` is not a number", r[c])))
            })
            .collect()
    }

    pub fn strings(&self, name: &str) -> Result<Vec<String>, CaseError> {
        let c = self.column(name)?;
        Ok(self.rows.iter().map(|r| r[c].clone()).collect())
    }
}

/// Divides every value by the group maximum.
fn normalize(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(0.0, f64::max);
    v.iter()
        .map(|&x| if max > 0.0 { x / max } else { 0.0 })
        .collect()
}

fn push_normalized(table: &mut Table, group: Vec<Vec<String>>, edps: &[f64], at: usize) {
    for (mut row, n) in group.into_iter().zip(normalize(edps)) {
        row.insert(at, n.to_string());
        table.rows.push(row);
    }
}

/// Constraint used for the tensor-contraction study: one dimension per
/// parallel level, and a dimension is split across one level at most.
pub fn partition_constraint() -> ConstraintSet {
    ConstraintSet {
        max_parallel_dims_per_level: Some(1),
        distinct_parallel_dims: true,
        ..Default::default()
    }
}

fn tc_sizes(k: TcKernel, scale: u64) -> Vec<u64> {
    let large = match k {
        TcKernel::Intensli2 | TcKernel::Ccsd7 => 64,
        TcKernel::CcsdT4 => 32,
    };
    let mut v = vec![16, (large / scale.max(1)).max(2)];
    v.sort_unstable();
    v.dedup();
    v
}

pub const CASE1_HEADER: [&str; 13] = [
    "kernel",
    "tds",
    "variant",
    "gemm_m",
    "gemm_n",
    "gemm_k",
    "edp",
    "norm_edp",
    "utilized_pes",
    "total_pes",
    "latency_cycles",
    "energy",
    "bound",
];

pub fn case1(cfg: &CaseConfig) -> Result<Table, CaseError> {
    let a: Architecture<f64> = make_grid_arch(&GridConfig::cloud(32, 64))?;
    let cons = partition_constraint();
    let mut t = Table::new(&CASE1_HEADER);
    for k in TcKernel::ALL {
        if !cfg.wants(k.name()) {
            continue;
        }
        for tds in tc_sizes(k, cfg.scale) {
            let native = k.problem(tds);
            let g = ttgt_grouping(&native)?;
            let gemm = reformulate_ttgt(&native)?;
            let mut group = Vec::new();
            let mut edps = Vec::new();
            for (variant, p) in [("native", &native), ("ttgt", &gemm)] {
                let (r, _) = cfg.search(p, &a, &cons, &[])?;
                let rep = &r.report;
                let dims = if variant == "ttgt" {
                    [g.m_size, g.n_size, g.k_size].map(|x| x.to_string())
                } else {
                    [String::new(), String::new(), String::new()]
                };
                edps.push(rep.edp);
                let [m, n, kk] = dims;
                group.push(vec![
                    k.name().to_string(),
                    tds.to_string(),
                    variant.to_string(),
                    m,
                    n,
                    kk,
                    rep.edp.to_string(),
                    rep.utilized_pes.to_string(),
                    rep.total_pes.to_string(),
                    rep.latency_cycles.to_string(),
                    rep.energy.to_string(),
                    rep.bound.to_string(),
                ]);
            }
            push_normalized(&mut t, group, &edps, 7);
        }
    }
    Ok(t)
}

pub const CASE2_HEADER: [&str; 12] = [
    "class",
    "layer",
    "rows",
    "cols",
    "edp",
    "norm_edp",
    "utilized_pes",
    "max_utilized_pes",
    "total_pes",
    "latency_cycles",
    "energy",
    "bound",
];

pub fn case2(cfg: &CaseConfig) -> Result<Table, CaseError> {
    let mut t = Table::new(&CASE2_HEADER);
    let classes: [(&str, &[(u64, u64)]); 2] = [("edge", &EDGE_ASPECTS), ("cloud", &CLOUD_ASPECTS)];
    for (class, aspects) in classes {
        for layer in DNN_LAYERS.iter().filter(|l| cfg.wants(l.name)) {
            let p = layer.scaled(cfg.scale).problem();
            let mut group = Vec::new();
            let mut edps = Vec::new();
            for &(rows, cols) in aspects {
                let gc = if class == "edge" {
                    GridConfig::edge(rows, cols)
                } else {
                    GridConfig::cloud(rows, cols)
                };
                let a: Architecture<f64> = make_grid_arch(&gc)?;
                let (r, space) = cfg.search(&p, &a, &ConstraintSet::default(), &[])?;
                let rep = &r.report;
                let max_pes = space.max_utilized_pes().unwrap_or(0);
                edps.push(rep.edp);
                group.push(vec![
                    class.to_string(),
                    layer.name.to_string(),
                    rows.to_string(),
                    cols.to_string(),
                    rep.edp.to_string(),
                    rep.utilized_pes.to_string(),
                    max_pes.to_string(),
                    rep.total_pes.to_string(),
                    rep.latency_cycles.to_string(),
                    rep.energy.to_string(),
                    rep.bound.to_string(),
                ]);
            }
            push_normalized(&mut t, group, &edps, 5);
        }
    }
    Ok(t)
}

/// Index of the first point after which every step improves by less than
/// `threshold` (relative). `None` for an empty curve.
pub fn knee(curve: &[f64], threshold: f64) -> Option<usize> {
    if curve.is_empty() {
        return None;
    }
    let mut k = curve.len() - 1;
    for i in (0..curve.len() - 1).rev() {
        let gain = if curve[i] > 0.0 {
            (curve[i] - curve[i + 1]) / curve[i]
        } else {
            0.0
        };
        if gain >= threshold {
            break;
        }
        k = i;
    }
    Some(k)
}

pub const CASE3_HEADER: [&str; 10] = [
    "layer",
    "fill_bw_gbps",
    "edp",
    "norm_edp",
    "latency_cycles",
    "energy",
    "utilized_pes",
    "total_pes",
    "bound",
    "knee_gbps",
];

pub fn chiplet_config(fill_bw: f64) -> GridConfig {
    GridConfig {
        chiplets: CHIPLETS,
        dram_bw: fill_bw,
        ..GridConfig::edge(16, 16)
    }
}

pub fn case3(cfg: &CaseConfig) -> Result<Table, CaseError> {
    let mut t = Table::new(&CASE3_HEADER);
    for layer in DNN_LAYERS.iter().filter(|l| cfg.wants(l.name)) {
        let p = layer.scaled(cfg.scale).problem();
        let mut group = Vec::new();
        let mut edps = Vec::new();
        let mut warm: Vec<Mapping> = Vec::new();
        for bw in FILL_BANDWIDTHS {
            let a: Architecture<f64> = make_grid_arch(&chiplet_config(bw))?;
            let (r, _) = cfg.search(&p, &a, &ConstraintSet::default(), &warm)?;
            let rep = &r.report;
            edps.push(rep.edp);
            group.push(vec![
                layer.name.to_string(),
                bw.to_string(),
                rep.edp.to_string(),
                rep.latency_cycles.to_string(),
                rep.energy.to_string(),
                rep.utilized_pes.to_string(),
                rep.total_pes.to_string(),
                rep.bound.to_string(),
            ]);
            warm = vec![r.best];
        }
        let k = knee(&edps, KNEE_THRESHOLD).unwrap_or(0);
        for row in &mut group {
            row.push(FILL_BANDWIDTHS[k].to_string());
        }
        push_normalized(&mut t, group, &edps, 3);
    }
    Ok(t)
}

pub fn run(id: u32, cfg: &CaseConfig) -> Result<Table, CaseError> {
    match id {
        1 => case1(cfg),
        2 => case2(cfg),
        3 => case3(cfg),
        other => Err(CaseError::UnknownCase(other)),
    }
}
