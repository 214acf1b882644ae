//! Cluster-target architecture abstraction.
//!
//! An [`Architecture`] is a list of cluster levels, outermost (`C_n`, usually
//! DRAM) first and the PE level (`C_1`) last. Each level may own a buffer
//! (`memory_words`) or be *virtual* (tiling only), and fans out into
//! `sub_cluster_count` instances of the next level along a physical axis.

mod file;

pub use file::{parse_architecture, ArchFileError};

use std::fmt;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
    Z,
    None,
}

impl Axis {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "X" => Some(Axis::X),
            "Y" => Some(Axis::Y),
            "Z" => Some(Axis::Z),
            "NONE" | "" => Some(Axis::None),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::X => "X",
            Axis::Y => "Y",
            Axis::Z => "Z",
            Axis::None => "None",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Marks a backing store with no capacity limit.
pub const UNBOUNDED: u64 = u64::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterLevel<T> {
    pub name: String,
    /// Buffer capacity per instance; 0 for virtual levels.
    pub memory_words: u64,
    /// Words per cycle delivered from the parent buffer into all instances of
    /// this level together. Unused at the top level and at virtual levels.
    pub fill_bandwidth: T,
    pub is_virtual: bool,
    /// Number of child clusters each instance of this level contains.
    pub sub_cluster_count: u64,
    pub axis: Axis,
    pub has_compute: bool,
    /// Energy per word access to this level's buffer.
    pub access_energy: T,
}

impl<T: Scalar> ClusterLevel<T> {
    pub fn memory(name: &str, words: u64, fanout: u64, axis: Axis, bw: T, energy: T) -> Self {
        ClusterLevel {
            name: name.to_string(),
            memory_words: words,
            fill_bandwidth: bw,
            is_virtual: false,
            sub_cluster_count: fanout,
            axis,
            has_compute: false,
            access_energy: energy,
        }
    }

    pub fn virtual_level(name: &str, fanout: u64, axis: Axis) -> Self {
        ClusterLevel {
            name: name.to_string(),
            memory_words: 0,
            fill_bandwidth: T::zero(),
            is_virtual: true,
            sub_cluster_count: fanout,
            axis,
            has_compute: false,
            access_energy: T::zero(),
        }
    }

    /// The PE level: private buffer plus one MAC unit.
    pub fn pe(name: &str, words: u64, bw: T, energy: T) -> Self {
        ClusterLevel {
            has_compute: true,
            ..Self::memory(name, words, 1, Axis::None, bw, energy)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ArchViolation {
    #[error("architecture needs at least two levels, has {0}")]
    TooFewLevels(usize),
    #[error("level {0} is virtual but has memory")]
    VirtualWithMemory(String),
    #[error("level {0} has no memory and is not virtual")]
    NoMemory(String),
    #[error("level {0} has zero sub-clusters")]
    ZeroFanout(String),
    #[error("level {0} has axis {1} but {2} sub-clusters")]
    AxisMismatch(String, Axis, u64),
    #[error("compute must sit at exactly the innermost level")]
    ComputePlacement,
    #[error("outermost level {0} must be a physical backing store")]
    VirtualTop(String),
    #[error("innermost level {0} must own a buffer")]
    VirtualLeaf(String),
    #[error("innermost level {0} holds a single MAC and cannot fan out")]
    LeafFanout(String),
    #[error("level {0} needs a positive fill bandwidth")]
    Bandwidth(String),
    #[error("level {0} has a negative or non-finite access energy")]
    Energy(String),
    #[error("clock must be positive and MAC energy non-negative")]
    Clock,
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("invalid architecture: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ArchError(pub Vec<ArchViolation>);

#[derive(Clone, Debug, PartialEq)]
pub struct Architecture<T> {
    /// Outermost first.
    pub levels: Vec<ClusterLevel<T>>,
    pub clock_hz: T,
    pub mac_energy: T,
    pub word_bits: u32,
}

impl<T: Scalar> Architecture<T> {
    /// Builds and validates.
    pub fn new(levels: Vec<ClusterLevel<T>>, clock_hz: T, mac_energy: T) -> Result<Self, ArchError> {
        let a = Architecture {
            levels,
            clock_hz,
            mac_energy,
            word_bits: 8,
        };
        let v = a.validate();
        if v.is_empty() {
            Ok(a)
        } else {
            Err(ArchError(v))
        }
    }

    pub fn validate(&self) -> Vec<ArchViolation> {
        let mut out = Vec::new();
        let n = self.levels.len();
        if n < 2 {
            out.push(ArchViolation::TooFewLevels(n));
        }
        for (i, l) in self.levels.iter().enumerate() {
            let name = l.name.clone();
            if l.is_virtual && l.memory_words != 0 {
                out.push(ArchViolation::VirtualWithMemory(name.clone()));
            }
            if !l.is_virtual && l.memory_words == 0 {
                out.push(ArchViolation::NoMemory(name.clone()));
            }
            if l.sub_cluster_count == 0 {
                out.push(ArchViolation::ZeroFanout(name.clone()));
            } else if (l.axis == Axis::None) != (l.sub_cluster_count == 1) {
                out.push(ArchViolation::AxisMismatch(
                    name.clone(),
                    l.axis,
                    l.sub_cluster_count,
                ));
            }
            if i > 0 && !l.is_virtual && !(l.fill_bandwidth > T::zero() && l.fill_bandwidth.is_finite()) {
                out.push(ArchViolation::Bandwidth(name.clone()));
            }
            if !(l.access_energy >= T::zero() && l.access_energy.is_finite()) {
                out.push(ArchViolation::Energy(name));
            }
        }
        let computes: Vec<usize> = (0..n).filter(|&i| self.levels[i].has_compute).collect();
        if n > 0 && computes != [n - 1] {
            out.push(ArchViolation::ComputePlacement);
        }
        if let Some(top) = self.levels.first() {
            if top.is_virtual {
                out.push(ArchViolation::VirtualTop(top.name.clone()));
            }
        }
        if let Some(leaf) = self.levels.last() {
            if leaf.is_virtual {
                out.push(ArchViolation::VirtualLeaf(leaf.name.clone()));
            }
            if leaf.sub_cluster_count != 1 {
                out.push(ArchViolation::LeafFanout(leaf.name.clone()));
            }
        }
        if !(self.clock_hz > T::zero()) || !(self.mac_energy >= T::zero()) {
            out.push(ArchViolation::Clock);
        }
        out
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn total_pes(&self) -> u64 {
        self.levels.iter().map(|l| l.sub_cluster_count).product()
    }

    /// Number of instances of the level at position `pos` (0 = outermost).
    pub fn instances(&self, pos: usize) -> u64 {
        self.levels[..pos].iter().map(|l| l.sub_cluster_count).product()
    }

    /// `C_k` label of the level at `pos`.
    pub fn cluster_label(&self, pos: usize) -> String {
        format!("C{}", self.levels.len() - pos)
    }

    /// Position of the closest non-virtual level strictly above `pos`.
    pub fn parent_buffer(&self, pos: usize) -> Option<usize> {
        (0..pos).rev().find(|&p| !self.levels[p].is_virtual)
    }

    /// Copy with every fill bandwidth below the top replaced by `f(level)`.
    pub fn map_bandwidth(&self, mut f: impl FnMut(usize, T) -> T) -> Self {
        let mut a = self.clone();
        for (i, l) in a.levels.iter_mut().enumerate().skip(1) {
            l.fill_bandwidth = f(i, l.fill_bandwidth);
        }
        a
    }

    /// Same architecture over another scalar type.
    pub fn cast<U: Scalar>(&self) -> Architecture<U> {
        let c = |x: T| U::lit(x.to_f64_lossy());
        Architecture {
            levels: self
                .levels
                .iter()
                .map(|l| ClusterLevel {
                    name: l.name.clone(),
                    memory_words: l.memory_words,
                    fill_bandwidth: c(l.fill_bandwidth),
                    is_virtual: l.is_virtual,
                    sub_cluster_count: l.sub_cluster_count,
                    axis: l.axis,
                    has_compute: l.has_compute,
                    access_energy: c(l.access_energy),
                })
                .collect(),
            clock_hz: c(self.clock_hz),
            mac_energy: c(self.mac_energy),
            word_bits: self.word_bits,
        }
    }
}

/// Default relative energies per word access.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyTable {
    pub dram: f64,
    pub l2: f64,
    pub l1: f64,
    pub mac: f64,
}

impl Default for EnergyTable {
    fn default() -> Self {
        EnergyTable {
            dram: 200.0,
            l2: 6.0,
            l1: 1.0,
            mac: 0.5,
        }
    }
}

/// Parameters of the canonical PE-grid accelerator. Bandwidths are in words
/// per cycle per chiplet; at 1 GHz with 8-bit words, 1 GB/s = 1 word/cycle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridConfig {
    pub rows: u64,
    pub cols: u64,
    pub l1_words: u64,
    pub l2_words: u64,
    /// L2 to PE-array bandwidth.
    pub noc_bw: f64,
    /// Off-chip to L2 bandwidth.
    pub dram_bw: f64,
    pub chiplets: u64,
    pub energy: EnergyTable,
}

impl GridConfig {
    /// Edge accelerator: 0.5 KB L1, 100 KB L2, 32 GB/s.
    pub fn edge(rows: u64, cols: u64) -> Self {
        GridConfig {
            rows,
            cols,
            l1_words: 512,
            l2_words: 100 * 1024,
            noc_bw: 32.0,
            dram_bw: 32.0,
            chiplets: 1,
            energy: EnergyTable::default(),
        }
    }

    /// Cloud accelerator: 0.5 KB L1, 800 KB L2, 256 GB/s.
    pub fn cloud(rows: u64, cols: u64) -> Self {
        GridConfig {
            l2_words: 800 * 1024,
            noc_bw: 256.0,
            dram_bw: 256.0,
            ..Self::edge(rows, cols)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("grid parameter `{0}` must be positive")]
    Zero(&'static str),
}

/// Builds `DRAM -> L2 (rows, Y) -> virtual (cols, X) -> PE`. A grid with a
/// single row or column drops the virtual level. With `chiplets > 1` the DRAM
/// level fans out to one L2 per chiplet along Z, and the L2 fill bandwidth is
/// the per-chiplet figure times the chiplet count.
pub fn make_grid_arch<T: Scalar>(cfg: &GridConfig) -> Result<Architecture<T>, GridError> {
    for (v, name) in [
        (cfg.rows, "rows"),
        (cfg.cols, "cols"),
        (cfg.l1_words, "l1_words"),
        (cfg.l2_words, "l2_words"),
        (cfg.chiplets, "chiplets"),
    ] {
        if v == 0 {
            return Err(GridError::Zero(name));
        }
    }
    if !(cfg.noc_bw > 0.0) {
        return Err(GridError::Zero("noc_bw"));
    }
    if !(cfg.dram_bw > 0.0) {
        return Err(GridError::Zero("dram_bw"));
    }
    let e = cfg.energy;
    let ch = cfg.chiplets;
    let axis = |n: u64, a: Axis| if n == 1 { Axis::None } else { a };
    let top = ClusterLevel::memory(
        "DRAM",
        UNBOUNDED,
        ch,
        axis(ch, Axis::Z),
        T::lit(cfg.dram_bw),
        T::lit(e.dram),
    );
    let l2_bw = T::lit(cfg.dram_bw * ch as f64);
    let l1_bw = T::lit(cfg.noc_bw * ch as f64);
    let mut levels = vec![top];
    if cfg.rows > 1 && cfg.cols > 1 {
        levels.push(ClusterLevel::memory(
            "L2",
            cfg.l2_words,
            cfg.rows,
            Axis::Y,
            l2_bw,
            T::lit(e.l2),
        ));
        levels.push(ClusterLevel::virtual_level("V2", cfg.cols, Axis::X));
    } else {
        let (fan, ax) = if cfg.rows > 1 {
            (cfg.rows, Axis::Y)
        } else {
            (cfg.cols, axis(cfg.cols, Axis::X))
        };
        levels.push(ClusterLevel::memory(
            "L2",
            cfg.l2_words,
            fan,
            ax,
            l2_bw,
            T::lit(e.l2),
        ));
    }
    levels.push(ClusterLevel::pe("L1", cfg.l1_words, l1_bw, T::lit(e.l1)));
    Ok(Architecture::new(levels, T::lit(1e9), T::lit(e.mac)).expect("grid construction is valid"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn virtual_arch() -> Architecture<f64> {
        Architecture::new(
            vec![
                ClusterLevel::memory("DRAM", UNBOUNDED, 1, Axis::None, 1.0, 200.0),
                ClusterLevel::memory("L2", 1024, 2, Axis::Y, 4.0, 6.0),
                ClusterLevel::virtual_level("V", 4, Axis::X),
                ClusterLevel::pe("L1", 64, 8.0, 1.0),
            ],
            1e9,
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn simple_2d_array_has_eight_pes() {
        let a = virtual_arch();
        assert_eq!(a.total_pes(), 8);
        assert_eq!(a.instances(3), 8);
        assert_eq!(a.instances(2), 2);
        assert_eq!(a.cluster_label(0), "C4");
        assert_eq!(a.parent_buffer(3), Some(1));
    }

    #[test]
    fn virtual_with_memory_is_rejected() {
        let mut a = virtual_arch();
        a.levels[2].memory_words = 64;
        assert_eq!(
            a.validate(),
            vec![ArchViolation::VirtualWithMemory("V".into())]
        );
    }

    #[test]
    fn axis_and_compute_rules() {
        let mut a = virtual_arch();
        a.levels[1].axis = Axis::None;
        a.levels[0].has_compute = true;
        let v = a.validate();
        assert!(v.contains(&ArchViolation::AxisMismatch("L2".into(), Axis::None, 2)));
        assert!(v.contains(&ArchViolation::ComputePlacement));
        let mut a = virtual_arch();
        a.levels[0].is_virtual = true;
        a.levels[0].memory_words = 0;
        assert!(a.validate().contains(&ArchViolation::VirtualTop("DRAM".into())));
    }

    #[test]
    fn grid_presets() {
        let edge: Architecture<f64> = make_grid_arch(&GridConfig::edge(16, 16)).unwrap();
        assert_eq!(edge.total_pes(), 256);
        assert_eq!(edge.num_levels(), 4);
        assert_eq!(edge.levels[3].memory_words, 512);
        assert_eq!(edge.levels[1].memory_words, 102_400);
        let cloud: Architecture<f32> = make_grid_arch(&GridConfig::cloud(32, 64)).unwrap();
        assert_eq!(cloud.total_pes(), 2048);
        let chip = GridConfig {
            chiplets: 16,
            ..GridConfig::edge(16, 16)
        };
        let chip: Architecture<f64> = make_grid_arch(&chip).unwrap();
        assert_eq!(chip.total_pes(), 4096);
        assert_eq!(chip.levels[0].axis, Axis::Z);
        assert_eq!(chip.levels[1].fill_bandwidth, 32.0 * 16.0);
    }

    #[test]
    fn aspect_ratios_keep_pe_count() {
        for (r, c) in [(1, 256), (2, 128), (4, 64), (8, 32), (16, 16)] {
            let a: Architecture<f64> = make_grid_arch(&GridConfig::edge(r, c)).unwrap();
            assert_eq!(a.total_pes(), 256);
            assert_eq!(a.num_levels(), if r == 1 { 3 } else { 4 });
        }
    }

    #[test]
    fn zero_grid_is_rejected() {
        assert_eq!(
            make_grid_arch::<f64>(&GridConfig::edge(0, 4)),
            Err(GridError::Zero("rows"))
        );
    }
}
