//! `.arch` files.
//!
//! ```toml
//! clock_hz = 1e9
//! word_bits = 8
//! mac_energy = 0.5
//!
//! [[cluster]]
//! level = 3                 # C3: outermost
//! name = "DRAM"
//! memory = "unbounded"
//! energy = 200
//!
//! [[cluster]]
//! level = 2
//! name = "V"
//! virtual = true
//! fanout = 4
//! axis = "X"
//!
//! [[cluster]]
//! level = 1
//! name = "L1"
//! memory_kb = 0.5           # or memory_words = 512
//! fill_bandwidth_gbps = 32
//! energy = 1
//!
//! [energy]                  # optional; overrides per level name, plus `mac`
//! mac = 0.5
//! DRAM = 200
//! ```
//!
//! Clusters may appear in any order; `level` numbers must be `n, n-1, ..., 1`.
//! `C_1` is the PE level and carries the MAC.

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use super::{Architecture, Axis, ClusterLevel, UNBOUNDED};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ArchFileError {
    #[error("malformed architecture file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("cluster levels must be numbered 1..=n without gaps")]
    Levels,
    #[error("cluster C{0}: {1}")]
    Cluster(u32, String),
    #[error("energy table names unknown level `{0}`")]
    UnknownEnergyKey(String),
    #[error(transparent)]
    Invalid(#[from] super::ArchError),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ArchFile {
    #[serde(default = "default_clock")]
    clock_hz: f64,
    #[serde(default = "default_word_bits")]
    word_bits: u32,
    #[serde(default = "default_mac")]
    mac_energy: f64,
    cluster: Vec<ClusterEntry>,
    #[serde(default)]
    energy: BTreeMap<String, f64>,
}

fn default_clock() -> f64 {
    1e9
}

fn default_word_bits() -> u32 {
    8
}

fn default_mac() -> f64 {
    0.5
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClusterEntry {
    level: u32,
    name: Option<String>,
    memory_kb: Option<f64>,
    memory_words: Option<u64>,
    memory: Option<String>,
    #[serde(default, rename = "virtual")]
    is_virtual: bool,
    #[serde(default = "one")]
    fanout: u64,
    axis: Option<String>,
    fill_bandwidth_gbps: Option<f64>,
    #[serde(default)]
    energy: f64,
}

fn one() -> u64 {
    1
}

pub fn parse_architecture<T: Scalar>(text: &str) -> Result<Architecture<T>, ArchFileError> {
    let mut file: ArchFile = toml::from_str(text)?;
    file.cluster.sort_by(|a, b| b.level.cmp(&a.level));
    let n = file.cluster.len() as u32;
    if file
        .cluster
        .iter()
        .enumerate()
        .any(|(i, c)| c.level != n - i as u32)
    {
        return Err(ArchFileError::Levels);
    }
    let bytes_per_word = file.word_bits as f64 / 8.0;
    let words_per_cycle = |gbps: f64| gbps * 1e9 / (file.clock_hz * bytes_per_word);
    let mut levels = Vec::new();
    for c in &file.cluster {
        let err = |m: &str| ArchFileError::Cluster(c.level, m.to_string());
        let name = c.name.clone().unwrap_or_else(|| format!("C{}", c.level));
        let memory_words = match (c.memory_kb, c.memory_words, c.memory.as_deref()) {
            (None, None, None) => 0,
            (Some(kb), None, None) => (kb * 1024.0 / bytes_per_word).round() as u64,
            (None, Some(w), None) => w,
            (None, None, Some("unbounded")) => UNBOUNDED,
            (None, None, Some(other)) => return Err(err(&format!("unknown memory `{other}`"))),
            _ => return Err(err("give only one of memory_kb, memory_words, memory")),
        };
        let axis = match &c.axis {
            None if c.fanout == 1 => Axis::None,
            None => return Err(err("fanout > 1 needs an axis")),
            Some(a) => Axis::parse(a).ok_or_else(|| err(&format!("unknown axis `{a}`")))?,
        };
        let energy = *file.energy.get(&name).unwrap_or(&c.energy);
        levels.push(ClusterLevel {
            name,
            memory_words,
            fill_bandwidth: T::lit(c.fill_bandwidth_gbps.map_or(0.0, words_per_cycle)),
            is_virtual: c.is_virtual,
            sub_cluster_count: c.fanout,
            axis,
            has_compute: c.level == 1,
            access_energy: T::lit(energy),
        });
    }
    for key in file.energy.keys() {
        if key != "mac" && !levels.iter().any(|l| &l.name == key) {
            return Err(ArchFileError::UnknownEnergyKey(key.clone()));
        }
    }
    let mac = *file.energy.get("mac").unwrap_or(&file.mac_energy);
    let mut arch = Architecture::new(levels, T::lit(file.clock_hz), T::lit(mac))?;
    arch.word_bits = file.word_bits;
    Ok(arch)
}

#[cfg(test)]
mod tests {
    use super::*;

    const VIRTUAL_ARCH: &str = r#"
mac_energy = 0.25

[[cluster]]
level = 1
name = "L1"
memory_words = 64
fill_bandwidth_gbps = 8
energy = 1

[[cluster]]
level = 4
name = "DRAM"
memory = "unbounded"
energy = 200

[[cluster]]
level = 3
name = "L2"
memory_kb = 1
fanout = 2
axis = "Y"
fill_bandwidth_gbps = 4
energy = 6

[[cluster]]
level = 2
virtual = true
fanout = 4
axis = "X"

[energy]
L2 = 7
"#;

    #[test]
    fn parses_and_orders_levels() {
        let a: Architecture<f64> = parse_architecture(VIRTUAL_ARCH).unwrap();
        let names: Vec<_> = a.levels.iter().map(|l| l.name.as_str()).collect();
        assert_eq!(names, ["DRAM", "L2", "C2", "L1"]);
        assert_eq!(a.total_pes(), 8);
        assert_eq!(a.levels[1].memory_words, 1024);
        assert_eq!(a.levels[1].access_energy, 7.0);
        assert_eq!(a.levels[3].fill_bandwidth, 8.0);
        assert!(a.levels[3].has_compute);
        assert_eq!(a.mac_energy, 0.25);
    }

    #[test]
    fn sixteen_bit_words_halve_capacity_and_rate() {
        let text = format!("word_bits = 16\n{VIRTUAL_ARCH}");
        let a: Architecture<f32> = parse_architecture(&text).unwrap();
        assert_eq!(a.levels[1].memory_words, 512);
        assert_eq!(a.levels[3].fill_bandwidth, 4.0);
    }

    #[test]
    fn rejects_gaps_and_invalid_levels() {
        let gap = VIRTUAL_ARCH.replace("level = 2", "level = 5");
        assert!(matches!(
            parse_architecture::<f64>(&gap),
            Err(ArchFileError::Levels)
        ));
        let bad = VIRTUAL_ARCH.replace("virtual = true", "virtual = true\nmemory_words = 64");
        assert!(matches!(
            parse_architecture::<f64>(&bad),
            Err(ArchFileError::Invalid(_))
        ));
    }
}
