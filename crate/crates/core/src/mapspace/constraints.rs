//! User constraints on the map space and the `.cons` file format.
//!
//! ```toml
//! min_utilization = 0.5          # utilized PEs / total PEs
//! max_utilization = 1.0
//! parallel_dims = ["c", "k"]     # only these may be parallel; each must be
//! max_parallel_dims_per_level = 1
//! distinct_parallel_dims = true  # a dimension is parallel at one level at most
//!
//! [aspect_ratio]                 # pinned fan-out per physical axis
//! Y = 16
//! X = 16
//!
//! [[level]]
//! level = "C3"                   # cluster label or level name
//! orders = "any"                 # or [["k", "m", "n"], ["m", "n", "k"]]
//! parallel = ["k"]               # fan-out > 1 required
//! no_parallel = ["m"]
//! temporal_tiles = { m = 4 }
//! spatial_tiles = { m = 2 }
//! ```
//!
//! An absent file means no constraints.

use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;
use thiserror::Error;

use crate::arch::{Architecture, Axis};
use crate::problem::ProblemInstance;
use crate::scalar::Scalar;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum OrderSet {
    #[default]
    Any,
    /// Allowed temporal orders, each a permutation of all dimension names.
    List(Vec<Vec<String>>),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LevelConstraint {
    pub orders: OrderSet,
    pub parallel: BTreeSet<String>,
    pub no_parallel: BTreeSet<String>,
    pub temporal_tiles: BTreeMap<String, u64>,
    pub spatial_tiles: BTreeMap<String, u64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConstraintSet {
    pub min_utilization: Option<f64>,
    pub max_utilization: Option<f64>,
    pub parallel_dims: Option<BTreeSet<String>>,
    pub max_parallel_dims_per_level: Option<usize>,
    pub distinct_parallel_dims: bool,
    pub aspect_ratio: BTreeMap<Axis, u64>,
    /// Keyed by cluster label (`C3`) or level name.
    pub levels: BTreeMap<String, LevelConstraint>,
}

impl ConstraintSet {
    pub fn unconstrained() -> Self {
        Self::default()
    }

    pub fn level_mut(&mut self, key: &str) -> &mut LevelConstraint {
        self.levels.entry(key.to_string()).or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstraintError {
    #[error("utilization bound {0} outside [0, 1]")]
    Bound(f64),
    #[error("min utilization {0} exceeds max utilization {1}")]
    InvertedBounds(f64, f64),
    #[error("unknown dimension `{0}`")]
    UnknownDim(String),
    #[error("unknown level `{0}`")]
    UnknownLevel(String),
    #[error("order {0:?} is not a permutation of the dimensions")]
    BadOrder(Vec<String>),
    #[error("tile size for `{0}` must be positive")]
    ZeroTile(String),
    #[error("axis {0} appears at no level")]
    UnknownAxis(Axis),
    #[error("dimension `{0}` is both forced and forbidden to be parallel")]
    Contradiction(String),
    #[error("malformed constraint file: {0}")]
    Toml(String),
}

/// Constraints resolved against a problem and architecture: names become
/// indices and level keys become positions.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub min_utilization: f64,
    pub max_utilization: f64,
    /// `allowed_parallel[d]`
    pub allowed_parallel: Vec<bool>,
    /// Dimensions that must be parallel at some level.
    pub required_parallel: Vec<usize>,
    pub max_parallel_dims_per_level: usize,
    pub distinct_parallel_dims: bool,
    /// `(axis, level positions on that axis, pinned fan-out)`
    pub aspect: Vec<(Axis, Vec<usize>, u64)>,
    pub levels: Vec<ResolvedLevel>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResolvedLevel {
    /// `None` = any order.
    pub orders: Option<Vec<Vec<usize>>>,
    pub force_parallel: Vec<bool>,
    pub no_parallel: Vec<bool>,
    pub fixed_tt: Vec<Option<u64>>,
    pub fixed_st: Vec<Option<u64>>,
}

impl ConstraintSet {
    pub fn resolve<T: Scalar>(
        &self,
        p: &ProblemInstance,
        a: &Architecture<T>,
    ) -> Result<Resolved, ConstraintError> {
        let nd = p.num_dims();
        let nl = a.levels.len();
        let dim = |name: &str| {
            p.dim_index(name)
                .ok_or_else(|| ConstraintError::UnknownDim(name.to_string()))
        };
        let min = self.min_utilization.unwrap_or(0.0);
        let max = self.max_utilization.unwrap_or(1.0);
        for b in [min, max] {
            if !(0.0..=1.0).contains(&b) {
                return Err(ConstraintError::Bound(b));
            }
        }
        if min > max {
            return Err(ConstraintError::InvertedBounds(min, max));
        }
        let mut allowed_parallel = vec![true; nd];
        let mut required_parallel = Vec::new();
        if let Some(set) = &self.parallel_dims {
            allowed_parallel = vec![false; nd];
            for name in set {
                let d = dim(name)?;
                allowed_parallel[d] = true;
                required_parallel.push(d);
            }
        }
        let mut aspect = Vec::new();
        for (&axis, &fan) in &self.aspect_ratio {
            let positions: Vec<usize> = (0..nl).filter(|&i| a.levels[i].axis == axis).collect();
            if positions.is_empty() {
                return Err(ConstraintError::UnknownAxis(axis));
            }
            aspect.push((axis, positions, fan));
        }
        let mut levels = vec![
            ResolvedLevel {
                orders: None,
                force_parallel: vec![false; nd],
                no_parallel: vec![false; nd],
                fixed_tt: vec![None; nd],
                fixed_st: vec![None; nd],
            };
            nl
        ];
        for (key, lc) in &self.levels {
            let pos = (0..nl)
                .find(|&i| a.cluster_label(i) == *key || a.levels[i].name == *key)
                .ok_or_else(|| ConstraintError::UnknownLevel(key.clone()))?;
            let r = &mut levels[pos];
            if let OrderSet::List(list) = &lc.orders {
                let mut orders = Vec::new();
                for o in list {
                    let idx: Vec<usize> = o.iter().map(|n| dim(n)).collect::<Result<_, _>>()?;
                    let set: BTreeSet<usize> = idx.iter().copied().collect();
                    if idx.len() != nd || set.len() != nd {
                        return Err(ConstraintError::BadOrder(o.clone()));
                    }
                    orders.push(idx);
                }
                r.orders = Some(orders);
            }
            for name in &lc.parallel {
                r.force_parallel[dim(name)?] = true;
            }
            for name in &lc.no_parallel {
                let d = dim(name)?;
                if r.force_parallel[d] {
                    return Err(ConstraintError::Contradiction(name.clone()));
                }
                r.no_parallel[d] = true;
            }
            for (name, &t) in &lc.temporal_tiles {
                if t == 0 {
                    return Err(ConstraintError::ZeroTile(name.clone()));
                }
                r.fixed_tt[dim(name)?] = Some(t);
            }
            for (name, &t) in &lc.spatial_tiles {
                if t == 0 {
                    return Err(ConstraintError::ZeroTile(name.clone()));
                }
                r.fixed_st[dim(name)?] = Some(t);
            }
        }
        Ok(Resolved {
            min_utilization: min,
            max_utilization: max,
            allowed_parallel,
            required_parallel,
            max_parallel_dims_per_level: self.max_parallel_dims_per_level.unwrap_or(usize::MAX),
            distinct_parallel_dims: self.distinct_parallel_dims,
            aspect,
            levels,
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConsFile {
    min_utilization: Option<f64>,
    max_utilization: Option<f64>,
    parallel_dims: Option<Vec<String>>,
    max_parallel_dims_per_level: Option<usize>,
    #[serde(default)]
    distinct_parallel_dims: bool,
    #[serde(default)]
    aspect_ratio: BTreeMap<String, u64>,
    #[serde(default)]
    level: Vec<LevelEntry>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OrdersEntry {
    Word(String),
    List(Vec<Vec<String>>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelEntry {
    level: String,
    orders: Option<OrdersEntry>,
    #[serde(default)]
    parallel: Vec<String>,
    #[serde(default)]
    no_parallel: Vec<String>,
    #[serde(default)]
    temporal_tiles: BTreeMap<String, u64>,
    #[serde(default)]
    spatial_tiles: BTreeMap<String, u64>,
}

pub fn parse_constraints(text: &str) -> Result<ConstraintSet, ConstraintError> {
    let f: ConsFile = toml::from_str(text).map_err(|e| ConstraintError::Toml(e.to_string()))?;
    let mut aspect_ratio = BTreeMap::new();
    for (k, v) in f.aspect_ratio {
        let axis = Axis::parse(&k)
            .filter(|a| *a != Axis::None)
            .ok_or_else(|| ConstraintError::Toml(format!("unknown axis `{k}`")))?;
        aspect_ratio.insert(axis, v);
    }
    let mut levels = BTreeMap::new();
    for e in f.level {
        let orders = match e.orders {
            None => OrderSet::Any,
            Some(OrdersEntry::Word(w)) if w == "any" => OrderSet::Any,
            Some(OrdersEntry::Word(w)) => {
                return Err(ConstraintError::Toml(format!(
                    "orders must be \"any\" or a list of orders, got `{w}`"
                )))
            }
            Some(OrdersEntry::List(l)) => OrderSet::List(l),
        };
        levels.insert(
            e.level,
            LevelConstraint {
                orders,
                parallel: e.parallel.into_iter().collect(),
                no_parallel: e.no_parallel.into_iter().collect(),
                temporal_tiles: e.temporal_tiles,
                spatial_tiles: e.spatial_tiles,
            },
        );
    }
    Ok(ConstraintSet {
        min_utilization: f.min_utilization,
        max_utilization: f.max_utilization,
        parallel_dims: f.parallel_dims.map(|v| v.into_iter().collect()),
        max_parallel_dims_per_level: f.max_parallel_dims_per_level,
        distinct_parallel_dims: f.distinct_parallel_dims,
        aspect_ratio,
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_key() {
        let c = parse_constraints(
            r#"
min_utilization = 0.25
parallel_dims = ["c", "k"]
max_parallel_dims_per_level = 1
distinct_parallel_dims = true
[aspect_ratio]
Y = 16
[[level]]
level = "C2"
orders = [["k", "c"], ["c", "k"]]
parallel = ["k"]
temporal_tiles = { c = 4 }
[[level]]
level = "L1"
orders = "any"
no_parallel = ["c"]
"#,
        )
        .unwrap();
        assert_eq!(c.min_utilization, Some(0.25));
        assert_eq!(c.aspect_ratio[&Axis::Y], 16);
        assert!(c.distinct_parallel_dims);
        assert_eq!(
            c.levels["C2"].orders,
            OrderSet::List(vec![
                vec!["k".into(), "c".into()],
                vec!["c".into(), "k".into()]
            ])
        );
        assert_eq!(c.levels["L1"].orders, OrderSet::Any);
        assert_eq!(c.levels["C2"].temporal_tiles["c"], 4);
    }

    #[test]
    fn rejects_bad_orders_keyword() {
        assert!(parse_constraints("[[level]]\nlevel = \"C1\"\norders = \"some\"").is_err());
        assert!(parse_constraints("bogus = 1").is_err());
    }
}
