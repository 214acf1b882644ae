//! Cluster-target mapping abstraction.
//!
//! A [`Mapping`] holds one [`LevelMapping`] per architecture level, outermost
//! first. At level `i` the cluster holds a tile of `TT^i` (temporal tile
//! sizes). Its temporal loops walk the incoming tile (the whole problem at the
//! top, `ST^{i-1}` below) in steps of `TT^i`, in `temporal_order`, and each
//! `TT^i` tile is split across sub-clusters into `TT^i / ST^i` pieces of size
//! `ST^i`. At the PE level `ST = TT` and the MAC walks the tile point by point.

mod legality;
mod render;
mod text;

pub use legality::{check_legality, is_legal, LegalityViolation, Rule, ShapeError};
pub use render::{loop_list, render_loop_nest, LoopKind, LoopSpec};
pub use text::{parse_mapping, print_mapping, MappingTextError};

use std::collections::BTreeSet;

use crate::problem::ProblemInstance;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LevelMapping {
    /// Dimension indices, outermost loop first.
    pub temporal_order: Vec<usize>,
    pub temporal_tiles: Vec<u64>,
    pub spatial_tiles: Vec<u64>,
}

impl LevelMapping {
    pub fn new(temporal_order: Vec<usize>, temporal_tiles: Vec<u64>, spatial_tiles: Vec<u64>) -> Self {
        LevelMapping {
            temporal_order,
            temporal_tiles,
            spatial_tiles,
        }
    }

    /// Per-dimension fan-out `TT / ST` (0 where the ratio is undefined).
    pub fn fanouts(&self) -> Vec<u64> {
        self.temporal_tiles
            .iter()
            .zip(&self.spatial_tiles)
            .map(|(&t, &s)| if s == 0 { 0 } else { t / s })
            .collect()
    }

    /// Product of the fan-outs at this level.
    pub fn parallelism(&self) -> u64 {
        self.fanouts().iter().product()
    }
}

/// Ordered lexicographically by (level, temporal order, TT, ST); this is the
/// canonical tie-break used by every search.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mapping {
    pub dims: Vec<String>,
    pub levels: Vec<LevelMapping>,
}

impl Mapping {
    pub fn new(dims: Vec<String>, levels: Vec<LevelMapping>) -> Self {
        Mapping { dims, levels }
    }

    /// The flat mapping: every tile is a single point, so the outermost level
    /// iterates the whole problem and nothing runs in parallel.
    pub fn unit(p: &ProblemInstance, num_levels: usize) -> Self {
        let n = p.num_dims();
        Mapping {
            dims: p.dims().iter().map(|d| d.name.clone()).collect(),
            levels: (0..num_levels)
                .map(|_| LevelMapping::new((0..n).collect(), vec![1; n], vec![1; n]))
                .collect(),
        }
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn num_dims(&self) -> usize {
        self.dims.len()
    }

    /// Tile entering level `pos`: the whole problem at the top, else the
    /// parent's spatial tile.
    pub fn incoming(&self, pos: usize, sizes: &[u64]) -> Vec<u64> {
        if pos == 0 {
            sizes.to_vec()
        } else {
            self.levels[pos - 1].spatial_tiles.clone()
        }
    }

    /// Temporal trip counts per dimension at `pos`.
    pub fn temporal_trips(&self, pos: usize, sizes: &[u64]) -> Vec<u64> {
        self.incoming(pos, sizes)
            .iter()
            .zip(&self.levels[pos].temporal_tiles)
            .map(|(&i, &t)| if t == 0 { 0 } else { i / t })
            .collect()
    }

    pub fn fanouts(&self, pos: usize) -> Vec<u64> {
        self.levels[pos].fanouts()
    }

    pub fn utilized_pes(&self) -> u64 {
        self.levels.iter().map(LevelMapping::parallelism).product()
    }

    /// Dimensions spatially distributed at `pos`.
    pub fn parallel_dims(&self, pos: usize) -> BTreeSet<usize> {
        self.fanouts(pos)
            .iter()
            .enumerate()
            .filter(|(_, &f)| f > 1)
            .map(|(d, _)| d)
            .collect()
    }

    /// Rewrites every level's temporal order so loops with trip count > 1
    /// keep their relative order and trip-1 loops follow in ascending index
    /// order. Mappings equal after canonicalization behave identically.
    pub fn canonicalize(&mut self, sizes: &[u64]) {
        for pos in 0..self.levels.len() {
            let trips = self.temporal_trips(pos, sizes);
            let lvl = &mut self.levels[pos];
            let mut order: Vec<usize> = lvl
                .temporal_order
                .iter()
                .copied()
                .filter(|&d| trips[d] > 1)
                .collect();
            let mut trivial: Vec<usize> = (0..trips.len()).filter(|&d| trips[d] <= 1).collect();
            trivial.sort_unstable();
            order.extend(trivial);
            lvl.temporal_order = order;
        }
    }

    pub fn canonical(mut self, sizes: &[u64]) -> Self {
        self.canonicalize(sizes);
        self
    }

    /// Reorders per-dimension vectors so that `dims` follows the problem's
    /// dimension order. Fails if the name sets differ.
    pub fn aligned_to(&self, p: &ProblemInstance) -> Result<Mapping, ShapeError> {
        let n = p.num_dims();
        if self.dims.len() != n {
            return Err(ShapeError::DimCount {
                expected: n,
                got: self.dims.len(),
            });
        }
        // perm[new] = old
        let mut perm = Vec::with_capacity(n);
        for d in p.dims() {
            let old = self
                .dims
                .iter()
                .position(|x| *x == d.name)
                .ok_or_else(|| ShapeError::UnknownDim(d.name.clone()))?;
            perm.push(old);
        }
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let levels = self
            .levels
            .iter()
            .map(|l| {
                if l.temporal_tiles.len() != n || l.spatial_tiles.len() != n {
                    return Err(ShapeError::TileLength);
                }
                Ok(LevelMapping {
                    temporal_order: l
                        .temporal_order
                        .iter()
                        .map(|&d| inv.get(d).copied().ok_or(ShapeError::BadOrder))
                        .collect::<Result<_, _>>()?,
                    temporal_tiles: perm.iter().map(|&o| l.temporal_tiles[o]).collect(),
                    spatial_tiles: perm.iter().map(|&o| l.spatial_tiles[o]).collect(),
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(Mapping {
            dims: p.dims().iter().map(|d| d.name.clone()).collect(),
            levels,
        })
    }
}
