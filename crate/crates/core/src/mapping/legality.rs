use std::fmt;

use thiserror::Error;

use super::Mapping;
use crate::arch::Architecture;
use crate::problem::ProblemInstance;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    /// A child's temporal tile exceeds its parent's spatial tile.
    R1,
    /// More parallelism than sub-clusters.
    R2,
    /// Temporal tiles overflow a physical buffer.
    R3,
    /// Tiles do not cover the iteration space exactly.
    R4,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LegalityViolation {
    R1 {
        level: usize,
        dim: usize,
        parent_spatial: u64,
        temporal: u64,
    },
    R2 {
        level: usize,
        parallelism: u64,
        sub_clusters: u64,
    },
    R3 {
        level: usize,
        required: u64,
        capacity: u64,
    },
    R4 {
        level: usize,
        dim: usize,
        reason: String,
    },
}

impl LegalityViolation {
    pub fn rule(&self) -> Rule {
        match self {
            LegalityViolation::R1 { .. } => Rule::R1,
            LegalityViolation::R2 { .. } => Rule::R2,
            LegalityViolation::R3 { .. } => Rule::R3,
            LegalityViolation::R4 { .. } => Rule::R4,
        }
    }
}

impl fmt::Display for LegalityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LegalityViolation::R1 {
                level,
                dim,
                parent_spatial,
                temporal,
            } => write!(
                f,
                "R1 at level {level}, dim #{dim}: temporal tile {temporal} exceeds parent spatial tile {parent_spatial}"
            ),
            LegalityViolation::R2 {
                level,
                parallelism,
                sub_clusters,
            } => write!(
                f,
                "R2 at level {level}: parallelism {parallelism} exceeds {sub_clusters} sub-clusters"
            ),
            LegalityViolation::R3 {
                level,
                required,
                capacity,
            } => write!(
                f,
                "R3 at level {level}: tiles need {required} words, buffer holds {capacity}"
            ),
            LegalityViolation::R4 { level, dim, reason } => {
                write!(f, "R4 at level {level}, dim #{dim}: {reason}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ShapeError {
    #[error("mapping has {got} dimensions, problem has {expected}")]
    DimCount { expected: usize, got: usize },
    #[error("mapping has {got} levels, architecture has {expected}")]
    LevelCount { expected: usize, got: usize },
    #[error("problem has no dimension `{0}`")]
    UnknownDim(String),
    #[error("dimension `{0}` does not match the problem's order")]
    DimName(String),
    #[error("tile vector length differs from the dimension count")]
    TileLength,
    #[error("temporal order is not a permutation of the dimensions")]
    BadOrder,
}

fn check_shape<T>(m: &Mapping, p: &ProblemInstance, a: &Architecture<T>) -> Result<(), ShapeError> {
    let n = p.num_dims();
    if m.dims.len() != n {
        return Err(ShapeError::DimCount {
            expected: n,
            got: m.dims.len(),
        });
    }
    for (name, d) in m.dims.iter().zip(p.dims()) {
        if *name != d.name {
            return Err(ShapeError::DimName(name.clone()));
        }
    }
    if m.levels.len() != a.levels.len() {
        return Err(ShapeError::LevelCount {
            expected: a.levels.len(),
            got: m.levels.len(),
        });
    }
    for l in &m.levels {
        if l.temporal_tiles.len() != n || l.spatial_tiles.len() != n {
            return Err(ShapeError::TileLength);
        }
        let mut seen = vec![false; n];
        if l.temporal_order.len() != n {
            return Err(ShapeError::BadOrder);
        }
        for &d in &l.temporal_order {
            if d >= n || seen[d] {
                return Err(ShapeError::BadOrder);
            }
            seen[d] = true;
        }
    }
    Ok(())
}

/// Lists every rule violation of `m`. Divisibility problems are reported as
/// R4 only where R1 does not already explain them, so each perturbation of a
/// single tile size surfaces under one rule.
pub fn check_legality<T: Scalar>(
    m: &Mapping,
    p: &ProblemInstance,
    a: &Architecture<T>,
) -> Result<Vec<LegalityViolation>, ShapeError> {
    check_shape(m, p, a)?;
    let sizes = p.sizes();
    let mut out = Vec::new();
    for pos in 0..m.levels.len() {
        let lvl = &m.levels[pos];
        let incoming = m.incoming(pos, &sizes);
        for d in 0..sizes.len() {
            let (tt, st) = (lvl.temporal_tiles[d], lvl.spatial_tiles[d]);
            if pos > 0 && incoming[d] < tt {
                out.push(LegalityViolation::R1 {
                    level: pos,
                    dim: d,
                    parent_spatial: incoming[d],
                    temporal: tt,
                });
                continue;
            }
            let reason = if tt == 0 || st == 0 {
                Some("zero tile size".to_string())
            } else if pos == 0 && tt > sizes[d] {
                Some(format!("temporal tile {tt} exceeds dimension size {}", sizes[d]))
            } else if incoming[d] % tt != 0 {
                Some(format!("temporal tile {tt} does not divide {}", incoming[d]))
            } else if st > tt {
                Some(format!("spatial tile {st} exceeds temporal tile {tt}"))
            } else if tt % st != 0 {
                Some(format!("spatial tile {st} does not divide temporal tile {tt}"))
            } else {
                None
            };
            if let Some(reason) = reason {
                out.push(LegalityViolation::R4 {
                    level: pos,
                    dim: d,
                    reason,
                });
            }
        }
        let parallelism: u64 = lvl
            .temporal_tiles
            .iter()
            .zip(&lvl.spatial_tiles)
            .filter(|(&t, &s)| s > 0 && t >= s && t % s == 0)
            .map(|(&t, &s)| t / s)
            .product();
        let level = &a.levels[pos];
        if parallelism > level.sub_cluster_count {
            out.push(LegalityViolation::R2 {
                level: pos,
                parallelism,
                sub_clusters: level.sub_cluster_count,
            });
        }
        if !level.is_virtual {
            let tile: Vec<u64> = lvl
                .temporal_tiles
                .iter()
                .zip(&sizes)
                .map(|(&t, &s)| t.clamp(1, s))
                .collect();
            let required = p.total_footprint(&tile);
            if required > level.memory_words {
                out.push(LegalityViolation::R3 {
                    level: pos,
                    required,
                    capacity: level.memory_words,
                });
            }
        }
    }
    Ok(out)
}

pub fn is_legal<T: Scalar>(m: &Mapping, p: &ProblemInstance, a: &Architecture<T>) -> bool {
    matches!(check_legality(m, p, a), Ok(v) if v.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{Axis, ClusterLevel, UNBOUNDED};
    use crate::mapping::LevelMapping;
    use crate::workloads::gemm;

    fn arch(fanout: u64, l1: u64) -> Architecture<f64> {
        Architecture::new(
            vec![
                ClusterLevel::memory(
                    "DRAM",
                    UNBOUNDED,
                    fanout,
                    if fanout == 1 { Axis::None } else { Axis::X },
                    1.0,
                    200.0,
                ),
                ClusterLevel::pe("L1", l1, 1.0, 1.0),
            ],
            1e9,
            0.5,
        )
        .unwrap()
    }

    fn rules(m: &Mapping, fanout: u64, l1: u64) -> Vec<Rule> {
        let p = gemm(32, 16, 8);
        check_legality(m, &p, &arch(fanout, l1))
            .unwrap()
            .iter()
            .map(LegalityViolation::rule)
            .collect()
    }

    fn mapping(top_tt: [u64; 3], top_st: [u64; 3], leaf: [u64; 3]) -> Mapping {
        Mapping::new(
            vec!["m".into(), "n".into(), "k".into()],
            vec![
                LevelMapping::new(vec![0, 1, 2], top_tt.to_vec(), top_st.to_vec()),
                LevelMapping::new(vec![0, 1, 2], leaf.to_vec(), leaf.to_vec()),
            ],
        )
    }

    #[test]
    fn legal_mapping_has_no_violations() {
        let m = mapping([32, 16, 8], [2, 16, 8], [1, 4, 8]);
        assert!(rules(&m, 16, 1 << 20).is_empty());
    }

    #[test]
    fn parallelism_32_over_16_sub_clusters() {
        let m = mapping([32, 16, 8], [1, 16, 8], [1, 4, 8]);
        assert_eq!(rules(&m, 16, 1 << 20), vec![Rule::R2]);
    }

    #[test]
    fn tile_needing_40_words_in_32_word_buffer() {
        // A: 4x3=12, B: 3x4=12, C: 4x4=16 -> 40
        let m = mapping([32, 16, 12], [32, 16, 12], [4, 4, 3]);
        let p = gemm(32, 16, 12);
        let v = check_legality(&m, &p, &arch(1, 32)).unwrap();
        assert_eq!(
            v,
            vec![LegalityViolation::R3 {
                level: 1,
                required: 40,
                capacity: 32
            }]
        );
    }

    #[test]
    fn child_tile_larger_than_parent_spatial_tile() {
        let m = mapping([32, 16, 8], [2, 16, 8], [4, 4, 8]);
        assert_eq!(rules(&m, 16, 1 << 20), vec![Rule::R1]);
    }

    #[test]
    fn non_divisor_tile_breaks_coverage() {
        let m = mapping([32, 16, 8], [32, 16, 8], [3, 16, 8]);
        assert_eq!(rules(&m, 16, 1 << 20), vec![Rule::R4]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let p = gemm(32, 16, 8);
        let mut m = mapping([32, 16, 8], [32, 16, 8], [1, 1, 1]);
        m.levels.pop();
        assert_eq!(
            check_legality(&m, &p, &arch(1, 64)),
            Err(ShapeError::LevelCount {
                expected: 2,
                got: 1
            })
        );
    }

    #[test]
    fn k_yr_xs_on_eighteen_pes() {
        let nest = "for N = 0 to 0\nfor K = 0 to 1\nfor C = 0 to 0\nfor Y = 0 to 2\nfor X = 0 to 2\n\
                    for R = 0 to 2\nfor S = 0 to 2\n\
                    stmt OA[N][K][Y][X] += IA[N][C][Y + R][X + S] * F[K][C][R][S]\n";
        let p = crate::ir::lower_to_problem(&crate::ir::parse_loop_nest(nest).unwrap()).unwrap();
        let a: Architecture<f64> = Architecture::new(
            vec![
                ClusterLevel::memory("DRAM", UNBOUNDED, 2, Axis::Z, 1.0, 200.0),
                ClusterLevel::memory("GB", 256, 9, Axis::X, 1.0, 6.0),
                ClusterLevel::pe("L1", 64, 1.0, 1.0),
            ],
            1e9,
            0.5,
        )
        .unwrap();
        let m = crate::mapping::parse_mapping(
            "dimensions: N K C Y X R S
target_cluster: C3
temporal_order: N K C Y X R S
temporal_tile_sizes: 1 2 1 3 3 3 3
spatial_tile_sizes: 1 1 1 3 3 3 3
target_cluster: C2
temporal_order: K N C Y X R S
temporal_tile_sizes: 1 1 1 3 3 3 3
spatial_tile_sizes: 1 1 1 1 3 1 3
target_cluster: C1
temporal_order: N K C Y X R S
temporal_tile_sizes: 1 1 1 1 3 1 3
spatial_tile_sizes: 1 1 1 1 3 1 3
",
        )
        .unwrap();
        assert!(check_legality(&m, &p, &a).unwrap().is_empty());
        // Y and R split at the same level: their fan-outs multiply
        assert_eq!(m.levels[1].parallelism(), 9);
        assert_eq!(m.utilized_pes(), 18);
        let mut narrow = a.clone();
        narrow.levels[1].sub_cluster_count = 8;
        let v = check_legality(&m, &p, &narrow).unwrap();
        assert_eq!(v.iter().map(LegalityViolation::rule).collect::<Vec<_>>(), vec![Rule::R2]);
    }
}
