//! `.map` files.
//!
//! ```text
//! dimensions: m n k
//!
//! target_cluster: C2
//! temporal_order: k m n
//! temporal_tile_sizes: 4 4 1
//! spatial_tile_sizes: 2 2 1
//!
//! target_cluster: C1
//! temporal_order: m n k
//! temporal_tile_sizes: 1 2 1
//! spatial_tile_sizes: 1 2 1
//! ```
//!
//! Tile sizes are listed in the order of the `dimensions` header. Levels run
//! from the outermost cluster down to `C1` without gaps. Values may be
//! separated by spaces or commas; `#` starts a comment.

use std::fmt::Write;

use thiserror::Error;

use super::{LevelMapping, Mapping};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct MappingTextError {
    pub line: usize,
    pub kind: MappingTextErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MappingTextErrorKind {
    #[error("expected `key: values`")]
    Syntax,
    #[error("missing `dimensions:` header")]
    MissingHeader,
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("unknown dimension `{0}`")]
    UnknownDim(String),
    #[error("duplicate dimension `{0}`")]
    DuplicateDim(String),
    #[error("bad tile size `{0}`")]
    BadNumber(String),
    #[error("expected {expected} values, found {got}")]
    Arity { expected: usize, got: usize },
    #[error("temporal order must list every dimension once")]
    BadOrder,
    #[error("bad cluster label `{0}` (expected C<k>)")]
    BadCluster(String),
    #[error("expected cluster C{expected}, found C{got}")]
    LevelSequence { expected: u32, got: u32 },
    #[error("key `{0}` given twice or outside a target_cluster block")]
    Misplaced(String),
    #[error("level C{0} is incomplete")]
    IncompleteLevel(u32),
    #[error("levels must end at C1 (last level is C{0})")]
    MissingLevel(u32),
    #[error("no levels")]
    NoLevels,
}

#[derive(Default)]
struct Partial {
    cluster: u32,
    order: Option<Vec<usize>>,
    tt: Option<Vec<u64>>,
    st: Option<Vec<u64>>,
    line: usize,
}

impl Partial {
    fn finish(self) -> Result<LevelMapping, MappingTextError> {
        match (self.order, self.tt, self.st) {
            (Some(o), Some(t), Some(s)) => Ok(LevelMapping::new(o, t, s)),
            _ => Err(MappingTextError {
                line: self.line,
                kind: MappingTextErrorKind::IncompleteLevel(self.cluster),
            }),
        }
    }
}

pub fn parse_mapping(text: &str) -> Result<Mapping, MappingTextError> {
    let mut dims: Option<Vec<String>> = None;
    let mut levels = Vec::new();
    let mut cur: Option<Partial> = None;
    let mut last_line = 1;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |kind| MappingTextError { line, kind };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        last_line = line;
        let (key, rest) = content
            .split_once(':')
            .ok_or_else(|| err(MappingTextErrorKind::Syntax))?;
        let key = key.trim();
        let values: Vec<&str> = rest
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        if key == "dimensions" {
            if dims.is_some() {
                return Err(err(MappingTextErrorKind::Misplaced(key.into())));
            }
            let mut names: Vec<String> = Vec::new();
            for v in values {
                if names.iter().any(|n| n == v) {
                    return Err(err(MappingTextErrorKind::DuplicateDim(v.into())));
                }
                names.push(v.to_string());
            }
            dims = Some(names);
            continue;
        }
        let names = dims
            .as_ref()
            .ok_or_else(|| err(MappingTextErrorKind::MissingHeader))?;
        let n = names.len();
        let arity = |got: usize| {
            if got == n {
                Ok(())
            } else {
                Err(err(MappingTextErrorKind::Arity { expected: n, got }))
            }
        };
        match key {
            "target_cluster" => {
                let [label] = values[..] else {
                    return Err(err(MappingTextErrorKind::Syntax));
                };
                let k: u32 = label
                    .strip_prefix('C')
                    .and_then(|s| s.parse().ok())
                    .filter(|&k| k >= 1)
                    .ok_or_else(|| err(MappingTextErrorKind::BadCluster(label.into())))?;
                if let Some(prev) = cur.take() {
                    let expected = prev.cluster - 1;
                    levels.push(prev.finish()?);
                    if k != expected {
                        return Err(err(MappingTextErrorKind::LevelSequence { expected, got: k }));
                    }
                }
                cur = Some(Partial {
                    cluster: k,
                    line,
                    ..Default::default()
                });
            }
            "temporal_order" => {
                let p = cur
                    .as_mut()
                    .filter(|p| p.order.is_none())
                    .ok_or_else(|| err(MappingTextErrorKind::Misplaced(key.into())))?;
                arity(values.len())?;
                let mut order = Vec::with_capacity(n);
                for v in values {
                    let d = names
                        .iter()
                        .position(|x| x == v)
                        .ok_or_else(|| err(MappingTextErrorKind::UnknownDim(v.into())))?;
                    if order.contains(&d) {
                        return Err(err(MappingTextErrorKind::BadOrder));
                    }
                    order.push(d);
                }
                p.order = Some(order);
            }
            "temporal_tile_sizes" | "spatial_tile_sizes" => {
                let p = cur
                    .as_mut()
                    .ok_or_else(|| err(MappingTextErrorKind::Misplaced(key.into())))?;
                arity(values.len())?;
                let tiles = values
                    .iter()
                    .map(|v| {
                        v.parse::<u64>()
                            .map_err(|_| err(MappingTextErrorKind::BadNumber(v.to_string())))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let slot = if key == "temporal_tile_sizes" {
                    &mut p.tt
                } else {
                    &mut p.st
                };
                if slot.is_some() {
                    return Err(err(MappingTextErrorKind::Misplaced(key.into())));
                }
                *slot = Some(tiles);
            }
            other => return Err(err(MappingTextErrorKind::UnknownKey(other.into()))),
        }
    }
    let dims = dims.ok_or(MappingTextError {
        line: last_line,
        kind: MappingTextErrorKind::MissingHeader,
    })?;
    let last = cur.ok_or(MappingTextError {
        line: last_line,
        kind: MappingTextErrorKind::NoLevels,
    })?;
    if last.cluster != 1 {
        return Err(MappingTextError {
            line: last_line,
            kind: MappingTextErrorKind::MissingLevel(last.cluster),
        });
    }
    levels.push(last.finish()?);
    Ok(Mapping { dims, levels })
}

pub fn print_mapping(m: &Mapping) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "dimensions: {}", m.dims.join(" "));
    let join = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(" ");
    let n = m.levels.len();
    for (pos, l) in m.levels.iter().enumerate() {
        let order: Vec<&str> = l.temporal_order.iter().map(|&d| m.dims[d].as_str()).collect();
        let _ = writeln!(s);
        let _ = writeln!(s, "target_cluster: C{}", n - pos);
        let _ = writeln!(s, "temporal_order: {}", order.join(" "));
        let _ = writeln!(s, "temporal_tile_sizes: {}", join(&l.temporal_tiles));
        let _ = writeln!(s, "spatial_tile_sizes: {}", join(&l.spatial_tiles));
    }
    s
}
