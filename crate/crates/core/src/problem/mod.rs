//! Problem abstraction: iteration-space dimensions, data spaces and their
//! projections, and tile footprints.
//!
//! A [`ProblemInstance`] is what the frontend lowers a loop nest into. Every
//! loop iterator becomes a [`Dimension`] whose size is the trip count; every
//! array reference becomes a [`DataSpace`] whose [`Projection`] maps an
//! iteration-space point onto tensor coordinates.

mod file;

pub use file::{parse_problem, print_problem, ProblemFileError};

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Operation annotation attached to a problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OperationTag {
    Conv2d,
    Gemm,
    Tc,
    Generic,
}

impl OperationTag {
    pub fn as_str(self) -> &'static str {
        match self {
            OperationTag::Conv2d => "CONV2D",
            OperationTag::Gemm => "GEMM",
            OperationTag::Tc => "TC",
            OperationTag::Generic => "GENERIC",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CONV2D" => Some(OperationTag::Conv2d),
            "GEMM" => Some(OperationTag::Gemm),
            "TC" => Some(OperationTag::Tc),
            "GENERIC" => Some(OperationTag::Generic),
            _ => None,
        }
    }
}

impl fmt::Display for OperationTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dimension {
    pub name: String,
    pub size: u64,
}

impl Dimension {
    pub fn new(name: impl Into<String>, size: u64) -> Self {
        Dimension {
            name: name.into(),
            size,
        }
    }
}

/// `coeff * dims[dim]`
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SubscriptTerm {
    pub coeff: u64,
    pub dim: usize,
}

/// One tensor rank: either direct (`d`) or compound (`c1*d1 + c2*d2`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Subscript {
    pub terms: Vec<SubscriptTerm>,
}

impl Subscript {
    pub fn direct(dim: usize) -> Self {
        Subscript {
            terms: vec![SubscriptTerm { coeff: 1, dim }],
        }
    }

    pub fn compound(c1: u64, d1: usize, c2: u64, d2: usize) -> Self {
        Subscript {
            terms: vec![
                SubscriptTerm { coeff: c1, dim: d1 },
                SubscriptTerm { coeff: c2, dim: d2 },
            ],
        }
    }

    pub fn is_direct(&self) -> bool {
        self.terms.len() == 1 && self.terms[0].coeff == 1
    }

    /// Number of coordinates spanned along this rank by a tile.
    ///
    /// Compound subscripts assume the window is contiguous, so gapped
    /// coefficient pairs (e.g. `2x + 2r`) are over-approximated by their span.
    pub fn extent(&self, tile: &[u64]) -> u64 {
        1 + self
            .terms
            .iter()
            .map(|t| t.coeff * (tile[t.dim] - 1))
            .sum::<u64>()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Projection {
    pub ranks: Vec<Subscript>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DataRole {
    ReadOnly,
    /// Output / accumulator.
    ReadWrite,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DataSpace {
    pub name: String,
    pub role: DataRole,
    pub projection: Projection,
}

impl DataSpace {
    pub fn is_output(&self) -> bool {
        self.role == DataRole::ReadWrite
    }

    /// Dimensions appearing in any subscript.
    pub fn relevant_dimensions(&self) -> BTreeSet<usize> {
        self.projection
            .ranks
            .iter()
            .flat_map(|r| r.terms.iter().map(|t| t.dim))
            .collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProblemError {
    #[error("problem has no dimensions")]
    NoDimensions,
    #[error("dimension `{0}` declared twice")]
    DuplicateDimension(String),
    #[error("dimension `{0}` has size 0")]
    ZeroSize(String),
    #[error("data space `{0}` declared twice")]
    DuplicateDataSpace(String),
    #[error("data space `{space}` references dimension #{dim}, which does not exist")]
    UnknownDimension { space: String, dim: usize },
    #[error("data space `{space}` has a subscript with {terms} terms (1 or 2 allowed)")]
    BadSubscript { space: String, terms: usize },
    #[error("data space `{0}` has a zero coefficient")]
    ZeroCoefficient(String),
    #[error("expected exactly one read-write data space, found {0}")]
    OutputCount(usize),
    #[error("word_bits must be 8, 16 or 32, got {0}")]
    WordBits(u32),
    #[error("tile has {got} extents, problem has {expected} dimensions")]
    TileRank { expected: usize, got: usize },
    #[error("tile extent {extent} for dimension `{dim}` is outside 1..={size}")]
    ExtentOutOfRange { dim: String, extent: u64, size: u64 },
}

/// A lowered tensor operation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProblemInstance {
    dims: Vec<Dimension>,
    data_spaces: Vec<DataSpace>,
    operation: OperationTag,
    word_bits: u32,
}

impl ProblemInstance {
    pub fn new(
        dims: Vec<Dimension>,
        data_spaces: Vec<DataSpace>,
        operation: OperationTag,
        word_bits: u32,
    ) -> Result<Self, ProblemError> {
        if dims.is_empty() {
            return Err(ProblemError::NoDimensions);
        }
        for (i, d) in dims.iter().enumerate() {
            if d.size == 0 {
                return Err(ProblemError::ZeroSize(d.name.clone()));
            }
            if dims[..i].iter().any(|o| o.name == d.name) {
                return Err(ProblemError::DuplicateDimension(d.name.clone()));
            }
        }
        for (i, ds) in data_spaces.iter().enumerate() {
            if data_spaces[..i].iter().any(|o| o.name == ds.name) {
                return Err(ProblemError::DuplicateDataSpace(ds.name.clone()));
            }
            for rank in &ds.projection.ranks {
                if rank.terms.is_empty() || rank.terms.len() > 2 {
                    return Err(ProblemError::BadSubscript {
                        space: ds.name.clone(),
                        terms: rank.terms.len(),
                    });
                }
                for t in &rank.terms {
                    if t.dim >= dims.len() {
                        return Err(ProblemError::UnknownDimension {
                            space: ds.name.clone(),
                            dim: t.dim,
                        });
                    }
                    if t.coeff == 0 {
                        return Err(ProblemError::ZeroCoefficient(ds.name.clone()));
                    }
                }
            }
        }
        let outputs = data_spaces.iter().filter(|d| d.is_output()).count();
        if outputs != 1 {
            return Err(ProblemError::OutputCount(outputs));
        }
        if ![8, 16, 32].contains(&word_bits) {
            return Err(ProblemError::WordBits(word_bits));
        }
        Ok(ProblemInstance {
            dims,
            data_spaces,
            operation,
            word_bits,
        })
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn data_spaces(&self) -> &[DataSpace] {
        &self.data_spaces
    }

    pub fn operation(&self) -> OperationTag {
        self.operation
    }

    pub fn word_bits(&self) -> u32 {
        self.word_bits
    }

    pub fn with_word_bits(mut self, bits: u32) -> Result<Self, ProblemError> {
        if ![8, 16, 32].contains(&bits) {
            return Err(ProblemError::WordBits(bits));
        }
        self.word_bits = bits;
        Ok(self)
    }

    pub fn num_dims(&self) -> usize {
        self.dims.len()
    }

    pub fn sizes(&self) -> Vec<u64> {
        self.dims.iter().map(|d| d.size).collect()
    }

    pub fn dim_index(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.name == name)
    }

    pub fn data_space(&self, name: &str) -> Option<&DataSpace> {
        self.data_spaces.iter().find(|d| d.name == name)
    }

    pub fn output_index(&self) -> usize {
        self.data_spaces
            .iter()
            .position(|d| d.is_output())
            .expect("validated: exactly one output")
    }

    /// Product of all dimension sizes: the number of scalar multiply-accumulates.
    pub fn total_macs(&self) -> u64 {
        self.dims.iter().map(|d| d.size).product()
    }

    pub fn relevant_dimension_names(&self, ds: &DataSpace) -> BTreeSet<String> {
        ds.relevant_dimensions()
            .into_iter()
            .map(|i| self.dims[i].name.clone())
            .collect()
    }

    /// Number of distinct words of `ds` touched by a tile with the given
    /// per-dimension extents.
    pub fn footprint(&self, ds: &DataSpace, tile: &[u64]) -> Result<u64, ProblemError> {
        if tile.len() != self.dims.len() {
            return Err(ProblemError::TileRank {
                expected: self.dims.len(),
                got: tile.len(),
            });
        }
        for (d, &t) in self.dims.iter().zip(tile) {
            if t == 0 || t > d.size {
                return Err(ProblemError::ExtentOutOfRange {
                    dim: d.name.clone(),
                    extent: t,
                    size: d.size,
                });
            }
        }
        Ok(footprint_unchecked(ds, tile))
    }

    /// Sum of footprints over all data spaces.
    pub fn total_footprint(&self, tile: &[u64]) -> u64 {
        self.data_spaces
            .iter()
            .map(|ds| footprint_unchecked(ds, tile))
            .sum()
    }

    /// Renders a subscript as `2*x + r`.
    pub fn subscript_string(&self, s: &Subscript) -> String {
        s.terms
            .iter()
            .map(|t| {
                if t.coeff == 1 {
                    self.dims[t.dim].name.clone()
                } else {
                    format!("{}*{}", t.coeff, self.dims[t.dim].name)
                }
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }

    /// `A[m][k]`
    pub fn reference_string(&self, ds: &DataSpace) -> String {
        let mut s = ds.name.clone();
        for r in &ds.projection.ranks {
            s.push('[');
            s.push_str(&self.subscript_string(r));
            s.push(']');
        }
        s
    }
}

/// Footprint without range checks; callers guarantee `1 <= tile[d] <= size[d]`.
pub(crate) fn footprint_unchecked(ds: &DataSpace, tile: &[u64]) -> u64 {
    ds.projection.ranks.iter().map(|r| r.extent(tile)).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gemm() -> ProblemInstance {
        ProblemInstance::new(
            vec![
                Dimension::new("m", 8),
                Dimension::new("n", 4),
                Dimension::new("k", 2),
            ],
            vec![
                DataSpace {
                    name: "A".into(),
                    role: DataRole::ReadOnly,
                    projection: Projection {
                        ranks: vec![Subscript::direct(0), Subscript::direct(2)],
                    },
                },
                DataSpace {
                    name: "B".into(),
                    role: DataRole::ReadOnly,
                    projection: Projection {
                        ranks: vec![Subscript::direct(2), Subscript::direct(1)],
                    },
                },
                DataSpace {
                    name: "C".into(),
                    role: DataRole::ReadWrite,
                    projection: Projection {
                        ranks: vec![Subscript::direct(0), Subscript::direct(1)],
                    },
                },
            ],
            OperationTag::Gemm,
            8,
        )
        .unwrap()
    }

    #[test]
    fn gemm_a_footprint_ignores_n() {
        let p = gemm();
        let a = &p.data_spaces()[0];
        assert_eq!(p.footprint(a, &[8, 4, 2]).unwrap(), 16);
        assert_eq!(p.footprint(a, &[8, 1, 2]).unwrap(), 16);
    }

    #[test]
    fn compound_rank_extent() {
        // x + r with tx=4, tr=3
        let s = Subscript::compound(1, 0, 1, 1);
        assert_eq!(s.extent(&[4, 3]), 6);
        // 2x + s with tx=3, ts=3: {2x+s} = 0..=6
        let s = Subscript::compound(2, 0, 1, 1);
        assert_eq!(s.extent(&[3, 3]), 7);
    }

    #[test]
    fn footprint_rejects_out_of_range_extent() {
        let p = gemm();
        let a = &p.data_spaces()[0];
        assert!(matches!(
            p.footprint(a, &[9, 1, 1]),
            Err(ProblemError::ExtentOutOfRange { .. })
        ));
        assert!(matches!(
            p.footprint(a, &[0, 1, 1]),
            Err(ProblemError::ExtentOutOfRange { .. })
        ));
        assert!(matches!(
            p.footprint(a, &[1, 1]),
            Err(ProblemError::TileRank { .. })
        ));
    }

    #[test]
    fn relevant_dims_of_gemm_output() {
        let p = gemm();
        let c = &p.data_spaces()[2];
        let names: Vec<_> = p.relevant_dimension_names(c).into_iter().collect();
        assert_eq!(names, vec!["m", "n"]);
    }

    #[test]
    fn total_macs_is_product() {
        assert_eq!(gemm().total_macs(), 64);
    }

    #[test]
    fn validation_errors() {
        let p = gemm();
        let mut ds = p.data_spaces().to_vec();
        ds[0].role = DataRole::ReadWrite;
        assert_eq!(
            ProblemInstance::new(p.dims().to_vec(), ds, OperationTag::Gemm, 8),
            Err(ProblemError::OutputCount(2))
        );
        assert_eq!(
            ProblemInstance::new(
                p.dims().to_vec(),
                p.data_spaces().to_vec(),
                OperationTag::Gemm,
                12
            ),
            Err(ProblemError::WordBits(12))
        );
        let mut dims = p.dims().to_vec();
        dims[1].name = "m".into();
        assert!(matches!(
            ProblemInstance::new(dims, p.data_spaces().to_vec(), OperationTag::Gemm, 8),
            Err(ProblemError::DuplicateDimension(_))
        ));
    }
}
