//! `.prob` files: TOML with `operation`, `word_bits`, `[[dimensions]]` and
//! `[[data_spaces]]` tables.
//!
//! ```toml
//! operation = "GEMM"
//! word_bits = 8
//!
//! [[dimensions]]
//! name = "m"
//! size = 32
//!
//! [[data_spaces]]
//! name = "A"
//! role = "read_only"        # or "read_write" for the output
//! subscripts = ["m", "k"]   # compound ranks are written "2*x + r"
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    DataRole, DataSpace, Dimension, OperationTag, ProblemError, ProblemInstance, Projection,
    Subscript, SubscriptTerm,
};

#[derive(Debug, Error)]
pub enum ProblemFileError {
    #[error("malformed problem file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("unknown operation `{0}`")]
    Operation(String),
    #[error("unknown role `{0}` (expected read_only or read_write)")]
    Role(String),
    #[error("bad subscript `{text}`: {reason}")]
    Subscript { text: String, reason: String },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    operation: String,
    #[serde(default = "default_word_bits")]
    word_bits: u32,
    dimensions: Vec<DimensionEntry>,
    data_spaces: Vec<DataSpaceEntry>,
}

fn default_word_bits() -> u32 {
    8
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DimensionEntry {
    name: String,
    size: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataSpaceEntry {
    name: String,
    role: String,
    subscripts: Vec<String>,
}

pub fn parse_problem(text: &str) -> Result<ProblemInstance, ProblemFileError> {
    let file: ProblemFile = toml::from_str(text)?;
    let operation = OperationTag::parse(&file.operation)
        .ok_or_else(|| ProblemFileError::Operation(file.operation.clone()))?;
    let dims: Vec<Dimension> = file
        .dimensions
        .into_iter()
        .map(|d| Dimension::new(d.name, d.size))
        .collect();
    let mut data_spaces = Vec::with_capacity(file.data_spaces.len());
    for entry in file.data_spaces {
        let role = match entry.role.as_str() {
            "read_only" => DataRole::ReadOnly,
            "read_write" => DataRole::ReadWrite,
            other => return Err(ProblemFileError::Role(other.to_string())),
        };
        let ranks = entry
            .subscripts
            .iter()
            .map(|s| parse_subscript(s, &dims))
            .collect::<Result<Vec<_>, _>>()?;
        data_spaces.push(DataSpace {
            name: entry.name,
            role,
            projection: Projection { ranks },
        });
    }
    Ok(ProblemInstance::new(
        dims,
        data_spaces,
        operation,
        file.word_bits,
    )?)
}

pub fn print_problem(p: &ProblemInstance) -> String {
    let file = ProblemFile {
        operation: p.operation().as_str().to_string(),
        word_bits: p.word_bits(),
        dimensions: p
            .dims()
            .iter()
            .map(|d| DimensionEntry {
                name: d.name.clone(),
                size: d.size,
            })
            .collect(),
        data_spaces: p
            .data_spaces()
            .iter()
            .map(|ds| DataSpaceEntry {
                name: ds.name.clone(),
                role: match ds.role {
                    DataRole::ReadOnly => "read_only".into(),
                    DataRole::ReadWrite => "read_write".into(),
                },
                subscripts: ds
                    .projection
                    .ranks
                    .iter()
                    .map(|r| p.subscript_string(r))
                    .collect(),
            })
            .collect(),
    };
    toml::to_string(&file).expect("problem file serializes")
}

fn parse_subscript(text: &str, dims: &[Dimension]) -> Result<Subscript, ProblemFileError> {
    let err = |reason: &str| ProblemFileError::Subscript {
        text: text.to_string(),
        reason: reason.to_string(),
    };
    let mut terms = Vec::new();
    for raw in text.split('+') {
        let term = raw.trim();
        if term.is_empty() {
            return Err(err("empty term"));
        }
        let (coeff, name) = match term.split_once('*') {
            None => (1, term),
            Some((a, b)) => {
                let (a, b) = (a.trim(), b.trim());
                match (a.parse::<u64>(), b.parse::<u64>()) {
                    (Ok(c), Err(_)) => (c, b),
                    (Err(_), Ok(c)) => (c, a),
                    _ => return Err(err("expected `<int>*<dim>`")),
                }
            }
        };
        let dim = dims
            .iter()
            .position(|d| d.name == name)
            .ok_or_else(|| err(&format!("unknown dimension `{name}`")))?;
        terms.push(SubscriptTerm { coeff, dim });
    }
    Ok(Subscript { terms })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONV: &str = r#"
operation = "CONV2D"
word_bits = 16

[[dimensions]]
name = "n"
size = 1
[[dimensions]]
name = "k"
size = 2
[[dimensions]]
name = "c"
size = 2
[[dimensions]]
name = "x"
size = 3
[[dimensions]]
name = "r"
size = 3

[[data_spaces]]
name = "IA"
role = "read_only"
subscripts = ["n", "c", "2*x + r"]

[[data_spaces]]
name = "F"
role = "read_only"
subscripts = ["k", "c", "r"]

[[data_spaces]]
name = "OA"
role = "read_write"
subscripts = ["n", "k", "x"]
"#;

    #[test]
    fn parse_then_print_round_trips() {
        let p = parse_problem(CONV).unwrap();
        assert_eq!(p.word_bits(), 16);
        assert_eq!(p.operation(), OperationTag::Conv2d);
        let ia = p.data_space("IA").unwrap();
        assert_eq!(ia.projection.ranks[2], Subscript::compound(2, 3, 1, 4));
        let again = parse_problem(&print_problem(&p)).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn rejects_unknown_dimension_in_subscript() {
        let bad = CONV.replace("\"k\", \"c\", \"r\"", "\"k\", \"c\", \"q\"");
        assert!(matches!(
            parse_problem(&bad),
            Err(ProblemFileError::Subscript { .. })
        ));
    }

    #[test]
    fn rejects_unknown_role() {
        let bad = CONV.replace("read_write", "scratch");
        assert!(matches!(parse_problem(&bad), Err(ProblemFileError::Role(_))));
    }
}
