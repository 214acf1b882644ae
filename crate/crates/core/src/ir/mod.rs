//! Affine loop-nest frontend.
//!
//! The input language is a minimal perfectly nested affine loop language with
//! exactly one multiply-accumulate style statement:
//!
//! ```text
//! # comments run to end of line
//! for m = 0 to 31            # inclusive upper bound
//! for n = 0 to 31 step 1     # step is optional, default 1
//! for k = 0 to 31
//! stmt C[m][n] += A[m][k] * B[k][n]
//! ```
//!
//! Grammar (whitespace and indentation are insignificant):
//!
//! ```text
//! nest     := line* stmt_line trailing*
//! line     := blank | comment | "for" IDENT "=" INT "to" INT ["step" INT]
//! stmt     := "stmt" ref ACCUM ref COMBINE ref
//! ref      := IDENT ("[" expr "]")+
//! expr     := term ("+" term)*
//! term     := INT | IDENT | INT "*" IDENT | IDENT "*" INT
//! ACCUM    := "+=" | "max=" | "="
//! COMBINE  := "*" | "+"
//! INT      := ["-"] digit+
//! ```
//!
//! Only blank lines and comments may follow the statement. The parser accepts
//! a slightly wider language than the cost models can evaluate (other
//! accumulation operators, many-term subscripts); [`check_conformability`]
//! reports what a given cost model cannot handle.

mod classify;
mod conform;
mod lower;
mod parse;
mod ttgt;

pub use classify::classify_operation;
pub use conform::{check_conformability, ConformRule, ConformabilityReport, CostModelTarget, Violation};
pub use lower::{lower_to_problem, LowerError};
pub use parse::{parse_loop_nest, ParseError, ParseErrorKind};
pub use ttgt::{reformulate_ttgt, ttgt_grouping, TtgtError, TtgtGrouping};

pub use crate::problem::OperationTag;

use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Loop {
    pub iter: String,
    pub lower: i64,
    /// Inclusive.
    pub upper: i64,
    pub step: i64,
}

impl Loop {
    pub fn trip_count(&self) -> u64 {
        ((self.upper - self.lower) / self.step + 1) as u64
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineTerm {
    pub coeff: i64,
    pub iter: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct IndexExpr {
    pub terms: Vec<AffineTerm>,
    pub constant: i64,
}

impl IndexExpr {
    pub fn iter(name: &str) -> Self {
        IndexExpr {
            terms: vec![AffineTerm {
                coeff: 1,
                iter: name.to_string(),
            }],
            constant: 0,
        }
    }

    /// A single iterator with coefficient 1.
    pub fn is_direct(&self) -> bool {
        self.terms.len() == 1 && self.terms[0].coeff == 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArrayRef {
    pub name: String,
    pub indices: Vec<IndexExpr>,
}

impl ArrayRef {
    pub fn iterators(&self) -> impl Iterator<Item = &str> {
        self.indices
            .iter()
            .flat_map(|e| e.terms.iter().map(|t| t.iter.as_str()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AccumOp {
    /// `+=`
    Add,
    /// `max=`
    Max,
    /// `=`
    Assign,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CombineOp {
    Mul,
    Add,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Statement {
    pub target: ArrayRef,
    pub accum: AccumOp,
    pub lhs: ArrayRef,
    pub combine: CombineOp,
    pub rhs: ArrayRef,
}

impl Statement {
    pub fn refs(&self) -> [&ArrayRef; 3] {
        [&self.target, &self.lhs, &self.rhs]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopNestIR {
    pub loops: Vec<Loop>,
    pub statement: Statement,
    /// Number of enclosing loops around the statement. The parser always
    /// produces `loops.len()`; programmatic nests may not.
    pub statement_depth: usize,
}

impl LoopNestIR {
    pub fn loop_of(&self, iter: &str) -> Option<&Loop> {
        self.loops.iter().find(|l| l.iter == iter)
    }
}

impl fmt::Display for IndexExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self
            .terms
            .iter()
            .map(|t| {
                if t.coeff == 1 {
                    t.iter.clone()
                } else {
                    format!("{}*{}", t.iter, t.coeff)
                }
            })
            .collect();
        if self.constant != 0 || parts.is_empty() {
            parts.push(self.constant.to_string());
        }
        f.write_str(&parts.join(" + "))
    }
}

impl fmt::Display for ArrayRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        for e in &self.indices {
            write!(f, "[{e}]")?;
        }
        Ok(())
    }
}

impl fmt::Display for LoopNestIR {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (depth, l) in self.loops.iter().enumerate() {
            let pad = "  ".repeat(depth);
            write!(f, "{pad}for {} = {} to {}", l.iter, l.lower, l.upper)?;
            if l.step != 1 {
                write!(f, " step {}", l.step)?;
            }
            writeln!(f)?;
        }
        let s = &self.statement;
        let accum = match s.accum {
            AccumOp::Add => "+=",
            AccumOp::Max => "max=",
            AccumOp::Assign => "=",
        };
        let combine = match s.combine {
            CombineOp::Mul => "*",
            CombineOp::Add => "+",
        };
        writeln!(
            f,
            "{}stmt {} {accum} {} {combine} {}",
            "  ".repeat(self.loops.len()),
            s.target,
            s.lhs,
            s.rhs
        )
    }
}
