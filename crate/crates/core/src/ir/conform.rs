use std::collections::HashSet;
use std::fmt;

use super::{classify_operation, AccumOp, CombineOp, LoopNestIR, OperationTag};

/// Which family of cost model the nest is checked against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CostModelTarget {
    /// Timeloop-style: any perfectly nested affine reduction.
    LoopLevel,
    /// MAESTRO-style: only CONV2D and GEMM operations.
    OperationLevel,
}

impl CostModelTarget {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "loop-level" | "loop" => Some(CostModelTarget::LoopLevel),
            "operation-level" | "operation" => Some(CostModelTarget::OperationLevel),
            _ => None,
        }
    }
}

impl fmt::Display for CostModelTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostModelTarget::LoopLevel => "loop-level",
            CostModelTarget::OperationLevel => "operation-level",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConformRule {
    PerfectNesting,
    AffineSubscripts,
    Reorderability,
    UnitOperation,
    SupportedOperation,
}

impl ConformRule {
    pub fn id(self) -> &'static str {
        match self {
            ConformRule::PerfectNesting => "perfect-nesting",
            ConformRule::AffineSubscripts => "affine-subscripts",
            ConformRule::Reorderability => "reorderability",
            ConformRule::UnitOperation => "unit-operation",
            ConformRule::SupportedOperation => "supported-operation",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub rule: ConformRule,
    pub message: String,
    /// Array reference or loop the violation refers to, if any.
    pub location: Option<String>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.rule.id(), self.message)?;
        if let Some(loc) = &self.location {
            write!(f, " (at {loc})")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConformabilityReport {
    pub target: CostModelTarget,
    pub violations: Vec<Violation>,
}

impl ConformabilityReport {
    pub fn is_conformable(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, rule: ConformRule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }
}

pub fn check_conformability(ir: &LoopNestIR, target: CostModelTarget) -> ConformabilityReport {
    let mut violations = Vec::new();
    let mut push = |rule, message: String, location: Option<String>| {
        violations.push(Violation {
            rule,
            message,
            location,
        })
    };

    if ir.statement_depth != ir.loops.len() {
        push(
            ConformRule::PerfectNesting,
            format!(
                "statement sits at depth {} of a {}-deep nest",
                ir.statement_depth,
                ir.loops.len()
            ),
            None,
        );
    }

    let stmt = &ir.statement;
    for r in stmt.refs() {
        for e in &r.indices {
            let loc = Some(r.to_string());
            if e.terms.is_empty() {
                push(
                    ConformRule::AffineSubscripts,
                    format!("constant subscript `{e}` has no iterator"),
                    loc.clone(),
                );
            }
            if e.terms.len() > 2 {
                push(
                    ConformRule::AffineSubscripts,
                    format!("subscript `{e}` has {} iterator terms (at most 2)", e.terms.len()),
                    loc.clone(),
                );
            }
            let mut seen = HashSet::new();
            for t in &e.terms {
                if t.coeff <= 0 {
                    push(
                        ConformRule::AffineSubscripts,
                        format!("non-positive coefficient {} on `{}`", t.coeff, t.iter),
                        loc.clone(),
                    );
                }
                if !seen.insert(t.iter.as_str()) {
                    push(
                        ConformRule::AffineSubscripts,
                        format!("iterator `{}` repeated in `{e}`", t.iter),
                        loc.clone(),
                    );
                }
                if ir.loop_of(&t.iter).is_none() {
                    push(
                        ConformRule::AffineSubscripts,
                        format!("`{}` is not a loop iterator", t.iter),
                        loc.clone(),
                    );
                }
            }
        }
    }

    if stmt.accum == AccumOp::Assign {
        push(
            ConformRule::Reorderability,
            "plain assignment is not an associative reduction".to_string(),
            Some(stmt.target.to_string()),
        );
    }
    for operand in [&stmt.lhs, &stmt.rhs] {
        if operand.name == stmt.target.name {
            push(
                ConformRule::Reorderability,
                format!("operand `{}` is also the written array", operand.name),
                Some(operand.to_string()),
            );
        }
    }

    if stmt.accum != AccumOp::Add || stmt.combine != CombineOp::Mul {
        push(
            ConformRule::UnitOperation,
            "unit operation is not a two-operand multiply-accumulate".to_string(),
            None,
        );
    }

    if target == CostModelTarget::OperationLevel {
        let op = classify_operation(ir);
        if !matches!(op, OperationTag::Conv2d | OperationTag::Gemm) {
            push(
                ConformRule::SupportedOperation,
                format!("operation {op} unsupported by {target} cost models"),
                None,
            );
        }
    }

    ConformabilityReport { target, violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_loop_nest;

    fn report(text: &str, target: CostModelTarget) -> ConformabilityReport {
        check_conformability(&parse_loop_nest(text).unwrap(), target)
    }

    #[test]
    fn gemm_conforms_to_both() {
        let g = "for m = 0 to 3\nfor n = 0 to 3\nfor k = 0 to 3\nstmt C[m][n] += A[m][k] * B[k][n]";
        assert!(report(g, CostModelTarget::LoopLevel).is_conformable());
        assert!(report(g, CostModelTarget::OperationLevel).is_conformable());
    }

    #[test]
    fn writing_an_operand_breaks_reorderability() {
        let r = report(
            "for i = 0 to 3\nfor j = 0 to 3\nstmt A[i] += A[j] * B[j]",
            CostModelTarget::LoopLevel,
        );
        assert!(r.violates(ConformRule::Reorderability));
        assert!(!r.is_conformable());
    }

    #[test]
    fn affine_restrictions() {
        let r = report(
            "for i = 0 to 3\nfor j = 0 to 3\nfor k = 0 to 1\nstmt C[i] += A[i + j + k] * B[j*-1]",
            CostModelTarget::LoopLevel,
        );
        assert_eq!(
            r.violations
                .iter()
                .filter(|v| v.rule == ConformRule::AffineSubscripts)
                .count(),
            2
        );
    }

    #[test]
    fn non_mac_statement() {
        let r = report(
            "for i = 0 to 3\nstmt C[i] max= A[i] + B[i]",
            CostModelTarget::LoopLevel,
        );
        assert!(r.violates(ConformRule::UnitOperation));
        assert!(!r.violates(ConformRule::Reorderability));
        let r = report("for i = 0 to 3\nstmt C[i] = A[i] * B[i]", CostModelTarget::LoopLevel);
        assert!(r.violates(ConformRule::Reorderability));
    }

    #[test]
    fn imperfect_nest_from_api() {
        let mut ir = parse_loop_nest("for i = 0 to 3\nfor j = 0 to 3\nstmt C[i] += A[i] * B[j]")
            .unwrap();
        ir.statement_depth = 1;
        let r = check_conformability(&ir, CostModelTarget::LoopLevel);
        assert!(r.violates(ConformRule::PerfectNesting));
    }
}
