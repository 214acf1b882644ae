use thiserror::Error;

use super::{
    check_conformability, classify_operation, ArrayRef, ConformabilityReport, CostModelTarget,
    LoopNestIR,
};
use crate::problem::{
    DataRole, DataSpace, Dimension, ProblemError, ProblemInstance, Projection, Subscript,
    SubscriptTerm,
};

#[derive(Debug, Error)]
pub enum LowerError {
    #[error("loop nest is not conformable: {}", .0.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    NotConformable(ConformabilityReport),
    #[error("both operands read array `{0}`; operands must be distinct arrays")]
    DuplicateOperand(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Lowers a conformable nest: one dimension per loop (size = trip count), data
/// spaces `[lhs operand, rhs operand, output]`. Loop steps fold into the
/// projection coefficients and subscript constants are dropped, since only
/// footprints and reuse matter downstream.
pub fn lower_to_problem(ir: &LoopNestIR) -> Result<ProblemInstance, LowerError> {
    let report = check_conformability(ir, CostModelTarget::LoopLevel);
    if !report.is_conformable() {
        return Err(LowerError::NotConformable(report));
    }
    let s = &ir.statement;
    if s.lhs.name == s.rhs.name {
        return Err(LowerError::DuplicateOperand(s.lhs.name.clone()));
    }
    let dims: Vec<Dimension> = ir
        .loops
        .iter()
        .map(|l| Dimension::new(l.iter.clone(), l.trip_count()))
        .collect();
    let space = |r: &ArrayRef, role| DataSpace {
        name: r.name.clone(),
        role,
        projection: Projection {
            ranks: r
                .indices
                .iter()
                .map(|e| Subscript {
                    terms: e
                        .terms
                        .iter()
                        .map(|t| {
                            let dim = ir
                                .loops
                                .iter()
                                .position(|l| l.iter == t.iter)
                                .expect("conformable: iterator exists");
                            SubscriptTerm {
                                coeff: (t.coeff * ir.loops[dim].step) as u64,
                                dim,
                            }
                        })
                        .collect(),
                })
                .collect(),
        },
    };
    let data_spaces = vec![
        space(&s.lhs, DataRole::ReadOnly),
        space(&s.rhs, DataRole::ReadOnly),
        space(&s.target, DataRole::ReadWrite),
    ];
    Ok(ProblemInstance::new(
        dims,
        data_spaces,
        classify_operation(ir),
        8,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_loop_nest;
    use crate::problem::OperationTag;

    #[test]
    fn unit_gemm() {
        let ir = parse_loop_nest(
            "for m = 0 to 0\nfor n = 0 to 0\nfor k = 0 to 0\nstmt C[m][n] += A[m][k] * B[k][n]",
        )
        .unwrap();
        let p = lower_to_problem(&ir).unwrap();
        assert_eq!(p.sizes(), vec![1, 1, 1]);
        assert_eq!(p.operation(), OperationTag::Gemm);
        assert_eq!(p.data_spaces()[2].name, "C");
        assert!(p.data_spaces()[2].is_output());
    }

    #[test]
    fn step_scales_coefficients() {
        let ir = parse_loop_nest(
            "for x = 0 to 6 step 2\nfor r = 0 to 2\nstmt O[x] += I[x + r + 3] * W[r]",
        )
        .unwrap();
        let p = lower_to_problem(&ir).unwrap();
        assert_eq!(p.sizes(), vec![4, 3]);
        let i = p.data_space("I").unwrap();
        assert_eq!(i.projection.ranks[0], Subscript::compound(2, 0, 1, 1));
        assert_eq!(p.subscript_string(&i.projection.ranks[0]), "2*x + r");
    }

    #[test]
    fn rejects_non_conformable_and_self_products() {
        let ir = parse_loop_nest("for i = 0 to 3\nstmt A[i] += A[i] * B[i]").unwrap();
        assert!(matches!(
            lower_to_problem(&ir),
            Err(LowerError::NotConformable(_))
        ));
        let ir = parse_loop_nest("for i = 0 to 3\nstmt C[i] += A[i] * A[i]").unwrap();
        assert!(matches!(
            lower_to_problem(&ir),
            Err(LowerError::DuplicateOperand(_))
        ));
    }
}
