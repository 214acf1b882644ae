use std::collections::{BTreeSet, HashMap};

use super::{ArrayRef, IndexExpr, LoopNestIR, OperationTag};

/// Classifies a nest by the shape of its array references. Integer constants
/// in subscripts are ignored; loop order and iterator names do not matter.
pub fn classify_operation(ir: &LoopNestIR) -> OperationTag {
    let s = &ir.statement;
    if is_conv2d(ir) {
        return OperationTag::Conv2d;
    }
    let all_direct = s.refs().iter().all(|r| r.indices.iter().all(IndexExpr::is_direct));
    if !all_direct {
        return OperationTag::Generic;
    }
    let a = iter_set(&s.lhs);
    let b = iter_set(&s.rhs);
    let out = iter_set(&s.target);
    let sym: BTreeSet<&str> = a.symmetric_difference(&b).copied().collect();
    let shared: BTreeSet<&str> = a.intersection(&b).copied().collect();
    let covers_all = ir
        .loops
        .iter()
        .all(|l| a.contains(l.iter.as_str()) || b.contains(l.iter.as_str()));
    if out != sym || shared.is_empty() || !covers_all || has_repeats(s.refs()) {
        return OperationTag::Generic;
    }
    let rank2 = s.refs().iter().all(|r| r.indices.len() == 2);
    if ir.loops.len() == 3 && rank2 && shared.len() == 1 && out.len() == 2 {
        OperationTag::Gemm
    } else {
        OperationTag::Tc
    }
}

fn iter_set(r: &ArrayRef) -> BTreeSet<&str> {
    r.iterators().collect()
}

fn has_repeats(refs: [&ArrayRef; 3]) -> bool {
    refs.iter().any(|r| iter_set(r).len() != r.indices.len())
}

fn direct(e: &IndexExpr) -> Option<&str> {
    e.is_direct().then(|| e.terms[0].iter.as_str())
}

/// `OA[n][k][x][y] += IA[n][c][s*x + r][s*y + q] * F[k][c][r][q]`, up to
/// renaming, operand order and term order inside the window subscripts.
fn is_conv2d(ir: &LoopNestIR) -> bool {
    let s = &ir.statement;
    ir.loops.len() == 7
        && (conv_pattern(&s.target, &s.lhs, &s.rhs, ir) || conv_pattern(&s.target, &s.rhs, &s.lhs, ir))
}

fn conv_pattern(out: &ArrayRef, input: &ArrayRef, filter: &ArrayRef, ir: &LoopNestIR) -> bool {
    if out.indices.len() != 4 || input.indices.len() != 4 || filter.indices.len() != 4 {
        return false;
    }
    let o: Option<Vec<&str>> = out.indices.iter().map(direct).collect();
    let f: Option<Vec<&str>> = filter.indices.iter().map(direct).collect();
    let (Some(o), Some(f)) = (o, f) else {
        return false;
    };
    let (n, k, x, y) = (o[0], o[1], o[2], o[3]);
    let (fk, c, r, q) = (f[0], f[1], f[2], f[3]);
    if fk != k || direct(&input.indices[0]) != Some(n) || direct(&input.indices[1]) != Some(c) {
        return false;
    }
    let window = |e: &IndexExpr, outer: &str, inner: &str| -> bool {
        if e.terms.len() != 2 {
            return false;
        }
        let coeffs: HashMap<&str, i64> = e.terms.iter().map(|t| (t.iter.as_str(), t.coeff)).collect();
        coeffs.get(inner) == Some(&1) && coeffs.get(outer).is_some_and(|&c| c >= 1)
    };
    if !window(&input.indices[2], x, r) || !window(&input.indices[3], y, q) {
        return false;
    }
    let names: BTreeSet<&str> = [n, k, c, x, y, r, q].into_iter().collect();
    names.len() == 7 && ir.loops.iter().all(|l| names.contains(l.iter.as_str()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_loop_nest;

    fn tag(text: &str) -> OperationTag {
        classify_operation(&parse_loop_nest(text).unwrap())
    }

    const CONV: &str = "\
for n = 0 to 0
for k = 0 to 1
for x = 0 to 2
for y = 0 to 2
for c = 0 to 1
for r = 0 to 2
for s = 0 to 2
stmt OA[n][k][x][y] += IA[n][c][x*2 + r][y*2 + s] * F[k][c][r][s]
";

    #[test]
    fn conv2d_pattern_and_operand_swap() {
        assert_eq!(tag(CONV), OperationTag::Conv2d);
        let swapped = CONV.replace(
            "IA[n][c][x*2 + r][y*2 + s] * F[k][c][r][s]",
            "F[k][c][r][s] * IA[n][c][r + x][s + y]",
        );
        assert_eq!(tag(&swapped), OperationTag::Conv2d);
    }

    #[test]
    fn conv_with_misplaced_channel_is_generic() {
        let typo = CONV.replace("IA[n][c]", "IA[n][k]");
        assert_eq!(tag(&typo), OperationTag::Generic);
    }

    #[test]
    fn gemm_and_tc() {
        assert_eq!(
            tag("for i = 0 to 3\nfor j = 0 to 3\nfor l = 0 to 3\nstmt Z[i][j] += X[l][j] * Y[i][l]"),
            OperationTag::Gemm
        );
        assert_eq!(
            tag("for a = 0 to 1\nfor b = 0 to 1\nfor e = 0 to 1\nfor f = 0 to 1\n\
                 stmt C[a][b][f] += A[a][e][f] * B[e][b]"),
            OperationTag::Tc
        );
    }

    #[test]
    fn elementwise_and_outer_products_are_generic() {
        assert_eq!(
            tag("for i = 0 to 3\nstmt C[i] += A[i] * B[i]"),
            OperationTag::Generic
        );
        assert_eq!(
            tag("for i = 0 to 3\nfor j = 0 to 3\nstmt C[i][j] += A[i] * B[j]"),
            OperationTag::Generic
        );
    }
}
