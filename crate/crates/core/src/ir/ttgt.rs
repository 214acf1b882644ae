use thiserror::Error;

use crate::problem::{
    DataRole, DataSpace, Dimension, OperationTag, ProblemError, ProblemInstance, Projection,
    Subscript,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TtgtError {
    #[error("TTGT needs a TC operation, got {0}")]
    NotTc(OperationTag),
    #[error("tensor contraction needs two direct-indexed inputs and one output")]
    Shape,
    #[error("dimension `{0}` is not sourced from exactly one input or contracted")]
    Ungroupable(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// How the dimensions of a contraction fold into GEMM `M`, `N`, `K`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TtgtGrouping {
    /// Output dimensions indexing the first input.
    pub m: Vec<String>,
    /// Output dimensions indexing the second input.
    pub n: Vec<String>,
    /// Contracted dimensions (both inputs, not the output).
    pub k: Vec<String>,
    pub m_size: u64,
    pub n_size: u64,
    pub k_size: u64,
}

pub fn ttgt_grouping(p: &ProblemInstance) -> Result<TtgtGrouping, TtgtError> {
    if p.operation() != OperationTag::Tc {
        return Err(TtgtError::NotTc(p.operation()));
    }
    let inputs: Vec<&DataSpace> = p.data_spaces().iter().filter(|d| !d.is_output()).collect();
    if inputs.len() != 2
        || p
            .data_spaces()
            .iter()
            .any(|d| d.projection.ranks.iter().any(|r| !r.is_direct()))
    {
        return Err(TtgtError::Shape);
    }
    let out = &p.data_spaces()[p.output_index()];
    let (a, b) = (inputs[0].relevant_dimensions(), inputs[1].relevant_dimensions());
    let o = out.relevant_dimensions();
    let mut g = TtgtGrouping {
        m: vec![],
        n: vec![],
        k: vec![],
        m_size: 1,
        n_size: 1,
        k_size: 1,
    };
    for (i, d) in p.dims().iter().enumerate() {
        let (in_a, in_b, in_o) = (a.contains(&i), b.contains(&i), o.contains(&i));
        let (group, size) = match (in_a, in_b, in_o) {
            (true, false, true) => (&mut g.m, &mut g.m_size),
            (false, true, true) => (&mut g.n, &mut g.n_size),
            (true, true, false) => (&mut g.k, &mut g.k_size),
            _ => return Err(TtgtError::Ungroupable(d.name.clone())),
        };
        group.push(d.name.clone());
        *size *= d.size;
    }
    Ok(g)
}

/// Rewrites a tensor contraction as the GEMM `C[M][N] += A[M][K] * B[K][N]`
/// (dimension names `M`, `N`, `K`; data-space names kept). Transposes are not
/// represented.
pub fn reformulate_ttgt(p: &ProblemInstance) -> Result<ProblemInstance, TtgtError> {
    let g = ttgt_grouping(p)?;
    let names: Vec<&str> = p.data_spaces().iter().map(|d| d.name.as_str()).collect();
    let out_idx = p.output_index();
    let inputs: Vec<usize> = (0..names.len()).filter(|&i| i != out_idx).collect();
    let ds = |name: &str, role, ranks: [usize; 2]| DataSpace {
        name: name.to_string(),
        role,
        projection: Projection {
            ranks: ranks.iter().map(|&d| Subscript::direct(d)).collect(),
        },
    };
    // dims: M=0, N=1, K=2
    let spaces = vec![
        ds(names[inputs[0]], DataRole::ReadOnly, [0, 2]),
        ds(names[inputs[1]], DataRole::ReadOnly, [2, 1]),
        ds(names[out_idx], DataRole::ReadWrite, [0, 1]),
    ];
    Ok(ProblemInstance::new(
        vec![
            Dimension::new("M", g.m_size),
            Dimension::new("N", g.n_size),
            Dimension::new("K", g.k_size),
        ],
        spaces,
        OperationTag::Gemm,
        p.word_bits(),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{lower_to_problem, parse_loop_nest};

    fn alg2(n: u64) -> ProblemInstance {
        let hi = n - 1;
        let mut text = String::new();
        for it in ["a", "b", "c", "d", "e", "f", "g"] {
            text.push_str(&format!("for {it} = 0 to {hi}\n"));
        }
        text.push_str("stmt C[a][b][c][d][e][f] += A[d][f][g][b] * B[g][e][a][c]\n");
        lower_to_problem(&parse_loop_nest(&text).unwrap()).unwrap()
    }

    #[test]
    fn grouping_of_six_d_contraction() {
        let g = ttgt_grouping(&alg2(2)).unwrap();
        assert_eq!(g.m, vec!["b", "d", "f"]);
        assert_eq!(g.n, vec!["a", "c", "e"]);
        assert_eq!(g.k, vec!["g"]);
    }

    #[test]
    fn preserves_mac_count() {
        let p = alg2(3);
        let gemm = reformulate_ttgt(&p).unwrap();
        assert_eq!(gemm.total_macs(), p.total_macs());
        assert_eq!(gemm.operation(), OperationTag::Gemm);
        assert_eq!(gemm.reference_string(&gemm.data_spaces()[2]), "C[M][N]");
    }

    #[test]
    fn rejects_non_tc() {
        let ir = parse_loop_nest(
            "for m = 0 to 1\nfor n = 0 to 1\nfor k = 0 to 1\nstmt C[m][n] += A[m][k] * B[k][n]",
        )
        .unwrap();
        let p = lower_to_problem(&ir).unwrap();
        assert_eq!(
            reformulate_ttgt(&p).unwrap_err(),
            TtgtError::NotTc(OperationTag::Gemm)
        );
    }
}
