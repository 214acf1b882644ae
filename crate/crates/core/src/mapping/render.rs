use std::fmt::Write;

use super::Mapping;
use crate::problem::ProblemInstance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LoopKind {
    Temporal,
    /// Runs concurrently with the other spatial loops of the same level.
    Spatial,
    /// Point-by-point walk of the PE tile by the MAC.
    Intra,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LoopSpec {
    /// Level position, 0 = outermost.
    pub pos: usize,
    pub dim: usize,
    pub trip: u64,
    pub kind: LoopKind,
}

/// The mapping as an explicit loop list, outermost first, with trip-1 loops
/// elided. Per level: temporal loops in `temporal_order`, then the spatial
/// loops; after the PE level, the intra-tile loops.
pub fn loop_list(m: &Mapping, sizes: &[u64]) -> Vec<LoopSpec> {
    let mut out = Vec::new();
    let last = m.levels.len() - 1;
    for pos in 0..m.levels.len() {
        let trips = m.temporal_trips(pos, sizes);
        let lvl = &m.levels[pos];
        for &d in &lvl.temporal_order {
            if trips[d] > 1 {
                out.push(LoopSpec {
                    pos,
                    dim: d,
                    trip: trips[d],
                    kind: LoopKind::Temporal,
                });
            }
        }
        for (d, f) in lvl.fanouts().into_iter().enumerate() {
            if f > 1 {
                out.push(LoopSpec {
                    pos,
                    dim: d,
                    trip: f,
                    kind: LoopKind::Spatial,
                });
            }
        }
        if pos == last {
            for &d in &lvl.temporal_order {
                if lvl.spatial_tiles[d] > 1 {
                    out.push(LoopSpec {
                        pos,
                        dim: d,
                        trip: lvl.spatial_tiles[d],
                        kind: LoopKind::Intra,
                    });
                }
            }
        }
    }
    out
}

/// Pretty-prints the mapping as a loop nest. Loop variables are suffixed with
/// the cluster number (`k3` iterates `k` tiles at `C3`); intra-tile loops at
/// the PE use the bare dimension name. Concurrent spatial loops of one level
/// share a single `spatial_for` line.
pub fn render_loop_nest(m: &Mapping, p: &ProblemInstance) -> String {
    let sizes = p.sizes();
    let loops = loop_list(m, &sizes);
    let n = m.levels.len();
    let mut s = String::new();
    let mut depth = 0;
    let mut i = 0;
    while i < loops.len() {
        let l = loops[i];
        let pad = "  ".repeat(depth);
        let name = &m.dims[l.dim];
        match l.kind {
            LoopKind::Temporal => {
                let _ = writeln!(s, "{pad}for {name}{} in [0, {})", n - l.pos, l.trip);
                i += 1;
            }
            LoopKind::Intra => {
                let _ = writeln!(s, "{pad}for {name} in [0, {})", l.trip);
                i += 1;
            }
            LoopKind::Spatial => {
                let mut group = Vec::new();
                while i < loops.len() && loops[i].kind == LoopKind::Spatial && loops[i].pos == l.pos {
                    let g = loops[i];
                    group.push(format!("{}{} in [0, {})", m.dims[g.dim], n - g.pos, g.trip));
                    i += 1;
                }
                let _ = writeln!(s, "{pad}spatial_for ({})", group.join(", "));
            }
        }
        depth += 1;
    }
    let refs: Vec<String> = p
        .data_spaces()
        .iter()
        .map(|d| p.reference_string(d))
        .collect();
    let out = p.output_index();
    let ins: Vec<&String> = refs.iter().enumerate().filter(|(i, _)| *i != out).map(|(_, r)| r).collect();
    let _ = writeln!(
        s,
        "{}{} += {}",
        "  ".repeat(depth),
        refs[out],
        ins.iter().map(|r| r.as_str()).collect::<Vec<_>>().join(" * ")
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::LevelMapping;
    use crate::workloads::gemm;

    #[test]
    fn all_ones_renders_the_original_nest() {
        let p = gemm(4, 3, 2);
        let m = Mapping::unit(&p, 3);
        let loops = loop_list(&m, &p.sizes());
        assert_eq!(loops.len(), 3);
        assert!(loops.iter().all(|l| l.pos == 0 && l.kind == LoopKind::Temporal));
        assert_eq!(
            loops.iter().map(|l| l.trip).collect::<Vec<_>>(),
            vec![4, 3, 2]
        );
        assert_eq!(
            render_loop_nest(&m, &p),
            "for m3 in [0, 4)\n  for n3 in [0, 3)\n    for k3 in [0, 2)\n      C[m][n] += A[m][k] * B[k][n]\n"
        );
    }

    #[test]
    fn spatial_loops_share_one_line() {
        let p = gemm(4, 4, 4);
        let m = Mapping::new(
            vec!["m".into(), "n".into(), "k".into()],
            vec![
                LevelMapping::new(vec![2, 0, 1], vec![4, 4, 1], vec![2, 2, 1]),
                LevelMapping::new(vec![0, 1, 2], vec![1, 2, 1], vec![1, 2, 1]),
            ],
        );
        let text = render_loop_nest(&m, &p);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "for k2 in [0, 4)");
        assert_eq!(lines[1], "  spatial_for (m2 in [0, 2), n2 in [0, 2))");
        assert_eq!(lines[2], "    for m1 in [0, 2)");
        assert_eq!(lines[3], "      for n in [0, 2)");
        let iterations: u64 = loop_list(&m, &p.sizes()).iter().map(|l| l.trip).product();
        assert_eq!(iterations, p.total_macs());
    }
}
