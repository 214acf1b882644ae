//! Built-in workload generators: GEMM, CONV2D, the three tensor-contraction
//! kernels and the DNN layers used by the case studies.
//!
//! Generators emit loop-nest text and go through the regular frontend, so a
//! built-in workload is exactly what the same `.nest` file would produce.

use std::fmt;

use crate::ir::{lower_to_problem, parse_loop_nest};
use crate::problem::ProblemInstance;

fn lower(text: &str) -> ProblemInstance {
    let ir = parse_loop_nest(text).expect("generated nest parses");
    lower_to_problem(&ir).expect("generated nest lowers")
}

fn loop_line(iter: &str, size: u64) -> String {
    format!("for {iter} = 0 to {}\n", size - 1)
}

/// `C[m][n] += A[m][k] * B[k][n]`
pub fn gemm_nest(m: u64, n: u64, k: u64) -> String {
    let mut s = String::new();
    for (i, v) in [("m", m), ("n", n), ("k", k)] {
        s.push_str(&loop_line(i, v));
    }
    s.push_str("stmt C[m][n] += A[m][k] * B[k][n]\n");
    s
}

pub fn gemm(m: u64, n: u64, k: u64) -> ProblemInstance {
    lower(&gemm_nest(m, n, k))
}

/// CONV2D layer shape. `x`, `y` are input activation extents; the output
/// extent is `(x - r) / stride + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ConvShape {
    pub n: u64,
    pub k: u64,
    pub c: u64,
    pub x: u64,
    pub y: u64,
    pub r: u64,
    pub s: u64,
    pub stride: u64,
}

impl ConvShape {
    pub fn out_x(&self) -> u64 {
        (self.x - self.r) / self.stride + 1
    }

    pub fn out_y(&self) -> u64 {
        (self.y - self.s) / self.stride + 1
    }
}

/// Sliding-window convolution in `n k x y c r s` loop order.
pub fn conv2d_nest(c: &ConvShape) -> String {
    let mut s = String::new();
    for (i, v) in [
        ("n", c.n),
        ("k", c.k),
        ("x", c.out_x()),
        ("y", c.out_y()),
        ("c", c.c),
        ("r", c.r),
        ("s", c.s),
    ] {
        s.push_str(&loop_line(i, v));
    }
    s.push_str(&format!(
        "stmt OA[n][k][x][y] += IA[n][c][x*{st} + r][y*{st} + s] * F[k][c][r][s]\n",
        st = c.stride
    ));
    s
}

pub fn conv2d(c: &ConvShape) -> ProblemInstance {
    lower(&conv2d_nest(c))
}

/// Fully connected layer as `O[n][non] += I[n][nin] * W[nin][non]`.
pub fn fc_nest(n: u64, nin: u64, non: u64) -> String {
    let mut s = String::new();
    for (i, v) in [("n", n), ("non", non), ("nin", nin)] {
        s.push_str(&loop_line(i, v));
    }
    s.push_str("stmt O[n][non] += I[n][nin] * W[nin][non]\n");
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TcKernel {
    /// `C[a][b][c][d] += A[d][b][e][a] * B[e][c]`
    Intensli2,
    /// `C[a][b][c] += A[a][d][e][c] * B[e][b][d]`
    Ccsd7,
    /// `C[a][b][c][d][e][f] += A[d][f][g][b] * B[g][e][a][c]`
    CcsdT4,
}

impl TcKernel {
    pub const ALL: [TcKernel; 3] = [TcKernel::Intensli2, TcKernel::Ccsd7, TcKernel::CcsdT4];

    pub fn name(self) -> &'static str {
        match self {
            TcKernel::Intensli2 => "intensli2",
            TcKernel::Ccsd7 => "ccsd7",
            TcKernel::CcsdT4 => "ccsd-t4",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    fn iterators(self) -> &'static [&'static str] {
        match self {
            TcKernel::Intensli2 => &["a", "b", "c", "d", "e"],
            TcKernel::Ccsd7 => &["a", "b", "c", "d", "e"],
            TcKernel::CcsdT4 => &["a", "b", "c", "d", "e", "f", "g"],
        }
    }

    fn statement(self) -> &'static str {
        match self {
            TcKernel::Intensli2 => "stmt C[a][b][c][d] += A[d][b][e][a] * B[e][c]",
            TcKernel::Ccsd7 => "stmt C[a][b][c] += A[a][d][e][c] * B[e][b][d]",
            TcKernel::CcsdT4 => "stmt C[a][b][c][d][e][f] += A[d][f][g][b] * B[g][e][a][c]",
        }
    }

    /// Nest with every dimension of size `tds`.
    pub fn nest(self, tds: u64) -> String {
        let mut s = String::new();
        for it in self.iterators() {
            s.push_str(&loop_line(it, tds));
        }
        s.push_str(self.statement());
        s.push('\n');
        s
    }

    pub fn problem(self, tds: u64) -> ProblemInstance {
        lower(&self.nest(tds))
    }
}

impl fmt::Display for TcKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LayerShape {
    Conv(ConvShape),
    Fc { n: u64, nin: u64, non: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Layer {
    pub name: &'static str,
    pub shape: LayerShape,
}

impl Layer {
    pub fn nest(&self) -> String {
        match self.shape {
            LayerShape::Conv(c) => conv2d_nest(&c),
            LayerShape::Fc { n, nin, non } => fc_nest(n, nin, non),
        }
    }

    pub fn problem(&self) -> ProblemInstance {
        lower(&self.nest())
    }

    /// Divides every non-filter extent by `factor` (at least 1 remains).
    /// Filter windows keep their size.
    pub fn scaled(&self, factor: u64) -> Layer {
        let f = |v: u64| (v / factor.max(1)).max(1);
        let shape = match self.shape {
            LayerShape::Conv(c) => LayerShape::Conv(ConvShape {
                n: f(c.n),
                k: f(c.k),
                c: f(c.c),
                x: f(c.x).max(c.r),
                y: f(c.y).max(c.s),
                ..c
            }),
            LayerShape::Fc { n, nin, non } => LayerShape::Fc {
                n: f(n),
                nin: f(nin),
                non: f(non),
            },
        };
        Layer {
            name: self.name,
            shape,
        }
    }
}

const fn conv(n: u64, k: u64, c: u64, xy: u64, rs: u64) -> LayerShape {
    LayerShape::Conv(ConvShape {
        n,
        k,
        c,
        x: xy,
        y: xy,
        r: rs,
        s: rs,
        stride: 1,
    })
}

/// ResNet50, DLRM and BERT layers.
pub const DNN_LAYERS: [Layer; 9] = [
    Layer {
        name: "ResNet50-1",
        shape: conv(32, 64, 64, 56, 1),
    },
    Layer {
        name: "ResNet50-2",
        shape: conv(32, 64, 64, 56, 3),
    },
    Layer {
        name: "ResNet50-3",
        shape: conv(32, 1024, 256, 14, 1),
    },
    Layer {
        name: "DLRM-1",
        shape: LayerShape::Fc {
            n: 512,
            nin: 1024,
            non: 1024,
        },
    },
    Layer {
        name: "DLRM-2",
        shape: LayerShape::Fc {
            n: 512,
            nin: 1024,
            non: 64,
        },
    },
    Layer {
        name: "DLRM-3",
        shape: LayerShape::Fc {
            n: 512,
            nin: 2048,
            non: 2048,
        },
    },
    Layer {
        name: "BERT-1",
        shape: LayerShape::Fc {
            n: 256,
            nin: 768,
            non: 768,
        },
    },
    Layer {
        name: "BERT-2",
        shape: LayerShape::Fc {
            n: 256,
            nin: 3072,
            non: 768,
        },
    },
    Layer {
        name: "BERT-3",
        shape: LayerShape::Fc {
            n: 256,
            nin: 768,
            non: 3072,
        },
    },
];

pub fn layer(name: &str) -> Option<Layer> {
    DNN_LAYERS.iter().copied().find(|l| l.name == name)
}
