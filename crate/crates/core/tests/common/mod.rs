#![allow(dead_code)]

use union_dse::arch::{Axis, ClusterLevel, UNBOUNDED};
use union_dse::workloads::{conv2d, gemm, ConvShape, TcKernel};
use union_dse::problem::ProblemInstance;
use union_dse::Architecture;

fn build(levels: Vec<ClusterLevel<f64>>) -> Architecture {
    Architecture::new(levels, 1e9, 0.5).unwrap()
}

fn dram(fanout: u64, bw: f64) -> ClusterLevel<f64> {
    let axis = if fanout == 1 { Axis::None } else { Axis::X };
    ClusterLevel::memory("DRAM", UNBOUNDED, fanout, axis, bw, 200.0)
}

pub fn two_level(fanout: u64, l1: u64) -> Architecture {
    build(vec![dram(fanout, 4.0), ClusterLevel::pe("L1", l1, 2.0, 1.0)])
}

pub fn three_level(l2: u64, l1: u64) -> Architecture {
    build(vec![
        dram(2, 4.0),
        ClusterLevel::memory("L2", l2, 2, Axis::Y, 8.0, 6.0),
        ClusterLevel::pe("L1", l1, 4.0, 1.0),
    ])
}

/// DRAM -> L2 -> virtual row -> PE.
pub fn four_level_virtual(l2: u64, l1: u64) -> Architecture {
    build(vec![
        dram(1, 4.0),
        ClusterLevel::memory("L2", l2, 2, Axis::Y, 8.0, 6.0),
        ClusterLevel::virtual_level("V", 2, Axis::X),
        ClusterLevel::pe("L1", l1, 4.0, 1.0),
    ])
}

pub fn small_conv() -> ProblemInstance {
    conv2d(&ConvShape {
        n: 1,
        k: 2,
        c: 2,
        x: 5,
        y: 4,
        r: 3,
        s: 2,
        stride: 1,
    })
}

pub fn strided_conv() -> ProblemInstance {
    conv2d(&ConvShape {
        n: 1,
        k: 2,
        c: 1,
        x: 7,
        y: 5,
        r: 3,
        s: 3,
        stride: 2,
    })
}

/// Small instances of every operation class the oracle supports.
pub fn instances() -> Vec<(&'static str, ProblemInstance)> {
    vec![
        ("gemm", gemm(8, 4, 6)),
        ("gemm-cube", gemm(8, 8, 8)),
        ("conv", small_conv()),
        ("conv-strided", strided_conv()),
        ("ccsd7", TcKernel::Ccsd7.problem(3)),
        ("intensli2", TcKernel::Intensli2.problem(2)),
    ]
}

pub fn archs() -> Vec<(&'static str, Architecture)> {
    vec![
        ("2-level", two_level(4, 512)),
        ("3-level", three_level(512, 64)),
        ("4-level-virtual", four_level_virtual(512, 64)),
    ]
}
