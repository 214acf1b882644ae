//! Neighborhood for local search.
//!
//! Per dimension a mapping is a factorization of the dimension size into
//! slots `[trip^0, fan^0, trip^1, fan^1, …, trip^{L-1}, fan^{L-1}, leaf]`.
//! A move shifts one prime factor from one slot to another; an order move
//! swaps two adjacent non-trivial loops of one level.

use crate::mapping::Mapping;

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            out.push(p);
            while n % p == 0 {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

fn slots(m: &Mapping, d: usize, size: u64) -> Vec<u64> {
    let mut inc = size;
    let mut s = Vec::with_capacity(2 * m.levels.len() + 1);
    for l in &m.levels {
        let (tt, st) = (l.temporal_tiles[d], l.spatial_tiles[d]);
        s.push(inc / tt);
        s.push(tt / st);
        inc = st;
    }
    s.push(inc);
    s
}

fn apply_slots(m: &mut Mapping, d: usize, size: u64, s: &[u64]) {
    let mut inc = size;
    for (pos, l) in m.levels.iter_mut().enumerate() {
        let tt = inc / s[2 * pos];
        let st = tt / s[2 * pos + 1];
        l.temporal_tiles[d] = tt;
        l.spatial_tiles[d] = st;
        inc = st;
    }
}

/// Every single-move neighbor of `m`, canonicalized. Neighbors may fall
/// outside the map space; the caller filters them.
pub fn neighbors(m: &Mapping, sizes: &[u64]) -> Vec<Mapping> {
    let mut out = Vec::new();
    for (d, &size) in sizes.iter().enumerate() {
        let s = slots(m, d, size);
        for i in 0..s.len() {
            for q in prime_factors(s[i]) {
                for j in 0..s.len() {
                    if i == j {
                        continue;
                    }
                    let mut t = s.clone();
                    t[i] /= q;
                    t[j] *= q;
                    let mut n = m.clone();
                    apply_slots(&mut n, d, size, &t);
                    out.push(n.canonical(sizes));
                }
            }
        }
    }
    for pos in 0..m.levels.len() {
        let trips = m.temporal_trips(pos, sizes);
        let live = m.levels[pos]
            .temporal_order
            .iter()
            .take_while(|&&d| trips[d] > 1)
            .count();
        for i in 1..live {
            let mut n = m.clone();
            n.levels[pos].temporal_order.swap(i - 1, i);
            out.push(n);
        }
    }
    out
}
