//! The space of legal mappings for a (problem, architecture, constraints)
//! triple.
//!
//! Per dimension, tile sizes form a divisor chain
//! `size ⊇ TT^0 ⊇ ST^0 ⊇ TT^1 ⊇ … ⊇ TT^{L-1} = ST^{L-1}`, each element
//! dividing its predecessor. Chains that already break a per-dimension rule
//! are filtered at build time. A tiling picks one chain per dimension and
//! must pass the coupled checks (fan-out per level, buffer capacity,
//! utilization, aspect ratio, parallel-dimension limits). Each level then
//! contributes one canonical temporal order per distinct arrangement of its
//! non-trivial loops.
//!
//! Elements are canonical mappings (see [`Mapping::canonicalize`]).

mod constraints;

pub use constraints::{
    parse_constraints, ConstraintError, ConstraintSet, LevelConstraint, OrderSet, Resolved,
    ResolvedLevel,
};

use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::arch::Architecture;
use crate::mapping::{LevelMapping, Mapping};
use crate::problem::ProblemInstance;
use crate::scalar::Scalar;

const REJECTION_TRIES: usize = 2000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapSpaceError {
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error("empty map space")]
    Empty,
}

/// Tile sizes of one dimension across all levels.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Chain {
    pub tt: Vec<u64>,
    pub st: Vec<u64>,
}

impl Chain {
    pub fn fanout(&self, pos: usize) -> u64 {
        self.tt[pos] / self.st[pos]
    }

    fn total_fanout(&self) -> u64 {
        (0..self.tt.len()).map(|p| self.fanout(p)).product()
    }
}

pub fn divisors(n: u64) -> Vec<u64> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut i = 1;
    while i * i <= n {
        if n % i == 0 {
            small.push(i);
            if i != n / i {
                large.push(n / i);
            }
        }
        i += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).fold(1u128, |a, b| a.saturating_mul(b))
}

/// Lexicographic permutations of `items` (which must be sorted).
fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = items.to_vec();
    loop {
        out.push(cur.clone());
        // next permutation
        let Some(i) = (1..cur.len()).rev().find(|&i| cur[i - 1] < cur[i]) else {
            break;
        };
        let j = (i..cur.len()).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}

#[derive(Clone, Debug)]
pub struct MapSpace<T> {
    problem: ProblemInstance,
    arch: Architecture<T>,
    cons: Resolved,
    sizes: Vec<u64>,
    chains: Vec<Vec<Chain>>,
    total_pes: u64,
    empty: OnceLock<bool>,
}

struct DfsState {
    pick: Vec<usize>,
    par: Vec<u64>,
    npar: Vec<usize>,
    tiles: Vec<Vec<u64>>,
    total: u64,
}

impl<T: Scalar> MapSpace<T> {
    pub fn new(
        p: &ProblemInstance,
        a: &Architecture<T>,
        c: &ConstraintSet,
    ) -> Result<Self, MapSpaceError> {
        let cons = c.resolve(p, a)?;
        let mut s = MapSpace {
            problem: p.clone(),
            arch: a.clone(),
            cons,
            sizes: p.sizes(),
            chains: Vec::new(),
            total_pes: a.total_pes(),
            empty: OnceLock::new(),
        };
        s.chains = (0..s.sizes.len()).map(|d| s.gen_chains(d)).collect();
        Ok(s)
    }

    pub fn problem(&self) -> &ProblemInstance {
        &self.problem
    }

    pub fn arch(&self) -> &Architecture<T> {
        &self.arch
    }

    pub fn resolved(&self) -> &Resolved {
        &self.cons
    }

    /// Admissible chains of dimension `d`, ascending.
    pub fn chains(&self, d: usize) -> &[Chain] {
        &self.chains[d]
    }

    fn nl(&self) -> usize {
        self.arch.levels.len()
    }

    fn gen_chains(&self, d: usize) -> Vec<Chain> {
        let nl = self.nl();
        let mut out = Vec::new();
        let mut cur = Chain {
            tt: vec![0; nl],
            st: vec![0; nl],
        };
        self.gen_rec(d, 0, self.sizes[d], false, &mut cur, &mut out);
        out.sort();
        out
    }

    fn gen_rec(&self, d: usize, pos: usize, inc: u64, parallel: bool, cur: &mut Chain, out: &mut Vec<Chain>) {
        let nl = self.nl();
        if pos == nl {
            if !parallel && self.cons.required_parallel.contains(&d) {
                return;
            }
            out.push(cur.clone());
            return;
        }
        let lc = &self.cons.levels[pos];
        let level = &self.arch.levels[pos];
        for tt in divisors(inc) {
            if lc.fixed_tt[d].is_some_and(|f| f != tt) {
                continue;
            }
            if !level.is_virtual {
                let mut tile = vec![1; self.sizes.len()];
                tile[d] = tt;
                if self.problem.total_footprint(&tile) > level.memory_words {
                    continue;
                }
            }
            for st in divisors(tt) {
                let fan = tt / st;
                if pos + 1 == nl && fan != 1 {
                    continue;
                }
                if fan > level.sub_cluster_count {
                    continue;
                }
                if fan > 1
                    && (!self.cons.allowed_parallel[d]
                        || lc.no_parallel[d]
                        || (self.cons.distinct_parallel_dims && parallel))
                {
                    continue;
                }
                if lc.force_parallel[d] && fan == 1 {
                    continue;
                }
                if lc.fixed_st[d].is_some_and(|f| f != st) {
                    continue;
                }
                cur.tt[pos] = tt;
                cur.st[pos] = st;
                self.gen_rec(d, pos + 1, st, parallel || fan > 1, cur, out);
            }
        }
    }

    fn new_state(&self) -> DfsState {
        let nl = self.nl();
        let nd = self.sizes.len();
        DfsState {
            pick: Vec::with_capacity(nd),
            par: vec![1; nl],
            npar: vec![0; nl],
            tiles: vec![vec![1; nd]; nl],
            total: 1,
        }
    }

    /// Partial checks before adding chain `c`; all are
    /// monotone, so a failure prunes every completion.
    fn partial_ok(&self, st: &DfsState, c: &Chain) -> bool {
        for pos in 0..self.nl() {
            let f = c.fanout(pos);
            if st.par[pos] * f > self.arch.levels[pos].sub_cluster_count {
                return false;
            }
            if f > 1 && st.npar[pos] + 1 > self.cons.max_parallel_dims_per_level {
                return false;
            }
        }
        let total = st.total * c.total_fanout();
        if (total as f64) > self.cons.max_utilization * self.total_pes as f64 + 1e-9 {
            return false;
        }
        for (_, positions, pin) in &self.cons.aspect {
            let prod: u64 = positions.iter().map(|&p| st.par[p] * c.fanout(p)).product();
            if pin % prod != 0 {
                return false;
            }
        }
        true
    }

    fn push(&self, st: &mut DfsState, d: usize, idx: usize) -> bool {
        let c = &self.chains[d][idx];
        if !self.partial_ok(st, c) {
            return false;
        }
        for pos in 0..self.nl() {
            let f = c.fanout(pos);
            st.par[pos] *= f;
            if f > 1 {
                st.npar[pos] += 1;
            }
            st.tiles[pos][d] = c.tt[pos];
        }
        st.total *= c.total_fanout();
        st.pick.push(idx);
        let fits = (0..self.nl()).all(|pos| {
            let l = &self.arch.levels[pos];
            l.is_virtual || self.problem.total_footprint(&st.tiles[pos]) <= l.memory_words
        });
        if !fits {
            self.pop(st, d);
            return false;
        }
        true
    }

    fn pop(&self, st: &mut DfsState, d: usize) {
        let idx = st.pick.pop().unwrap();
        let c = &self.chains[d][idx];
        for pos in 0..self.nl() {
            let f = c.fanout(pos);
            st.par[pos] /= f;
            if f > 1 {
                st.npar[pos] -= 1;
            }
            st.tiles[pos][d] = 1;
        }
        st.total /= c.total_fanout();
    }

    fn complete_ok(&self, st: &DfsState) -> bool {
        let util = st.total as f64 / self.total_pes as f64;
        if util + 1e-12 < self.cons.min_utilization || util > self.cons.max_utilization + 1e-12 {
            return false;
        }
        for (_, positions, pin) in &self.cons.aspect {
            let prod: u64 = positions.iter().map(|&p| st.par[p]).product();
            if prod != *pin {
                return false;
            }
        }
        self.cons
            .levels
            .iter()
            .all(|l| l.orders.as_ref().is_none_or(|o| !o.is_empty()))
    }

    /// Depth-first walk over tilings. `order(d)` gives the chain indices of
    /// dimension `d` in visiting order; `bound(state)` may prune;
    /// `visit` returns false to stop. Returns false if stopped.
    fn dfs(
        &self,
        st: &mut DfsState,
        order: &dyn Fn(usize) -> Vec<usize>,
        bound: &mut dyn FnMut(&DfsState) -> bool,
        visit: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        let d = st.pick.len();
        if d == self.sizes.len() {
            if self.complete_ok(st) {
                return visit(&st.pick);
            }
            return true;
        }
        for idx in order(d) {
            if !self.push(st, d, idx) {
                continue;
            }
            let go = if bound(st) {
                true
            } else {
                self.dfs(st, order, bound, visit)
            };
            self.pop(st, d);
            if !go {
                return false;
            }
        }
        true
    }

    fn walk(&self, visit: &mut dyn FnMut(&[usize]) -> bool) {
        let mut st = self.new_state();
        let order = |d: usize| (0..self.chains[d].len()).collect::<Vec<_>>();
        self.dfs(&mut st, &order, &mut |_| false, visit);
    }

    /// Every legal tiling as chain indices per dimension, in DFS order.
    pub fn tilings(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        self.walk(&mut |t| {
            out.push(t.to_vec());
            true
        });
        out
    }

    pub fn is_empty(&self) -> bool {
        *self.empty.get_or_init(|| {
            let mut found = false;
            self.walk(&mut |_| {
                found = true;
                false
            });
            !found
        })
    }

    fn trips(&self, pos: usize, tiling: &[usize]) -> Vec<u64> {
        (0..self.sizes.len())
            .map(|d| {
                let c = &self.chains[d][tiling[d]];
                let inc = if pos == 0 { self.sizes[d] } else { c.st[pos - 1] };
                inc / c.tt[pos]
            })
            .collect()
    }

    /// Distinct canonical temporal orders admissible at `pos` for a tiling.
    pub fn level_orders(&self, pos: usize, tiling: &[usize]) -> Vec<Vec<usize>> {
        let trips = self.trips(pos, tiling);
        let nd = self.sizes.len();
        let trivial: Vec<usize> = (0..nd).filter(|&d| trips[d] <= 1).collect();
        let canon = |o: &[usize]| -> Vec<usize> {
            let mut v: Vec<usize> = o.iter().copied().filter(|&d| trips[d] > 1).collect();
            v.extend(&trivial);
            v
        };
        match &self.cons.levels[pos].orders {
            None => {
                let nontrivial: Vec<usize> = (0..nd).filter(|&d| trips[d] > 1).collect();
                permutations(&nontrivial).iter().map(|o| canon(o)).collect()
            }
            Some(list) => {
                let mut v: Vec<Vec<usize>> = list.iter().map(|o| canon(o)).collect();
                v.sort();
                v.dedup();
                v
            }
        }
    }

    fn order_count(&self, pos: usize, tiling: &[usize]) -> u128 {
        match &self.cons.levels[pos].orders {
            None => {
                let trips = self.trips(pos, tiling);
                factorial(trips.iter().filter(|&&t| t > 1).count())
            }
            Some(_) => self.level_orders(pos, tiling).len() as u128,
        }
    }

    fn tiling_mapping(&self, tiling: &[usize], orders: &[Vec<usize>]) -> Mapping {
        let levels = (0..self.nl())
            .map(|pos| {
                LevelMapping::new(
                    orders[pos].clone(),
                    (0..self.sizes.len())
                        .map(|d| self.chains[d][tiling[d]].tt[pos])
                        .collect(),
                    (0..self.sizes.len())
                        .map(|d| self.chains[d][tiling[d]].st[pos])
                        .collect(),
                )
            })
            .collect();
        Mapping::new(
            self.problem.dims().iter().map(|d| d.name.clone()).collect(),
            levels,
        )
    }

    /// Calls `f` for every mapping with the given tiling.
    pub fn for_each_mapping_of(&self, tiling: &[usize], f: &mut dyn FnMut(Mapping)) {
        let lists: Vec<Vec<Vec<usize>>> =
            (0..self.nl()).map(|p| self.level_orders(p, tiling)).collect();
        if lists.iter().any(|l| l.is_empty()) {
            return;
        }
        let mut idx = vec![0; lists.len()];
        loop {
            let orders: Vec<Vec<usize>> = idx.iter().zip(&lists).map(|(&i, l)| l[i].clone()).collect();
            f(self.tiling_mapping(tiling, &orders));
            let mut k = lists.len();
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < lists[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    /// Exact number of mappings. Walks every legal tiling, so this costs
    /// time proportional to the number of tilings; see [`Self::raw_size`]
    /// for a cheap upper bound.
    pub fn size(&self) -> u128 {
        let mut n: u128 = 0;
        self.walk(&mut |t| {
            let k = (0..self.nl())
                .map(|p| self.order_count(p, t))
                .fold(1u128, |a, b| a.saturating_mul(b));
            n = n.saturating_add(k);
            true
        });
        n
    }

    /// Product of per-dimension chain counts times the largest possible
    /// order count per level, before coupled checks.
    pub fn raw_size(&self) -> u128 {
        let tilings = self
            .chains
            .iter()
            .fold(1u128, |a, c| a.saturating_mul(c.len() as u128));
        let orders = (0..self.nl())
            .map(|pos| match &self.cons.levels[pos].orders {
                None => factorial(self.sizes.len()),
                Some(l) => l.len() as u128,
            })
            .fold(1u128, |a, b| a.saturating_mul(b));
        tilings.saturating_mul(orders)
    }

    /// Lazily yields every mapping, tiling by tiling.
    pub fn iter(&self) -> impl Iterator<Item = Mapping> + '_ {
        self.tilings().into_iter().flat_map(move |t| {
            let mut v = Vec::new();
            self.for_each_mapping_of(&t, &mut |m| v.push(m));
            v
        })
    }

    /// Every mapping in canonical (sorted) order.
    pub fn enumerate(&self) -> Vec<Mapping> {
        let mut v: Vec<Mapping> = self.iter().collect();
        v.sort();
        v
    }

    /// Chain indices of `m`, if every dimension's tile sizes form an
    /// admissible chain.
    pub fn tiling_of(&self, m: &Mapping) -> Option<Vec<usize>> {
        let nd = self.sizes.len();
        if m.num_levels() != self.nl()
            || m.num_dims() != nd
            || m.dims.iter().zip(self.problem.dims()).any(|(a, b)| *a != b.name)
            || m.levels.iter().any(|l| l.temporal_tiles.len() != nd || l.spatial_tiles.len() != nd)
        {
            return None;
        }
        (0..nd)
            .map(|d| {
                let c = Chain {
                    tt: m.levels.iter().map(|l| l.temporal_tiles[d]).collect(),
                    st: m.levels.iter().map(|l| l.spatial_tiles[d]).collect(),
                };
                self.chains[d].binary_search(&c).ok()
            })
            .collect()
    }

    fn tiling_ok(&self, tiling: &[usize]) -> bool {
        let mut st = self.new_state();
        for (d, &idx) in tiling.iter().enumerate() {
            if !self.push(&mut st, d, idx) {
                return false;
            }
        }
        self.complete_ok(&st)
    }

    /// True when the canonical form of `m` is an element of the space.
    pub fn contains(&self, m: &Mapping) -> bool {
        let Some(t) = self.tiling_of(m) else {
            return false;
        };
        if !self.tiling_ok(&t) {
            return false;
        }
        let canon = m.clone().canonical(&self.sizes);
        (0..self.nl()).all(|pos| {
            let o = &canon.levels[pos].temporal_order;
            match &self.cons.levels[pos].orders {
                None => true,
                Some(_) => self.level_orders(pos, &t).contains(o),
            }
        })
    }

    fn random_orders(&self, tiling: &[usize], rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
        (0..self.nl())
            .map(|pos| match &self.cons.levels[pos].orders {
                None => {
                    let trips = self.trips(pos, tiling);
                    let nd = self.sizes.len();
                    let mut o: Vec<usize> = (0..nd).filter(|&d| trips[d] > 1).collect();
                    o.shuffle(rng);
                    o.extend((0..nd).filter(|&d| trips[d] <= 1));
                    o
                }
                Some(_) => {
                    let l = self.level_orders(pos, tiling);
                    l[rng.random_range(0..l.len())].clone()
                }
            })
            .collect()
    }

    fn random_tiling(&self, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
        for _ in 0..REJECTION_TRIES {
            let t: Vec<usize> = self
                .chains
                .iter()
                .map(|c| rng.random_range(0..c.len()))
                .collect();
            if self.tiling_ok(&t) {
                return Some(t);
            }
        }
        // Depth-first from random rotations of every chain list.
        let offsets: Vec<usize> = self
            .chains
            .iter()
            .map(|c| rng.random_range(0..c.len()))
            .collect();
        let order = |d: usize| {
            let n = self.chains[d].len();
            (0..n).map(|i| (i + offsets[d]) % n).collect::<Vec<_>>()
        };
        let mut found = None;
        let mut st = self.new_state();
        self.dfs(&mut st, &order, &mut |_| false, &mut |t| {
            found = Some(t.to_vec());
            false
        });
        found
    }

    /// One draw from the stream `(seed, index)`.
    pub fn sample_at(&self, seed: u64, index: u64) -> Result<Mapping, MapSpaceError> {
        if self.chains.iter().any(|c| c.is_empty()) || self.is_empty() {
            return Err(MapSpaceError::Empty);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let t = self.random_tiling(&mut rng).ok_or(MapSpaceError::Empty)?;
        let orders = self.random_orders(&t, &mut rng);
        Ok(self.tiling_mapping(&t, &orders))
    }

    /// `n` independent draws. Draw `i` depends only on `(seed, i)`, so the
    /// result does not depend on how draws are spread across threads.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<Mapping>, MapSpaceError> {
        if self.is_empty() {
            return Err(MapSpaceError::Empty);
        }
        (0..n as u64)
            .into_par_iter()
            .map(|i| self.sample_at(seed, i))
            .collect()
    }

    /// A tiling with the largest utilized PE count, found by branch and
    /// bound. Among equal counts the first in DFS order wins.
    fn max_utilization_tiling(&self) -> Option<(u64, Vec<usize>)> {
        let sorted: Vec<Vec<usize>> = self
            .chains
            .iter()
            .map(|cs| {
                let mut idx: Vec<usize> = (0..cs.len()).collect();
                idx.sort_by_key(|&i| {
                    (std::cmp::Reverse(cs[i].total_fanout()), cs[i].tt.iter().sum::<u64>())
                });
                idx
            })
            .collect();
        let nl = self.nl();
        // fan[d][pos]: largest fanout any chain of `d` has at `pos`
        let fan: Vec<Vec<u64>> = self
            .chains
            .iter()
            .map(|cs| (0..nl).map(|pos| cs.iter().map(|c| c.fanout(pos)).max().unwrap_or(1)).collect())
            .collect();
        let cap = ((self.cons.max_utilization * self.total_pes as f64) + 1e-9).floor() as u64;
        let best: std::cell::RefCell<Option<(u64, Vec<usize>)>> = std::cell::RefCell::new(None);
        let mut st = self.new_state();
        let order = |d: usize| sorted[d].clone();
        self.dfs(
            &mut st,
            &order,
            &mut |st| {
                let depth = st.pick.len();
                let mut ub = st.total;
                for (pos, lvl) in self.arch.levels.iter().enumerate() {
                    let k = self.cons.max_parallel_dims_per_level.saturating_sub(st.npar[pos]);
                    let mut f: Vec<u64> = fan[depth..].iter().map(|v| v[pos]).collect();
                    f.sort_unstable_by(|a, b| b.cmp(a));
                    let reach = f.iter().take(k).fold(1u64, |a, &x| a.saturating_mul(x));
                    ub = ub.saturating_mul(reach.min(lvl.sub_cluster_count / st.par[pos]));
                }
                best.borrow().as_ref().is_some_and(|(b, _)| ub.min(cap) <= *b)
            },
            &mut |t| {
                let prod: u64 = t
                    .iter()
                    .enumerate()
                    .map(|(d, &i)| self.chains[d][i].total_fanout())
                    .product();
                let mut b = best.borrow_mut();
                if b.as_ref().is_none_or(|(x, _)| prod > *x) {
                    *b = Some((prod, t.to_vec()));
                }
                prod < cap
            },
        );
        best.into_inner()
    }

    /// Largest utilized PE count over the space, or `None` when empty.
    pub fn max_utilized_pes(&self) -> Option<u64> {
        self.max_utilization_tiling().map(|(p, _)| p)
    }

    /// A mapping reaching [`Self::max_utilized_pes`], with the first
    /// admissible order at every level.
    pub fn max_utilization_mapping(&self) -> Option<Mapping> {
        let (_, t) = self.max_utilization_tiling()?;
        let orders: Vec<Vec<usize>> = (0..self.nl())
            .map(|p| self.level_orders(p, &t).into_iter().next())
            .collect::<Option<_>>()?;
        Some(self.tiling_mapping(&t, &orders))
    }

    /// The subspace agreeing with `m` on every tile size above level `upto`,
    /// on `TT^upto`, and on the temporal orders of levels `0..=upto`.
    pub fn fix_outer(&self, m: &Mapping, upto: usize) -> MapSpace<T> {
        let mut s = self.clone();
        s.empty = OnceLock::new();
        for d in 0..self.sizes.len() {
            s.chains[d].retain(|c| {
                (0..=upto).all(|p| c.tt[p] == m.levels[p].temporal_tiles[d])
                    && (0..upto).all(|p| c.st[p] == m.levels[p].spatial_tiles[d])
            });
        }
        let canon = m.clone().canonical(&self.sizes);
        for p in 0..=upto {
            s.cons.levels[p].orders = Some(vec![canon.levels[p].temporal_order.clone()]);
        }
        s
    }
}
