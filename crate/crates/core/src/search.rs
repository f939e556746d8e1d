//! Greedy best-first search.
//!
//! The frontier is ordered by heuristic value only (path cost is ignored),
//! then by insertion sequence, then by the state's key. States whose key has
//! already been expanded are skipped.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};
use std::hash::Hash;

use crate::clock::Stopwatch;

/// A search problem. `heuristic` is always evaluated right after the
/// `expand` call that produced the state, so implementations may rely on
/// any scratch state left behind by that call.
pub trait Problem {
    type State: Clone;
    type Key: Ord + Hash + Clone;

    fn key(&self, state: &Self::State) -> Self::Key;
    fn heuristic(&mut self, state: &Self::State) -> f64;
    fn is_goal(&mut self, state: &Self::State) -> bool;
    fn expand(&mut self, state: &Self::State, out: &mut Vec<Self::State>);

    /// Lazy validation when a state is popped. Rejected states are dropped
    /// without being expanded. May attach data computed during validation.
    fn admit(&mut self, _state: &mut Self::State) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Limits {
    pub max_expansions: Option<u64>,
    pub max_seconds: Option<f64>,
}

impl Limits {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn expansions(n: u64) -> Self {
        Self {
            max_expansions: Some(n),
            max_seconds: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchStatus {
    Found,
    Exhausted,
    LimitHit,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome<S> {
    pub status: SearchStatus,
    /// Start-to-goal chain when `status == Found`, empty otherwise.
    pub path: Vec<S>,
    pub expansions: u64,
    pub peak_frontier: usize,
    pub rejected: u64,
    /// `(h, seq)` of every expanded node, when recording was requested.
    pub pop_log: Vec<(f64, u64)>,
}

struct Entry<K> {
    h: f64,
    seq: u64,
    key: K,
    node: usize,
}

impl<K: Ord> PartialEq for Entry<K> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<K: Ord> Eq for Entry<K> {}
impl<K: Ord> PartialOrd for Entry<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<K: Ord> Ord for Entry<K> {
    // Reversed so that BinaryHeap pops the smallest (h, seq, key).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .h
            .total_cmp(&self.h)
            .then_with(|| other.seq.cmp(&self.seq))
            .then_with(|| other.key.cmp(&self.key))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SearchOptions {
    pub limits: Limits,
    pub record_pops: bool,
}

pub fn best_first<P: Problem>(problem: &mut P, start: P::State, options: SearchOptions) -> SearchOutcome<P::State> {
    let clock = Stopwatch::start();
    let mut arena: Vec<(P::State, Option<usize>)> = Vec::new();
    let mut frontier = BinaryHeap::new();
    let mut closed: HashSet<P::Key> = HashSet::new();
    let mut seq = 0u64;
    let mut out = SearchOutcome {
        status: SearchStatus::Exhausted,
        path: Vec::new(),
        expansions: 0,
        peak_frontier: 0,
        rejected: 0,
        pop_log: Vec::new(),
    };

    let h0 = problem.heuristic(&start);
    frontier.push(Entry {
        h: h0,
        seq,
        key: problem.key(&start),
        node: 0,
    });
    arena.push((start, None));
    seq += 1;
    out.peak_frontier = 1;

    let mut children = Vec::new();
    while let Some(entry) = frontier.pop() {
        if closed.contains(&entry.key) {
            continue;
        }
        if let Some(max) = options.limits.max_expansions {
            if out.expansions >= max {
                out.status = SearchStatus::LimitHit;
                return out;
            }
        }
        if let Some(secs) = options.limits.max_seconds {
            if out.expansions % 64 == 0 && clock.elapsed_secs() > secs {
                out.status = SearchStatus::LimitHit;
                return out;
            }
        }
        if !problem.admit(&mut arena[entry.node].0) {
            out.rejected += 1;
            continue;
        }
        out.expansions += 1;
        if options.record_pops {
            out.pop_log.push((entry.h, entry.seq));
        }
        if problem.is_goal(&arena[entry.node].0) {
            out.status = SearchStatus::Found;
            let mut chain = Vec::new();
            let mut cur = Some(entry.node);
            while let Some(n) = cur {
                chain.push(arena[n].0.clone());
                cur = arena[n].1;
            }
            chain.reverse();
            out.path = chain;
            return out;
        }
        closed.insert(entry.key);
        children.clear();
        problem.expand(&arena[entry.node].0, &mut children);
        for child in children.drain(..) {
            let key = problem.key(&child);
            if closed.contains(&key) {
                continue;
            }
            let h = problem.heuristic(&child);
            let node = arena.len();
            arena.push((child, Some(entry.node)));
            frontier.push(Entry { h, seq, key, node });
            seq += 1;
        }
        out.peak_frontier = out.peak_frontier.max(frontier.len());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DescentStatus {
    Found,
    /// No child of the last state was admitted.
    Stuck,
    LimitHit,
}

#[derive(Debug, Clone)]
pub struct DescentOutcome<S> {
    pub status: DescentStatus,
    /// States committed so far, start first.
    pub path: Vec<S>,
    pub expansions: u64,
    pub rejected: u64,
}

#[derive(Debug, Clone, Copy)]
struct Ranked(f64, usize);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Greedy best-first search whose frontier is restricted to the children of
/// the most recently committed state. Children are tried in `(h, seq, key)`
/// order and the first admitted one is committed; the search never returns
/// to an earlier state.
pub fn greedy_descent<P: Problem>(problem: &mut P, start: P::State, limits: Limits) -> DescentOutcome<P::State> {
    let clock = Stopwatch::start();
    let mut closed: HashSet<P::Key> = HashSet::new();
    let mut out = DescentOutcome {
        status: DescentStatus::Stuck,
        path: vec![start],
        expansions: 0,
        rejected: 0,
    };
    let mut children = Vec::new();
    loop {
        if let Some(max) = limits.max_expansions {
            if out.expansions >= max {
                out.status = DescentStatus::LimitHit;
                return out;
            }
        }
        if let Some(secs) = limits.max_seconds {
            if clock.elapsed_secs() > secs {
                out.status = DescentStatus::LimitHit;
                return out;
            }
        }
        out.expansions += 1;
        let current = out.path.last().expect("path never empty").clone();
        if problem.is_goal(&current) {
            out.status = DescentStatus::Found;
            return out;
        }
        closed.insert(problem.key(&current));
        children.clear();
        problem.expand(&current, &mut children);
        // Rank by (h, insertion order); the order is unique so keys never
        // tie-break. A heap avoids sorting children that are never tried, and
        // closed children are skipped when popped.
        let mut slots: Vec<Option<P::State>> = Vec::with_capacity(children.len());
        let mut ranked: Vec<Reverse<Ranked>> = Vec::with_capacity(children.len());
        for child in children.drain(..) {
            ranked.push(Reverse(Ranked(problem.heuristic(&child), slots.len())));
            slots.push(Some(child));
        }
        let mut heap = BinaryHeap::from(ranked);
        let mut next = None;
        while let Some(Reverse(Ranked(_, k))) = heap.pop() {
            let mut child = slots[k].take().expect("ranked once");
            if closed.contains(&problem.key(&child)) {
                continue;
            }
            if problem.admit(&mut child) {
                next = Some(child);
                break;
            }
            out.rejected += 1;
        }
        match next {
            Some(c) => out.path.push(c),
            None => {
                out.status = DescentStatus::Stuck;
                return out;
            }
        }
    }
}

/// Closure-backed [`Problem`], for ad hoc searches and tests.
pub struct FnProblem<S, K, E, H, G, Q> {
    pub expand: E,
    pub heuristic: H,
    pub is_goal: G,
    pub key: Q,
    _marker: std::marker::PhantomData<(S, K)>,
}

impl<S, K, E, H, G, Q> FnProblem<S, K, E, H, G, Q>
where
    S: Clone,
    K: Ord + Hash + Clone,
    E: FnMut(&S) -> Vec<S>,
    H: FnMut(&S) -> f64,
    G: FnMut(&S) -> bool,
    Q: Fn(&S) -> K,
{
    pub fn new(expand: E, heuristic: H, is_goal: G, key: Q) -> Self {
        Self {
            expand,
            heuristic,
            is_goal,
            key,
            _marker: std::marker::PhantomData,
        }
    }
}

impl<S, K, E, H, G, Q> Problem for FnProblem<S, K, E, H, G, Q>
where
    S: Clone,
    K: Ord + Hash + Clone,
    E: FnMut(&S) -> Vec<S>,
    H: FnMut(&S) -> f64,
    G: FnMut(&S) -> bool,
    Q: Fn(&S) -> K,
{
    type State = S;
    type Key = K;

    fn key(&self, s: &S) -> K {
        (self.key)(s)
    }
    fn heuristic(&mut self, s: &S) -> f64 {
        (self.heuristic)(s)
    }
    fn is_goal(&mut self, s: &S) -> bool {
        (self.is_goal)(s)
    }
    fn expand(&mut self, s: &S, out: &mut Vec<S>) {
        out.extend((self.expand)(s));
    }
}

/// Persistent undo log shared by search nodes. Each node records one item
/// applied on top of its parent; [`Trail::move_to`] replays the difference
/// between two nodes onto a single scratch structure.
#[derive(Debug, Clone)]
pub struct Trail<T> {
    nodes: Vec<TrailNode<T>>,
    current: usize,
}

#[derive(Debug, Clone)]
struct TrailNode<T> {
    parent: usize,
    depth: u32,
    item: Option<T>,
}

impl<T: Copy> Default for Trail<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Copy> Trail<T> {
    pub const ROOT: usize = 0;

    pub fn new() -> Self {
        Self {
            nodes: vec![TrailNode {
                parent: 0,
                depth: 0,
                item: None,
            }],
            current: 0,
        }
    }

    pub fn push(&mut self, parent: usize, item: T) -> usize {
        let depth = self.nodes[parent].depth + 1;
        self.nodes.push(TrailNode {
            parent,
            depth,
            item: Some(item),
        });
        self.nodes.len() - 1
    }

    pub fn current(&self) -> usize {
        self.current
    }

    pub fn parent(&self, node: usize) -> usize {
        self.nodes[node].parent
    }

    pub fn item(&self, node: usize) -> Option<T> {
        self.nodes[node].item
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Items from the root to `node`, in application order.
    pub fn items_to(&self, node: usize) -> Vec<T> {
        let mut v = Vec::new();
        let mut n = node;
        while n != Self::ROOT {
            v.push(self.nodes[n].item.expect("non-root node has an item"));
            n = self.nodes[n].parent;
        }
        v.reverse();
        v
    }

    /// Calls `undo` for items between the current node and the common
    /// ancestor, then `redo` for items down to `target`.
    pub fn move_to(&mut self, target: usize, mut undo: impl FnMut(T), mut redo: impl FnMut(T)) {
        let mut a = self.current;
        let mut b = target;
        let mut forward = Vec::new();
        while self.nodes[a].depth > self.nodes[b].depth {
            undo(self.nodes[a].item.expect("item"));
            a = self.nodes[a].parent;
        }
        while self.nodes[b].depth > self.nodes[a].depth {
            forward.push(self.nodes[b].item.expect("item"));
            b = self.nodes[b].parent;
        }
        while a != b {
            undo(self.nodes[a].item.expect("item"));
            a = self.nodes[a].parent;
            forward.push(self.nodes[b].item.expect("item"));
            b = self.nodes[b].parent;
        }
        for item in forward.into_iter().rev() {
            redo(item);
        }
        self.current = target;
    }
}

/// 128-bit Zobrist-style digest element for an integer id.
pub fn digest_of(id: u64) -> u128 {
    let a = splitmix64(id.wrapping_mul(2).wrapping_add(1));
    let b = splitmix64(a ^ 0x9e37_79b9_7f4a_7c15);
    ((a as u128) << 64) | b as u128
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
