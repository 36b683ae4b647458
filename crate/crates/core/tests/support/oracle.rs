//! Exact per-round delivery probabilities of a flood on a small graph with
//! Bernoulli links, by dynamic programming over the joint first-reception
//! slots of all nodes.

use std::collections::HashMap;

/// Joint state: first-reception slot per node (`None` while still listening).
type State = Vec<Option<u32>>;

/// Marks a node that received and has no transmissions left; merging those
/// states keeps six-node graphs tractable.
const DONE: u32 = u32::MAX;

/// `adj[a][b]` is true when `b` hears `a`. Every listener with at least one
/// transmitting neighbour decodes with probability `p`, independently.
pub fn delivery_probabilities(adj: &[Vec<bool>], initiator: usize, n_tx: u32, wait_slots: u32, p: f64) -> Vec<f64> {
    let n = adj.len();
    let mut start: State = vec![None; n];
    start[initiator] = Some(0);
    let mut dist: HashMap<State, f64> = HashMap::from([(start, 1.0)]);
    for slot in 0..wait_slots + n_tx {
        let mut next: HashMap<State, f64> = HashMap::new();
        for (state, prob) in dist {
            let sending = |v: usize| match state[v] {
                _ if v == initiator => slot < wait_slots,
                Some(DONE) => false,
                Some(k) => k < slot && slot <= k + n_tx,
                None => false,
            };
            let hearing: Vec<usize> = (0..n)
                .filter(|&v| v != initiator && state[v].is_none() && slot < wait_slots)
                .filter(|&v| (0..n).any(|t| t != v && adj[t][v] && sending(t)))
                .collect();
            for mask in 0u32..(1 << hearing.len()) {
                let mut s = state.clone();
                let mut w = prob;
                for (i, &v) in hearing.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        s[v] = Some(slot);
                        w *= p;
                    } else {
                        w *= 1.0 - p;
                    }
                }
                for (v, k) in s.iter_mut().enumerate() {
                    if v != initiator && k.is_some_and(|k| k != DONE && k + n_tx <= slot) {
                        *k = Some(DONE);
                    }
                }
                *next.entry(s).or_default() += w;
            }
        }
        dist = next;
    }
    let mut out = vec![0.0; n];
    for (state, prob) in &dist {
        for (o, s) in out.iter_mut().zip(state) {
            if s.is_some() {
                *o += prob;
            }
        }
    }
    out
}

/// Connected simple graphs on `n` labelled nodes, as symmetric adjacency matrices.
pub fn connected_graphs(n: usize) -> Vec<Vec<Vec<bool>>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let mut out = Vec::new();
    for mask in 0u64..(1 << pairs.len()) {
        let mut adj = vec![vec![false; n]; n];
        for (i, &(a, b)) in pairs.iter().enumerate() {
            if mask >> i & 1 == 1 {
                adj[a][b] = true;
                adj[b][a] = true;
            }
        }
        if is_connected(&adj) {
            out.push(adj);
        }
    }
    out
}

pub fn is_connected(adj: &[Vec<bool>]) -> bool {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            if adj[u][v] && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

#[allow(dead_code)]
pub fn edges(adj: &[Vec<bool>], gain_db: f64) -> Vec<(usize, usize, f64)> {
    let n = adj.len();
    (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).filter(|&(a, b)| adj[a][b]).map(|(a, b)| (a, b, gain_db)).collect()
}
