//! Shortest and k-shortest loopless paths on a small undirected graph.
//!
//! Paths compare by total weight first and node sequence second, so equal
//! weight routes resolve to the lexicographically smallest one.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

/// Undirected graph with non-negative edge weights. Parallel edges keep the
/// lighter weight.
#[derive(Debug, Clone, Default)]
pub struct PathGraph {
    adj: Vec<Vec<(usize, f64)>>,
}

impl PathGraph {
    pub fn new(n_nodes: usize) -> Self {
        PathGraph { adj: vec![Vec::new(); n_nodes] }
    }

    pub fn from_edges(n_nodes: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut g = PathGraph::new(n_nodes);
        for (a, b, w) in edges {
            g.add_edge(a, b, w);
        }
        g
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn add_edge(&mut self, a: usize, b: usize, w: f64) {
        debug_assert!(w >= 0.0, "negative edge weight {w}");
        if a == b {
            return;
        }
        for (from, to) in [(a, b), (b, a)] {
            match self.adj[from].iter_mut().find(|(n, _)| *n == to) {
                Some(e) => e.1 = e.1.min(w),
                None => self.adj[from].push((to, w)),
            }
        }
    }

    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        self.adj.get(a)?.iter().find(|(n, _)| *n == b).map(|e| e.1)
    }

    pub fn neighbors(&self, a: usize) -> &[(usize, f64)] {
        &self.adj[a]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPath {
    pub nodes: Vec<usize>,
    pub weight: f64,
}

impl WeightedPath {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.weight.total_cmp(&other.weight).then_with(|| self.nodes.cmp(&other.nodes))
    }
}

impl Eq for WeightedPath {}

impl PartialOrd for WeightedPath {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for WeightedPath {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

/// Sum of edge weights along `nodes`, accumulated from the first node.
/// `None` if a hop is missing.
pub fn path_weight(g: &PathGraph, nodes: &[usize]) -> Option<f64> {
    nodes.windows(2).try_fold(0.0, |acc, w| Some(acc + g.weight(w[0], w[1])?))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

pub fn dijkstra(g: &PathGraph, s: usize, d: usize) -> Option<WeightedPath> {
    dijkstra_restricted(g, s, d, &HashSet::new(), &HashSet::new())
}

/// Dijkstra that ignores `banned_nodes` and the undirected `banned_edges`.
pub fn dijkstra_restricted(
    g: &PathGraph,
    s: usize,
    d: usize,
    banned_nodes: &HashSet<usize>,
    banned_edges: &HashSet<(usize, usize)>,
) -> Option<WeightedPath> {
    if s >= g.len() || d >= g.len() || banned_nodes.contains(&s) || banned_nodes.contains(&d) {
        return None;
    }
    let mut best: Vec<Option<WeightedPath>> = vec![None; g.len()];
    let mut done = vec![false; g.len()];
    let mut heap = BinaryHeap::new();
    let start = WeightedPath { nodes: vec![s], weight: 0.0 };
    best[s] = Some(start.clone());
    heap.push(Reverse(start));
    while let Some(Reverse(label)) = heap.pop() {
        let u = *label.nodes.last().expect("label has a node");
        if done[u] {
            continue;
        }
        done[u] = true;
        if u == d {
            return Some(label);
        }
        for &(v, w) in g.neighbors(u) {
            if done[v] || banned_nodes.contains(&v) || banned_edges.contains(&edge_key(u, v)) {
                continue;
            }
            let mut nodes = label.nodes.clone();
            nodes.push(v);
            let cand = WeightedPath { nodes, weight: label.weight + w };
            if best[v].as_ref().is_none_or(|b| cand < *b) {
                best[v] = Some(cand.clone());
                heap.push(Reverse(cand));
            }
        }
    }
    None
}

/// Up to `k` loopless paths from `s` to `d` in increasing (weight, node
/// sequence) order. The first `j` entries do not depend on `k`.
pub fn yen_k_shortest(g: &PathGraph, s: usize, d: usize, k: usize) -> Vec<WeightedPath> {
    let mut accepted: Vec<WeightedPath> = Vec::new();
    if k == 0 {
        return accepted;
    }
    let Some(first) = dijkstra(g, s, d) else {
        return accepted;
    };
    accepted.push(first);
    let mut candidates: BTreeSet<WeightedPath> = BTreeSet::new();
    while accepted.len() < k {
        let prev = accepted.last().expect("non-empty").nodes.clone();
        for i in 0..prev.len().saturating_sub(1) {
            let root = &prev[..=i];
            let banned_edges: HashSet<(usize, usize)> = accepted
                .iter()
                .filter(|p| p.nodes.len() > i + 1 && p.nodes[..=i] == *root)
                .map(|p| edge_key(p.nodes[i], p.nodes[i + 1]))
                .collect();
            let banned_nodes: HashSet<usize> = root[..i].iter().copied().collect();
            let Some(spur) = dijkstra_restricted(g, prev[i], d, &banned_nodes, &banned_edges) else {
                continue;
            };
            let mut nodes = root[..i].to_vec();
            nodes.extend_from_slice(&spur.nodes);
            let weight = path_weight(g, &nodes).expect("spur path uses graph edges");
            candidates.insert(WeightedPath { nodes, weight });
        }
        let next = loop {
            match candidates.pop_first() {
                Some(c) if accepted.iter().any(|a| a.nodes == c.nodes) => continue,
                other => break other,
            }
        };
        match next {
            Some(p) => accepted.push(p),
            None => break,
        }
    }
    accepted
}
