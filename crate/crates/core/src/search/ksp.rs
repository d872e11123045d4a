//! Loopless k-shortest physical paths (Yen's deviation algorithm) over the
//! undirected fiber topology.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use crate::topology::{FiberId, NodeId, Topology};

#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalPath {
    pub nodes: Vec<NodeId>,
    /// Directed fibers in travel order.
    pub fibers: Vec<FiberId>,
    pub length_km: f64,
}

fn path_cmp(a: &PhysicalPath, b: &PhysicalPath) -> Ordering {
    a.length_km.total_cmp(&b.length_km).then_with(|| a.nodes.cmp(&b.nodes))
}

struct Graph {
    /// Neighbours per node with the shortest fiber towards each.
    adj: Vec<Vec<(NodeId, FiberId, f64)>>,
}

impl Graph {
    fn new(topo: &Topology) -> Self {
        let adj = (0..topo.node_count() as u32)
            .map(|u| {
                let u = NodeId(u);
                let nbrs: BTreeSet<NodeId> = topo.out_fibers(u).iter().map(|&f| topo.fiber_endpoints(f).1).collect();
                nbrs.into_iter()
                    .map(|v| {
                        let f = topo.fiber_between(u, v).unwrap();
                        (v, f, topo.fiber_length(f))
                    })
                    .collect()
            })
            .collect();
        Graph { adj }
    }

    fn weight(&self, u: NodeId, v: NodeId) -> Option<(FiberId, f64)> {
        self.adj[u.index()].iter().find(|e| e.0 == v).map(|e| (e.1, e.2))
    }

    /// Shortest path from `from` to `to` avoiding `blocked_nodes` and
    /// `blocked_edges`; among equal lengths the smallest vertex sequence.
    fn shortest(&self, from: NodeId, to: NodeId, blocked_nodes: &[bool], blocked_edges: &BTreeSet<(NodeId, NodeId)>) -> Option<PhysicalPath> {
        let n = self.adj.len();
        let usable = |u: NodeId, v: NodeId| !blocked_nodes[v.index()] && !blocked_edges.contains(&(u, v));
        // distances to `to`, computed on the reversed (here symmetric) graph
        let mut dist = vec![f64::INFINITY; n];
        let mut heap = BinaryHeap::new();
        dist[to.index()] = 0.0;
        heap.push(Reverse(0.0, to));
        while let Some(Reverse(d, v)) = heap.pop() {
            if d > dist[v.index()] {
                continue;
            }
            for &(u, _, w) in &self.adj[v.index()] {
                if blocked_nodes[u.index()] || !usable(u, v) {
                    continue;
                }
                let nd = d + w;
                if nd < dist[u.index()] {
                    dist[u.index()] = nd;
                    heap.push(Reverse(nd, u));
                }
            }
        }
        if !dist[from.index()].is_finite() {
            return None;
        }
        let mut nodes = vec![from];
        let mut fibers = Vec::new();
        let mut length = 0.0;
        let mut u = from;
        while u != to {
            let next = self.adj[u.index()]
                .iter()
                .filter(|&&(v, _, w)| usable(u, v) && tight(dist[u.index()], w + dist[v.index()]))
                .min_by_key(|e| e.0)
                .expect("distance labels admit a tight edge");
            fibers.push(next.1);
            length += next.2;
            u = next.0;
            nodes.push(u);
        }
        Some(PhysicalPath { nodes, fibers, length_km: length })
    }
}

fn tight(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(1.0)
}

#[derive(PartialEq)]
struct Reverse(f64, NodeId);

impl Eq for Reverse {}

impl Ord for Reverse {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Reverse {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Up to `k` loopless paths from `src` to `dst` in non-decreasing length,
/// ties ordered by vertex sequence. Parallel links collapse to the shortest.
pub fn k_shortest_paths(topo: &Topology, src: NodeId, dst: NodeId, k: usize) -> Vec<PhysicalPath> {
    let g = Graph::new(topo);
    let n = topo.node_count();
    let mut accepted: Vec<PhysicalPath> = Vec::new();
    if k == 0 || src == dst {
        return accepted;
    }
    let none = BTreeSet::new();
    let Some(first) = g.shortest(src, dst, &vec![false; n], &none) else {
        return accepted;
    };
    accepted.push(first);
    let mut candidates: Vec<PhysicalPath> = Vec::new();
    while accepted.len() < k {
        let last = accepted.last().unwrap().clone();
        for i in 0..last.nodes.len() - 1 {
            let spur = last.nodes[i];
            let root = &last.nodes[..=i];
            let mut blocked_edges = BTreeSet::new();
            for p in &accepted {
                if p.nodes.len() > i + 1 && &p.nodes[..=i] == root {
                    blocked_edges.insert((p.nodes[i], p.nodes[i + 1]));
                }
            }
            let mut blocked_nodes = vec![false; n];
            for &r in &root[..i] {
                blocked_nodes[r.index()] = true;
            }
            let Some(tail) = g.shortest(spur, dst, &blocked_nodes, &blocked_edges) else { continue };
            let mut nodes = root.to_vec();
            nodes.extend_from_slice(&tail.nodes[1..]);
            if accepted.iter().chain(&candidates).any(|p| p.nodes == nodes) {
                continue;
            }
            let mut fibers = Vec::new();
            let mut length = 0.0;
            for w in nodes.windows(2) {
                let (f, l) = g.weight(w[0], w[1]).unwrap();
                fibers.push(f);
                length += l;
            }
            candidates.push(PhysicalPath { nodes, fibers, length_km: length });
        }
        let Some(best) = candidates.iter().enumerate().min_by(|a, b| path_cmp(a.1, b.1)).map(|(i, _)| i) else {
            break;
        };
        accepted.push(candidates.swap_remove(best));
    }
    accepted
}
