//! Path search: the non-dominated multilayer path enumeration used by the
//! joint compilers, winner selection, and k-shortest physical paths.

mod ksp;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::catalog::Catalog;
use crate::label::{dominates, extend_label, initial_label, ExtendContext, PathLabel};
use crate::multilayer::{MlVertex, MultilayerGraph};
use crate::topology::NodeId;
use crate::units::Rate;

pub use ksp::{k_shortest_paths, PhysicalPath};

pub const DEFAULT_LABEL_CAP: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchOptions {
    /// Maximum labels kept per vertex.
    pub label_cap: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { label_cap: DEFAULT_LABEL_CAP }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub labels_created: usize,
    pub labels_popped: usize,
    /// Evictions forced by the per-vertex cap.
    pub cap_hits: usize,
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    /// Complete labels at the destination router, pairwise non-dominated,
    /// sorted by cost, then length, then path.
    pub labels: Vec<PathLabel>,
    pub stats: SearchStats,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    Jml,
    Ldjml,
}

/// Total order used for eviction and as the final tie-break.
fn tie_cmp(a: &PathLabel, b: &PathLabel) -> Ordering {
    a.total_slots()
        .cmp(&b.total_slots())
        .then_with(|| a.path.cmp(&b.path))
        .then_with(|| a.edges.cmp(&b.edges))
        .then_with(|| {
            let ma = a.segments.iter().map(|s| s.mode.slots);
            let mb = b.segments.iter().map(|s| s.mode.slots);
            ma.cmp(mb)
        })
}

fn jml_cmp(a: &PathLabel, b: &PathLabel) -> Ordering {
    a.total_cost()
        .total_cmp(&b.total_cost())
        .then(a.length_km.total_cmp(&b.length_km))
        .then_with(|| tie_cmp(a, b))
}

fn ldjml_cmp(a: &PathLabel, b: &PathLabel) -> Ordering {
    a.length_km
        .total_cmp(&b.length_km)
        .then(a.total_cost().total_cmp(&b.total_cost()))
        .then_with(|| tie_cmp(a, b))
}

/// Pruning relation used inside the search. `a` covers `b` when every
/// continuation of `b` is matched by the same continuation of `a` at no
/// worse cost vector and no greater length, so `b` cannot contribute a new
/// point to the final front. That needs `a` to have used no edge `b` has
/// not, since paths never repeat an edge, and an open segment that can
/// already be received whenever `b`'s can. Exact ties go to `tie_cmp`.
fn covers(a: &PathLabel, b: &PathLabel) -> bool {
    let (ca, cb) = (a.total_cost(), b.total_cost());
    if ca > cb
        || a.uses_virtual > b.uses_virtual
        || a.distance_km > b.distance_km
        || a.length_km > b.length_km
        || a.open_module() != b.open_module()
        || (b.open_has_fiber() && !a.open_has_fiber())
    {
        return false;
    }
    let (ra, rb) = (a.committed_max_rate(), b.committed_max_rate());
    let rate_ok = match (ra, rb) {
        (None, None) => true,
        (Some(x), Some(y)) => x >= y,
        _ => false,
    };
    if !rate_ok
        || !b.free.is_subset(&a.free)
        || !b.modes.iter().all(|m| a.modes.contains(m))
        || !a.visited().is_subset(b.visited())
    {
        return false;
    }
    let strict = ca < cb
        || a.uses_virtual < b.uses_virtual
        || a.distance_km < b.distance_km
        || a.length_km < b.length_km
        || ra != rb
        || !a.free.is_subset(&b.free)
        || a.modes.len() > b.modes.len();
    strict || tie_cmp(a, b) == Ordering::Less
}

#[derive(PartialEq)]
struct Queued {
    cost: f64,
    length: f64,
    seq: usize,
    slot: usize,
}

impl Eq for Queued {}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (cost, length, insertion order)
        other
            .cost
            .total_cmp(&self.cost)
            .then(other.length.total_cmp(&self.length))
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Enumerates the non-dominated multilayer paths from the router of `src`
/// to the router of `dst` for a demand of `demand`.
///
/// Paths never repeat a multilayer edge and end at their first arrival at
/// the destination router. An empty result means no feasible path exists.
pub fn nondominated_paths(
    graph: &MultilayerGraph,
    catalog: &Catalog,
    src: NodeId,
    dst: NodeId,
    demand: Rate,
    options: SearchOptions,
) -> SearchResult {
    let ctx = ExtendContext {
        demand,
        port_rate: catalog.router_port.rate,
        guard_band_slots: catalog.guard_band_slots,
    };
    let target = MlVertex::router(dst);
    let cap = options.label_cap.max(1);
    let mut stats = SearchStats::default();
    let mut arena: Vec<Option<PathLabel>> = Vec::new();
    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); graph.vertex_count()];
    let mut heap = BinaryHeap::new();

    let start = initial_label(MlVertex::router(src), graph.slots(), graph.edges().len());
    if src != dst {
        sets[start.vertex.index()].push(0);
        heap.push(Queued { cost: 0.0, length: 0.0, seq: 0, slot: 0 });
        arena.push(Some(start));
        stats.labels_created = 1;
    }

    // Slot of the worst label per vertex by `jml_cmp`, valid while the set is unchanged.
    let mut worst: Vec<Option<usize>> = vec![None; graph.vertex_count()];
    while let Some(q) = heap.pop() {
        let Some(label) = arena[q.slot].as_ref() else { continue };
        stats.labels_popped += 1;
        if label.vertex == target {
            continue;
        }
        let mut next = Vec::new();
        for edge in graph.out_edges(label.vertex) {
            if label.contains_edge(edge.id) {
                continue;
            }
            let cost = label.total_cost() + edge.cost.module_cost + edge.cost.port_cost;
            if behind_full(&sets[edge.to.index()], &arena, &mut worst[edge.to.index()], cap, cost, label.length_km + edge.cost.length_km) {
                stats.cap_hits += 1;
                continue;
            }
            next.extend(extend_label(label, edge, &ctx).expect("search only follows well-formed edges"));
        }
        for n in next {
            let v = n.vertex.index();
            if behind_full(&sets[v], &arena, &mut worst[v], cap, n.total_cost(), n.length_km) {
                stats.cap_hits += 1;
                continue;
            }
            if sets[v].iter().any(|&i| covers(arena[i].as_ref().unwrap(), &n)) {
                continue;
            }
            sets[v].retain(|&i| {
                let keep = !covers(&n, arena[i].as_ref().unwrap());
                if !keep {
                    arena[i] = None;
                }
                keep
            });
            let slot = arena.len();
            heap.push(Queued { cost: n.total_cost(), length: n.length_km, seq: slot, slot });
            arena.push(Some(n));
            sets[v].push(slot);
            worst[v] = None;
            stats.labels_created += 1;
            if sets[v].len() > cap {
                let w = worst_of(&sets[v], &arena);
                sets[v].retain(|&i| i != w);
                arena[w] = None;
                stats.cap_hits += 1;
            }
        }
    }

    let complete: Vec<PathLabel> = sets[target.index()]
        .iter()
        .filter_map(|&i| arena[i].take())
        .filter(|l| l.is_complete())
        .collect();
    let mut labels: Vec<PathLabel> =
        complete.iter().filter(|b| !complete.iter().any(|a| dominates(a, b))).cloned().collect();
    labels.sort_by(jml_cmp);
    SearchResult { labels, stats }
}

/// Whether a label with this (cost, length) lands strictly behind the worst
/// member of a full set. Such a label covers nothing there and would be
/// evicted at once.
fn behind_full(set: &[usize], arena: &[Option<PathLabel>], worst: &mut Option<usize>, cap: usize, cost: f64, length: f64) -> bool {
    if set.len() < cap {
        return false;
    }
    let w = arena[*worst.get_or_insert_with(|| worst_of(set, arena))].as_ref().unwrap();
    (cost, length) > (w.total_cost(), w.length_km)
}

fn worst_of(set: &[usize], arena: &[Option<PathLabel>]) -> usize {
    *set.iter().max_by(|&&x, &&y| jml_cmp(arena[x].as_ref().unwrap(), arena[y].as_ref().unwrap())).unwrap()
}

/// Picks the label minimising the objective. Ties fall back to length or
/// cost (whichever is not primary), fewest slots, then the smallest vertex
/// sequence.
pub fn select_winner(labels: &[PathLabel], objective: Objective) -> Option<&PathLabel> {
    let cmp = match objective {
        Objective::Jml => jml_cmp,
        Objective::Ldjml => ldjml_cmp,
    };
    labels.iter().min_by(|a, b| cmp(a, b))
}
