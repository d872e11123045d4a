//! Random small instances and brute-force oracles shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use fixedbitset::FixedBitSet;
use intentdag::catalog::{Catalog, ModeTuple, ModuleType, RouterPort};
use intentdag::compile::{CompilerKind, Engine};
use intentdag::multilayer::{build_multilayer_graph, MlEdgeType, MlVertex, MultilayerGraph};
use intentdag::topology::{FiberId, Link, LinkId, Node, NodeId, Topology};
use intentdag::units::Rate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random topology with integer link lengths (km) so path sums are exact.
pub fn random_topology(rng: &mut ChaCha8Rng, max_nodes: usize, max_links: usize, len: (u32, u32)) -> Topology {
    let n = rng.random_range(2..=max_nodes);
    let nodes = (0..n)
        .map(|i| Node { id: NodeId(i as u32), name: format!("N{i}"), latitude: 0.0, longitude: i as f64 })
        .collect();
    let m = rng.random_range(1..=max_links);
    let links = (0..m)
        .map(|i| {
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            Link {
                id: LinkId(i as u32),
                name: format!("L{i}"),
                a: NodeId(a as u32),
                b: NodeId(b as u32),
                length_km: rng.random_range(len.0..=len.1) as f64,
            }
        })
        .collect();
    Topology::new(nodes, links).expect("valid random topology")
}

/// Random valid catalog with one or two module types and integer values.
pub fn random_catalog(rng: &mut ChaCha8Rng, max_slots: u32) -> Catalog {
    loop {
        let types = rng.random_range(1..=2);
        let module_types = (0..types)
            .map(|t| ModuleType {
                name: format!("m{t}"),
                cost: rng.random_range(1..=5) as f64,
                pool: None,
                modes: (0..rng.random_range(1..=3))
                    .map(|_| {
                        ModeTuple::new(
                            50.0 * rng.random_range(1..=8) as f64,
                            100.0 * rng.random_range(2..=20) as f64,
                            rng.random_range(1..=4),
                        )
                    })
                    .collect(),
            })
            .collect();
        let c = Catalog {
            slots_per_fiber: rng.random_range(4..=max_slots),
            guard_band_slots: rng.random_range(0..=1),
            router_port: RouterPort { cost: rng.random_range(1..=3) as f64, rate: Rate::from_gbps(400.0), pool: None },
            module_types,
        };
        if c.validate().is_ok() {
            return c;
        }
    }
}

pub struct SearchInstance {
    pub engine: Engine,
    pub src: NodeId,
    pub dst: NodeId,
    pub demand: Rate,
    pub graph: MultilayerGraph,
}

/// Small network with random occupancy and up to two installed lightpaths.
pub fn random_search_instance(seed: u64) -> SearchInstance {
    let mut r = rng(seed);
    let topo = random_topology(&mut r, 6, 8, (50, 1500));
    let cat = random_catalog(&mut r, 16);
    let n = topo.node_count() as u32;
    let mut engine = Engine::new(intentdag::state::NetworkState::new(topo, cat));
    let p = r.random_range(0.0..0.5);
    for f in 0..engine.state.topology().fiber_count() as u32 {
        for s in 0..engine.state.slots_per_fiber() {
            if r.random_bool(p) {
                engine.state.set_slot_raw(FiberId(f), s, false);
            }
        }
    }
    for _ in 0..r.random_range(0..=2) {
        let a = r.random_range(0..n);
        let b = (a + r.random_range(1..n)) % n;
        let rate = Rate::from_gbps(25.0 * r.random_range(1..=6) as f64);
        let kind = if r.random_bool(0.5) { CompilerKind::Jml } else { CompilerKind::sap() };
        engine.request(kind, NodeId(a), NodeId(b), rate).expect("compile");
    }
    let src = r.random_range(0..n);
    let dst = (src + r.random_range(1..n)) % n;
    let demand = Rate::from_gbps(25.0 * r.random_range(1..=8) as f64);
    let graph = build_multilayer_graph(&engine.state, &engine.dag, demand);
    SearchInstance { engine, src: NodeId(src), dst: NodeId(dst), demand, graph }
}

/// Final cost vector of a complete path: (cost, uses virtual, max rate in
/// Mbps or `u64::MAX` when no segment was built).
pub type FrontKey = (u64, bool, u64);

fn has_run(w: &FixedBitSet, b: u32) -> bool {
    let mut run = 0;
    for i in 0..w.len() {
        run = if w.contains(i) { run + 1 } else { 0 };
        if run >= b {
            return true;
        }
    }
    false
}

/// Enumerates every multilayer path that never repeats an edge and stops at
/// the first arrival at the destination router, keeps the valid ones under
/// every mode choice, and returns the Pareto front as key -> shortest length.
pub fn brute_force_front(inst: &SearchInstance) -> BTreeMap<FrontKey, u64> {
    brute_force_front_within(inst, u64::MAX).expect("unbounded search always finishes")
}

/// As `brute_force_front`, giving up after `budget` search steps.
pub fn brute_force_front_within(inst: &SearchInstance, budget: u64) -> Option<BTreeMap<FrontKey, u64>> {
    let all: Vec<(FrontKey, u64)> = enumerate(inst, budget)?.into_iter().map(|(k, l, _)| (k, l)).collect();
    let dominated = |a: &FrontKey, b: &FrontKey| {
        a.0 <= b.0 && a.1 <= b.1 && a.2 >= b.2 && (a.0 < b.0 || a.1 < b.1 || a.2 > b.2)
    };
    let mut front = BTreeMap::new();
    for (k, l) in &all {
        if all.iter().any(|(o, _)| dominated(o, k)) {
            continue;
        }
        let e = front.entry(*k).or_insert(*l);
        *e = (*e).min(*l);
    }
    Some(front)
}

/// Every valid (key, length, edge path) triple that survives an exact
/// global bound: a partial path is abandoned once some complete path found
/// earlier is no worse than every possible completion of it.
fn enumerate(inst: &SearchInstance, budget: u64) -> Option<Vec<(FrontKey, u64, Vec<usize>)>> {
    let cat = inst.engine.state.catalog();
    let best_rate = cat
        .module_types
        .iter()
        .flat_map(|m| &m.modes)
        .filter(|m| m.rate >= inst.demand && m.rate <= cat.router_port.rate)
        .map(|m| m.rate.mbps())
        .max()
        .unwrap_or(0);
    let mut dfs = Dfs {
        inst,
        target: MlVertex::router(inst.dst),
        best_rate,
        used: vec![false; inst.graph.edges().len()],
        path: Vec::new(),
        out: Vec::new(),
        budget,
    };
    let start = Walk { cost: 0, uses_virtual: false, length: 0, open: None, segment_rates: Vec::new() };
    dfs.go(MlVertex::router(inst.src), start);
    (dfs.budget > 0).then_some(dfs.out)
}

#[derive(Clone)]
struct Open {
    module: usize,
    modes: Vec<ModeTuple>,
    distance: f64,
    free: FixedBitSet,
    fibers: usize,
}

#[derive(Clone)]
struct Walk {
    cost: u64,
    uses_virtual: bool,
    length: u64,
    open: Option<Open>,
    segment_rates: Vec<Vec<u64>>,
}

struct Dfs<'a> {
    inst: &'a SearchInstance,
    target: MlVertex,
    best_rate: u64,
    used: Vec<bool>,
    path: Vec<usize>,
    out: Vec<(FrontKey, u64, Vec<usize>)>,
    budget: u64,
}

impl Dfs<'_> {
    fn hopeless(&self, w: &Walk) -> bool {
        let rate_cap = if w.open.is_some() || !w.segment_rates.is_empty() { self.best_rate } else { u64::MAX };
        self.out.iter().any(|((c, f, r), l, _)| *c <= w.cost && *f <= w.uses_virtual && *r >= rate_cap && *l <= w.length)
    }

    fn go(&mut self, v: MlVertex, w: Walk) {
        if self.budget == 0 {
            return;
        }
        self.budget -= 1;
        if v == self.target {
            self.finish(&w);
            return;
        }
        if self.hopeless(&w) {
            return;
        }
        let g = &self.inst.graph;
        let edges: Vec<usize> = g.out_edges(v).map(|e| e.id.0 as usize).filter(|&i| !self.used[i]).collect();
        for i in edges {
            if let Some(next) = self.step(&w, i) {
                self.used[i] = true;
                self.path.push(i);
                self.go(g.edges()[i].to, next);
                self.path.pop();
                self.used[i] = false;
            }
        }
    }

    fn step(&self, w: &Walk, i: usize) -> Option<Walk> {
        let e = &self.inst.graph.edges()[i];
        let cat = self.inst.engine.state.catalog();
        let mut w = w.clone();
        match e.cost.edge_type {
            MlEdgeType::VirtualToOptical => {
                if w.open.is_some() {
                    return None;
                }
                w.cost += (e.cost.module_cost + e.cost.port_cost) as u64;
                let modes: Vec<ModeTuple> = e
                    .cost
                    .modes
                    .iter()
                    .copied()
                    .filter(|m| m.rate >= self.inst.demand && m.rate <= cat.router_port.rate)
                    .collect();
                if modes.is_empty() {
                    return None;
                }
                let mut free = FixedBitSet::with_capacity(cat.slots_per_fiber as usize);
                free.insert_range(..);
                w.open = Some(Open { module: e.module.unwrap().0 as usize, modes, distance: 0.0, free, fibers: 0 });
            }
            MlEdgeType::Optical => {
                let o = w.open.as_mut()?;
                o.distance += e.cost.length_km;
                o.free.intersect_with(&e.cost.free);
                o.fibers += 1;
                let (d, free) = (o.distance, o.free.clone());
                o.modes.retain(|m| m.reach_km >= d && has_run(&free, m.slots + cat.guard_band_slots));
                if o.modes.is_empty() {
                    return None;
                }
                w.length += e.cost.length_km as u64;
            }
            MlEdgeType::OpticalToVirtual => {
                let o = w.open.take()?;
                if o.module != e.module.unwrap().0 as usize || o.fibers == 0 {
                    return None;
                }
                w.cost += (e.cost.module_cost + e.cost.port_cost) as u64;
                w.segment_rates.push(o.modes.iter().map(|m| m.rate.mbps()).collect());
            }
            MlEdgeType::Virtual => {
                if w.open.is_some() {
                    return None;
                }
                w.uses_virtual = true;
                w.length += e.cost.length_km as u64;
            }
        }
        Some(w)
    }

    /// One entry per distinct maximum rate reachable by some mode choice.
    fn finish(&mut self, w: &Walk) {
        if w.open.is_some() {
            return;
        }
        let mut maxima = vec![0u64];
        for rates in &w.segment_rates {
            let mut next: Vec<u64> = maxima.iter().flat_map(|&m| rates.iter().map(move |&r| m.max(r))).collect();
            next.sort_unstable();
            next.dedup();
            maxima = next;
        }
        for m in maxima {
            let rate = if w.segment_rates.is_empty() { u64::MAX } else { m };
            self.out.push(((w.cost, w.uses_virtual, rate), w.length, self.path.clone()));
        }
    }
}

/// Front computed by the library search, in the same shape.
pub fn search_front(labels: &[intentdag::label::PathLabel]) -> BTreeMap<FrontKey, u64> {
    let mut front = BTreeMap::new();
    for l in labels {
        let rate = l.committed_max_rate().map_or(u64::MAX, |r| r.mbps());
        let key = (l.total_cost() as u64, l.uses_virtual, rate);
        let e = front.entry(key).or_insert(l.length_km as u64);
        *e = (*e).min(l.length_km as u64);
    }
    front
}

/// All simple paths between two nodes on the undirected topology (shortest
/// parallel link per pair), sorted by (length, node sequence).
pub fn brute_force_paths(topo: &Topology, src: NodeId, dst: NodeId) -> Vec<(u64, Vec<NodeId>)> {
    let n = topo.node_count();
    let mut w = vec![vec![None::<u64>; n]; n];
    for l in topo.links() {
        let (a, b) = (l.a.index(), l.b.index());
        let len = l.length_km as u64;
        for (x, y) in [(a, b), (b, a)] {
            w[x][y] = Some(w[x][y].map_or(len, |o: u64| o.min(len)));
        }
    }
    let mut out = Vec::new();
    let mut stack = vec![src];
    fn go(w: &[Vec<Option<u64>>], dst: NodeId, stack: &mut Vec<NodeId>, len: u64, out: &mut Vec<(u64, Vec<NodeId>)>) {
        let u = *stack.last().unwrap();
        if u == dst {
            out.push((len, stack.clone()));
            return;
        }
        for v in 0..w.len() {
            if let Some(l) = w[u.index()][v] {
                let v = NodeId(v as u32);
                if !stack.contains(&v) {
                    stack.push(v);
                    go(w, dst, stack, len + l, out);
                    stack.pop();
                }
            }
        }
    }
    go(&w, dst, &mut stack, 0, &mut out);
    out.sort();
    out
}
