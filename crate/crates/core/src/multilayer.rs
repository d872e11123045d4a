//! The directed multilayer multigraph searched by the joint multilayer
//! compilers. Every topology node becomes a router vertex and an OXC vertex.
//! Fibers connect OXCs, established lightpaths with spare capacity connect
//! routers, and transmission modules connect the two layers of a node.

use fixedbitset::FixedBitSet;
use serde::Serialize;

use crate::catalog::{ModeTuple, ModuleTypeId};
use crate::intent::{IntentDag, IntentId, IntentKind, LifecycleState};
use crate::spectrum::mask_to_string;
use crate::state::NetworkState;
use crate::topology::{FiberId, NodeId};
use crate::units::Rate;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Layer {
    Router,
    Oxc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct MlVertex {
    pub node: NodeId,
    pub layer: Layer,
}

impl MlVertex {
    pub fn router(node: NodeId) -> Self {
        MlVertex { node, layer: Layer::Router }
    }

    pub fn oxc(node: NodeId) -> Self {
        MlVertex { node, layer: Layer::Oxc }
    }

    pub fn index(self) -> usize {
        self.node.index() * 2 + usize::from(self.layer == Layer::Oxc)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum MlEdgeType {
    Virtual,
    Optical,
    OpticalToVirtual,
    VirtualToOptical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct MlEdgeId(pub u32);

impl MlEdgeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Per-edge cost vector.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeCostVector {
    /// Distance contributed since the last regeneration (D).
    pub distance_km: f64,
    /// Transmission module cost (C).
    pub module_cost: f64,
    /// Router port cost (P).
    pub port_cost: f64,
    /// Module modes, transmit edges only (H).
    pub modes: Vec<ModeTuple>,
    /// Virtual link flag (F).
    pub is_virtual: bool,
    /// Slot availability, all free for non-optical edges (W).
    pub free: FixedBitSet,
    pub edge_type: MlEdgeType,
    /// Lightpath behind a virtual link (I).
    pub lightpath: Option<IntentId>,
    /// Physical length (L).
    pub length_km: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlEdge {
    pub id: MlEdgeId,
    pub from: MlVertex,
    pub to: MlVertex,
    pub cost: EdgeCostVector,
    pub fiber: Option<FiberId>,
    pub module: Option<ModuleTypeId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultilayerGraph {
    node_count: usize,
    slots: u32,
    edges: Vec<MlEdge>,
    out: Vec<Vec<MlEdgeId>>,
}

impl MultilayerGraph {
    pub fn vertex_count(&self) -> usize {
        self.node_count * 2
    }

    pub fn vertices(&self) -> impl Iterator<Item = MlVertex> {
        (0..self.node_count as u32).flat_map(|n| [MlVertex::router(NodeId(n)), MlVertex::oxc(NodeId(n))])
    }

    pub fn edges(&self) -> &[MlEdge] {
        &self.edges
    }

    pub fn edge(&self, id: MlEdgeId) -> &MlEdge {
        &self.edges[id.index()]
    }

    pub fn out_edges(&self, v: MlVertex) -> impl Iterator<Item = &MlEdge> {
        self.out[v.index()].iter().map(|e| &self.edges[e.index()])
    }

    pub fn slots(&self) -> u32 {
        self.slots
    }

    pub fn count(&self, t: MlEdgeType) -> usize {
        self.edges.iter().filter(|e| e.cost.edge_type == t).count()
    }

    fn push(&mut self, from: MlVertex, to: MlVertex, cost: EdgeCostVector, fiber: Option<FiberId>, module: Option<ModuleTypeId>) {
        let id = MlEdgeId(self.edges.len() as u32);
        self.out[from.index()].push(id);
        self.edges.push(MlEdge { id, from, to, cost, fiber, module });
    }

    pub fn to_json(&self, state: &NetworkState) -> serde_json::Value {
        let topo = state.topology();
        let vname = |v: MlVertex| format!("{}:{}", if v.layer == Layer::Router { "router" } else { "oxc" }, topo.node_name(v.node));
        let edges: Vec<serde_json::Value> = self
            .edges
            .iter()
            .map(|e| {
                serde_json::json!({
                    "id": e.id,
                    "from": vname(e.from),
                    "to": vname(e.to),
                    "type": e.cost.edge_type,
                    "D": e.cost.distance_km,
                    "C": e.cost.module_cost,
                    "P": e.cost.port_cost,
                    "H": e.cost.modes,
                    "F": e.cost.is_virtual,
                    "W": mask_to_string(&e.cost.free),
                    "I": e.cost.lightpath,
                    "L": e.cost.length_km,
                    "fiber": e.fiber.map(|f| topo.fiber_label(f)),
                    "module": e.module.map(|m| state.catalog().module(m).name.clone()),
                })
            })
            .collect();
        serde_json::json!({
            "vertices": self.vertices().map(vname).collect::<Vec<_>>(),
            "edges": edges,
        })
    }
}

/// Snapshot of the network as seen by a demand of `demand` rate: lightpaths
/// whose residual capacity is below the demand get no virtual link.
pub fn build_multilayer_graph(state: &NetworkState, dag: &IntentDag, demand: Rate) -> MultilayerGraph {
    let topo = state.topology();
    let catalog = state.catalog();
    let slots = catalog.slots_per_fiber;
    let mut all_free = FixedBitSet::with_capacity(slots as usize);
    all_free.insert_range(..);
    let mut g = MultilayerGraph { node_count: topo.node_count(), slots, edges: Vec::new(), out: vec![Vec::new(); topo.node_count() * 2] };
    let plain = |t: MlEdgeType| EdgeCostVector {
        distance_km: 0.0,
        module_cost: 0.0,
        port_cost: 0.0,
        modes: Vec::new(),
        is_virtual: false,
        free: all_free.clone(),
        edge_type: t,
        lightpath: None,
        length_km: 0.0,
    };

    for node in topo.nodes().iter().map(|n| n.id) {
        if !state.port_available(node) {
            continue;
        }
        for m in catalog.module_ids() {
            if !state.module_available(node, m) {
                continue;
            }
            let mt = catalog.module(m);
            let (router, oxc) = (MlVertex::router(node), MlVertex::oxc(node));
            let mut tx = plain(MlEdgeType::VirtualToOptical);
            tx.module_cost = mt.cost;
            tx.port_cost = catalog.router_port.cost;
            tx.modes = mt.modes.clone();
            g.push(router, oxc, tx, None, Some(m));
            let mut rx = plain(MlEdgeType::OpticalToVirtual);
            rx.module_cost = mt.cost;
            rx.port_cost = catalog.router_port.cost;
            g.push(oxc, router, rx, None, Some(m));
        }
    }
    for fiber in topo.fibers() {
        let (u, v) = topo.fiber_endpoints(fiber);
        let len = topo.fiber_length(fiber);
        let mut c = plain(MlEdgeType::Optical);
        c.distance_km = len;
        c.length_km = len;
        c.free = state.fiber_free(fiber).clone();
        g.push(MlVertex::oxc(u), MlVertex::oxc(v), c, Some(fiber), None);
    }
    for n in dag.intents() {
        if n.state != LifecycleState::Installed {
            continue;
        }
        if let IntentKind::Lightpath { nodes, length_km, capacity, load, .. } = &n.kind {
            if capacity.saturating_sub(*load) < demand {
                continue;
            }
            let (Some(&src), Some(&dst)) = (nodes.first(), nodes.last()) else { continue };
            let mut c = plain(MlEdgeType::Virtual);
            c.is_virtual = true;
            c.lightpath = Some(n.id);
            c.length_km = *length_km;
            g.push(MlVertex::router(src), MlVertex::router(dst), c, None, None);
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Catalog;
    use crate::topology::parse_sndlib;

    fn two_nodes() -> NetworkState {
        let topo = parse_sndlib("NODES (\n A ( 0 0 )\n B ( 1 0 )\n)\nLINKS (\n L ( A B ) ( ) 250\n)\n").unwrap();
        NetworkState::new(topo, Catalog::default())
    }

    fn installed_lightpath(dag: &mut IntentDag, load: f64) -> IntentId {
        let u = dag.add_user_intent(NodeId(0), NodeId(1), Rate::from_gbps(load)).unwrap();
        let lp = dag
            .add_child(
                u,
                IntentKind::Lightpath {
                    nodes: vec![NodeId(0), NodeId(1)],
                    fibers: vec![FiberId(0)],
                    module: ModuleTypeId(0),
                    mode: ModeTuple::new(400.0, 600.0, 8),
                    length_km: 250.0,
                    capacity: Rate::from_gbps(400.0),
                    load: Rate::from_gbps(load),
                },
            )
            .unwrap();
        for id in [u, lp] {
            dag.set_state(id, LifecycleState::Compiled).unwrap();
            dag.set_state(id, LifecycleState::Installed).unwrap();
        }
        lp
    }

    #[test]
    fn counts_without_lightpaths() {
        // 2 nodes x (router + oxc); 2 fibers; 2 nodes x 1 module x (tx + rx)
        let st = two_nodes();
        let g = build_multilayer_graph(&st, &IntentDag::new(), Rate::from_gbps(100.0));
        assert_eq!(g.vertex_count(), 4);
        assert_eq!(g.count(MlEdgeType::Optical), 2);
        assert_eq!(g.count(MlEdgeType::VirtualToOptical) + g.count(MlEdgeType::OpticalToVirtual), 4);
        assert_eq!(g.count(MlEdgeType::Virtual), 0);
        for e in g.edges() {
            let c = &e.cost;
            assert_eq!(c.is_virtual, c.edge_type == MlEdgeType::Virtual);
            assert_eq!(c.lightpath.is_some(), c.edge_type == MlEdgeType::Virtual);
            assert_eq!(!c.modes.is_empty(), c.edge_type == MlEdgeType::VirtualToOptical);
            match c.edge_type {
                MlEdgeType::Optical => {
                    assert_eq!((c.distance_km, c.length_km, c.module_cost, c.port_cost), (250.0, 250.0, 0.0, 0.0));
                    assert_eq!(e.from.layer, Layer::Oxc);
                    assert_eq!(e.to.layer, Layer::Oxc);
                }
                MlEdgeType::VirtualToOptical => {
                    assert_eq!((c.module_cost, c.port_cost, c.distance_km), (3.0, 1.0, 0.0));
                    assert_eq!((e.from.layer, e.to.layer), (Layer::Router, Layer::Oxc));
                }
                MlEdgeType::OpticalToVirtual => {
                    assert_eq!((c.module_cost, c.port_cost, c.distance_km), (3.0, 1.0, 0.0));
                    assert_eq!((e.from.layer, e.to.layer), (Layer::Oxc, Layer::Router));
                }
                MlEdgeType::Virtual => unreachable!(),
            }
        }
    }

    #[test]
    fn established_lightpath_adds_virtual_edge() {
        let st = two_nodes();
        let mut dag = IntentDag::new();
        let lp = installed_lightpath(&mut dag, 100.0);
        let g = build_multilayer_graph(&st, &dag, Rate::from_gbps(300.0));
        let virt: Vec<_> = g.edges().iter().filter(|e| e.cost.edge_type == MlEdgeType::Virtual).collect();
        assert_eq!(virt.len(), 1);
        assert_eq!(virt[0].cost.lightpath, Some(lp));
        assert_eq!((virt[0].cost.module_cost, virt[0].cost.port_cost, virt[0].cost.length_km), (0.0, 0.0, 250.0));
        assert_eq!((virt[0].from, virt[0].to), (MlVertex::router(NodeId(0)), MlVertex::router(NodeId(1))));
    }

    #[test]
    fn insufficient_residual_filters_virtual_edge() {
        let st = two_nodes();
        let mut dag = IntentDag::new();
        installed_lightpath(&mut dag, 100.0);
        let g = build_multilayer_graph(&st, &dag, Rate::from_gbps(300.001));
        assert_eq!(g.count(MlEdgeType::Virtual), 0);
    }

    #[test]
    fn optical_w_mirrors_fiber() {
        let mut st = two_nodes();
        st.reserve_slots(FiberId(1), crate::spectrum::SlotInterval::new(10, 3)).unwrap();
        let g = build_multilayer_graph(&st, &IntentDag::new(), Rate::from_gbps(1.0));
        for e in g.edges() {
            if let Some(f) = e.fiber {
                assert_eq!(&e.cost.free, st.fiber_free(f));
            }
        }
        assert_eq!(g, build_multilayer_graph(&st, &IntentDag::new(), Rate::from_gbps(1.0)));
    }

    #[test]
    fn exhausted_pool_removes_interlayer_edges() {
        let topo = two_nodes().topology().clone();
        let mut cat = Catalog::default();
        cat.module_types[0].pool = Some(1);
        let mut st = NetworkState::new(topo, cat);
        st.reserve_transmodule(NodeId(0), ModuleTypeId(0)).unwrap();
        let g = build_multilayer_graph(&st, &IntentDag::new(), Rate::from_gbps(1.0));
        assert_eq!(g.count(MlEdgeType::VirtualToOptical), 1);
        assert_eq!(g.out_edges(MlVertex::router(NodeId(0))).count(), 0);
    }
}
