//! Consistency audit of an intent DAG against the resource state.

use std::collections::BTreeMap;
use std::fmt;

use super::{IntentDag, IntentId, IntentKind, LifecycleState};
use crate::catalog::ModuleTypeId;
use crate::state::NetworkState;
use crate::topology::{FiberId, NodeId};
use crate::units::Rate;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    Cycle,
    RootHasParents(IntentId),
    Orphan(IntentId),
    BadParent { child: IntentId, parent: IntentId },
    Overloaded(IntentId),
    LoadMismatch { lightpath: IntentId, load: Rate, routed: Rate },
    SpectrumWidth(IntentId),
    Continuity(IntentId),
    BadFiber(IntentId),
    SlotNotOccupied { intent: IntentId, fiber: FiberId, slot: u32 },
    UnownedSlot { fiber: FiberId, slot: u32 },
    DoubleOwner { fiber: FiberId, slot: u32 },
    ModuleCount { node: NodeId, module: ModuleTypeId, intents: u32, reserved: u32 },
    PortCount { node: NodeId, intents: u32, reserved: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cycle => write!(f, "cycle in intent graph"),
            Violation::RootHasParents(id) => write!(f, "connectivity intent {id} has parents"),
            Violation::Orphan(id) => write!(f, "intent {id} has no parent"),
            Violation::BadParent { child, parent } => write!(f, "intent {child} may not hang below {parent}"),
            Violation::Overloaded(id) => write!(f, "lightpath {id} load exceeds capacity"),
            Violation::LoadMismatch { lightpath, load, routed } => {
                write!(f, "lightpath {lightpath} load {load} but parents route {routed}")
            }
            Violation::SpectrumWidth(id) => write!(f, "spectrum intent {id} width differs from its mode"),
            Violation::Continuity(id) => write!(f, "node spectrum intent {id} differs from its spectrum interval"),
            Violation::BadFiber(id) => write!(f, "intent {id} references a fiber or slot outside the network"),
            Violation::SlotNotOccupied { intent, fiber, slot } => {
                write!(f, "slot {slot} on fiber {fiber} owned by {intent} is free in the state")
            }
            Violation::UnownedSlot { fiber, slot } => write!(f, "slot {slot} on fiber {fiber} is occupied without owner"),
            Violation::DoubleOwner { fiber, slot } => write!(f, "slot {slot} on fiber {fiber} has two owners"),
            Violation::ModuleCount { node, module, intents, reserved } => write!(
                f,
                "node {node} module type {} has {intents} intents but {reserved} reserved",
                module.0
            ),
            Violation::PortCount { node, intents, reserved } => {
                write!(f, "node {node} has {intents} port intents but {reserved} ports reserved")
            }
        }
    }
}

fn parent_allowed(child: &IntentKind, parent: &IntentKind) -> bool {
    use IntentKind::*;
    match child {
        Connectivity { .. } => false,
        Lightpath { .. } => matches!(parent, Connectivity { .. }),
        Spectrum { .. } | NodeTransmodule { .. } | NodeRouterPort { .. } => matches!(parent, Lightpath { .. }),
        NodeSpectrum { .. } => matches!(parent, Spectrum { .. }),
    }
}

/// Lists every inconsistency; an empty result means the DAG and the state agree.
pub fn verify_dag(dag: &IntentDag, state: &NetworkState) -> Vec<Violation> {
    let mut out = Vec::new();
    if dag.topological_order().is_none() {
        out.push(Violation::Cycle);
    }
    let topo = state.topology();
    let s = state.slots_per_fiber();
    let mut owners: BTreeMap<(FiberId, u32), u32> = BTreeMap::new();
    let mut modules: BTreeMap<(NodeId, ModuleTypeId), u32> = BTreeMap::new();
    let mut ports: BTreeMap<NodeId, u32> = BTreeMap::new();

    for n in dag.intents() {
        if n.kind.is_connectivity() {
            if n.parent_count() > 0 {
                out.push(Violation::RootHasParents(n.id));
            }
        } else if n.parent_count() == 0 {
            out.push(Violation::Orphan(n.id));
        }
        for p in n.parent_ids() {
            if let Some(pn) = dag.get(p) {
                if !parent_allowed(&n.kind, &pn.kind) {
                    out.push(Violation::BadParent { child: n.id, parent: p });
                }
            }
        }
        let installed = n.state == LifecycleState::Installed;
        match &n.kind {
            IntentKind::Lightpath { capacity, load, .. } => {
                if load > capacity {
                    out.push(Violation::Overloaded(n.id));
                }
                let routed: Rate = n.parents.iter().filter_map(|a| a.rate).sum();
                if routed != *load {
                    out.push(Violation::LoadMismatch { lightpath: n.id, load: *load, routed });
                }
            }
            IntentKind::Spectrum { interval, .. } => {
                for p in n.parent_ids() {
                    if let Some(IntentKind::Lightpath { mode, .. }) = dag.get(p).map(|x| &x.kind) {
                        if interval.len != state.catalog().occupied_slots(mode) {
                            out.push(Violation::SpectrumWidth(n.id));
                        }
                    }
                }
            }
            IntentKind::NodeSpectrum { fiber, interval, .. } => {
                for p in n.parent_ids() {
                    if let Some(IntentKind::Spectrum { interval: pi, .. }) = dag.get(p).map(|x| &x.kind) {
                        if pi != interval {
                            out.push(Violation::Continuity(n.id));
                        }
                    }
                }
                if fiber.index() >= topo.fiber_count() || interval.end() > s {
                    out.push(Violation::BadFiber(n.id));
                } else if installed {
                    let free = state.fiber_free(*fiber);
                    for slot in interval.slots() {
                        *owners.entry((*fiber, slot as u32)).or_default() += 1;
                        if free.contains(slot) {
                            out.push(Violation::SlotNotOccupied { intent: n.id, fiber: *fiber, slot: slot as u32 });
                        }
                    }
                }
            }
            IntentKind::NodeTransmodule { node, module } if installed => {
                *modules.entry((*node, *module)).or_default() += 1;
            }
            IntentKind::NodeRouterPort { node } if installed => {
                *ports.entry(*node).or_default() += 1;
            }
            _ => {}
        }
    }

    for fiber in topo.fibers() {
        let free = state.fiber_free(fiber);
        for slot in 0..s {
            let owned = owners.get(&(fiber, slot)).copied().unwrap_or(0);
            if owned > 1 {
                out.push(Violation::DoubleOwner { fiber, slot });
            } else if owned == 0 && !free.contains(slot as usize) {
                out.push(Violation::UnownedSlot { fiber, slot });
            }
        }
    }
    for node in topo.nodes().iter().map(|n| n.id) {
        let eq = state.equipment(node);
        for module in state.catalog().module_ids() {
            let intents = modules.get(&(node, module)).copied().unwrap_or(0);
            let reserved = eq.modules_used[module.index()];
            if intents != reserved {
                out.push(Violation::ModuleCount { node, module, intents, reserved });
            }
        }
        let intents = ports.get(&node).copied().unwrap_or(0);
        if intents != eq.ports_used {
            out.push(Violation::PortCount { node, intents, reserved: eq.ports_used });
        }
    }
    out
}
