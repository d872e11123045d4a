//! The framework-wide intent DAG.
//!
//! User (connectivity) intents are roots. Compilation hangs lightpaths below
//! them, and each lightpath owns its low-level children:
//!
//! ```text
//! Connectivity ─┬─> Lightpath ─┬─> NodeRouterPort (src), NodeRouterPort (dst)
//!               │              ├─> NodeTransmodule (src), NodeTransmodule (dst)
//! Connectivity ─┘  (grooming)  └─> Spectrum ──> NodeSpectrum (one per fiber)
//! ```
//!
//! A lightpath with several connectivity parents is a grooming point. Without
//! grooming every user intent spans its own tree and the DAG is a forest.

mod verify;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{ModeTuple, ModuleTypeId};
use crate::spectrum::SlotInterval;
use crate::topology::{FiberId, NodeId};
use crate::units::Rate;

pub use verify::{verify_dag, Violation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntentId(pub u64);

impl fmt::Display for IntentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LifecycleState {
    Uncompiled,
    Compiled,
    Installed,
    Blocked,
}

impl LifecycleState {
    pub fn can_become(self, next: LifecycleState) -> bool {
        use LifecycleState::*;
        matches!((self, next), (Uncompiled, Compiled) | (Compiled, Installed) | (Uncompiled, Blocked))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum IntentKind {
    Connectivity {
        source: NodeId,
        destination: NodeId,
        #[serde(rename = "rate_mbps")]
        rate: Rate,
    },
    Lightpath {
        nodes: Vec<NodeId>,
        fibers: Vec<FiberId>,
        module: ModuleTypeId,
        mode: ModeTuple,
        length_km: f64,
        #[serde(rename = "capacity_mbps")]
        capacity: Rate,
        #[serde(rename = "load_mbps")]
        load: Rate,
    },
    Spectrum {
        interval: SlotInterval,
        fibers: Vec<FiberId>,
    },
    NodeTransmodule {
        node: NodeId,
        module: ModuleTypeId,
    },
    NodeRouterPort {
        node: NodeId,
    },
    NodeSpectrum {
        node: NodeId,
        fiber: FiberId,
        interval: SlotInterval,
    },
}

impl IntentKind {
    pub fn name(&self) -> &'static str {
        match self {
            IntentKind::Connectivity { .. } => "Connectivity",
            IntentKind::Lightpath { .. } => "Lightpath",
            IntentKind::Spectrum { .. } => "Spectrum",
            IntentKind::NodeTransmodule { .. } => "NodeTransmodule",
            IntentKind::NodeRouterPort { .. } => "NodeRouterPort",
            IntentKind::NodeSpectrum { .. } => "NodeSpectrum",
        }
    }

    pub fn is_connectivity(&self) -> bool {
        matches!(self, IntentKind::Connectivity { .. })
    }

    pub fn is_lightpath(&self) -> bool {
        matches!(self, IntentKind::Lightpath { .. })
    }

    fn same_variant(&self, other: &IntentKind) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }
}

/// An edge endpoint together with the rate it carries. Only edges into a
/// lightpath carry a rate: the share of the lightpath's load owed to that parent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct Adj {
    id: IntentId,
    rate: Option<Rate>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Intent {
    pub id: IntentId,
    pub kind: IntentKind,
    pub state: LifecycleState,
    /// Connectivity only: the lightpath sequence of each routed sub-demand.
    pub routes: Vec<Vec<IntentId>>,
    parents: Vec<Adj>,
    children: Vec<Adj>,
}

impl Intent {
    pub fn parent_ids(&self) -> impl Iterator<Item = IntentId> + '_ {
        self.parents.iter().map(|a| a.id)
    }

    pub fn child_ids(&self) -> impl Iterator<Item = IntentId> + '_ {
        self.children.iter().map(|a| a.id)
    }

    pub fn parent_count(&self) -> usize {
        self.parents.len()
    }

    pub fn distinct_parent_count(&self) -> usize {
        let mut ids: Vec<_> = self.parent_ids().collect();
        ids.sort();
        ids.dedup();
        ids.len()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DagError {
    #[error("invalid intent: {0}")]
    InvalidIntent(String),
    #[error("unknown intent {0}")]
    Unknown(IntentId),
    #[error("intent {0} is not a {1}")]
    WrongKind(IntentId, &'static str),
    #[error("intent {0} is not a root user intent")]
    NotRoot(IntentId),
    #[error("lightpath {lightpath} has {residual} residual, {requested} requested")]
    Capacity { lightpath: IntentId, residual: Rate, requested: Rate },
    #[error("edge {0} -> {1} would close a cycle")]
    Cycle(IntentId, IntentId),
    #[error("illegal transition of {0} from {1:?} to {2:?}")]
    Transition(IntentId, LifecycleState, LifecycleState),
    #[error("intent kinds cannot change variant")]
    KindChange,
    #[error("cannot discard {0}: it still has children")]
    NotLeaf(IntentId),
}

/// Single global intent DAG with monotonic id allocation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IntentDag {
    nodes: BTreeMap<IntentId, Intent>,
    next_id: u64,
}

impl IntentDag {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn get(&self, id: IntentId) -> Option<&Intent> {
        self.nodes.get(&id)
    }

    fn node(&self, id: IntentId) -> Result<&Intent, DagError> {
        self.nodes.get(&id).ok_or(DagError::Unknown(id))
    }

    pub fn intents(&self) -> impl Iterator<Item = &Intent> {
        self.nodes.values()
    }

    pub fn roots(&self) -> impl Iterator<Item = IntentId> + '_ {
        self.nodes.values().filter(|n| n.parents.is_empty()).map(|n| n.id)
    }

    /// All edges as (parent, child, rate), ordered by parent then insertion.
    pub fn edges(&self) -> impl Iterator<Item = (IntentId, IntentId, Option<Rate>)> + '_ {
        self.nodes.values().flat_map(|n| n.children.iter().map(move |c| (n.id, c.id, c.rate)))
    }

    fn allocate(&mut self, kind: IntentKind) -> IntentId {
        let id = IntentId(self.next_id);
        self.next_id += 1;
        self.nodes.insert(
            id,
            Intent { id, kind, state: LifecycleState::Uncompiled, routes: Vec::new(), parents: Vec::new(), children: Vec::new() },
        );
        id
    }

    pub fn add_user_intent(&mut self, source: NodeId, destination: NodeId, rate: Rate) -> Result<IntentId, DagError> {
        if source == destination {
            return Err(DagError::InvalidIntent(format!("source equals destination ({source})")));
        }
        if rate.is_zero() {
            return Err(DagError::InvalidIntent("rate must be positive".into()));
        }
        Ok(self.allocate(IntentKind::Connectivity { source, destination, rate }))
    }

    /// Adds a fresh node below `parent`. For a lightpath child the new edge
    /// carries the lightpath's initial load.
    pub fn add_child(&mut self, parent: IntentId, kind: IntentKind) -> Result<IntentId, DagError> {
        self.node(parent)?;
        if kind.is_connectivity() {
            return Err(DagError::InvalidIntent("connectivity intents are roots".into()));
        }
        let rate = match &kind {
            IntentKind::Lightpath { load, capacity, .. } => {
                if load > capacity {
                    return Err(DagError::InvalidIntent("lightpath load exceeds capacity".into()));
                }
                Some(*load)
            }
            _ => None,
        };
        let child = self.allocate(kind);
        self.link(parent, child, rate);
        Ok(child)
    }

    fn link(&mut self, parent: IntentId, child: IntentId, rate: Option<Rate>) {
        self.nodes.get_mut(&parent).expect("parent exists").children.push(Adj { id: child, rate });
        self.nodes.get_mut(&child).expect("child exists").parents.push(Adj { id: parent, rate });
    }

    pub fn residual_capacity(&self, lightpath: IntentId) -> Result<Rate, DagError> {
        match &self.node(lightpath)?.kind {
            IntentKind::Lightpath { capacity, load, .. } => Ok(capacity.saturating_sub(*load)),
            _ => Err(DagError::WrongKind(lightpath, "Lightpath")),
        }
    }

    /// Is `target` reachable from `from` along child edges?
    pub fn reaches(&self, from: IntentId, target: IntentId) -> bool {
        let mut stack = vec![from];
        let mut seen = std::collections::HashSet::new();
        while let Some(id) = stack.pop() {
            if id == target {
                return true;
            }
            if seen.insert(id) {
                if let Some(n) = self.nodes.get(&id) {
                    stack.extend(n.child_ids());
                }
            }
        }
        false
    }

    /// Routes an additional `rate` of `parent` over an existing lightpath.
    pub fn add_grooming_edge(&mut self, parent: IntentId, lightpath: IntentId, rate: Rate) -> Result<(), DagError> {
        self.node(parent)?;
        let residual = self.residual_capacity(lightpath)?;
        if self.reaches(lightpath, parent) {
            return Err(DagError::Cycle(parent, lightpath));
        }
        if rate > residual {
            return Err(DagError::Capacity { lightpath, residual, requested: rate });
        }
        if let IntentKind::Lightpath { load, .. } = &mut self.nodes.get_mut(&lightpath).expect("checked").kind {
            *load += rate;
        }
        self.link(parent, lightpath, Some(rate));
        Ok(())
    }

    /// Undoes the most recent grooming edge `parent -> lightpath` carrying `rate`.
    pub fn remove_grooming_edge(&mut self, parent: IntentId, lightpath: IntentId, rate: Rate) -> Result<(), DagError> {
        let adj = Adj { id: lightpath, rate: Some(rate) };
        let p = self.nodes.get_mut(&parent).ok_or(DagError::Unknown(parent))?;
        let pos = p.children.iter().rposition(|a| *a == adj).ok_or(DagError::Unknown(lightpath))?;
        p.children.remove(pos);
        let lp = self.nodes.get_mut(&lightpath).ok_or(DagError::Unknown(lightpath))?;
        let back = Adj { id: parent, rate: Some(rate) };
        if let Some(pos) = lp.parents.iter().rposition(|a| *a == back) {
            lp.parents.remove(pos);
        }
        if let IntentKind::Lightpath { load, .. } = &mut lp.kind {
            *load = load.saturating_sub(rate);
        }
        Ok(())
    }

    pub fn set_state(&mut self, id: IntentId, next: LifecycleState) -> Result<(), DagError> {
        let n = self.nodes.get_mut(&id).ok_or(DagError::Unknown(id))?;
        if !n.state.can_become(next) {
            return Err(DagError::Transition(id, n.state, next));
        }
        n.state = next;
        Ok(())
    }

    /// Sets a state without the lifecycle check; used only to roll back.
    pub(crate) fn force_state(&mut self, id: IntentId, state: LifecycleState) {
        if let Some(n) = self.nodes.get_mut(&id) {
            n.state = state;
        }
    }

    pub fn set_routes(&mut self, id: IntentId, routes: Vec<Vec<IntentId>>) -> Result<(), DagError> {
        let n = self.nodes.get_mut(&id).ok_or(DagError::Unknown(id))?;
        if !n.kind.is_connectivity() {
            return Err(DagError::WrongKind(id, "Connectivity"));
        }
        n.routes = routes;
        Ok(())
    }

    /// Removes a just-created leaf and its incoming edges. Rollback helper.
    pub(crate) fn discard_leaf(&mut self, id: IntentId) -> Result<(), DagError> {
        let n = self.node(id)?;
        if !n.children.is_empty() {
            return Err(DagError::NotLeaf(id));
        }
        let n = self.nodes.remove(&id).expect("checked");
        for p in n.parents {
            if let Some(pn) = self.nodes.get_mut(&p.id) {
                if let Some(pos) = pn.children.iter().rposition(|a| a.id == id) {
                    pn.children.remove(pos);
                }
            }
        }
        Ok(())
    }

    /// Rewinds the id counter after a rollback, provided no id at or above
    /// `next` is still in use.
    pub(crate) fn rewind_ids(&mut self, next: u64) {
        if self.nodes.range(IntentId(next)..).next().is_none() {
            self.next_id = next;
        }
    }

    /// Removes a user intent and every descendant left without parents.
    ///
    /// Returns the removed descendants in post-order (children before their
    /// parents); the root itself is not included. Lightpaths shared with other
    /// user intents survive with their load reduced by what this root routed
    /// over them.
    pub fn remove_user_intent(&mut self, root: IntentId) -> Result<Vec<Intent>, DagError> {
        let n = self.node(root)?;
        if !n.kind.is_connectivity() || !n.parents.is_empty() {
            return Err(DagError::NotRoot(root));
        }
        let mut removed = Vec::new();
        self.remove_subtree(root, &mut removed);
        removed.pop();
        Ok(removed)
    }

    fn remove_subtree(&mut self, id: IntentId, out: &mut Vec<Intent>) {
        let node = self.nodes.remove(&id).expect("present");
        for child in &node.children {
            let orphan = {
                let c = self.nodes.get_mut(&child.id).expect("child present");
                if let Some(pos) = c.parents.iter().position(|a| a.id == id && a.rate == child.rate) {
                    c.parents.remove(pos);
                }
                if let (IntentKind::Lightpath { load, .. }, Some(r)) = (&mut c.kind, child.rate) {
                    *load = load.saturating_sub(r);
                }
                c.parents.is_empty()
            };
            if orphan {
                self.remove_subtree(child.id, out);
            }
        }
        out.push(node);
    }

    /// Inserts an edge with no validation at all. Only for fault injection.
    #[doc(hidden)]
    pub fn insert_edge_unchecked(&mut self, parent: IntentId, child: IntentId) {
        if self.nodes.contains_key(&parent) && self.nodes.contains_key(&child) {
            self.link(parent, child, None);
        }
    }

    /// Kahn's algorithm; `None` if the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<IntentId>> {
        let mut indeg: BTreeMap<IntentId, usize> = self.nodes.iter().map(|(&id, n)| (id, n.parents.len())).collect();
        let mut ready: Vec<IntentId> = indeg.iter().filter(|(_, &d)| d == 0).map(|(&id, _)| id).collect();
        ready.reverse();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(id) = ready.pop() {
            order.push(id);
            for c in self.nodes[&id].child_ids() {
                let d = indeg.get_mut(&c).expect("child present");
                *d -= 1;
                if *d == 0 {
                    ready.push(c);
                }
            }
        }
        (order.len() == self.nodes.len()).then_some(order)
    }

    /// Number of lightpaths fed by two or more distinct user intents.
    pub fn multi_parent_lightpaths(&self) -> usize {
        self.nodes.values().filter(|n| n.kind.is_lightpath() && n.distinct_parent_count() >= 2).count()
    }

    pub fn to_dump(&self) -> DagDump {
        DagDump {
            next_id: self.next_id,
            nodes: self
                .nodes
                .values()
                .map(|n| NodeDump { id: n.id, state: n.state, kind: n.kind.clone(), routes: n.routes.clone() })
                .collect(),
            edges: self.edges().map(|(parent, child, rate)| EdgeDump { parent, child, rate_mbps: rate }).collect(),
        }
    }

    /// Rebuilds a DAG from a dump. Structural problems other than dangling
    /// edge endpoints are left for [`verify_dag`] to report.
    pub fn from_dump(dump: DagDump) -> Result<Self, DagError> {
        let mut dag = IntentDag { nodes: BTreeMap::new(), next_id: dump.next_id };
        for n in dump.nodes {
            if n.id.0 >= dump.next_id {
                return Err(DagError::InvalidIntent(format!("id {} not below next_id", n.id)));
            }
            let node = Intent { id: n.id, kind: n.kind, state: n.state, routes: n.routes, parents: Vec::new(), children: Vec::new() };
            if dag.nodes.insert(n.id, node).is_some() {
                return Err(DagError::InvalidIntent(format!("duplicate id {}", n.id)));
            }
        }
        for e in dump.edges {
            dag.node(e.parent)?;
            dag.node(e.child)?;
            dag.link(e.parent, e.child, e.rate_mbps);
        }
        Ok(dag)
    }

    /// Replaces a node's kind with another value of the same variant.
    /// Only for fault injection and dump repair tooling.
    #[doc(hidden)]
    pub fn replace_kind_unchecked(&mut self, id: IntentId, kind: IntentKind) -> Result<(), DagError> {
        let n = self.nodes.get_mut(&id).ok_or(DagError::Unknown(id))?;
        if !n.kind.same_variant(&kind) {
            return Err(DagError::KindChange);
        }
        n.kind = kind;
        Ok(())
    }
}

/// Stable JSON export of the DAG.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DagDump {
    pub next_id: u64,
    pub nodes: Vec<NodeDump>,
    pub edges: Vec<EdgeDump>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NodeDump {
    pub id: IntentId,
    pub state: LifecycleState,
    pub kind: IntentKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub routes: Vec<Vec<IntentId>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeDump {
    pub parent: IntentId,
    pub child: IntentId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_mbps: Option<Rate>,
}
