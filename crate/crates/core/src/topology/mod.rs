//! Physical topology: nodes, bidirectional links and the directed fibers
//! derived from them.

mod sndlib;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use sndlib::{parse_sndlib, to_sndlib, ParseError, ParseErrorKind};

/// Mean Earth radius used by [`great_circle_km`].
pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub u32);

/// One direction of a physical link. Fiber `2 * link` runs from the link's
/// first endpoint to its second, fiber `2 * link + 1` the other way.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FiberId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl LinkId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn fiber(self, forward: bool) -> FiberId {
        FiberId(self.0 * 2 + u32::from(!forward))
    }
}

impl FiberId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn link(self) -> LinkId {
        LinkId(self.0 / 2)
    }

    pub fn is_forward(self) -> bool {
        self.0 % 2 == 0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for FiberId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub name: String,
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: LinkId,
    pub name: String,
    pub a: NodeId,
    pub b: NodeId,
    pub length_km: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("duplicate node id {0}")]
    DuplicateNode(String),
    #[error("duplicate link id {0}")]
    DuplicateLink(String),
    #[error("link {0} references unknown node")]
    UnknownEndpoint(String),
    #[error("link {0} connects a node to itself")]
    SelfLoop(String),
    #[error("link {0} has non-positive length")]
    BadLength(String),
}

/// A validated physical network.
///
/// Every link is bidirectional; each direction is a separate fiber with its
/// own spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTopology", into = "RawTopology")]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
    by_name: HashMap<String, NodeId>,
    /// Outgoing fibers per node, ordered by (neighbor, link).
    out_fibers: Vec<Vec<FiberId>>,
}

#[derive(Serialize, Deserialize)]
struct RawTopology {
    nodes: Vec<Node>,
    links: Vec<Link>,
}

impl TryFrom<RawTopology> for Topology {
    type Error = TopologyError;
    fn try_from(raw: RawTopology) -> Result<Self, Self::Error> {
        Topology::new(raw.nodes, raw.links)
    }
}

impl From<Topology> for RawTopology {
    fn from(t: Topology) -> Self {
        RawTopology { nodes: t.nodes, links: t.links }
    }
}

impl Topology {
    /// Node and link ids must be dense indices in list order.
    pub fn new(nodes: Vec<Node>, links: Vec<Link>) -> Result<Self, TopologyError> {
        let mut by_name = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if n.id.index() != i || by_name.insert(n.name.clone(), n.id).is_some() {
                return Err(TopologyError::DuplicateNode(n.name.clone()));
            }
        }
        let mut link_names = HashMap::with_capacity(links.len());
        for (i, l) in links.iter().enumerate() {
            if l.id.index() != i || link_names.insert(l.name.as_str(), l.id).is_some() {
                return Err(TopologyError::DuplicateLink(l.name.clone()));
            }
            if l.a.index() >= nodes.len() || l.b.index() >= nodes.len() {
                return Err(TopologyError::UnknownEndpoint(l.name.clone()));
            }
            if l.a == l.b {
                return Err(TopologyError::SelfLoop(l.name.clone()));
            }
            if !(l.length_km > 0.0 && l.length_km.is_finite()) {
                return Err(TopologyError::BadLength(l.name.clone()));
            }
        }
        let mut out_fibers = vec![Vec::new(); nodes.len()];
        for l in &links {
            out_fibers[l.a.index()].push(l.id.fiber(true));
            out_fibers[l.b.index()].push(l.id.fiber(false));
        }
        let mut topo = Topology { nodes, links, by_name, out_fibers: Vec::new() };
        for fibers in &mut out_fibers {
            fibers.sort_by_key(|&f| (topo.fiber_endpoints(f).1, f));
        }
        topo.out_fibers = out_fibers;
        Ok(topo)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn fiber_count(&self) -> usize {
        self.links.len() * 2
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.index()]
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.by_name.get(name).copied()
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.nodes[id.index()].name
    }

    pub fn fibers(&self) -> impl Iterator<Item = FiberId> {
        (0..self.fiber_count() as u32).map(FiberId)
    }

    /// (from, to) of a directed fiber.
    pub fn fiber_endpoints(&self, fiber: FiberId) -> (NodeId, NodeId) {
        let l = &self.links[fiber.link().index()];
        if fiber.is_forward() {
            (l.a, l.b)
        } else {
            (l.b, l.a)
        }
    }

    pub fn fiber_length(&self, fiber: FiberId) -> f64 {
        self.links[fiber.link().index()].length_km
    }

    pub fn out_fibers(&self, node: NodeId) -> &[FiberId] {
        &self.out_fibers[node.index()]
    }

    /// Shortest fiber from `from` to `to`; lowest id wins among equal lengths.
    pub fn fiber_between(&self, from: NodeId, to: NodeId) -> Option<FiberId> {
        self.out_fibers(from)
            .iter()
            .copied()
            .filter(|&f| self.fiber_endpoints(f).1 == to)
            .min_by(|&x, &y| self.fiber_length(x).total_cmp(&self.fiber_length(y)).then(x.cmp(&y)))
    }

    pub fn fiber_label(&self, fiber: FiberId) -> String {
        let (u, v) = self.fiber_endpoints(fiber);
        format!("{}:{}->{}", self.links[fiber.link().index()].name, self.node_name(u), self.node_name(v))
    }
}

/// Haversine distance on a sphere of radius [`EARTH_RADIUS_KM`].
/// Arguments are `(latitude, longitude)` in degrees.
pub fn great_circle_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (lat1, lon1) = (a.0.to_radians(), a.1.to_radians());
    let (lat2, lon2) = (b.0.to_radians(), b.1.to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}
