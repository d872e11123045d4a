//! Mutable resource state: per-fiber slot availability and per-node
//! equipment usage. Single owner, no internal synchronization.

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, ModuleTypeId};
use crate::spectrum::{mask_from_str, mask_to_string, SlotInterval};
use crate::topology::{FiberId, NodeId, Topology};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StateError {
    #[error("slot {slot} on fiber {fiber} is already occupied")]
    SlotConflict { fiber: FiberId, slot: u32 },
    #[error("slot {slot} on fiber {fiber} is not held")]
    SlotNotHeld { fiber: FiberId, slot: u32 },
    #[error("interval {0:?} exceeds the slot grid")]
    OutOfGrid(SlotInterval),
    #[error("no {what} left at node {node}")]
    Exhausted { node: NodeId, what: String },
    #[error("{what} at node {node} is not held")]
    NotHeld { node: NodeId, what: String },
}

/// Equipment in use at one node. Capacities come from the catalog pools.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeEquipment {
    pub modules_used: Vec<u32>,
    pub ports_used: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkState {
    topology: Topology,
    catalog: Catalog,
    free: Vec<FixedBitSet>,
    equipment: Vec<NodeEquipment>,
}

impl NetworkState {
    pub fn new(topology: Topology, catalog: Catalog) -> Self {
        let s = catalog.slots_per_fiber as usize;
        let mut all = FixedBitSet::with_capacity(s);
        all.insert_range(..);
        let free = vec![all; topology.fiber_count()];
        let equipment = vec![
            NodeEquipment { modules_used: vec![0; catalog.module_types.len()], ports_used: 0 };
            topology.node_count()
        ];
        NetworkState { topology, catalog, free, equipment }
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn slots_per_fiber(&self) -> u32 {
        self.catalog.slots_per_fiber
    }

    pub fn fiber_free(&self, fiber: FiberId) -> &FixedBitSet {
        &self.free[fiber.index()]
    }

    pub fn equipment(&self, node: NodeId) -> &NodeEquipment {
        &self.equipment[node.index()]
    }

    pub fn is_free(&self, fiber: FiberId, iv: SlotInterval) -> bool {
        iv.end() <= self.slots_per_fiber() && iv.slots().all(|s| self.free[fiber.index()].contains(s))
    }

    pub fn occupied_count(&self) -> usize {
        self.free.iter().map(|m| m.len() - m.count_ones(..)).sum()
    }

    pub fn reserve_slots(&mut self, fiber: FiberId, iv: SlotInterval) -> Result<(), StateError> {
        if iv.end() > self.slots_per_fiber() || iv.len == 0 {
            return Err(StateError::OutOfGrid(iv));
        }
        let mask = &mut self.free[fiber.index()];
        if let Some(slot) = iv.slots().find(|&s| !mask.contains(s)) {
            return Err(StateError::SlotConflict { fiber, slot: slot as u32 });
        }
        mask.remove_range(iv.slots());
        Ok(())
    }

    pub fn release_slots(&mut self, fiber: FiberId, iv: SlotInterval) -> Result<(), StateError> {
        if iv.end() > self.slots_per_fiber() || iv.len == 0 {
            return Err(StateError::OutOfGrid(iv));
        }
        let mask = &mut self.free[fiber.index()];
        if let Some(slot) = iv.slots().find(|&s| mask.contains(s)) {
            return Err(StateError::SlotNotHeld { fiber, slot: slot as u32 });
        }
        mask.insert_range(iv.slots());
        Ok(())
    }

    pub fn module_available(&self, node: NodeId, module: ModuleTypeId) -> bool {
        match self.catalog.module(module).pool {
            None => true,
            Some(cap) => self.equipment[node.index()].modules_used[module.index()] < cap,
        }
    }

    pub fn port_available(&self, node: NodeId) -> bool {
        match self.catalog.router_port.pool {
            None => true,
            Some(cap) => self.equipment[node.index()].ports_used < cap,
        }
    }

    pub fn reserve_transmodule(&mut self, node: NodeId, module: ModuleTypeId) -> Result<(), StateError> {
        if !self.module_available(node, module) {
            return Err(StateError::Exhausted { node, what: self.catalog.module(module).name.clone() });
        }
        self.equipment[node.index()].modules_used[module.index()] += 1;
        Ok(())
    }

    pub fn release_transmodule(&mut self, node: NodeId, module: ModuleTypeId) -> Result<(), StateError> {
        let used = &mut self.equipment[node.index()].modules_used[module.index()];
        if *used == 0 {
            return Err(StateError::NotHeld { node, what: self.catalog.module(module).name.clone() });
        }
        *used -= 1;
        Ok(())
    }

    pub fn reserve_port(&mut self, node: NodeId) -> Result<(), StateError> {
        if !self.port_available(node) {
            return Err(StateError::Exhausted { node, what: "router port".into() });
        }
        self.equipment[node.index()].ports_used += 1;
        Ok(())
    }

    pub fn release_port(&mut self, node: NodeId) -> Result<(), StateError> {
        let used = &mut self.equipment[node.index()].ports_used;
        if *used == 0 {
            return Err(StateError::NotHeld { node, what: "router port".into() });
        }
        *used -= 1;
        Ok(())
    }

    /// Direct bit access for fault-injection tests and dump loading.
    pub fn set_slot_raw(&mut self, fiber: FiberId, slot: u32, free: bool) {
        self.free[fiber.index()].set(slot as usize, free);
    }

    pub fn to_dump(&self) -> StateDump {
        StateDump {
            topology: self.topology.clone(),
            catalog: self.catalog.clone(),
            fibers: self
                .topology
                .fibers()
                .map(|f| FiberDump { fiber: f, label: self.topology.fiber_label(f), free: mask_to_string(&self.free[f.index()]) })
                .collect(),
            equipment: self.equipment.clone(),
        }
    }

    pub fn from_dump(dump: StateDump) -> Result<Self, DumpError> {
        dump.catalog.validate().map_err(|e| DumpError::Invalid(e.to_string()))?;
        let mut state = NetworkState::new(dump.topology, dump.catalog);
        if dump.fibers.len() != state.free.len() || dump.equipment.len() != state.equipment.len() {
            return Err(DumpError::Invalid("fiber or node count mismatch".into()));
        }
        for fd in dump.fibers {
            let mask = mask_from_str(&fd.free)
                .filter(|m| m.len() == state.slots_per_fiber() as usize)
                .ok_or_else(|| DumpError::Invalid(format!("bad slot vector for fiber {}", fd.fiber)))?;
            let slot = state.free.get_mut(fd.fiber.index()).ok_or_else(|| DumpError::Invalid(format!("unknown fiber {}", fd.fiber)))?;
            *slot = mask;
        }
        for eq in &dump.equipment {
            if eq.modules_used.len() != state.catalog.module_types.len() {
                return Err(DumpError::Invalid("module usage vector length mismatch".into()));
            }
        }
        state.equipment = dump.equipment;
        Ok(state)
    }
}

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("invalid dump: {0}")]
    Invalid(String),
    #[error("parsing dump: {0}")]
    Json(#[from] serde_json::Error),
}

/// Serializable snapshot of a [`NetworkState`]. Slot vectors are strings of
/// `1` (free) and `0` (occupied).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateDump {
    pub topology: Topology,
    pub catalog: Catalog,
    pub fibers: Vec<FiberDump>,
    pub equipment: Vec<NodeEquipment>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FiberDump {
    pub fiber: FiberId,
    pub label: String,
    pub free: String,
}
