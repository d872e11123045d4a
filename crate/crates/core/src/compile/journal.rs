//! Mutation journal: every resource reservation and DAG change made while
//! compiling is logged so a failed compilation can be undone exactly.

use crate::catalog::ModuleTypeId;
use crate::intent::{DagError, IntentDag, IntentId, IntentKind, LifecycleState};
use crate::spectrum::SlotInterval;
use crate::state::{NetworkState, StateError};
use crate::topology::{FiberId, NodeId};
use crate::units::Rate;

#[derive(Debug)]
enum Op {
    Slots(FiberId, SlotInterval),
    Module(NodeId, ModuleTypeId),
    Port(NodeId),
    Intent(IntentId),
    Groom(IntentId, IntentId, Rate),
    State(IntentId, LifecycleState),
}

pub(crate) struct Txn<'a> {
    pub state: &'a mut NetworkState,
    pub dag: &'a mut IntentDag,
    log: Vec<Op>,
}

impl<'a> Txn<'a> {
    pub fn new(state: &'a mut NetworkState, dag: &'a mut IntentDag) -> Self {
        Txn { state, dag, log: Vec::new() }
    }

    pub fn mark(&self) -> usize {
        self.log.len()
    }

    pub fn reserve_slots(&mut self, fiber: FiberId, iv: SlotInterval) -> Result<(), StateError> {
        self.state.reserve_slots(fiber, iv)?;
        self.log.push(Op::Slots(fiber, iv));
        Ok(())
    }

    pub fn reserve_module(&mut self, node: NodeId, module: ModuleTypeId) -> Result<(), StateError> {
        self.state.reserve_transmodule(node, module)?;
        self.log.push(Op::Module(node, module));
        Ok(())
    }

    pub fn reserve_port(&mut self, node: NodeId) -> Result<(), StateError> {
        self.state.reserve_port(node)?;
        self.log.push(Op::Port(node));
        Ok(())
    }

    pub fn add_child(&mut self, parent: IntentId, kind: IntentKind) -> Result<IntentId, DagError> {
        let id = self.dag.add_child(parent, kind)?;
        self.log.push(Op::Intent(id));
        Ok(id)
    }

    pub fn groom(&mut self, parent: IntentId, lightpath: IntentId, rate: Rate) -> Result<(), DagError> {
        self.dag.add_grooming_edge(parent, lightpath, rate)?;
        self.log.push(Op::Groom(parent, lightpath, rate));
        Ok(())
    }

    pub fn set_state(&mut self, id: IntentId, next: LifecycleState) -> Result<(), DagError> {
        let prev = self.dag.get(id).ok_or(DagError::Unknown(id))?.state;
        self.dag.set_state(id, next)?;
        self.log.push(Op::State(id, prev));
        Ok(())
    }

    /// Undoes everything logged after `mark`, newest first.
    pub fn rollback_to(&mut self, mark: usize) {
        let mut lowest: Option<u64> = None;
        while self.log.len() > mark {
            let op = self.log.pop().expect("non-empty");
            let res = match op {
                Op::Slots(f, iv) => self.state.release_slots(f, iv).map_err(|e| e.to_string()),
                Op::Module(n, m) => self.state.release_transmodule(n, m).map_err(|e| e.to_string()),
                Op::Port(n) => self.state.release_port(n).map_err(|e| e.to_string()),
                Op::Intent(id) => {
                    lowest = Some(lowest.map_or(id.0, |l| l.min(id.0)));
                    self.dag.discard_leaf(id).map_err(|e| e.to_string())
                }
                Op::Groom(p, lp, r) => self.dag.remove_grooming_edge(p, lp, r).map_err(|e| e.to_string()),
                Op::State(id, prev) => {
                    self.dag.force_state(id, prev);
                    Ok(())
                }
            };
            if let Err(e) = res {
                panic!("journal replay failed: {e}");
            }
        }
        if let Some(l) = lowest {
            self.dag.rewind_ids(l);
        }
    }

    pub fn rollback(mut self) {
        self.rollback_to(0);
    }
}
