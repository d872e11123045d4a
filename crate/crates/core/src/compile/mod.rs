//! The three compilers behind one entry point. Each takes an uncompiled
//! connectivity intent and either installs a decomposed solution or marks
//! the intent blocked, leaving every resource untouched.

mod journal;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, ModeTuple, ModuleTypeId};
use crate::intent::{verify_dag, DagError, Intent, IntentDag, IntentId, IntentKind, LifecycleState};
use crate::label::PathLabel;
use crate::multilayer::{build_multilayer_graph, MlEdgeType, MultilayerGraph};
use crate::search::{k_shortest_paths, nondominated_paths, select_winner, Objective, SearchOptions};
use crate::spectrum::{segment_first_fit, SlotInterval};
use crate::state::{NetworkState, StateError};
use crate::topology::{FiberId, NodeId};
use crate::units::Rate;

use journal::Txn;

pub const DEFAULT_SAP_K: usize = 3;
pub const DEFAULT_MAX_CHUNKS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum CompilerKind {
    /// Sequential baseline: k shortest routes, then a mode, then first fit.
    Sap {
        #[serde(default = "default_k")]
        k: usize,
    },
    /// Joint multilayer search minimising equipment cost.
    Jml,
    /// Joint multilayer search minimising physical length, cost second.
    Ldjml,
}

fn default_k() -> usize {
    DEFAULT_SAP_K
}

impl CompilerKind {
    pub fn sap() -> Self {
        CompilerKind::Sap { k: DEFAULT_SAP_K }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CompilerKind::Sap { .. } => "SAP",
            CompilerKind::Jml => "JML",
            CompilerKind::Ldjml => "LDJML",
        }
    }
}

impl std::str::FromStr for CompilerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sap" => Ok(CompilerKind::sap()),
            "jml" => Ok(CompilerKind::Jml),
            "ldjml" => Ok(CompilerKind::Ldjml),
            _ => Err(format!("unknown compiler '{s}' (expected sap, jml or ldjml)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompileOptions {
    pub search: SearchOptions,
    /// Upper bound on parallel lightpaths used for one demand.
    pub max_chunks: usize,
    /// Run the full DAG/state audit after every successful compilation.
    pub audit: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { search: SearchOptions::default(), max_chunks: DEFAULT_MAX_CHUNKS, audit: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CompileStatus {
    Installed,
    Blocked,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompilationOutcome {
    pub status: CompileStatus,
    /// Intents created below the user intent, in creation order.
    pub created: Vec<IntentId>,
    /// Grooming edges `(user intent, lightpath)` added.
    pub grooming_edges: Vec<(IntentId, IntentId)>,
    /// Winning label per sub-demand (joint compilers only).
    pub winners: Vec<PathLabel>,
    pub new_lightpaths: usize,
    pub cap_hits: usize,
    pub reason: Option<String>,
}

impl CompilationOutcome {
    fn blocked(reason: String, cap_hits: usize) -> Self {
        CompilationOutcome {
            status: CompileStatus::Blocked,
            created: Vec::new(),
            grooming_edges: Vec::new(),
            winners: Vec::new(),
            new_lightpaths: 0,
            cap_hits,
            reason: Some(reason),
        }
    }
}

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("intent {0} cannot be compiled: {1}")]
    NotCompilable(IntentId, &'static str),
    #[error(transparent)]
    Dag(#[from] DagError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("internal inconsistency: {0}")]
    Invariant(String),
}

/// Splits a demand into pieces of at most `max` each, largest first.
pub fn split_demand(rate: Rate, max: Rate) -> Vec<Rate> {
    if max.is_zero() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut left = rate;
    while !left.is_zero() {
        let piece = if left > max { max } else { left };
        out.push(piece);
        left -= piece;
    }
    out
}

/// Compiles one connectivity intent with the chosen strategy.
pub fn compile(
    kind: CompilerKind,
    intent: IntentId,
    state: &mut NetworkState,
    dag: &mut IntentDag,
    options: &CompileOptions,
) -> Result<CompilationOutcome, CompileError> {
    let node = dag.get(intent).ok_or(DagError::Unknown(intent))?;
    let IntentKind::Connectivity { source, destination, rate } = node.kind else {
        return Err(CompileError::NotCompilable(intent, "not a connectivity intent"));
    };
    if node.state != LifecycleState::Uncompiled {
        return Err(CompileError::NotCompilable(intent, "already compiled"));
    }
    let demand = Demand { root: intent, src: source, dst: destination, rate };

    let mut txn = Txn::new(state, dag);
    let result = match kind {
        CompilerKind::Sap { k } => compile_sap(&mut txn, &demand, k.max(1), options),
        CompilerKind::Jml => compile_joint(&mut txn, &demand, Objective::Jml, options),
        CompilerKind::Ldjml => compile_joint(&mut txn, &demand, Objective::Ldjml, options),
    };
    match result {
        Ok(Built::Done { routes, mut outcome }) => {
            txn.dag.set_routes(intent, routes)?;
            txn.set_state(intent, LifecycleState::Compiled)?;
            txn.set_state(intent, LifecycleState::Installed)?;
            drop(txn);
            outcome.status = CompileStatus::Installed;
            if options.audit {
                let v = verify_dag(dag, state);
                if let Some(first) = v.first() {
                    return Err(CompileError::Invariant(format!("audit after compiling {intent}: {first}")));
                }
            }
            Ok(outcome)
        }
        Ok(Built::Blocked { reason, cap_hits }) => {
            txn.rollback();
            dag.set_state(intent, LifecycleState::Blocked)?;
            Ok(CompilationOutcome::blocked(reason, cap_hits))
        }
        Err(e) => {
            txn.rollback();
            Err(e)
        }
    }
}

struct Demand {
    root: IntentId,
    src: NodeId,
    dst: NodeId,
    rate: Rate,
}

enum Built {
    Done { routes: Vec<Vec<IntentId>>, outcome: CompilationOutcome },
    Blocked { reason: String, cap_hits: usize },
}

/// A new transparent segment ready to be installed.
struct NewLightpath<'a> {
    nodes: &'a [NodeId],
    fibers: &'a [FiberId],
    module: ModuleTypeId,
    mode: ModeTuple,
    length_km: f64,
}

/// Reserves the equipment at both ends plus the slots. Returns `false` when
/// a node pool is exhausted; nothing is reserved in that case.
fn reserve_lightpath(txn: &mut Txn, lp: &NewLightpath, iv: SlotInterval) -> Result<bool, CompileError> {
    let (a, z) = (lp.nodes[0], *lp.nodes.last().expect("non-empty"));
    let mark = txn.mark();
    let equipment = (|| {
        txn.reserve_port(a)?;
        txn.reserve_port(z)?;
        txn.reserve_module(a, lp.module)?;
        txn.reserve_module(z, lp.module)
    })();
    match equipment {
        Ok(()) => {}
        Err(StateError::Exhausted { .. }) => {
            txn.rollback_to(mark);
            return Ok(false);
        }
        Err(e) => return Err(e.into()),
    }
    for &f in lp.fibers {
        txn.reserve_slots(f, iv)?;
    }
    Ok(true)
}

/// Creates the lightpath subtree below `root` and installs it.
fn decompose_lightpath(txn: &mut Txn, root: IntentId, lp: &NewLightpath, iv: SlotInterval, load: Rate) -> Result<(IntentId, Vec<IntentId>), CompileError> {
    let (a, z) = (lp.nodes[0], *lp.nodes.last().expect("non-empty"));
    let mut created = Vec::new();
    let id = txn.add_child(
        root,
        IntentKind::Lightpath {
            nodes: lp.nodes.to_vec(),
            fibers: lp.fibers.to_vec(),
            module: lp.module,
            mode: lp.mode,
            length_km: lp.length_km,
            capacity: lp.mode.rate,
            load,
        },
    )?;
    created.push(id);
    for kind in [
        IntentKind::NodeRouterPort { node: a },
        IntentKind::NodeRouterPort { node: z },
        IntentKind::NodeTransmodule { node: a, module: lp.module },
        IntentKind::NodeTransmodule { node: z, module: lp.module },
    ] {
        created.push(txn.add_child(id, kind)?);
    }
    let spectrum = txn.add_child(id, IntentKind::Spectrum { interval: iv, fibers: lp.fibers.to_vec() })?;
    created.push(spectrum);
    for &f in lp.fibers {
        let node = txn.state.topology().fiber_endpoints(f).0;
        created.push(txn.add_child(spectrum, IntentKind::NodeSpectrum { node, fiber: f, interval: iv })?);
    }
    for &c in &created {
        txn.set_state(c, LifecycleState::Compiled)?;
        txn.set_state(c, LifecycleState::Installed)?;
    }
    Ok((id, created))
}

/// Cheapest way to carry `rate` over `length_km` with `n` identical
/// lightpaths: minimum total cost, then fewest total slots, then largest
/// reach margin.
fn sap_mode(catalog: &Catalog, length_km: f64, rate: Rate, max_chunks: usize) -> Option<(ModuleTypeId, ModeTuple, usize)> {
    let per_lp = |m: ModuleTypeId| 2.0 * catalog.module(m).cost + 2.0 * catalog.router_port.cost;
    catalog
        .module_ids()
        .flat_map(|m| catalog.module(m).modes.iter().map(move |&mode| (m, mode)))
        .filter(|(_, mode)| mode.reach_km >= length_km && mode.rate <= catalog.router_port.rate && !mode.rate.is_zero())
        .map(|(m, mode)| (m, mode, rate.mbps().div_ceil(mode.rate.mbps()) as usize))
        .filter(|&(_, _, n)| n <= max_chunks)
        .min_by(|a, b| {
            (a.2 as f64 * per_lp(a.0))
                .total_cmp(&(b.2 as f64 * per_lp(b.0)))
                .then((a.2 as u32 * catalog.occupied_slots(&a.1)).cmp(&(b.2 as u32 * catalog.occupied_slots(&b.1))))
                .then(b.1.reach_km.total_cmp(&a.1.reach_km))
                .then(a.0.cmp(&b.0))
        })
}

fn compile_sap(txn: &mut Txn, d: &Demand, k: usize, options: &CompileOptions) -> Result<Built, CompileError> {
    let paths = k_shortest_paths(txn.state.topology(), d.src, d.dst, k);
    if paths.is_empty() {
        return Ok(Built::Blocked { reason: "no physical route".into(), cap_hits: 0 });
    }
    for path in &paths {
        let Some((module, mode, n)) = sap_mode(txn.state.catalog(), path.length_km, d.rate, options.max_chunks) else {
            continue;
        };
        let lp = NewLightpath { nodes: &path.nodes, fibers: &path.fibers, module, mode, length_km: path.length_km };
        let width = txn.state.catalog().occupied_slots(&mode);
        let mark = txn.mark();
        let mut intervals = Vec::with_capacity(n);
        for _ in 0..n {
            let Some(iv) = segment_first_fit(txn.state, &path.fibers, width) else { break };
            if !reserve_lightpath(txn, &lp, iv)? {
                break;
            }
            intervals.push(iv);
        }
        if intervals.len() < n {
            txn.rollback_to(mark);
            continue;
        }
        let mut outcome = CompilationOutcome::blocked(String::new(), 0);
        outcome.reason = None;
        let mut routes = Vec::new();
        let mut left = d.rate;
        for iv in intervals {
            let load = if left > mode.rate { mode.rate } else { left };
            left -= load;
            let (id, created) = decompose_lightpath(txn, d.root, &lp, iv, load)?;
            outcome.created.extend(created);
            outcome.new_lightpaths += 1;
            routes.push(vec![id]);
        }
        return Ok(Built::Done { routes, outcome });
    }
    Ok(Built::Blocked { reason: format!("no spectrum or equipment on the {} shortest routes", paths.len()), cap_hits: 0 })
}

fn compile_joint(txn: &mut Txn, d: &Demand, objective: Objective, options: &CompileOptions) -> Result<Built, CompileError> {
    let max = txn.state.catalog().max_lightpath_rate();
    let chunks = split_demand(d.rate, max);
    if chunks.is_empty() || chunks.len() > options.max_chunks {
        return Ok(Built::Blocked { reason: format!("demand {} exceeds the split limit", d.rate), cap_hits: 0 });
    }
    let mut outcome = CompilationOutcome::blocked(String::new(), 0);
    outcome.reason = None;
    let mut routes = Vec::new();
    for chunk in chunks {
        let graph = build_multilayer_graph(txn.state, txn.dag, chunk);
        let found = nondominated_paths(&graph, txn.state.catalog(), d.src, d.dst, chunk, options.search);
        outcome.cap_hits += found.stats.cap_hits;
        let Some(winner) = select_winner(&found.labels, objective).cloned() else {
            return Ok(Built::Blocked { reason: "no feasible multilayer path".into(), cap_hits: outcome.cap_hits });
        };
        match install_winner(txn, &graph, d.root, &winner, chunk, &mut outcome)? {
            Some(route) => routes.push(route),
            None => {
                return Ok(Built::Blocked { reason: "node equipment exhausted".into(), cap_hits: outcome.cap_hits });
            }
        }
        outcome.winners.push(winner);
    }
    Ok(Built::Done { routes, outcome })
}

/// Allocates spectrum and equipment for the winner's new segments, builds
/// their intents, and adds a grooming edge per reused lightpath. Returns the
/// lightpath sequence of the route, or `None` on equipment exhaustion.
fn install_winner(
    txn: &mut Txn,
    graph: &MultilayerGraph,
    root: IntentId,
    winner: &PathLabel,
    load: Rate,
    outcome: &mut CompilationOutcome,
) -> Result<Option<Vec<IntentId>>, CompileError> {
    let mut route = Vec::new();
    let (mut seg, mut groomed) = (winner.segments.iter(), winner.lightpaths.iter());
    for &e in &winner.edges {
        match graph.edge(e).cost.edge_type {
            MlEdgeType::OpticalToVirtual => {
                let s = seg.next().ok_or_else(|| CompileError::Invariant("segment list shorter than path".into()))?;
                let lp = NewLightpath { nodes: &s.nodes, fibers: &s.fibers, module: s.module, mode: s.mode, length_km: s.length_km };
                let width = txn.state.catalog().occupied_slots(&s.mode);
                let iv = segment_first_fit(txn.state, &s.fibers, width).ok_or_else(|| {
                    CompileError::Invariant(format!("search found a free run of {width} slots that allocation could not"))
                })?;
                if !reserve_lightpath(txn, &lp, iv)? {
                    return Ok(None);
                }
                let (id, created) = decompose_lightpath(txn, root, &lp, iv, load)?;
                outcome.created.extend(created);
                outcome.new_lightpaths += 1;
                route.push(id);
            }
            MlEdgeType::Virtual => {
                let &lp = groomed.next().ok_or_else(|| CompileError::Invariant("lightpath list shorter than path".into()))?;
                txn.groom(root, lp, load)?;
                outcome.grooming_edges.push((root, lp));
                route.push(lp);
            }
            _ => {}
        }
    }
    Ok(Some(route))
}

/// Removes a user intent and releases every resource held by the installed
/// intents that disappear with it. Shared lightpaths stay.
pub fn uninstall(state: &mut NetworkState, dag: &mut IntentDag, root: IntentId) -> Result<Vec<Intent>, CompileError> {
    let removed = dag.remove_user_intent(root)?;
    for i in removed.iter().filter(|i| i.state == LifecycleState::Installed) {
        match &i.kind {
            IntentKind::NodeRouterPort { node } => state.release_port(*node)?,
            IntentKind::NodeTransmodule { node, module } => state.release_transmodule(*node, *module)?,
            IntentKind::NodeSpectrum { fiber, interval, .. } => state.release_slots(*fiber, *interval)?,
            _ => {}
        }
    }
    Ok(removed)
}

/// Owns a network state and its intent DAG.
#[derive(Clone, Debug)]
pub struct Engine {
    pub state: NetworkState,
    pub dag: IntentDag,
    pub options: CompileOptions,
}

impl Engine {
    pub fn new(state: NetworkState) -> Self {
        Engine { state, dag: IntentDag::new(), options: CompileOptions::default() }
    }

    pub fn submit(&mut self, src: NodeId, dst: NodeId, rate: Rate) -> Result<IntentId, CompileError> {
        Ok(self.dag.add_user_intent(src, dst, rate)?)
    }

    pub fn compile(&mut self, kind: CompilerKind, id: IntentId) -> Result<CompilationOutcome, CompileError> {
        compile(kind, id, &mut self.state, &mut self.dag, &self.options)
    }

    pub fn request(&mut self, kind: CompilerKind, src: NodeId, dst: NodeId, rate: Rate) -> Result<(IntentId, CompilationOutcome), CompileError> {
        let id = self.submit(src, dst, rate)?;
        Ok((id, self.compile(kind, id)?))
    }

    pub fn remove(&mut self, root: IntentId) -> Result<Vec<Intent>, CompileError> {
        uninstall(&mut self.state, &mut self.dag, root)
    }
}
