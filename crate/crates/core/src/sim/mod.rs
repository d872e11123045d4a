//! Batch evaluation: seeded demand matrices, sequential compilation of every
//! demand, and latency, cost and blocking metrics per run and per campaign.

pub mod config;
pub mod report;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::catalog::Catalog;
use crate::compile::{compile, CompileError, CompileOptions, CompileStatus, CompilerKind};
use crate::intent::{verify_dag, IntentDag, IntentId, IntentKind, LifecycleState};
use crate::state::NetworkState;
use crate::topology::{NodeId, Topology};
use crate::units::Rate;

pub use config::{ConfigError, RunConfig};
pub use report::{write_outputs, write_plot_csv, write_results_csv, write_summary_json};

/// Aggregate offered load of the reference scenario.
pub const REFERENCE_AGGREGATE_GBPS: f64 = 62_000.0;
/// Propagation delay in fibre.
pub const DEFAULT_US_PER_KM: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct DemandParams {
    pub aggregate_gbps: f64,
    /// Mean of the untruncated normal; defaults to aggregate / pairs.
    #[serde(default)]
    pub mean_gbps: Option<f64>,
    /// Standard deviation; defaults to half the mean.
    #[serde(default)]
    pub stddev_gbps: Option<f64>,
}

impl Default for DemandParams {
    fn default() -> Self {
        DemandParams { aggregate_gbps: REFERENCE_AGGREGATE_GBPS, mean_gbps: None, stddev_gbps: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DemandMatrix {
    pub seed: u64,
    /// One entry per ordered node pair, sorted by (source, destination).
    pub entries: Vec<(NodeId, NodeId, Rate)>,
}

impl DemandMatrix {
    pub fn total(&self) -> Rate {
        self.entries.iter().map(|e| e.2).sum()
    }
}

/// Draws one truncated-normal rate per ordered pair from a ChaCha8 stream
/// seeded with `seed`, then rescales so the rates sum to the aggregate.
pub fn generate_demands(topology: &Topology, seed: u64, params: &DemandParams) -> DemandMatrix {
    let n = topology.node_count() as u32;
    let pairs: Vec<(NodeId, NodeId)> =
        (0..n).flat_map(|s| (0..n).filter(move |&d| d != s).map(move |d| (NodeId(s), NodeId(d)))).collect();
    if pairs.is_empty() || params.aggregate_gbps <= 0.0 {
        return DemandMatrix { seed, entries: pairs.into_iter().map(|(s, d)| (s, d, Rate::ZERO)).collect() };
    }
    let mean = params.mean_gbps.unwrap_or(params.aggregate_gbps / pairs.len() as f64);
    let sd = params.stddev_gbps.unwrap_or(mean / 2.0);
    let normal = Normal::new(mean, sd).expect("finite positive deviation");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = pairs
        .iter()
        .map(|_| loop {
            let x = normal.sample(&mut rng);
            if x >= 0.0 {
                break x;
            }
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    let scale = if sum > 0.0 { params.aggregate_gbps / sum } else { 0.0 };
    let entries = pairs.into_iter().zip(raw).map(|((s, d), x)| (s, d, Rate::from_gbps(x * scale))).collect();
    DemandMatrix { seed, entries }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub compile: CompileOptions,
    pub us_per_km: f64,
    /// Shuffle the arrival order with this seed (mixed with the run seed).
    pub shuffle: Option<u64>,
    /// Audit the DAG against the state at the end of every run.
    pub audit: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { compile: CompileOptions::default(), us_per_km: DEFAULT_US_PER_KM, shuffle: None, audit: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntentRecord {
    pub src: NodeId,
    pub dst: NodeId,
    pub rate: Rate,
    pub status: CompileStatus,
    /// Worst route latency over the sub-demands; `None` when blocked.
    pub latency_us: Option<f64>,
    pub new_lightpaths: usize,
    pub groomed_hops: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub seed: u64,
    pub compiler: CompilerKind,
    pub records: Vec<IntentRecord>,
    /// Router port cost of installed equipment.
    pub cost_ip: f64,
    /// Transmission module cost of installed equipment.
    pub cost_optics: f64,
    pub blocking: usize,
    pub grooming_edges: usize,
    pub lightpaths: usize,
    pub multi_parent_lightpaths: usize,
    pub cap_hits: usize,
    pub occupied_slots: usize,
}

impl RunMetrics {
    pub fn total_cost(&self) -> f64 {
        self.cost_ip + self.cost_optics
    }

    pub fn installed_latencies(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().filter_map(|r| r.latency_us)
    }
}

/// Worst propagation latency over the routes of an installed user intent.
pub fn intent_latency_us(dag: &IntentDag, id: IntentId, us_per_km: f64) -> Option<f64> {
    let n = dag.get(id)?;
    if n.state != LifecycleState::Installed {
        return None;
    }
    n.routes
        .iter()
        .map(|route| {
            route
                .iter()
                .map(|lp| match dag.get(*lp).map(|i| &i.kind) {
                    Some(IntentKind::Lightpath { length_km, .. }) => *length_km,
                    _ => 0.0,
                })
                .sum::<f64>()
                * us_per_km
        })
        .reduce(f64::max)
}

/// Installed equipment cost split into (router ports, transmission modules).
pub fn installed_cost(dag: &IntentDag, catalog: &Catalog) -> (f64, f64) {
    let (mut ip, mut optics) = (0.0, 0.0);
    for i in dag.intents().filter(|i| i.state == LifecycleState::Installed) {
        match &i.kind {
            IntentKind::NodeRouterPort { .. } => ip += catalog.router_port.cost,
            IntentKind::NodeTransmodule { module, .. } => optics += catalog.module(*module).cost,
            _ => {}
        }
    }
    (ip, optics)
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("audit failed with {count} violations, first: {first}")]
    Audit { count: usize, first: String },
}

/// Final network state and DAG of a run, kept for dumps.
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub state: NetworkState,
    pub dag: IntentDag,
}

/// Compiles every demand of the matrix on a fresh network, in (source,
/// destination) order unless shuffling is requested.
pub fn run_one(
    topology: &Topology,
    catalog: &Catalog,
    kind: CompilerKind,
    demands: &DemandMatrix,
    options: &RunOptions,
) -> Result<(RunMetrics, RunArtifacts), RunError> {
    let mut state = NetworkState::new(topology.clone(), catalog.clone());
    let mut dag = IntentDag::new();
    let mut order: Vec<(NodeId, NodeId, Rate)> = demands.entries.iter().copied().filter(|e| !e.2.is_zero()).collect();
    if let Some(s) = options.shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(s ^ demands.seed.rotate_left(32)));
    }
    let mut m = RunMetrics {
        seed: demands.seed,
        compiler: kind,
        records: Vec::with_capacity(order.len()),
        cost_ip: 0.0,
        cost_optics: 0.0,
        blocking: 0,
        grooming_edges: 0,
        lightpaths: 0,
        multi_parent_lightpaths: 0,
        cap_hits: 0,
        occupied_slots: 0,
    };
    for (src, dst, rate) in order {
        let id = dag.add_user_intent(src, dst, rate).map_err(CompileError::from)?;
        let o = compile(kind, id, &mut state, &mut dag, &options.compile)?;
        m.cap_hits += o.cap_hits;
        m.grooming_edges += o.grooming_edges.len();
        if o.status == CompileStatus::Blocked {
            m.blocking += 1;
        }
        m.records.push(IntentRecord {
            src,
            dst,
            rate,
            status: o.status,
            latency_us: intent_latency_us(&dag, id, options.us_per_km),
            new_lightpaths: o.new_lightpaths,
            groomed_hops: o.grooming_edges.len(),
        });
    }
    if options.audit {
        let v = verify_dag(&dag, &state);
        if let Some(first) = v.first() {
            return Err(RunError::Audit { count: v.len(), first: first.to_string() });
        }
    }
    (m.cost_ip, m.cost_optics) = installed_cost(&dag, catalog);
    m.lightpaths = dag.intents().filter(|i| i.kind.is_lightpath()).count();
    m.multi_parent_lightpaths = dag.multi_parent_lightpaths();
    m.occupied_slots = state.occupied_count();
    Ok((m, RunArtifacts { state, dag }))
}

/// Everything a campaign needs besides file locations.
#[derive(Clone, Debug)]
pub struct Campaign {
    pub topology: Topology,
    pub catalog: Catalog,
    pub compilers: Vec<CompilerKind>,
    pub seeds: Vec<u64>,
    pub demand: DemandParams,
    pub run: RunOptions,
    /// Worker threads; `None` uses all cores.
    pub jobs: Option<usize>,
    /// Keep final state and DAG of each run.
    pub keep_artifacts: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompilerSummary {
    pub compiler: String,
    pub runs: usize,
    pub failed_runs: usize,
    /// Median over all installed intents of all seeds.
    pub median_latency_us: Option<f64>,
    /// Medians over per-seed installed totals.
    pub median_cost_total: Option<f64>,
    pub median_cost_ip: Option<f64>,
    pub median_cost_optics: Option<f64>,
    pub blocked_intents: usize,
    pub seeds_with_blocking: usize,
    pub median_blocking: Option<f64>,
    pub grooming_edges: usize,
    pub multi_parent_lightpaths: usize,
    pub label_cap_hits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub aggregate_gbps: f64,
    pub seeds: Vec<u64>,
    pub us_per_km: f64,
    pub cost_basis: &'static str,
    pub compilers: Vec<CompilerSummary>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunFailure {
    pub seed: u64,
    pub compiler: CompilerKind,
    pub error: String,
}

#[derive(Debug)]
pub struct CampaignResult {
    /// Runs ordered by compiler (config order), then seed.
    pub runs: Vec<RunMetrics>,
    pub artifacts: Vec<Option<RunArtifacts>>,
    pub failures: Vec<RunFailure>,
    pub summary: Summary,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { (values[n / 2 - 1] + values[n / 2]) / 2.0 })
}

fn summarize(c: &Campaign, runs: &[RunMetrics], failures: &[RunFailure]) -> Summary {
    let compilers = c
        .compilers
        .iter()
        .map(|&kind| {
            let mine: Vec<&RunMetrics> = runs.iter().filter(|r| r.compiler == kind).collect();
            let per_seed = |f: &dyn Fn(&RunMetrics) -> f64| median(&mut mine.iter().map(|r| f(r)).collect::<Vec<_>>());
            CompilerSummary {
                compiler: kind.name().to_string(),
                runs: mine.len(),
                failed_runs: failures.iter().filter(|f| f.compiler == kind).count(),
                median_latency_us: median(&mut mine.iter().flat_map(|r| r.installed_latencies()).collect::<Vec<_>>()),
                median_cost_total: per_seed(&|r| r.total_cost()),
                median_cost_ip: per_seed(&|r| r.cost_ip),
                median_cost_optics: per_seed(&|r| r.cost_optics),
                blocked_intents: mine.iter().map(|r| r.blocking).sum(),
                seeds_with_blocking: mine.iter().filter(|r| r.blocking > 0).count(),
                median_blocking: per_seed(&|r| r.blocking as f64),
                grooming_edges: mine.iter().map(|r| r.grooming_edges).sum(),
                multi_parent_lightpaths: mine.iter().map(|r| r.multi_parent_lightpaths).sum(),
                label_cap_hits: mine.iter().map(|r| r.cap_hits).sum(),
            }
        })
        .collect();
    Summary {
        aggregate_gbps: c.demand.aggregate_gbps,
        seeds: c.seeds.clone(),
        us_per_km: c.run.us_per_km,
        cost_basis: "installed intents only",
        compilers,
    }
}

/// Runs every (compiler, seed) combination, seeds in parallel.
pub fn run_campaign(c: &Campaign) -> CampaignResult {
    let jobs: Vec<(CompilerKind, u64)> = c.compilers.iter().flat_map(|&k| c.seeds.iter().map(move |&s| (k, s))).collect();
    let work = || {
        jobs.par_iter()
            .map(|&(kind, seed)| {
                let demands = generate_demands(&c.topology, seed, &c.demand);
                (kind, seed, run_one(&c.topology, &c.catalog, kind, &demands, &c.run))
            })
            .collect::<Vec<_>>()
    };
    let outcomes = match c.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().expect("thread pool").install(work),
        None => work(),
    };
    let (mut runs, mut artifacts, mut failures) = (Vec::new(), Vec::new(), Vec::new());
    for (compiler, seed, out) in outcomes {
        match out {
            Ok((m, a)) => {
                runs.push(m);
                artifacts.push(c.keep_artifacts.then_some(a));
            }
            Err(e) => failures.push(RunFailure { seed, compiler, error: e.to_string() }),
        }
    }
    let summary = summarize(c, &runs, &failures);
    CampaignResult { runs, artifacts, failures, summary }
}

/// Scales the aggregate load up from `start_gbps` by `factor` per step until
/// the baseline compiler blocks at least one demand in every seed. Returns
/// the aggregate reached, or `None` after `max_steps` without success.
pub fn calibrate_blocking_load(c: &Campaign, baseline: CompilerKind, start_gbps: f64, factor: f64, max_steps: usize) -> Option<f64> {
    let mut aggregate = start_gbps;
    for _ in 0..=max_steps {
        let mut probe = c.clone();
        probe.compilers = vec![baseline];
        probe.demand.aggregate_gbps = aggregate;
        probe.keep_artifacts = false;
        let r = run_campaign(&probe);
        if r.failures.is_empty() && r.runs.iter().all(|m| m.blocking > 0) {
            return Some(aggregate);
        }
        aggregate *= factor;
    }
    None
}
