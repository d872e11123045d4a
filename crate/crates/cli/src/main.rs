use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use intentdag::catalog::Catalog;
use intentdag::compile::{CompileOptions, CompileStatus, CompilerKind, Engine};
use intentdag::intent::{verify_dag, DagDump, IntentDag, IntentKind};
use intentdag::multilayer::build_multilayer_graph;
use intentdag::sim::config::RunConfig;
use intentdag::sim::report::write_outputs;
use intentdag::sim::run_campaign;
use intentdag::state::{NetworkState, StateDump};
use intentdag::topology::{parse_sndlib, NodeId, Topology};
use intentdag::units::Rate;
use serde::Deserialize;
use serde_json::{json, Value};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_BLOCKED: u8 = 3;

#[derive(Parser)]
#[command(name = "intentdag", version, about = "Intent compilation for IP-optical networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seed campaign and write results.csv, summary.json and plot.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Compile one intent and print its decomposition as JSON.
    Compile {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        src: String,
        #[arg(long)]
        dst: String,
        /// Rate in Gbps.
        #[arg(long)]
        rate: f64,
        #[arg(long, value_parser = ["sap", "jml", "ldjml"])]
        compiler: String,
        /// CSV of `src,dst,rate_gbps` compiled first with the same compiler.
        #[arg(long)]
        prior: Option<PathBuf>,
        /// Write the multilayer graph seen by the final request to this file.
        #[arg(long)]
        dump_multigraph: Option<PathBuf>,
    },
    /// Check a DAG dump against a state dump.
    Verify {
        #[arg(long)]
        dag: PathBuf,
        #[arg(long)]
        state: PathBuf,
    },
}

/// Failure carrying its exit code.
struct Fail(u8, String);

impl Fail {
    fn usage(msg: impl std::fmt::Display) -> Self {
        Fail(EXIT_USAGE, msg.to_string())
    }
    fn domain(msg: impl std::fmt::Display) -> Self {
        Fail(EXIT_FAILURE, msg.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate { config, jobs } => simulate(&config, jobs),
        Command::Compile { topology, catalog, src, dst, rate, compiler, prior, dump_multigraph } => {
            compile(&topology, &catalog, &src, &dst, rate, &compiler, prior.as_deref(), dump_multigraph.as_deref())
        }
        Command::Verify { dag, state } => verify(&dag, &state),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn simulate(config: &Path, jobs: Option<usize>) -> Result<u8, Fail> {
    if jobs == Some(0) {
        return Err(Fail::usage("--jobs must be at least 1"));
    }
    let cfg = RunConfig::load(config).map_err(Fail::usage)?;
    let campaign = cfg.campaign(jobs).map_err(Fail::usage)?;
    log::info!(
        "{} seeds x {} compilers on {} nodes, aggregate {} Gbps",
        campaign.seeds.len(),
        campaign.compilers.len(),
        campaign.topology.node_count(),
        campaign.demand.aggregate_gbps
    );
    let result = run_campaign(&campaign);
    write_outputs(&cfg.output_dir, &campaign.topology, &result, cfg.dump_dag, cfg.dump_multigraph)
        .map_err(|e| Fail::domain(format!("writing {}: {e}", cfg.output_dir.display())))?;
    for s in &result.summary.compilers {
        log::info!(
            "{}: blocked {} latency median {:?} us cost median {:?}",
            s.compiler, s.blocked_intents, s.median_latency_us, s.median_cost_total
        );
    }
    if !result.failures.is_empty() {
        for f in &result.failures {
            log::error!("{} seed {}: {}", f.compiler.name(), f.seed, f.error);
        }
        return Err(Fail::domain(format!("{} runs failed", result.failures.len())));
    }
    log::info!("wrote {}", cfg.output_dir.display());
    Ok(0)
}

fn load_topology(path: &Path) -> Result<Topology, Fail> {
    let text = std::fs::read_to_string(path).map_err(|e| Fail::usage(format!("{}: {e}", path.display())))?;
    parse_sndlib(&text).map_err(|e| Fail::usage(format!("{}: {e}", path.display())))
}

fn node(topo: &Topology, name: &str) -> Result<NodeId, Fail> {
    topo.node_by_name(name).ok_or_else(|| Fail::usage(format!("unknown node {name:?}")))
}

fn rate(gbps: f64) -> Result<Rate, Fail> {
    if gbps.is_finite() && gbps > 0.0 {
        Ok(Rate::from_gbps(gbps))
    } else {
        Err(Fail::usage(format!("rate must be positive, got {gbps}")))
    }
}

#[derive(Deserialize)]
struct PriorRow {
    src: String,
    dst: String,
    rate_gbps: f64,
}

#[allow(clippy::too_many_arguments)]
fn compile(
    topology: &Path,
    catalog: &Path,
    src: &str,
    dst: &str,
    gbps: f64,
    compiler: &str,
    prior: Option<&Path>,
    dump_multigraph: Option<&Path>,
) -> Result<u8, Fail> {
    let topo = load_topology(topology)?;
    let catalog = Catalog::load(catalog).map_err(|e| Fail::usage(format!("{}: {e}", catalog.display())))?;
    let kind: CompilerKind = compiler.parse().map_err(Fail::usage)?;
    let (s, d, r) = (node(&topo, src)?, node(&topo, dst)?, rate(gbps)?);
    if s == d {
        return Err(Fail::usage("source and destination must differ"));
    }
    let mut engine = Engine::new(NetworkState::new(topo, catalog));
    engine.options = CompileOptions { audit: true, ..CompileOptions::default() };

    let mut prior_summary = Vec::new();
    if let Some(path) = prior {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Fail::usage(format!("{}: {e}", path.display())))?;
        let mut rows = Vec::new();
        for row in reader.deserialize::<PriorRow>() {
            let row = row.map_err(|e| Fail::usage(format!("{}: {e}", path.display())))?;
            let topo = engine.state.topology();
            let (ps, pd) = (node(topo, &row.src)?, node(topo, &row.dst)?);
            rows.push((row.src, row.dst, ps, pd, rate(row.rate_gbps)?));
        }
        for (a, b, ps, pd, pr) in rows {
            let (id, o) = engine.request(kind, ps, pd, pr).map_err(Fail::domain)?;
            prior_summary.push(json!({ "id": id.0, "src": a, "dst": b, "rate_gbps": pr.gbps(), "status": o.status }));
        }
    }

    if let Some(path) = dump_multigraph {
        let g = build_multilayer_graph(&engine.state, &engine.dag, r);
        let text = serde_json::to_string_pretty(&g.to_json(&engine.state)).expect("graph serializes");
        std::fs::write(path, text).map_err(|e| Fail::domain(format!("{}: {e}", path.display())))?;
    }

    let (id, outcome) = engine.request(kind, s, d, r).map_err(Fail::domain)?;
    let topo = engine.state.topology();
    let names = |nodes: &[NodeId]| nodes.iter().map(|&n| topo.node_name(n).to_string()).collect::<Vec<_>>();
    let catalog = engine.state.catalog();
    let created: Vec<Value> = outcome
        .created
        .iter()
        .map(|&c| {
            let i = engine.dag.get(c).expect("created intent exists");
            let mut v = json!({ "id": c.0, "kind": i.kind.name(), "state": i.state });
            match &i.kind {
                IntentKind::Lightpath { nodes, module, mode, length_km, capacity, load, .. } => {
                    v["nodes"] = json!(names(nodes));
                    v["module"] = json!(catalog.module(*module).name);
                    v["rate_gbps"] = json!(mode.rate.gbps());
                    v["slots"] = json!(mode.slots);
                    v["length_km"] = json!(length_km);
                    v["capacity_gbps"] = json!(capacity.gbps());
                    v["load_gbps"] = json!(load.gbps());
                }
                IntentKind::Spectrum { interval, .. } => {
                    v["start"] = json!(interval.start);
                    v["slots"] = json!(interval.len);
                }
                IntentKind::NodeSpectrum { node, interval, .. } => {
                    v["node"] = json!(topo.node_name(*node));
                    v["start"] = json!(interval.start);
                    v["slots"] = json!(interval.len);
                }
                IntentKind::NodeTransmodule { node, module } => {
                    v["node"] = json!(topo.node_name(*node));
                    v["module"] = json!(catalog.module(*module).name);
                }
                IntentKind::NodeRouterPort { node } => v["node"] = json!(topo.node_name(*node)),
                IntentKind::Connectivity { .. } => {}
            }
            v
        })
        .collect();
    let winners: Vec<Value> = outcome
        .winners
        .iter()
        .map(|w| {
            let vertices: Vec<String> = w.path.iter().map(|v| format!("{:?}:{}", v.layer, topo.node_name(v.node))).collect();
            json!({
                "path": vertices,
                "cost": w.total_cost(),
                "length_km": w.length_km,
                "uses_grooming": w.uses_virtual,
                "segments": w.segments.iter().map(|s| json!({
                    "nodes": names(&s.nodes),
                    "module": catalog.module(s.module).name,
                    "rate_gbps": s.mode.rate.gbps(),
                    "slots": s.mode.slots,
                    "length_km": s.length_km,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    let routes: Vec<Vec<u64>> = engine.dag.get(id).map(|i| i.routes.iter().map(|r| r.iter().map(|l| l.0).collect()).collect()).unwrap_or_default();
    let report = json!({
        "intent": id.0,
        "compiler": kind.name(),
        "src": src,
        "dst": dst,
        "rate_gbps": r.gbps(),
        "status": outcome.status,
        "reason": outcome.reason,
        "prior": prior_summary,
        "winners": winners,
        "routes": routes,
        "created": created,
        "grooming_edges": outcome.grooming_edges.iter().map(|(p, l)| json!({ "parent": p.0, "lightpath": l.0 })).collect::<Vec<_>>(),
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    if outcome.status == CompileStatus::Blocked {
        eprintln!("blocked: {}", outcome.reason.as_deref().unwrap_or("no feasible route"));
        return Ok(EXIT_BLOCKED);
    }
    Ok(0)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Fail> {
    let text = std::fs::read_to_string(path).map_err(|e| Fail::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Fail::usage(format!("{}: {e}", path.display())))
}

fn verify(dag: &Path, state: &Path) -> Result<u8, Fail> {
    let dag_dump: DagDump = read_json(dag)?;
    let state_dump: StateDump = read_json(state)?;
    let dag = IntentDag::from_dump(dag_dump).map_err(|e| Fail::usage(format!("{}: {e}", dag.display())))?;
    let state = NetworkState::from_dump(state_dump).map_err(|e| Fail::usage(format!("{}: {e}", state.display())))?;
    let violations = verify_dag(&dag, &state);
    for v in &violations {
        println!("{v}");
    }
    if violations.is_empty() {
        log::info!("no violations");
        Ok(0)
    } else {
        log::error!("{} violations", violations.len());
        Ok(EXIT_FAILURE)
    }
}
