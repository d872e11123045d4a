//! Result files: per-intent CSV, JSON summary, long-format plot CSV and
//! optional per-run dumps.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use super::{CampaignResult, RunMetrics, Summary};
use crate::compile::CompileStatus;
use crate::multilayer::build_multilayer_graph;
use crate::topology::Topology;
use crate::units::Rate;

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

fn gbps(r: Rate) -> String {
    format!("{:.3}", r.gbps())
}

/// One row per intent.
pub fn write_results_csv<W: Write>(w: W, topology: &Topology, runs: &[RunMetrics]) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["seed", "compiler", "src", "dst", "rate_gbps", "status", "latency_us", "new_lightpaths", "groomed_hops"])
        .map_err(csv_err)?;
    for run in runs {
        for r in &run.records {
            out.write_record([
                run.seed.to_string(),
                run.compiler.name().to_string(),
                topology.node_name(r.src).to_string(),
                topology.node_name(r.dst).to_string(),
                gbps(r.rate),
                match r.status {
                    CompileStatus::Installed => "installed",
                    CompileStatus::Blocked => "blocked",
                }
                .to_string(),
                r.latency_us.map(|l| format!("{l:.3}")).unwrap_or_default(),
                r.new_lightpaths.to_string(),
                r.groomed_hops.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    out.flush()
}

pub fn write_summary_json<W: Write>(mut w: W, summary: &Summary) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut w, summary)?;
    writeln!(w)
}

/// Long format `seed,compiler,metric,value`: per-run totals plus one
/// `latency_us` row per installed intent.
pub fn write_plot_csv<W: Write>(w: W, runs: &[RunMetrics]) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["seed", "compiler", "metric", "value"]).map_err(csv_err)?;
    for run in runs {
        let rows = [
            ("cost_ip", run.cost_ip),
            ("cost_optics", run.cost_optics),
            ("cost_total", run.total_cost()),
            ("blocking", run.blocking as f64),
            ("grooming_edges", run.grooming_edges as f64),
            ("lightpaths", run.lightpaths as f64),
            ("label_cap_hits", run.cap_hits as f64),
        ];
        for (metric, v) in rows.into_iter().chain(run.installed_latencies().map(|l| ("latency_us", l))) {
            out.write_record([run.seed.to_string(), run.compiler.name().to_string(), metric.to_string(), format!("{v:.3}")])
                .map_err(csv_err)?;
        }
    }
    out.flush()
}

/// Writes `results.csv`, `summary.json`, `plot.csv`, and, when artifacts
/// were kept, `dumps/<compiler>_<seed>_{dag,state,multigraph}.json`.
pub fn write_outputs(dir: &Path, topology: &Topology, result: &CampaignResult, dump_dag: bool, dump_multigraph: bool) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    write_results_csv(io::BufWriter::new(fs::File::create(dir.join("results.csv"))?), topology, &result.runs)?;
    write_summary_json(io::BufWriter::new(fs::File::create(dir.join("summary.json"))?), &result.summary)?;
    write_plot_csv(io::BufWriter::new(fs::File::create(dir.join("plot.csv"))?), &result.runs)?;
    if !(dump_dag || dump_multigraph) {
        return Ok(());
    }
    let dumps = dir.join("dumps");
    fs::create_dir_all(&dumps)?;
    for (run, art) in result.runs.iter().zip(&result.artifacts) {
        let Some(art) = art else { continue };
        let stem = format!("{}_{}", run.compiler.name().to_ascii_lowercase(), run.seed);
        if dump_dag {
            fs::write(dumps.join(format!("{stem}_dag.json")), serde_json::to_string_pretty(&art.dag.to_dump())?)?;
            fs::write(dumps.join(format!("{stem}_state.json")), serde_json::to_string_pretty(&art.state.to_dump())?)?;
        }
        if dump_multigraph {
            let g = build_multilayer_graph(&art.state, &art.dag, Rate::from_mbps(1));
            fs::write(dumps.join(format!("{stem}_multigraph.json")), serde_json::to_string_pretty(&g.to_json(&art.state))?)?;
        }
    }
    Ok(())
}
