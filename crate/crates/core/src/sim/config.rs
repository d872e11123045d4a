//! Campaign configuration file. Relative paths resolve against the
//! directory holding the configuration file.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use super::{Campaign, DemandParams, RunOptions, DEFAULT_US_PER_KM};
use crate::catalog::{Catalog, CatalogError};
use crate::compile::{CompileOptions, CompilerKind, DEFAULT_MAX_CHUNKS, DEFAULT_SAP_K};
use crate::search::{SearchOptions, DEFAULT_LABEL_CAP};
use crate::topology::{parse_sndlib, ParseError, Topology};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("topology {path}: {source}")]
    Topology { path: PathBuf, source: ParseError },
    #[error("catalog {path}: {source}")]
    Catalog { path: PathBuf, source: CatalogError },
}

fn default_us_per_km() -> f64 {
    DEFAULT_US_PER_KM
}
fn default_label_cap() -> usize {
    DEFAULT_LABEL_CAP
}
fn default_max_chunks() -> usize {
    DEFAULT_MAX_CHUNKS
}
fn default_sap_k() -> usize {
    DEFAULT_SAP_K
}
fn default_audit() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub topology: PathBuf,
    pub catalog: PathBuf,
    /// Compiler names: `sap`, `jml`, `ldjml`.
    pub compilers: Vec<String>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub demand: DemandParams,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub dump_dag: bool,
    #[serde(default)]
    pub dump_multigraph: bool,
    /// Shuffle arrivals with this seed instead of (source, destination) order.
    #[serde(default)]
    pub shuffle: Option<u64>,
    #[serde(default = "default_us_per_km")]
    pub us_per_km: f64,
    #[serde(default = "default_sap_k")]
    pub sap_k: usize,
    #[serde(default = "default_label_cap")]
    pub label_cap: usize,
    #[serde(default = "default_max_chunks")]
    pub max_chunks: usize,
    #[serde(default = "default_audit")]
    pub audit: bool,
}

impl RunConfig {
    pub fn from_json(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut c: RunConfig = serde_json::from_str(text)?;
        for p in [&mut c.topology, &mut c.catalog, &mut c.output_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        if self.seeds.is_empty() {
            return bad("seed list is empty");
        }
        if self.compilers.is_empty() {
            return bad("compiler list is empty");
        }
        self.compiler_kinds()?;
        if !(self.demand.aggregate_gbps > 0.0) {
            return bad("demand.aggregate_gbps must be positive");
        }
        if self.demand.stddev_gbps.is_some_and(|s| !(s > 0.0)) || self.demand.mean_gbps.is_some_and(|m| !(m.is_finite())) {
            return bad("demand mean must be finite and stddev positive");
        }
        if !(self.us_per_km >= 0.0) {
            return bad("us_per_km must be non-negative");
        }
        if self.sap_k == 0 || self.label_cap == 0 || self.max_chunks == 0 {
            return bad("sap_k, label_cap and max_chunks must be at least 1");
        }
        Ok(())
    }

    pub fn compiler_kinds(&self) -> Result<Vec<CompilerKind>, ConfigError> {
        self.compilers
            .iter()
            .map(|s| {
                let k: CompilerKind = s.parse().map_err(ConfigError::Invalid)?;
                Ok(match k {
                    CompilerKind::Sap { .. } => CompilerKind::Sap { k: self.sap_k },
                    other => other,
                })
            })
            .collect()
    }

    pub fn load_topology(&self) -> Result<Topology, ConfigError> {
        let text = std::fs::read_to_string(&self.topology).map_err(|source| ConfigError::Io { path: self.topology.clone(), source })?;
        parse_sndlib(&text).map_err(|source| ConfigError::Topology { path: self.topology.clone(), source })
    }

    pub fn load_catalog(&self) -> Result<Catalog, ConfigError> {
        Catalog::load(&self.catalog).map_err(|source| ConfigError::Catalog { path: self.catalog.clone(), source })
    }

    pub fn campaign(&self, jobs: Option<usize>) -> Result<Campaign, ConfigError> {
        Ok(Campaign {
            topology: self.load_topology()?,
            catalog: self.load_catalog()?,
            compilers: self.compiler_kinds()?,
            seeds: self.seeds.clone(),
            demand: self.demand,
            run: RunOptions {
                compile: CompileOptions {
                    search: SearchOptions { label_cap: self.label_cap },
                    max_chunks: self.max_chunks,
                    audit: false,
                },
                us_per_km: self.us_per_km,
                shuffle: self.shuffle,
                audit: self.audit,
            },
            jobs,
            keep_artifacts: self.dump_dag || self.dump_multigraph,
        })
    }
}
