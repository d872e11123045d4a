//! Equipment catalog: transmission module types with their operating modes,
//! router port parameters and the spectrum grid size.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::Rate;

/// One operating mode of a transmission module.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMode", into = "RawMode")]
pub struct ModeTuple {
    pub rate: Rate,
    pub reach_km: f64,
    pub slots: u32,
}

#[derive(Serialize, Deserialize)]
struct RawMode {
    rate_gbps: f64,
    reach_km: f64,
    slots: u32,
}

impl TryFrom<RawMode> for ModeTuple {
    type Error = CatalogError;
    fn try_from(raw: RawMode) -> Result<Self, CatalogError> {
        let mode = ModeTuple { rate: Rate::from_gbps(raw.rate_gbps), reach_km: raw.reach_km, slots: raw.slots };
        mode.validate()?;
        Ok(mode)
    }
}

impl From<ModeTuple> for RawMode {
    fn from(m: ModeTuple) -> Self {
        RawMode { rate_gbps: m.rate.gbps(), reach_km: m.reach_km, slots: m.slots }
    }
}

impl ModeTuple {
    pub fn new(rate_gbps: f64, reach_km: f64, slots: u32) -> Self {
        ModeTuple { rate: Rate::from_gbps(rate_gbps), reach_km, slots }
    }

    fn validate(&self) -> Result<(), CatalogError> {
        if self.rate.is_zero() || !(self.reach_km > 0.0) || self.slots == 0 {
            return Err(CatalogError::BadMode(format!("{self:?}")));
        }
        Ok(())
    }

    /// At least as good on rate, reach and slot usage, and strictly better on one.
    fn dominates(&self, other: &ModeTuple) -> bool {
        self.rate >= other.rate
            && self.reach_km >= other.reach_km
            && self.slots <= other.slots
            && (self.rate > other.rate || self.reach_km > other.reach_km || self.slots < other.slots)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModuleTypeId(pub u16);

impl ModuleTypeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModuleType {
    pub name: String,
    pub cost: f64,
    /// Per-node count; `None` means counted but not capped.
    #[serde(default)]
    pub pool: Option<u32>,
    pub modes: Vec<ModeTuple>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPort", into = "RawPort")]
pub struct RouterPort {
    pub cost: f64,
    pub rate: Rate,
    pub pool: Option<u32>,
}

#[derive(Serialize, Deserialize)]
struct RawPort {
    cost: f64,
    rate_gbps: f64,
    #[serde(default)]
    pool: Option<u32>,
}

impl TryFrom<RawPort> for RouterPort {
    type Error = CatalogError;
    fn try_from(raw: RawPort) -> Result<Self, CatalogError> {
        let rate = Rate::from_gbps(raw.rate_gbps);
        if rate.is_zero() || !(raw.cost >= 0.0) {
            return Err(CatalogError::BadPort);
        }
        Ok(RouterPort { cost: raw.cost, rate, pool: raw.pool })
    }
}

impl From<RouterPort> for RawPort {
    fn from(p: RouterPort) -> Self {
        RawPort { cost: p.cost, rate_gbps: p.rate.gbps(), pool: p.pool }
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("invalid mode {0}")]
    BadMode(String),
    #[error("module type {0} has no modes")]
    NoModes(String),
    #[error("module type {0}: mode {1:?} dominates mode {2:?}")]
    DominatedMode(String, ModeTuple, ModeTuple),
    #[error("module type {0}: mode needs more slots than the grid has")]
    TooWide(String),
    #[error("module type {0} has a negative cost")]
    NegativeCost(String),
    #[error("duplicate module type {0}")]
    Duplicate(String),
    #[error("catalog has no module types")]
    Empty,
    #[error("router port must have positive rate and non-negative cost")]
    BadPort,
    #[error("slots_per_fiber must be positive")]
    NoSlots,
    #[error("reading catalog: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing catalog: {0}")]
    Json(#[from] serde_json::Error),
}

/// The equipment model shared by every node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub slots_per_fiber: u32,
    #[serde(default)]
    pub guard_band_slots: u32,
    pub router_port: RouterPort,
    pub module_types: Vec<ModuleType>,
}

impl Default for Catalog {
    /// One flexible module type (cost 3) with 100/200/400 Gbps modes, unit-cost
    /// 400 Gbps router ports, uncapped pools and 320 slots per fiber.
    fn default() -> Self {
        Catalog {
            slots_per_fiber: 320,
            guard_band_slots: 0,
            router_port: RouterPort { cost: 1.0, rate: Rate::from_gbps(400.0), pool: None },
            module_types: vec![ModuleType {
                name: "flex-tm".into(),
                cost: 3.0,
                pool: None,
                modes: vec![
                    ModeTuple::new(100.0, 3000.0, 4),
                    ModeTuple::new(200.0, 1500.0, 6),
                    ModeTuple::new(400.0, 600.0, 8),
                ],
            }],
        }
    }
}

impl Catalog {
    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        let catalog: Catalog = serde_json::from_str(text)?;
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        if self.slots_per_fiber == 0 {
            return Err(CatalogError::NoSlots);
        }
        if self.module_types.is_empty() {
            return Err(CatalogError::Empty);
        }
        let mut names = HashSet::new();
        for m in &self.module_types {
            if !names.insert(m.name.as_str()) {
                return Err(CatalogError::Duplicate(m.name.clone()));
            }
            if !(m.cost >= 0.0) {
                return Err(CatalogError::NegativeCost(m.name.clone()));
            }
            if m.modes.is_empty() {
                return Err(CatalogError::NoModes(m.name.clone()));
            }
            for (i, a) in m.modes.iter().enumerate() {
                a.validate()?;
                if a.slots + self.guard_band_slots > self.slots_per_fiber {
                    return Err(CatalogError::TooWide(m.name.clone()));
                }
                for (j, b) in m.modes.iter().enumerate() {
                    if i != j && a.dominates(b) {
                        return Err(CatalogError::DominatedMode(m.name.clone(), *a, *b));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn module(&self, id: ModuleTypeId) -> &ModuleType {
        &self.module_types[id.index()]
    }

    pub fn module_ids(&self) -> impl Iterator<Item = ModuleTypeId> {
        (0..self.module_types.len() as u16).map(ModuleTypeId)
    }

    pub fn module_by_name(&self, name: &str) -> Option<ModuleTypeId> {
        self.module_types.iter().position(|m| m.name == name).map(|i| ModuleTypeId(i as u16))
    }

    /// Highest mode rate any single lightpath can carry through a router port.
    pub fn max_lightpath_rate(&self) -> Rate {
        self.module_types
            .iter()
            .flat_map(|m| m.modes.iter())
            .map(|m| m.rate)
            .filter(|&r| r <= self.router_port.rate)
            .max()
            .unwrap_or(Rate::ZERO)
    }

    /// Slots a channel occupies on the grid, guard band included.
    pub fn occupied_slots(&self, mode: &ModeTuple) -> u32 {
        mode.slots + self.guard_band_slots
    }

    /// Multiplies every module and port cost by `factor`.
    pub fn scaled_costs(&self, factor: f64) -> Catalog {
        let mut c = self.clone();
        c.router_port.cost *= factor;
        for m in &mut c.module_types {
            m.cost *= factor;
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_catalog_matches_default() {
        let text = include_str!("../../../data/catalog.json");
        let c = Catalog::from_json(text).unwrap();
        assert_eq!(c, Catalog::default());
        assert_eq!(c.max_lightpath_rate(), Rate::from_gbps(400.0));
    }

    #[test]
    fn rejects_dominated_mode() {
        let mut c = Catalog::default();
        c.module_types[0].modes.push(ModeTuple::new(50.0, 100.0, 8));
        assert!(matches!(c.validate(), Err(CatalogError::DominatedMode(..))));
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = Catalog::default();
        c.module_types[0].modes.clear();
        assert!(matches!(c.validate(), Err(CatalogError::NoModes(_))));
        let mut c = Catalog::default();
        c.slots_per_fiber = 6;
        assert!(matches!(c.validate(), Err(CatalogError::TooWide(_))));
        let json = r#"{"slots_per_fiber":8,"router_port":{"cost":1,"rate_gbps":0},"module_types":[]}"#;
        assert!(Catalog::from_json(json).is_err());
        let json = r#"{"slots_per_fiber":8,"router_port":{"cost":1,"rate_gbps":100},"module_types":[{"name":"x","cost":1,"modes":[{"rate_gbps":100,"reach_km":10,"slots":0}]}]}"#;
        assert!(Catalog::from_json(json).is_err());
    }

    #[test]
    fn port_rate_caps_lightpath_rate() {
        let mut c = Catalog::default();
        c.router_port.rate = Rate::from_gbps(200.0);
        assert_eq!(c.max_lightpath_rate(), Rate::from_gbps(200.0));
    }
}
