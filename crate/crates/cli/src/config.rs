use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use hybridnet::capacity::MwCostModel;
use hybridnet::fiber::LeaseCostModel;
use hybridnet::los::LosParams;
use hybridnet::sim::SimConfig;
use hybridnet::weather::AttenuationModel;
use hybridnet::LatencyModel;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Inputs {
    /// `id,lat,lon,height_m[,ground_elevation_m]`
    pub towers: Option<PathBuf>,
    /// ESRI ASCII grid of surface elevation.
    pub terrain: Option<PathBuf>,
    /// Precomputed hop graph `tower_a,tower_b,length_km`; skips line-of-sight.
    pub hops: Option<PathBuf>,
    /// `id,lat,lon[,population][,kind]`
    pub sites: Option<PathBuf>,
    /// `src,dst,weight`; gravity demand over `sites` when absent.
    pub traffic: Option<PathBuf>,
    /// `id,lat,lon[,population]`
    pub fiber_endpoints: Option<PathBuf>,
    /// `endpoint_a,endpoint_b,fiber_km`
    pub fiber_conduits: Option<PathBuf>,
    /// Directory of `YYYYMMDDTHHMM.asc` rain grids.
    pub rain_dir: Option<PathBuf>,
    /// `timestamp,link_id,rain_mm_h`
    pub rain_csv: Option<PathBuf>,
}

impl Inputs {
    fn paths_mut(&mut self) -> [&mut Option<PathBuf>; 9] {
        [
            &mut self.towers,
            &mut self.terrain,
            &mut self.hops,
            &mut self.sites,
            &mut self.traffic,
            &mut self.fiber_endpoints,
            &mut self.fiber_conduits,
            &mut self.rain_dir,
            &mut self.rain_csv,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CullConfig {
    pub enabled: bool,
    pub min_height_m: f64,
    pub grid_cell_deg: f64,
    pub max_per_cell: usize,
}

impl Default for CullConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            min_height_m: 0.0,
            grid_cell_deg: 0.1,
            max_per_cell: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignConfig {
    /// Tower budgets solved in order; downstream commands use the last one.
    pub budgets: Vec<f64>,
    pub attach_radius_km: f64,
    pub fiber_route_inflation: f64,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            budgets: vec![0.0, 10.0, 20.0, 40.0],
            attach_radius_km: 10.0,
            fiber_route_inflation: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub attach_radius_km: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { attach_radius_km: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeatherConfig {
    pub attenuation: AttenuationModel,
    /// Random intervals per day; 0 analyses every frame.
    pub intervals_per_day: usize,
    pub interval_minutes: i64,
}

impl Default for WeatherConfig {
    fn default() -> Self {
        Self {
            attenuation: AttenuationModel::default(),
            intervals_per_day: 0,
            interval_minutes: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSection {
    /// Packet-level settings. Its seed is replaced by the run seed.
    pub run: SimConfig,
    /// Loads for the perturbation sweep.
    pub loads: Vec<f64>,
    /// Population perturbation strengths; the sweep runs when non-empty.
    pub gammas: Vec<f64>,
    pub min_capacity_gbps: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            run: SimConfig::default(),
            loads: vec![0.5, 0.7, 0.9, 1.2],
            gammas: Vec::new(),
            min_capacity_gbps: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub inputs: Inputs,
    pub los: LosParams,
    pub cull: CullConfig,
    pub latency: LatencyModel,
    pub design: DesignConfig,
    pub aggregate_gbps: f64,
    pub mw_cost: MwCostModel,
    pub lease_cost: LeaseCostModel,
    pub augment: AugmentConfig,
    pub weather: WeatherConfig,
    pub sim: SimSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            inputs: Inputs::default(),
            los: LosParams::default(),
            cull: CullConfig::default(),
            latency: LatencyModel::default(),
            design: DesignConfig::default(),
            aggregate_gbps: 100.0,
            mw_cost: MwCostModel::default(),
            lease_cost: LeaseCostModel::default(),
            augment: AugmentConfig::default(),
            weather: WeatherConfig::default(),
            sim: SimSection::default(),
        }
    }
}

/// Keys in `given` that the config schema does not know.
fn unknown_keys(given: &Value, known: &Value, prefix: &str, out: &mut Vec<String>) {
    if let (Value::Object(g), Value::Object(k)) = (given, known) {
        for (key, v) in g {
            let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
            match k.get(key) {
                Some(kv) => unknown_keys(v, kv, &path, out),
                None => out.push(path),
            }
        }
    }
}

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Applies `key.path=value` to a JSON document. The path must exist.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{assignment}` is not of the form key.path=value"))?;
    let mut node = &mut *doc;
    for key in path.split('.') {
        node = node
            .as_object_mut()
            .and_then(|m| m.get_mut(key))
            .ok_or_else(|| anyhow!("unknown config key `{path}`"))?;
    }
    *node = parse_value(raw);
    Ok(())
}

impl RunConfig {
    /// Loads the JSON config (defaults when `path` is `None`), resolves
    /// relative input paths against the config's directory and applies the
    /// command-line overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Self> {
        let known = serde_json::to_value(RunConfig::default())?;
        let mut doc = known.clone();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            let given: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?;
            let mut unknown = Vec::new();
            unknown_keys(&given, &known, "", &mut unknown);
            if !unknown.is_empty() {
                bail!("unknown config keys in {}: {}", p.display(), unknown.join(", "));
            }
            let mut cfg: RunConfig =
                serde_json::from_value(given).with_context(|| format!("parsing config {}", p.display()))?;
            let base = p.parent().unwrap_or(Path::new(""));
            for slot in cfg.inputs.paths_mut() {
                if let Some(rel) = slot.as_mut().filter(|r| r.is_relative()) {
                    *rel = base.join(&*rel);
                }
            }
            doc = serde_json::to_value(cfg)?;
        }
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let mut cfg: RunConfig = serde_json::from_value(doc).context("applying overrides")?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.sim.run.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.los.validate()?;
        self.latency.validate()?;
        self.mw_cost.validate()?;
        self.lease_cost.validate()?;
        self.weather.attenuation.validate()?;
        self.sim.run.validate()?;
        if self.design.budgets.is_empty() || self.design.budgets.iter().any(|b| !(*b >= 0.0)) {
            bail!("design.budgets must be a non-empty list of non-negative budgets");
        }
        if !(self.aggregate_gbps > 0.0) {
            bail!("aggregate_gbps must be positive");
        }
        if self.weather.interval_minutes <= 0 {
            bail!("weather.interval_minutes must be positive");
        }
        Ok(())
    }

    /// Budget used by commands that need a single design.
    pub fn final_budget(&self) -> f64 {
        *self.design.budgets.last().expect("validated non-empty")
    }

    pub fn require<'a>(&self, slot: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        slot.as_deref().ok_or_else(|| anyhow!("config key inputs.{key} is required for this command"))
    }
}
