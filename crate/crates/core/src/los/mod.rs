//! Line-of-sight feasibility of tower-to-tower microwave hops.
//!
//! A hop is feasible when it is within range and, at every sample along the
//! great-circle path, the straight line between the two antennas clears the
//! surface elevation plus the Earth bulge, the first Fresnel zone radius and
//! an optional obstruction margin.

mod terrain;
mod towers;

use std::collections::{BTreeMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geo::{haversine_km, GeoPoint};
use crate::graph::WeightedGraph;
use crate::{par, Error, Result};

pub use terrain::TerrainGrid;
pub use towers::{read_hops_csv, read_towers_csv, write_hops_csv, write_towers_csv};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tower {
    pub id: String,
    pub location: GeoPoint,
    /// Structure height above ground.
    pub height_m: f64,
    /// Ground elevation above sea level; sampled from terrain when absent.
    pub ground_elevation_m: Option<f64>,
}

impl Tower {
    pub fn new(id: impl Into<String>, lat: f64, lon: f64, height_m: f64) -> Result<Self> {
        let t = Self {
            id: id.into(),
            location: GeoPoint::new(lat, lon)?,
            height_m,
            ground_elevation_m: None,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn with_ground(mut self, elevation_m: f64) -> Self {
        self.ground_elevation_m = Some(elevation_m);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.location.validate()?;
        if !(self.height_m > 0.0) {
            return Err(Error::param(format!("tower `{}` has non-positive height", self.id)));
        }
        Ok(())
    }

    fn antenna_altitude(&self, terrain: &TerrainGrid, usable_fraction: f64) -> Result<f64> {
        let ground = match self.ground_elevation_m {
            Some(g) => g,
            None => terrain.sample(self.location)?,
        };
        Ok(ground + usable_fraction * self.height_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LosParams {
    pub f_ghz: f64,
    pub k_factor: f64,
    pub max_range_km: f64,
    pub usable_height_fraction: f64,
    pub obstruction_margin_m: f64,
    pub sample_step_m: f64,
}

impl Default for LosParams {
    fn default() -> Self {
        Self {
            f_ghz: 11.0,
            k_factor: 1.3,
            max_range_km: 100.0,
            usable_height_fraction: 1.0,
            obstruction_margin_m: 0.0,
            sample_step_m: 30.0,
        }
    }
}

impl LosParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.f_ghz > 0.0
            && self.k_factor > 0.0
            && self.max_range_km > 0.0
            && self.usable_height_fraction > 0.0
            && self.usable_height_fraction <= 1.0
            && self.sample_step_m > 0.0
            && self.obstruction_margin_m >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("invalid line-of-sight parameters {self:?}")))
        }
    }
}

/// Fresnel zone radius at the middle of a hop of length `d_km`:
/// `8.7 m * sqrt(d / 1 km) * (f / 1 GHz)^-1/2`.
pub fn fresnel_radius_m(d_km: f64, f_ghz: f64) -> Result<f64> {
    if d_km < 0.0 || !(f_ghz > 0.0) {
        return Err(Error::param("fresnel radius needs d >= 0 and f > 0"));
    }
    Ok(8.7 * d_km.sqrt() / f_ghz.sqrt())
}

/// Fresnel radius at a point `d1_km` / `d2_km` from the two ends, scaled so
/// that the midpoint value equals [`fresnel_radius_m`] of the full hop.
pub fn fresnel_radius_at_m(d1_km: f64, d2_km: f64, f_ghz: f64) -> Result<f64> {
    if d1_km < 0.0 || d2_km < 0.0 {
        return Err(Error::param("negative distance along hop"));
    }
    let total = d1_km + d2_km;
    if total == 0.0 {
        return Ok(0.0);
    }
    fresnel_radius_m(4.0 * d1_km * d2_km / total, f_ghz)
}

/// Effective Earth-curvature bulge at a point `d1_km` / `d2_km` from the
/// hop ends under refraction factor `k_factor`.
pub fn earth_bulge_m(d1_km: f64, d2_km: f64, k_factor: f64) -> Result<f64> {
    if d1_km < 0.0 || d2_km < 0.0 || !(k_factor > 0.0) {
        return Err(Error::param("earth bulge needs d1, d2 >= 0 and K > 0"));
    }
    Ok(d1_km * d2_km / (12.74 * k_factor))
}

/// Whether the hop `a`-`b` is within range and has full clearance.
pub fn hop_feasible(a: &Tower, b: &Tower, terrain: &TerrainGrid, p: &LosParams) -> Result<bool> {
    p.validate()?;
    for t in [a, b] {
        if !terrain.contains(t.location) {
            return Err(Error::OutOfBounds {
                lat: t.location.lat,
                lon: t.location.lon,
            });
        }
    }
    feasible_unchecked(a, b, terrain, p)
}

fn feasible_unchecked(a: &Tower, b: &Tower, terrain: &TerrainGrid, p: &LosParams) -> Result<bool> {
    // evaluate in a canonical orientation so the answer is exactly symmetric
    let (a, b) = if a.id <= b.id { (a, b) } else { (b, a) };
    let dist = haversine_km(a.location, b.location);
    if dist > p.max_range_km {
        return Ok(false);
    }
    let ha = a.antenna_altitude(terrain, p.usable_height_fraction)?;
    let hb = b.antenna_altitude(terrain, p.usable_height_fraction)?;
    let segments = (dist * 1000.0 / p.sample_step_m).ceil() as usize;
    for i in 1..segments {
        let t = i as f64 / segments as f64;
        let (d1, d2) = (t * dist, (1.0 - t) * dist);
        let point = a.location.interpolate(b.location, t);
        let required = terrain.sample_unchecked(point)
            + earth_bulge_m(d1, d2, p.k_factor)?
            + fresnel_radius_at_m(d1, d2, p.f_ghz)?
            + p.obstruction_margin_m;
        let line = ha + t * (hb - ha);
        if line < required {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hop {
    pub tower_a: String,
    pub tower_b: String,
    pub length_km: f64,
}

/// Towers and the feasible hops between them. Graph node `i` is `towers[i]`.
#[derive(Debug, Clone)]
pub struct HopGraph {
    pub towers: Vec<Tower>,
    pub graph: WeightedGraph,
}

impl HopGraph {
    /// Hops sorted by tower index pair.
    pub fn hops(&self) -> Vec<Hop> {
        self.graph
            .edges()
            .into_iter()
            .map(|(a, b, w)| Hop {
                tower_a: self.towers[a].id.clone(),
                tower_b: self.towers[b].id.clone(),
                length_km: w,
            })
            .collect()
    }

    pub fn hop_count(&self) -> usize {
        self.graph.edge_count()
    }

    /// Rebuilds a graph from a tower list and previously computed hops.
    pub fn from_hops(towers: Vec<Tower>, hops: &[Hop]) -> Result<Self> {
        let mut graph = WeightedGraph::with_nodes(towers.iter().map(|t| t.id.clone()))?;
        for h in hops {
            graph.add_edge_by_id(&h.tower_a, &h.tower_b, h.length_km)?;
        }
        Ok(Self { towers, graph })
    }
}

/// Evaluates every tower pair within range and keeps the feasible hops.
pub fn build_hop_graph(towers: &[Tower], terrain: &TerrainGrid, p: &LosParams) -> Result<HopGraph> {
    p.validate()?;
    if towers.is_empty() {
        return Err(Error::param("tower list is empty"));
    }
    let mut seen = HashSet::new();
    for t in towers {
        t.validate()?;
        if !seen.insert(t.id.as_str()) {
            return Err(Error::DuplicateId(t.id.clone()));
        }
        if !terrain.contains(t.location) {
            return Err(Error::OutOfBounds {
                lat: t.location.lat,
                lon: t.location.lon,
            });
        }
    }
    // sweep in latitude order so only towers within range in latitude pair up
    let mut by_lat: Vec<usize> = (0..towers.len()).collect();
    by_lat.sort_by(|&a, &b| towers[a].location.lat.total_cmp(&towers[b].location.lat));
    let lat_window = p.max_range_km / crate::geo::EARTH_RADIUS_KM * 180.0 / std::f64::consts::PI;
    let found = par::flat_map_range(by_lat.len(), |k| {
        let a = &towers[by_lat[k]];
        let mut out = Vec::new();
        for &j in &by_lat[k + 1..] {
            let b = &towers[j];
            if b.location.lat - a.location.lat > lat_window {
                break;
            }
            if haversine_km(a.location, b.location) > p.max_range_km {
                continue;
            }
            out.push(feasible_unchecked(a, b, terrain, p).map(|ok| (by_lat[k], j, ok)));
        }
        out
    });
    let mut edges = Vec::new();
    for r in found {
        let (a, b, ok) = r?;
        if ok {
            edges.push((a.min(b), a.max(b)));
        }
    }
    edges.sort_unstable();
    let mut graph = WeightedGraph::with_nodes(towers.iter().map(|t| t.id.clone()))?;
    for (a, b) in edges {
        let w = haversine_km(towers[a].location, towers[b].location).max(f64::MIN_POSITIVE);
        graph.add_edge(a, b, w)?;
    }
    Ok(HopGraph {
        towers: towers.to_vec(),
        graph,
    })
}

/// Drops towers shorter than `min_height_m`, then keeps at most
/// `max_per_cell` towers per `grid_cell_deg` square cell by seeded uniform
/// sampling without replacement. Survivors keep their input order.
pub fn cull_towers(
    towers: &[Tower],
    min_height_m: f64,
    grid_cell_deg: f64,
    max_per_cell: usize,
    seed: u64,
) -> Result<Vec<Tower>> {
    if max_per_cell == 0 || !(grid_cell_deg > 0.0) {
        return Err(Error::param("cull needs max_per_cell > 0 and a positive cell size"));
    }
    let mut cells: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, t) in towers.iter().enumerate() {
        if t.height_m < min_height_m {
            continue;
        }
        let key = (
            (t.location.lat / grid_cell_deg).floor() as i64,
            (t.location.lon / grid_cell_deg).floor() as i64,
        );
        cells.entry(key).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; towers.len()];
    for members in cells.values() {
        if members.len() <= max_per_cell {
            members.iter().for_each(|&i| keep[i] = true);
        } else {
            for k in rand::seq::index::sample(&mut rng, members.len(), max_per_cell) {
                keep[members[k]] = true;
            }
        }
    }
    Ok(towers
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(t, _)| t.clone())
        .collect())
}
