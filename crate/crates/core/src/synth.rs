//! Seeded synthetic data for tests, benches and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::{DesignInput, SquareMatrix};
use crate::geo::{haversine_km, GeoPoint};
use crate::los::{TerrainGrid, Tower};
use crate::traffic::{gravity_matrix, Site};
use crate::Result;

/// Cities with uniformly drawn locations and populations.
pub fn random_sites(n: usize, lat: (f64, f64), lon: (f64, f64), seed: u64) -> Result<Vec<Site>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            Site::city(
                format!("S{i:03}"),
                rng.gen_range(lat.0..lat.1),
                rng.gen_range(lon.0..lon.1),
                rng.gen_range(1e5..5e6),
            )
        })
        .collect()
}

/// Parameters of a random design instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstanceSpec {
    pub n_sites: usize,
    pub lat: (f64, f64),
    pub lon: (f64, f64),
    /// Microwave route length over geodesic.
    pub mw_detour: (f64, f64),
    /// Fiber route length over geodesic, before the fiber slowdown.
    pub fiber_detour: (f64, f64),
    pub km_per_tower: f64,
    /// Longer pairs get no microwave route.
    pub max_mw_km: f64,
    pub budget: f64,
    pub fiber_slowdown: f64,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self {
            n_sites: 8,
            lat: (33.0, 45.0),
            lon: (-110.0, -80.0),
            mw_detour: (1.0, 1.08),
            fiber_detour: (1.05, 1.8),
            km_per_tower: 70.0,
            max_mw_km: f64::INFINITY,
            budget: 50.0,
            fiber_slowdown: 1.5,
        }
    }
}

impl InstanceSpec {
    pub fn generate(&self, seed: u64) -> Result<DesignInput> {
        let sites = random_sites(self.n_sites, self.lat, self.lon, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let n = sites.len();
        let d = SquareMatrix::from_fn(n, |i, j| haversine_km(sites[i].location, sites[j].location));
        let mut m = SquareMatrix::filled(n, None);
        let mut c = SquareMatrix::filled(n, 0.0);
        let mut o = SquareMatrix::filled(n, 0.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let dij = d[(i, j)];
                let mw = dij * rng.gen_range(self.mw_detour.0..=self.mw_detour.1);
                let fib = self.fiber_slowdown * dij * rng.gen_range(self.fiber_detour.0..=self.fiber_detour.1);
                o[(i, j)] = fib;
                o[(j, i)] = fib;
                if dij <= self.max_mw_km {
                    let towers = (mw / self.km_per_tower).ceil().max(1.0);
                    m[(i, j)] = Some(mw);
                    m[(j, i)] = Some(mw);
                    c[(i, j)] = towers;
                    c[(j, i)] = towers;
                }
            }
        }
        Ok(DesignInput {
            traffic: gravity_matrix(&sites)?,
            sites,
            geodesic_km: d,
            mw_km: m,
            mw_cost: c,
            fiber_km_equiv: o,
            budget: self.budget,
            fiber_slowdown: self.fiber_slowdown,
            mw_routes: Vec::new(),
        })
    }
}

/// Towers every `spacing_km` along the great circle from `a` to `b`,
/// including both ends, with ids `{prefix}{k}`.
pub fn corridor_towers(prefix: &str, a: GeoPoint, b: GeoPoint, spacing_km: f64, height_m: f64) -> Result<Vec<Tower>> {
    let len = haversine_km(a, b);
    let steps = (len / spacing_km).ceil().max(1.0) as usize;
    (0..=steps)
        .map(|k| {
            let p = a.interpolate(b, k as f64 / steps as f64);
            Tower::new(format!("{prefix}{k}"), p.lat, p.lon, height_m)
        })
        .collect()
}

/// Random towers in a box.
pub fn random_towers(n: usize, lat: (f64, f64), lon: (f64, f64), height_m: (f64, f64), seed: u64) -> Result<Vec<Tower>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            Tower::new(
                format!("T{i:05}"),
                rng.gen_range(lat.0..lat.1),
                rng.gen_range(lon.0..lon.1),
                rng.gen_range(height_m.0..=height_m.1),
            )
        })
        .collect()
}

/// Rolling terrain: a sum of a few random sinusoidal ridges.
pub fn rolling_terrain(
    south: f64,
    west: f64,
    north: f64,
    east: f64,
    cell_deg: f64,
    relief_m: f64,
    seed: u64,
) -> Result<TerrainGrid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(0.3..1.0),
                rng.gen_range(0.5..3.0),
                rng.gen_range(0.5..3.0),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let norm: f64 = waves.iter().map(|w| w.0).sum();
    TerrainGrid::from_fn(south, west, north, east, cell_deg, |lat, lon| {
        let s: f64 = waves
            .iter()
            .map(|&(amp, kl, ko, ph)| amp * (kl * lat + ko * lon + ph).sin())
            .sum();
        relief_m * (0.5 + 0.5 * s / norm)
    })
}
