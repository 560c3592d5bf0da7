//! Budgeted topology design.
//!
//! Given, for every site pair, the geodesic distance `d`, the shortest
//! direct microwave route `m` with its tower cost `c`, and the
//! latency-equivalent fiber distance `o` (fiber km times the fiber
//! slowdown), choose microwave links within a tower budget to minimize
//!
//! ```text
//! sum over pairs (s, t) of  h[s][t] / d[s][t] * L[s][t]
//! ```
//!
//! where `L` is the latency-equivalent length of the shortest route over
//! built microwave links and the always-available fiber links. With `h`
//! normalized this is the traffic-weighted mean stretch.

mod build;
mod export;
mod matrix;
mod solve;

use serde::{Deserialize, Serialize};

use crate::geo::{haversine_km, Medium};
use crate::graph::WeightedGraph;
use crate::stats::{StretchStats, Weighting};
use crate::traffic::{Site, TrafficMatrix};
use crate::{par, Error, Result};

pub use build::{build_design_input, fiber_access, BuildOptions, FiberAccess};
pub use export::{design_geojson, DesignReport, LinkReport, PairReport};
pub use matrix::SquareMatrix;
pub use solve::{
    candidate_pool, eliminate_dominated, greedy_candidates, solve_exact, solve_heuristic, solve_ladder, ReducedCandidates,
    EXACT_GUARD, LOCAL_SEARCH_MAX_SWAPS,
};

/// A site-to-site link, always stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkId {
    pub a: usize,
    pub b: usize,
}

impl LinkId {
    pub fn new(a: usize, b: usize) -> Self {
        Self {
            a: a.min(b),
            b: a.max(b),
        }
    }
}

/// Tower-level realization of a microwave site-to-site route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MwRoute {
    pub a: usize,
    pub b: usize,
    /// Node ids along the route, site ids at both ends.
    pub nodes: Vec<String>,
    /// Coordinates matching `nodes`.
    pub points: Vec<crate::geo::GeoPoint>,
    /// Ids of the towers among `nodes`.
    pub towers: Vec<String>,
}

impl MwRoute {
    pub fn hop_lengths_km(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| haversine_km(w[0], w[1])).collect()
    }
}

/// One optimization instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignInput {
    pub sites: Vec<Site>,
    /// Relative demand, normalized.
    pub traffic: TrafficMatrix,
    /// Geodesic km.
    pub geodesic_km: SquareMatrix<f64>,
    /// Shortest direct microwave route km; `None` where infeasible.
    pub mw_km: SquareMatrix<Option<f64>>,
    /// Towers used by the microwave route.
    pub mw_cost: SquareMatrix<f64>,
    /// Fiber km already multiplied by the fiber slowdown.
    pub fiber_km_equiv: SquareMatrix<f64>,
    /// Budget in towers.
    pub budget: f64,
    #[serde(default = "default_fiber_slowdown")]
    pub fiber_slowdown: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mw_routes: Vec<MwRoute>,
}

fn default_fiber_slowdown() -> f64 {
    1.5
}

const REL_TOL: f64 = 1e-9;

impl DesignInput {
    pub fn n(&self) -> usize {
        self.sites.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n < 2 {
            return Err(Error::param("a design needs at least two sites"));
        }
        for (name, dim) in [
            ("traffic", self.traffic.len()),
            ("geodesic", self.geodesic_km.n()),
            ("mw", self.mw_km.n()),
            ("cost", self.mw_cost.n()),
            ("fiber", self.fiber_km_equiv.n()),
        ] {
            if dim != n {
                return Err(Error::DimensionMismatch(format!("{name} matrix is {dim}x{dim} for {n} sites")));
            }
        }
        if self.traffic.sites().iter().zip(&self.sites).any(|(a, b)| *a != b.id) {
            return Err(Error::DimensionMismatch("traffic matrix sites differ from design sites".into()));
        }
        if !(self.budget >= 0.0) {
            return Err(Error::param("budget must be non-negative"));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let d = self.geodesic_km[(i, j)];
                if !(d > 0.0) {
                    return Err(Error::param(format!("sites {} and {} coincide", self.sites[i].id, self.sites[j].id)));
                }
                if self.fiber_km_equiv[(i, j)] < self.fiber_slowdown * d * (1.0 - REL_TOL) {
                    return Err(Error::param(format!(
                        "fiber distance {}-{} is below slowdown x geodesic",
                        self.sites[i].id, self.sites[j].id
                    )));
                }
                if let Some(m) = self.mw_km[(i, j)] {
                    if m < d * (1.0 - REL_TOL) {
                        return Err(Error::param(format!(
                            "microwave route {}-{} is shorter than the geodesic",
                            self.sites[i].id, self.sites[j].id
                        )));
                    }
                    if !(self.mw_cost[(i, j)] >= 1.0) {
                        return Err(Error::param(format!(
                            "microwave route {}-{} must cost at least one tower",
                            self.sites[i].id, self.sites[j].id
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Every pair with a feasible microwave route.
    pub fn mw_links(&self) -> Vec<LinkId> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.mw_km[(i, j)].is_some() {
                    out.push(LinkId::new(i, j));
                }
            }
        }
        out
    }

    pub fn link_cost(&self, l: LinkId) -> f64 {
        self.mw_cost[(l.a, l.b)]
    }

    pub fn links_cost(&self, links: &[LinkId]) -> f64 {
        links.iter().fold(0.0, |acc, &l| acc + self.link_cost(l))
    }

    pub fn mw_route(&self, l: LinkId) -> Option<&MwRoute> {
        self.mw_routes.iter().find(|r| LinkId::new(r.a, r.b) == l)
    }

    /// Copy with a different budget.
    pub fn with_budget(&self, budget: f64) -> Self {
        Self { budget, ..self.clone() }
    }
}

/// The routed path of one site pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRoute {
    pub s: usize,
    pub t: usize,
    /// Site indices from `s` to `t`.
    pub path: Vec<usize>,
    /// Medium of each path segment.
    pub media: Vec<Medium>,
    /// Latency-equivalent km.
    pub length_km: f64,
    pub stretch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDesign {
    pub built: Vec<LinkId>,
    /// One route per unordered pair, in `(s, t)` order with `s < t`.
    pub routes: Vec<PairRoute>,
    /// Traffic-weighted stretch.
    pub stats: StretchStats,
    pub towers_used: f64,
    pub objective: f64,
}

impl NetworkDesign {
    pub fn route(&self, s: usize, t: usize) -> &PairRoute {
        let (s, t) = (s.min(t), s.max(t));
        self.routes
            .iter()
            .find(|r| r.s == s && r.t == t)
            .expect("design routes every pair")
    }

    pub fn mean_stretch(&self) -> f64 {
        self.stats.mean
    }
}

/// Hybrid graph of built microwave links and all fiber links; also reports
/// which medium each site-to-site edge uses.
fn hybrid_graph(input: &DesignInput, built: &[LinkId]) -> Result<(WeightedGraph, SquareMatrix<Medium>)> {
    let n = input.n();
    let mut g = WeightedGraph::with_nodes(input.sites.iter().map(|s| s.id.clone()))?;
    let mut media = SquareMatrix::filled(n, Medium::Fiber);
    for i in 0..n {
        for j in (i + 1)..n {
            g.add_edge(i, j, input.fiber_km_equiv[(i, j)])?;
        }
    }
    for &l in built {
        let m = input.mw_km[(l.a, l.b)]
            .ok_or_else(|| Error::param(format!("link {}-{} has no microwave route", l.a, l.b)))?;
        if m < input.fiber_km_equiv[(l.a, l.b)] {
            g.add_edge(l.a, l.b, m)?;
            media[(l.a, l.b)] = Medium::Mw;
            media[(l.b, l.a)] = Medium::Mw;
        }
    }
    Ok((g, media))
}

/// Routes every pair on its shortest hybrid path and summarizes stretch.
pub fn evaluate_design(input: &DesignInput, built: &[LinkId]) -> Result<NetworkDesign> {
    evaluate_links(input, built, true)
}

pub(crate) fn evaluate_links(input: &DesignInput, built: &[LinkId], enforce_budget: bool) -> Result<NetworkDesign> {
    let mut built: Vec<LinkId> = built.iter().map(|l| LinkId::new(l.a, l.b)).collect();
    built.sort();
    built.dedup();
    let towers = input.links_cost(&built);
    if enforce_budget && towers > input.budget * (1.0 + REL_TOL) {
        return Err(Error::param(format!("design uses {towers} towers, budget is {}", input.budget)));
    }
    let (g, media) = hybrid_graph(input, &built)?;
    let n = input.n();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|s| ((s + 1)..n).map(move |t| (s, t))).collect();
    let routes = par::map_slice(&pairs, |&(s, t)| {
        let p = g.shortest_path(s, t).ok_or(Error::Unrouted(s, t))?;
        let segs = p.nodes.windows(2).map(|w| media[(w[0], w[1])]).collect();
        Ok(PairRoute {
            s,
            t,
            media: segs,
            length_km: p.total_weight,
            stretch: p.total_weight / input.geodesic_km[(s, t)],
            path: p.nodes,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let samples: Vec<(f64, f64)> = routes.iter().map(|r| (r.stretch, input.traffic.get(r.s, r.t))).collect();
    let stats = StretchStats::from_weighted(&samples, Weighting::Gravity)
        .ok_or_else(|| Error::param("traffic matrix carries no demand"))?;
    let objective = routes
        .iter()
        .map(|r| input.traffic.get(r.s, r.t) / input.geodesic_km[(r.s, r.t)] * r.length_km)
        .sum();
    Ok(NetworkDesign {
        built,
        routes,
        stats,
        towers_used: towers,
        objective,
    })
}

/// Traffic- and stretch-weighted total latency of a design's routes.
pub fn objective(input: &DesignInput, design: &NetworkDesign) -> Result<f64> {
    let n = input.n();
    if design.routes.len() != n * (n - 1) / 2 {
        let missing = (0..n)
            .flat_map(|s| ((s + 1)..n).map(move |t| (s, t)))
            .find(|&(s, t)| !design.routes.iter().any(|r| r.s == s && r.t == t))
            .unwrap_or((0, 0));
        return Err(Error::Unrouted(missing.0, missing.1));
    }
    Ok(design
        .routes
        .iter()
        .map(|r| input.traffic.get(r.s, r.t) / input.geodesic_km[(r.s, r.t)] * r.length_km)
        .sum())
}
