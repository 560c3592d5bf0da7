use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{DesignInput, MwRoute, SquareMatrix};
use crate::fiber::FiberGraph;
use crate::geo::{haversine_km, LatencyModel, Medium};
use crate::los::HopGraph;
use crate::traffic::{Site, TrafficMatrix};
use crate::{par, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildOptions {
    /// Towers within this distance of a site connect to it directly.
    pub attach_radius_km: f64,
    /// Budget in towers.
    pub budget: f64,
    /// Route inflation over the geodesic when no conduit graph is given.
    pub fiber_route_inflation: f64,
    pub latency: LatencyModel,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            attach_radius_km: 10.0,
            budget: 0.0,
            fiber_route_inflation: 1.0,
            latency: LatencyModel::default(),
        }
    }
}

/// How a site reaches the conduit graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberAccess {
    pub endpoint: usize,
    pub access_km: f64,
}

#[derive(Clone, Copy, PartialEq)]
struct Item(f64, usize);
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

/// Sites first, then towers; sites other than the source are never relayed
/// through.
struct SiteTowerGraph {
    n_sites: usize,
    adj: Vec<Vec<(usize, f64)>>,
}

impl SiteTowerGraph {
    fn new(sites: &[Site], hops: &HopGraph, attach_km: f64) -> Self {
        let n = sites.len();
        let mut adj = vec![Vec::new(); n + hops.towers.len()];
        for (si, s) in sites.iter().enumerate() {
            for (ti, t) in hops.towers.iter().enumerate() {
                let km = haversine_km(s.location, t.location);
                if km <= attach_km {
                    let w = km.max(1e-9);
                    adj[si].push((n + ti, w));
                    adj[n + ti].push((si, w));
                }
            }
        }
        for (a, b, w) in hops.graph.edges() {
            adj[n + a].push((n + b, w));
            adj[n + b].push((n + a, w));
        }
        Self { n_sites: n, adj }
    }

    fn from_site(&self, src: usize) -> (Vec<f64>, Vec<usize>) {
        let mut dist = vec![f64::INFINITY; self.adj.len()];
        let mut prev = vec![usize::MAX; self.adj.len()];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(Item(0.0, src));
        while let Some(Item(d, u)) = heap.pop() {
            if d > dist[u] || (u < self.n_sites && u != src) {
                continue;
            }
            for &(v, w) in &self.adj[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    prev[v] = u;
                    heap.push(Item(nd, v));
                }
            }
        }
        (dist, prev)
    }
}

/// Nearest conduit endpoint for each site, ties to the lower index.
pub fn fiber_access(sites: &[Site], fiber: &FiberGraph) -> Result<Vec<FiberAccess>> {
    if fiber.endpoints.is_empty() {
        return Err(Error::param("conduit graph has no endpoints"));
    }
    Ok(sites
        .iter()
        .map(|s| {
            let (endpoint, access_km) = fiber
                .endpoints
                .iter()
                .enumerate()
                .map(|(i, e)| (i, haversine_km(s.location, e.location)))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .expect("non-empty");
            FiberAccess { endpoint, access_km }
        })
        .collect())
}

/// Assembles an optimization instance from sites, a tower hop graph and an
/// optional conduit graph.
pub fn build_design_input(
    sites: &[Site],
    traffic: &TrafficMatrix,
    hops: &HopGraph,
    fiber: Option<&FiberGraph>,
    opts: &BuildOptions,
) -> Result<DesignInput> {
    opts.latency.validate()?;
    if !(opts.attach_radius_km >= 0.0) || !(opts.fiber_route_inflation >= 1.0) {
        return Err(Error::param("attach radius must be >= 0 and fiber inflation >= 1"));
    }
    let n = sites.len();
    if n < 2 {
        return Err(Error::param("a design needs at least two sites"));
    }
    if traffic.sites().iter().zip(sites).any(|(a, b)| *a != b.id) || traffic.len() != n {
        return Err(Error::DimensionMismatch("traffic matrix sites differ from design sites".into()));
    }
    let slow = opts.latency.slowdown(Medium::Fiber);
    let geodesic = SquareMatrix::from_fn(n, |i, j| haversine_km(sites[i].location, sites[j].location));

    let g = SiteTowerGraph::new(sites, hops, opts.attach_radius_km);
    let trees = par::map_range(n, |s| g.from_site(s));
    let mut mw_km = SquareMatrix::filled(n, None);
    let mut mw_cost = SquareMatrix::filled(n, 0.0);
    let mut routes = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let (dist, prev) = &trees[i];
            if !dist[j].is_finite() {
                continue;
            }
            let mut path = vec![j];
            while *path.last().unwrap() != i {
                path.push(prev[*path.last().unwrap()]);
            }
            path.reverse();
            let towers: Vec<usize> = path[1..path.len() - 1].iter().map(|&v| v - n).collect();
            let m = dist[j].max(geodesic[(i, j)]);
            mw_km[(i, j)] = Some(m);
            mw_km[(j, i)] = Some(m);
            mw_cost[(i, j)] = towers.len() as f64;
            mw_cost[(j, i)] = towers.len() as f64;
            let node = |v: usize| {
                if v < n {
                    (sites[v].id.clone(), sites[v].location)
                } else {
                    (hops.towers[v - n].id.clone(), hops.towers[v - n].location)
                }
            };
            routes.push(MwRoute {
                a: i,
                b: j,
                nodes: path.iter().map(|&v| node(v).0).collect(),
                points: path.iter().map(|&v| node(v).1).collect(),
                towers: towers.iter().map(|&t| hops.towers[t].id.clone()).collect(),
            });
        }
    }

    let fiber_km_equiv = match fiber {
        Some(f) => {
            let access = fiber_access(sites, f)?;
            let eps: Vec<usize> = access.iter().map(|a| a.endpoint).collect();
            let apsp = f.graph.all_pairs_site_paths(&eps);
            let mut o = SquareMatrix::filled(n, 0.0);
            for i in 0..n {
                for j in (i + 1)..n {
                    let core = apsp
                        .get(i, j)
                        .ok_or_else(|| Error::Disconnected(sites[i].id.clone(), sites[j].id.clone()))?;
                    let km = (access[i].access_km + core + access[j].access_km).max(geodesic[(i, j)]);
                    o[(i, j)] = slow * km;
                    o[(j, i)] = slow * km;
                }
            }
            o
        }
        None => SquareMatrix::from_fn(n, |i, j| slow * opts.fiber_route_inflation * geodesic[(i, j)]),
    };

    let input = DesignInput {
        sites: sites.to_vec(),
        traffic: traffic.clone(),
        geodesic_km: geodesic,
        mw_km,
        mw_cost,
        fiber_km_equiv,
        budget: opts.budget,
        fiber_slowdown: slow,
        mw_routes: routes,
    };
    input.validate()?;
    Ok(input)
}
