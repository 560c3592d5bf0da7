use std::cmp::Ordering;
use std::collections::BinaryHeap;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::{Arc, Flow, RoutingScheme, Topology};
use crate::{Error, Result};

/// Weighted next hops per destination and node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingTable {
    n: usize,
    /// Indexed by `dst * n + node`; `(arc, weight)` pairs.
    entries: Vec<Vec<(usize, f64)>>,
}

impl RoutingTable {
    pub fn next_hops(&self, node: usize, dst: usize) -> &[(usize, f64)] {
        &self.entries[dst * self.n + node]
    }

    /// Checks adjacency, weight sums and loop freedom.
    pub fn validate(&self, topo: &Topology) -> Result<()> {
        let arcs = topo.arcs();
        for d in 0..self.n {
            for u in 0..self.n {
                let hops = self.next_hops(u, d);
                if u == d {
                    if !hops.is_empty() {
                        return Err(Error::param("destination has next hops"));
                    }
                    continue;
                }
                let sum: f64 = hops.iter().map(|h| h.1).sum();
                if hops.iter().any(|&(a, w)| arcs[a].from != u || !(w > 0.0 && w <= 1.0)) || (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::param(format!("bad next hops at node {u} for destination {d}")));
                }
            }
            // positive-weight graph towards d must be acyclic
            let mut state = vec![0u8; self.n];
            for start in 0..self.n {
                if state[start] != 0 {
                    continue;
                }
                let mut stack = vec![(start, 0usize)];
                state[start] = 1;
                while let Some(&mut (u, ref mut k)) = stack.last_mut() {
                    let hops = self.next_hops(u, d);
                    if *k < hops.len() {
                        let v = arcs[hops[*k].0].to;
                        *k += 1;
                        match state[v] {
                            0 => {
                                state[v] = 1;
                                stack.push((v, 0));
                            }
                            1 => return Err(Error::param(format!("routing loop towards destination {d}"))),
                            _ => {}
                        }
                    } else {
                        state[u] = 2;
                        stack.pop();
                    }
                }
            }
        }
        Ok(())
    }
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

/// Distance from every node to `dst` over arc lengths, and the chosen next
/// arc (smallest index among ties).
fn tree_to(n: usize, arcs: &[Arc], into: &[Vec<usize>], len: &[f64], dst: usize) -> (Vec<f64>, Vec<usize>) {
    let mut dist = vec![f64::INFINITY; n];
    let mut next = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[dst] = 0.0;
    heap.push(Item(0.0, dst));
    while let Some(Item(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &a in &into[v] {
            let u = arcs[a].from;
            let nd = d + len[a];
            if nd < dist[u] || (nd == dist[u] && a < next[u] && u != dst) {
                if nd < dist[u] {
                    heap.push(Item(nd, u));
                }
                dist[u] = nd;
                next[u] = a;
            }
        }
    }
    (dist, next)
}

fn arcs_into(n: usize, arcs: &[Arc]) -> Vec<Vec<usize>> {
    let mut into = vec![Vec::new(); n];
    for (k, a) in arcs.iter().enumerate() {
        into[a.to].push(k);
    }
    into
}

/// Per-destination demand matrix `dem[dst][src]`.
fn demands(n: usize, flows: &[Flow]) -> Result<Vec<Vec<f64>>> {
    let mut dem = vec![vec![0.0; n]; n];
    for f in flows {
        if f.src >= n || f.dst >= n || f.src == f.dst || !(f.gbps >= 0.0) {
            return Err(Error::param("flow has bad endpoints or rate"));
        }
        dem[f.dst][f.src] += f.gbps;
    }
    Ok(dem)
}

/// Routes each destination's demand down its tree; returns arc flows and
/// the demand-weighted tree distance.
fn push_tree(dist: &[f64], next: &[usize], arcs: &[Arc], dem: &[f64], flow: &mut [f64]) -> f64 {
    let n = dist.len();
    let mut order: Vec<usize> = (0..n).filter(|&u| dist[u].is_finite()).collect();
    order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
    let mut acc = dem.to_vec();
    let mut cost = 0.0;
    for u in order {
        cost += dem[u] * dist[u];
        if next[u] != usize::MAX && acc[u] > 0.0 {
            flow[next[u]] += acc[u];
            let v = arcs[next[u]].to;
            acc[v] += acc[u];
        }
    }
    cost
}

/// Splittable routing of a demand set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittableSolution {
    /// Arc flows per destination, `flows[dst][arc]`.
    pub flows: Vec<Vec<f64>>,
    pub max_utilization: f64,
    /// Certified lower bound on the optimal maximum utilization.
    pub lower_bound: f64,
    pub iterations: usize,
}

impl SplittableSolution {
    /// Largest factor by which the demand can be scaled while fitting.
    pub fn concurrent_flow(&self) -> f64 {
        1.0 / self.max_utilization
    }
}

fn softmax_potential(util: &[f64], beta: f64) -> f64 {
    let top = util.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    top + util.iter().map(|u| (beta * (u - top)).exp()).sum::<f64>().ln() / beta
}

const MAX_ITERATIONS: usize = 20_000;

/// Minimizes the maximum arc utilization by Frank-Wolfe on a soft-max
/// potential, stopping once the utilization is certified within
/// `tolerance` of optimal by the dual bound. `latency_bias` > 0 steers
/// equally balanced choices onto lower-latency paths.
pub fn solve_splittable(topo: &Topology, flows: &[Flow], tolerance: f64, latency_bias: f64) -> Result<SplittableSolution> {
    let n = topo.node_count();
    let arcs = topo.arcs();
    let m = arcs.len();
    let into = arcs_into(n, &arcs);
    let dem = demands(n, flows)?;
    let dests: Vec<usize> = (0..n).filter(|&d| dem[d].iter().any(|&x| x > 0.0)).collect();
    let cap: Vec<f64> = arcs.iter().map(|a| a.capacity_gbps).collect();
    let lat: Vec<f64> = arcs.iter().map(|a| a.prop_s).collect();
    let mut x = vec![vec![0.0; m]; n];
    for &d in &dests {
        let (dist, next) = tree_to(n, &arcs, &into, &lat, d);
        for (s, &v) in dem[d].iter().enumerate() {
            if v > 0.0 && !dist[s].is_finite() {
                return Err(Error::Disconnected(topo.nodes[s].clone(), topo.nodes[d].clone()));
            }
        }
        push_tree(&dist, &next, &arcs, &dem[d], &mut x[d]);
    }
    let util_of = |x: &[Vec<f64>]| -> Vec<f64> {
        (0..m)
            .map(|a| dests.iter().map(|&d| x[d][a]).sum::<f64>() / cap[a])
            .collect()
    };
    let mut util = util_of(&x);
    let mut upper = util.iter().copied().fold(0.0, f64::max);
    let mut lower: f64 = 0.0;
    let total: f64 = dem.iter().flatten().sum();
    if total == 0.0 || m == 0 {
        return Ok(SplittableSolution {
            flows: x,
            max_utilization: upper,
            lower_bound: upper,
            iterations: 0,
        });
    }
    let mean_lat = lat.iter().sum::<f64>() / m as f64;
    let mut it = 0;
    while it < MAX_ITERATIONS {
        it += 1;
        let gap = if lower > 0.0 { upper / lower - 1.0 } else { 1.0 };
        if gap <= tolerance {
            break;
        }
        let delta = (0.25 * gap).clamp(tolerance / 4.0, 0.5);
        let beta = (m as f64).ln().max(1.0) / (delta * upper);
        let top = util.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = util.iter().map(|u| (beta * (u - top)).exp()).collect();
        let wsum: f64 = w.iter().sum();
        let raw: Vec<f64> = (0..m).map(|a| w[a] / wsum / cap[a]).collect();
        // keep every length strictly positive so next-hop trees stay acyclic
        let floor = raw.iter().copied().fold(0.0, f64::max) * 1e-12;
        let len: Vec<f64> = raw.iter().map(|&l| l.max(floor)).collect();
        let norm: f64 = (0..m).map(|a| cap[a] * len[a]).sum();
        let biased: Vec<f64> = if latency_bias > 0.0 {
            let scale = len.iter().sum::<f64>() / m as f64 * latency_bias / mean_lat;
            (0..m).map(|a| len[a] + scale * lat[a]).collect()
        } else {
            len.clone()
        };
        let mut y = vec![vec![0.0; m]; n];
        let mut bound = 0.0;
        for &d in &dests {
            let (dist, next) = tree_to(n, &arcs, &into, &biased, d);
            push_tree(&dist, &next, &arcs, &dem[d], &mut y[d]);
            if latency_bias > 0.0 {
                let (pure, _) = tree_to(n, &arcs, &into, &len, d);
                bound += dem[d].iter().zip(&pure).map(|(v, dd)| v * dd).sum::<f64>();
            } else {
                bound += dem[d].iter().zip(&dist).map(|(v, dd)| v * dd).sum::<f64>();
            }
        }
        // weak duality: demand-weighted distance over capacity-weighted length
        lower = lower.max(bound / norm);
        let uy = util_of(&y);
        let phi = |g: f64| -> f64 {
            let mix: Vec<f64> = (0..m).map(|a| (1.0 - g) * util[a] + g * uy[a]).collect();
            softmax_potential(&mix, beta)
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..60 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if phi(m1) <= phi(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let g = 0.5 * (lo + hi);
        if g <= 0.0 {
            continue;
        }
        for &d in &dests {
            for a in 0..m {
                x[d][a] = (1.0 - g) * x[d][a] + g * y[d][a];
            }
        }
        util = util_of(&x);
        upper = util.iter().copied().fold(0.0, f64::max);
    }
    if lower > 0.0 && upper / lower - 1.0 > tolerance {
        warn!("splittable routing stopped at gap {:.4} after {it} iterations", upper / lower - 1.0);
    }
    debug!("splittable routing: max utilization {upper:.6}, bound {lower:.6}, {it} iterations");
    Ok(SplittableSolution {
        flows: x,
        max_utilization: upper,
        lower_bound: lower,
        iterations: it,
    })
}

/// Removes circulations from one destination's arc flow.
fn cancel_cycles(n: usize, arcs: &[Arc], flow: &mut [f64], eps: f64) {
    loop {
        for f in flow.iter_mut() {
            if *f <= eps {
                *f = 0.0;
            }
        }
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (a, &f) in flow.iter().enumerate() {
            if f > 0.0 {
                out[arcs[a].from].push(a);
            }
        }
        let Some(cycle) = find_cycle(n, arcs, &out) else {
            return;
        };
        let min = cycle.iter().map(|&a| flow[a]).fold(f64::INFINITY, f64::min);
        for &a in &cycle {
            flow[a] -= min;
        }
        let cut = cycle.iter().copied().min_by(|&p, &q| flow[p].total_cmp(&flow[q])).unwrap();
        flow[cut] = 0.0;
    }
}

fn find_cycle(n: usize, arcs: &[Arc], out: &[Vec<usize>]) -> Option<Vec<usize>> {
    let mut state = vec![0u8; n];
    let mut via = vec![usize::MAX; n];
    for start in 0..n {
        if state[start] != 0 {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        state[start] = 1;
        while let Some(&mut (u, ref mut k)) = stack.last_mut() {
            if *k < out[u].len() {
                let a = out[u][*k];
                *k += 1;
                let v = arcs[a].to;
                match state[v] {
                    0 => {
                        state[v] = 1;
                        via[v] = a;
                        stack.push((v, 0));
                    }
                    1 => {
                        let mut cycle = vec![a];
                        let mut w = u;
                        while w != v {
                            cycle.push(via[w]);
                            w = arcs[via[w]].from;
                        }
                        return Some(cycle);
                    }
                    _ => {}
                }
            } else {
                state[u] = 2;
                stack.pop();
            }
        }
    }
    None
}

fn shortest_table(topo: &Topology, arcs: &[Arc], into: &[Vec<usize>]) -> Vec<Vec<(usize, f64)>> {
    let n = topo.node_count();
    let lat: Vec<f64> = arcs.iter().map(|a| a.prop_s).collect();
    let mut entries = vec![Vec::new(); n * n];
    for d in 0..n {
        let (_, next) = tree_to(n, arcs, into, &lat, d);
        for u in 0..n {
            if u != d && next[u] != usize::MAX {
                entries[d * n + u] = vec![(next[u], 1.0)];
            }
        }
    }
    entries
}

const SPLIT_TOLERANCE: f64 = 0.005;

/// Builds a routing table for `flows` under the given scheme.
pub fn build_routing(topo: &Topology, flows: &[Flow], scheme: RoutingScheme) -> Result<RoutingTable> {
    topo.validate()?;
    let n = topo.node_count();
    let arcs = topo.arcs();
    let into = arcs_into(n, &arcs);
    let dem = demands(n, flows)?;
    let mut entries = shortest_table(topo, &arcs, &into);
    for d in 0..n {
        for s in 0..n {
            if dem[d][s] > 0.0 && entries[d * n + s].is_empty() {
                return Err(Error::Disconnected(topo.nodes[s].clone(), topo.nodes[d].clone()));
            }
        }
    }
    if scheme != RoutingScheme::ShortestPath {
        let bias = if scheme == RoutingScheme::MinMaxUtil { 1e-3 } else { 0.0 };
        let sol = solve_splittable(topo, flows, SPLIT_TOLERANCE, bias)?;
        for d in 0..n {
            let mut f = sol.flows[d].clone();
            let scale = f.iter().copied().fold(0.0, f64::max);
            if scale == 0.0 {
                continue;
            }
            cancel_cycles(n, &arcs, &mut f, scale * 1e-9);
            for u in 0..n {
                if u == d {
                    continue;
                }
                let out: Vec<(usize, f64)> = (0..arcs.len())
                    .filter(|&a| arcs[a].from == u && f[a] > 0.0)
                    .map(|a| (a, f[a]))
                    .collect();
                let sum: f64 = out.iter().map(|o| o.1).sum();
                if sum > 0.0 {
                    entries[d * n + u] = out.into_iter().map(|(a, w)| (a, w / sum)).collect();
                }
            }
        }
    }
    let table = RoutingTable { n, entries };
    table.validate(topo)?;
    Ok(table)
}
