//! Discrete-event packet simulation of a designed network.

mod engine;
mod experiment;
mod routing;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::capacity::LinkLoads;
use crate::design::{DesignInput, NetworkDesign};
use crate::geo::{LatencyModel, Medium};
use crate::traffic::TrafficMatrix;
use crate::{Error, Result};

pub use engine::{run, FlowResult, SimStats};
pub use experiment::{perturbation_experiment, write_experiment_csv, ExperimentRow};
pub use routing::{build_routing, solve_splittable, RoutingTable, SplittableSolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimLink {
    pub a: usize,
    pub b: usize,
    pub km: f64,
    pub medium: Medium,
    /// Per direction.
    pub capacity_gbps: f64,
}

/// Nodes and full-duplex links. Link `k` gives arc `2k` (a to b) and arc
/// `2k + 1` (b to a).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub nodes: Vec<String>,
    pub links: Vec<SimLink>,
    #[serde(default)]
    pub latency: LatencyModel,
}

/// Directed view of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub link: usize,
    pub capacity_gbps: f64,
    pub prop_s: f64,
}

impl Topology {
    pub fn new(nodes: Vec<String>, links: Vec<SimLink>, latency: LatencyModel) -> Result<Self> {
        let t = Self { nodes, links, latency };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        self.latency.validate()?;
        for l in &self.links {
            if l.a >= self.nodes.len() || l.b >= self.nodes.len() || l.a == l.b {
                return Err(Error::param(format!("link {}-{} has bad endpoints", l.a, l.b)));
            }
            if !(l.km > 0.0) || !(l.capacity_gbps > 0.0) {
                return Err(Error::param(format!("link {}-{} needs positive length and capacity", l.a, l.b)));
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn arcs(&self) -> Vec<Arc> {
        self.links
            .iter()
            .enumerate()
            .flat_map(|(k, l)| {
                let prop = self.latency.slowdown(l.medium) * l.km / self.latency.c_vacuum;
                [(l.a, l.b), (l.b, l.a)].map(|(from, to)| Arc {
                    from,
                    to,
                    link: k,
                    capacity_gbps: l.capacity_gbps,
                    prop_s: prop,
                })
            })
            .collect()
    }

    /// Links carried by a design's routes, sized to their routed load with
    /// a floor of `min_capacity_gbps`.
    pub fn from_design(
        input: &DesignInput,
        design: &NetworkDesign,
        loads: &LinkLoads,
        latency: &LatencyModel,
        min_capacity_gbps: f64,
    ) -> Result<Self> {
        if !(min_capacity_gbps > 0.0) {
            return Err(Error::param("minimum capacity must be positive"));
        }
        let mut links = Vec::new();
        for &l in &design.built {
            let km = input.mw_km[(l.a, l.b)].ok_or_else(|| Error::param("built link without microwave route"))?;
            links.push(SimLink {
                a: l.a,
                b: l.b,
                km,
                medium: Medium::Mw,
                capacity_gbps: loads.get(Medium::Mw, l).max(min_capacity_gbps),
            });
        }
        for (&l, &gbps) in &loads.fiber {
            links.push(SimLink {
                a: l.a,
                b: l.b,
                km: input.fiber_km_equiv[(l.a, l.b)] / input.fiber_slowdown,
                medium: Medium::Fiber,
                capacity_gbps: gbps.max(min_capacity_gbps),
            });
        }
        Self::new(input.sites.iter().map(|s| s.id.clone()).collect(), links, *latency)
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RoutingScheme {
    #[default]
    ShortestPath,
    MinMaxUtil,
    ThroughputOptimal,
}

impl std::str::FromStr for RoutingScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shortest_path" => Ok(Self::ShortestPath),
            "min_max_util" => Ok(Self::MinMaxUtil),
            "throughput_optimal" => Ok(Self::ThroughputOptimal),
            _ => Err(Error::param(format!("unknown routing scheme {s}"))),
        }
    }
}

/// How a packet picks among weighted next hops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Multipath {
    #[default]
    PerPacket,
    PerFlow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub packet_bytes: u32,
    pub sim_seconds: f64,
    pub queue_capacity_packets: usize,
    /// Demand at load 1.
    pub aggregate_gbps: f64,
    /// Fraction of the designed-for demand offered.
    pub load: f64,
    pub routing: RoutingScheme,
    pub multipath: Multipath,
    pub warmup_fraction: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            packet_bytes: 500,
            sim_seconds: 1.0,
            queue_capacity_packets: 1000,
            aggregate_gbps: 10.0,
            load: 1.0,
            routing: RoutingScheme::ShortestPath,
            multipath: Multipath::PerPacket,
            warmup_fraction: 0.1,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.packet_bytes == 0 || !(self.sim_seconds > 0.0) {
            return Err(Error::param("packet size and simulated time must be positive"));
        }
        if !(self.aggregate_gbps >= 0.0) || !(self.load >= 0.0) {
            return Err(Error::param("aggregate demand and load must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::param("warm-up fraction must be in [0, 1)"));
        }
        Ok(())
    }
}

/// Constant-rate datagram flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub src: usize,
    pub dst: usize,
    pub gbps: f64,
}

/// One flow per direction of every pair with demand, at
/// `h * aggregate * scale`.
pub fn flows_from_traffic(traffic: &TrafficMatrix, aggregate_gbps: f64, scale: f64) -> Vec<Flow> {
    traffic
        .pairs()
        .filter(|&(_, _, h)| h > 0.0)
        .flat_map(|(s, t, h)| {
            let gbps = h * aggregate_gbps * scale;
            [Flow { src: s, dst: t, gbps }, Flow { src: t, dst: s, gbps }]
        })
        .filter(|f| f.gbps > 0.0)
        .collect()
}

#[cfg(test)]
mod tests;
