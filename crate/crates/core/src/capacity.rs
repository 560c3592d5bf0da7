//! Absolute demand routing, parallel-series augmentation and microwave
//! costing.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::design::{DesignInput, LinkId, NetworkDesign};
use crate::geo::{haversine_km, Medium};
use crate::los::HopGraph;
use crate::traffic::TrafficMatrix;
use crate::{par, Error, Result};

/// Seconds in a year of 365.25 days.
pub const SECONDS_PER_YEAR: f64 = 365.25 * 86_400.0;
pub const DEFAULT_SEPARATION_DEG: f64 = 6.0;

/// Per-link load in Gbps per direction, split by medium.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkLoads {
    pub mw: BTreeMap<LinkId, f64>,
    pub fiber: BTreeMap<LinkId, f64>,
    /// Sum of all pair demands.
    pub injected_gbps: f64,
}

impl LinkLoads {
    pub fn get(&self, medium: Medium, l: LinkId) -> f64 {
        let m = match medium {
            Medium::Mw => &self.mw,
            Medium::Fiber => &self.fiber,
        };
        m.get(&LinkId::new(l.a, l.b)).copied().unwrap_or(0.0)
    }
}

/// Places each pair's demand `h * aggregate_gbps` on every segment of its
/// routed path.
pub fn route_demand(design: &NetworkDesign, traffic: &TrafficMatrix, aggregate_gbps: f64) -> Result<LinkLoads> {
    if !(aggregate_gbps >= 0.0) {
        return Err(Error::param("aggregate demand must be non-negative"));
    }
    let mut out = LinkLoads::default();
    for r in &design.routes {
        if r.s.max(r.t) >= traffic.len() {
            return Err(Error::DimensionMismatch("route references a site outside the traffic matrix".into()));
        }
        let demand = traffic.get(r.s, r.t) * aggregate_gbps;
        out.injected_gbps += demand;
        for (w, &m) in r.path.windows(2).zip(&r.media) {
            let map = match m {
                Medium::Mw => &mut out.mw,
                Medium::Fiber => &mut out.fiber,
            };
            *map.entry(LinkId::new(w[0], w[1])).or_insert(0.0) += demand;
        }
    }
    Ok(out)
}

/// Smallest `k >= 1` with `k^2 * capacity >= demand`.
pub fn series_needed(demand_gbps: f64, per_series_gbps: f64) -> Result<u32> {
    if !(demand_gbps >= 0.0) || !(per_series_gbps > 0.0) || !demand_gbps.is_finite() {
        return Err(Error::param("demand must be >= 0 and series capacity > 0"));
    }
    let fits = |k: u32| f64::from(k) * f64::from(k) * per_series_gbps >= demand_gbps;
    let mut k = ((demand_gbps / per_series_gbps).sqrt().ceil() as u32).max(1);
    while !fits(k) {
        k += 1;
    }
    while k > 1 && fits(k - 1) {
        k -= 1;
    }
    Ok(k)
}

/// Lateral offset of a parallel tower series at the far end of a hop.
pub fn parallel_spacing_km(hop_km: f64, separation_deg: f64) -> Result<f64> {
    if !(hop_km > 0.0) || !(separation_deg > 0.0 && separation_deg < 90.0) {
        return Err(Error::param("hop length must be positive and separation in (0, 90) degrees"));
    }
    Ok(hop_km * separation_deg.to_radians().tan())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MwCostModel {
    pub link_cost_1gbps: f64,
    pub link_cost_500mbps: f64,
    pub new_tower: f64,
    pub rent_per_tower_year: f64,
    pub term_years: f64,
    pub per_series_capacity_gbps: f64,
}

impl Default for MwCostModel {
    fn default() -> Self {
        Self {
            link_cost_1gbps: 150_000.0,
            link_cost_500mbps: 75_000.0,
            new_tower: 100_000.0,
            rent_per_tower_year: 37_500.0,
            term_years: 5.0,
            per_series_capacity_gbps: 1.0,
        }
    }
}

impl MwCostModel {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.link_cost_1gbps,
            self.link_cost_500mbps,
            self.new_tower,
            self.rent_per_tower_year,
            self.term_years,
        ];
        if all.iter().any(|v| !(*v >= 0.0)) || !(self.per_series_capacity_gbps > 0.0) {
            return Err(Error::param("cost model values must be >= 0 and series capacity > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkAugmentation {
    pub a: String,
    pub b: String,
    pub demand_gbps: f64,
    pub series: u32,
    /// Extra series assembled from existing towers.
    pub series_from_inventory: u32,
    /// Extra series that have to be built from new towers.
    pub shortfall_series: u32,
    pub new_towers: u32,
    /// Tower-to-tower hops of the primary series.
    pub primary_hops: usize,
    /// Tower-to-tower hops across every series.
    pub radio_hops: usize,
    /// Existing towers used by every series, primary first.
    pub towers: Vec<Vec<String>>,
}

impl LinkAugmentation {
    /// New towers needed at each end of every primary hop.
    pub fn hop_category(&self) -> u32 {
        self.shortfall_series
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub links: Vec<LinkAugmentation>,
    /// Hop count by the number of new towers needed at each end.
    pub hop_categories: BTreeMap<u32, usize>,
    pub new_towers: u32,
    /// Distinct existing towers in use.
    pub existing_towers: usize,
}

impl AugmentationPlan {
    pub fn write_links_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "a",
            "b",
            "demand_gbps",
            "series",
            "series_from_inventory",
            "shortfall_series",
            "new_towers",
            "primary_hops",
            "category",
        ])?;
        for l in &self.links {
            w.write_record([
                l.a.clone(),
                l.b.clone(),
                l.demand_gbps.to_string(),
                l.series.to_string(),
                l.series_from_inventory.to_string(),
                l.shortfall_series.to_string(),
                l.new_towers.to_string(),
                l.primary_hops.to_string(),
                l.hop_category().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentOptions {
    /// Towers within this distance of a site can start or end a series.
    pub attach_radius_km: f64,
}

impl Default for AugmentOptions {
    fn default() -> Self {
        Self { attach_radius_km: 10.0 }
    }
}

/// Series chains between the two sites of a link: the graph is the hop graph
/// plus the two sites attached to towers in range.
fn series_chains(
    input: &DesignInput,
    l: LinkId,
    hops: &HopGraph,
    opts: &AugmentOptions,
    count: usize,
) -> Result<Vec<Vec<usize>>> {
    let mut g = hops.graph.clone();
    let ends = [l.a, l.b].map(|s| &input.sites[s]);
    let mut idx = [0; 2];
    for (k, s) in ends.iter().enumerate() {
        idx[k] = g.add_node(format!("\u{0}site:{}", s.id))?;
        for (t, tower) in hops.towers.iter().enumerate() {
            let km = haversine_km(s.location, tower.location);
            if km <= opts.attach_radius_km {
                g.add_edge(idx[k], t, km.max(1e-9))?;
            }
        }
    }
    Ok(g.tower_disjoint_paths(idx[0], idx[1], count)
        .into_iter()
        .map(|p| p.interior().to_vec())
        .filter(|towers| !towers.is_empty())
        .collect())
}

fn tower_hops(towers: usize) -> usize {
    towers.saturating_sub(1)
}

/// Sizes every built microwave link for its routed demand and assembles the
/// extra series from the tower inventory. Missing series are costed as new
/// towers, one per tower of the primary series.
pub fn augment(
    input: &DesignInput,
    design: &NetworkDesign,
    loads: &LinkLoads,
    hops: Option<&HopGraph>,
    model: &MwCostModel,
    opts: &AugmentOptions,
) -> Result<AugmentationPlan> {
    model.validate()?;
    let per_link = par::map_slice(&design.built, |&l| -> Result<LinkAugmentation> {
        let demand = loads.get(Medium::Mw, l);
        let k = series_needed(demand, model.per_series_capacity_gbps)?;
        let (mut primary, mut chains): (Vec<String>, Vec<Vec<String>>) = match input.mw_route(l) {
            Some(r) => (r.towers.clone(), Vec::new()),
            None => (Vec::new(), Vec::new()),
        };
        let mut primary_towers = if primary.is_empty() {
            input.link_cost(l).round() as usize
        } else {
            primary.len()
        };
        if k > 1 {
            if let Some(hg) = hops {
                let found = series_chains(input, l, hg, opts, k as usize)?;
                let named: Vec<Vec<String>> = found
                    .iter()
                    .map(|c| c.iter().map(|&t| hg.towers[t].id.clone()).collect())
                    .collect();
                if let Some(first) = named.first() {
                    if primary.is_empty() {
                        primary = first.clone();
                        primary_towers = primary.len();
                    }
                }
                chains = named.into_iter().filter(|c| *c != primary).collect();
                chains.retain(|c| c.iter().all(|t| !primary.contains(t)));
                chains.truncate(k as usize - 1);
            }
        }
        let from_inventory = chains.len() as u32;
        let shortfall = k - 1 - from_inventory;
        let primary_hops = tower_hops(primary_towers);
        let radio_hops = primary_hops
            + chains.iter().map(|c| tower_hops(c.len())).sum::<usize>()
            + shortfall as usize * primary_hops;
        let mut towers = vec![primary];
        towers.extend(chains);
        Ok(LinkAugmentation {
            a: input.sites[l.a].id.clone(),
            b: input.sites[l.b].id.clone(),
            demand_gbps: demand,
            series: k,
            series_from_inventory: from_inventory,
            shortfall_series: shortfall,
            new_towers: shortfall * primary_towers as u32,
            primary_hops,
            radio_hops,
            towers,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut hop_categories = BTreeMap::new();
    let mut existing = BTreeSet::new();
    let mut anonymous = 0usize;
    for l in &per_link {
        *hop_categories.entry(l.hop_category()).or_insert(0) += l.primary_hops;
        if l.towers[0].is_empty() {
            anonymous += l.primary_hops + 1;
        }
        for t in l.towers.iter().flatten() {
            existing.insert(t.clone());
        }
    }
    Ok(AugmentationPlan {
        new_towers: per_link.iter().map(|l| l.new_towers).sum(),
        existing_towers: existing.len() + anonymous,
        links: per_link,
        hop_categories,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MwCost {
    pub capex_usd: f64,
    pub rent_usd: f64,
    pub total_usd: f64,
    /// `None` when no traffic is carried.
    pub dollars_per_gb: Option<f64>,
}

/// Capex is one 1 Gbps radio per tower-to-tower hop per series plus new
/// towers; rent covers existing and new towers over the term.
pub fn mw_cost(plan: &AugmentationPlan, model: &MwCostModel, aggregate_gbps: f64) -> Result<MwCost> {
    model.validate()?;
    if !(aggregate_gbps >= 0.0) {
        return Err(Error::param("aggregate demand must be non-negative"));
    }
    let radio_hops: usize = plan.links.iter().map(|l| l.radio_hops).sum();
    let capex = model.link_cost_1gbps * radio_hops as f64 + model.new_tower * f64::from(plan.new_towers);
    let towers = plan.existing_towers as f64 + f64::from(plan.new_towers);
    let rent = model.rent_per_tower_year * towers * model.term_years;
    let total = capex + rent;
    let gb = aggregate_gbps / 8.0 * model.term_years * SECONDS_PER_YEAR;
    Ok(MwCost {
        capex_usd: capex,
        rent_usd: rent,
        total_usd: total,
        dollars_per_gb: (gb > 0.0).then(|| total / gb),
    })
}
