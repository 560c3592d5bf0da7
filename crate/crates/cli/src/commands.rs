use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hybridnet::capacity::{augment, mw_cost, route_demand, AugmentOptions};
use hybridnet::design::{
    build_design_input, design_geojson, solve_ladder, BuildOptions, DesignInput, DesignReport, NetworkDesign,
};
use hybridnet::fiber::{
    fiber_stretch_stats, lease_cost, provision_wavelengths, prune_links, pruning_curve, write_curve_csv, FiberGraph,
    PairWeights,
};
use hybridnet::los::{build_hop_graph, cull_towers, read_hops_csv, read_towers_csv, write_hops_csv, write_towers_csv};
use hybridnet::los::{HopGraph, TerrainGrid, Tower};
use hybridnet::sim::{build_routing, flows_from_traffic, perturbation_experiment, run, write_experiment_csv, Topology};
use hybridnet::traffic::{gravity_matrix, read_sites_csv, Site, TrafficMatrix};
use hybridnet::weather::{interval_failures, reroute_and_stats, sample_intervals, RainField};
use log::info;
use serde::Serialize;

use crate::config::RunConfig;

pub struct Ctx {
    pub cfg: RunConfig,
    pub out: PathBuf,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

impl Ctx {
    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let p = self.out.join(name);
        Ok(BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn echo_config(&self) -> Result<()> {
        self.write_json("config.effective.json", &self.cfg)
    }

    fn sites(&self) -> Result<Vec<Site>> {
        let p = self.cfg.require(&self.cfg.inputs.sites, "sites")?;
        let sites = read_sites_csv(open(p)?, p)?;
        if sites.is_empty() {
            bail!("site file {} is empty", p.display());
        }
        Ok(sites)
    }

    fn traffic(&self, sites: &[Site]) -> Result<TrafficMatrix> {
        Ok(match &self.cfg.inputs.traffic {
            Some(p) => TrafficMatrix::read_csv(open(p)?, sites.iter().map(|s| s.id.clone()).collect(), p)?,
            None => gravity_matrix(sites)?,
        })
    }

    fn fiber(&self) -> Result<Option<FiberGraph>> {
        let i = &self.cfg.inputs;
        match (&i.fiber_endpoints, &i.fiber_conduits) {
            (Some(e), Some(c)) => Ok(Some(FiberGraph::read_csv(open(e)?, open(c)?, c)?)),
            (None, None) => Ok(None),
            _ => bail!("inputs.fiber_endpoints and inputs.fiber_conduits must be given together"),
        }
    }

    fn towers(&self) -> Result<Vec<Tower>> {
        let p = self.cfg.require(&self.cfg.inputs.towers, "towers")?;
        let towers = read_towers_csv(open(p)?, p)?;
        if towers.is_empty() {
            bail!("tower file {} is empty", p.display());
        }
        Ok(towers)
    }

    fn terrain(&self, towers: &[Tower]) -> Result<TerrainGrid> {
        if let Some(p) = &self.cfg.inputs.terrain {
            return Ok(TerrainGrid::load(p)?);
        }
        info!("no terrain given; using sea-level ground over the tower extent");
        let (mut s, mut w, mut n, mut e) = (90.0f64, 180.0f64, -90.0f64, -180.0f64);
        for t in towers {
            s = s.min(t.location.lat);
            n = n.max(t.location.lat);
            w = w.min(t.location.lon);
            e = e.max(t.location.lon);
        }
        Ok(TerrainGrid::flat(
            (s - 0.1).max(-90.0),
            (w - 0.1).max(-180.0),
            (n + 0.1).min(90.0),
            (e + 0.1).min(180.0),
            0.05,
            0.0,
        )?)
    }

    /// Towers after culling and the line-of-sight hop graph over them.
    fn hop_graph(&self) -> Result<(usize, HopGraph)> {
        let towers = self.towers()?;
        let input_count = towers.len();
        let c = &self.cfg.cull;
        let towers = if c.enabled {
            cull_towers(&towers, c.min_height_m, c.grid_cell_deg, c.max_per_cell, self.cfg.seed)?
        } else {
            towers
        };
        let graph = match &self.cfg.inputs.hops {
            Some(p) => HopGraph::from_hops(towers, &read_hops_csv(open(p)?, p)?)?,
            None => {
                let terrain = self.terrain(&towers)?;
                build_hop_graph(&towers, &terrain, &self.cfg.los)?
            }
        };
        Ok((input_count, graph))
    }

    fn design_input(&self, sites: &[Site], traffic: &TrafficMatrix, hops: &HopGraph) -> Result<DesignInput> {
        let fiber = self.fiber()?;
        let opts = BuildOptions {
            attach_radius_km: self.cfg.design.attach_radius_km,
            budget: self.cfg.final_budget(),
            fiber_route_inflation: self.cfg.design.fiber_route_inflation,
            latency: self.cfg.latency,
        };
        Ok(build_design_input(sites, traffic, hops, fiber.as_ref(), &opts)?)
    }

    fn ladder(&self, input: &DesignInput) -> Result<Vec<NetworkDesign>> {
        Ok(solve_ladder(input, &self.cfg.design.budgets)?)
    }

    /// Inputs and the design at the final budget of the ladder.
    fn final_design(&self) -> Result<Planned> {
        let sites = self.sites()?;
        let traffic = self.traffic(&sites)?;
        let (_, hops) = self.hop_graph()?;
        let input = self.design_input(&sites, &traffic, &hops)?;
        let design = self.ladder(&input)?.pop().expect("non-empty ladder");
        Ok(Planned {
            sites,
            traffic,
            hops,
            input,
            design,
        })
    }
}

struct Planned {
    sites: Vec<Site>,
    traffic: TrafficMatrix,
    hops: HopGraph,
    input: DesignInput,
    design: NetworkDesign,
}

#[derive(Serialize)]
struct HopSummary {
    towers_input: usize,
    towers_kept: usize,
    hops: usize,
}

pub fn hopgraph(ctx: &Ctx) -> Result<()> {
    let (towers_input, g) = ctx.hop_graph()?;
    write_towers_csv(ctx.create("towers.csv")?, &g.towers)?;
    write_hops_csv(ctx.create("hops.csv")?, &g.hops())?;
    let summary = HopSummary {
        towers_input,
        towers_kept: g.towers.len(),
        hops: g.hop_count(),
    };
    ctx.write_json("hopgraph.json", &summary)?;
    println!("towers {} -> {}, hops {}", summary.towers_input, summary.towers_kept, summary.hops);
    Ok(())
}

pub fn design(ctx: &Ctx) -> Result<()> {
    let sites = ctx.sites()?;
    let traffic = ctx.traffic(&sites)?;
    let (_, hops) = ctx.hop_graph()?;
    let input = ctx.design_input(&sites, &traffic, &hops)?;
    let ladder = ctx.ladder(&input)?;
    let mut csv = csv::Writer::from_writer(ctx.create("design_stats.csv")?);
    csv.write_record(["budget", "towers_used", "links", "objective", "mean", "median", "p95"])?;
    for (b, d) in ctx.cfg.design.budgets.iter().zip(&ladder) {
        let at = input.with_budget(*b);
        ctx.write_json(&format!("design_b{b}.json"), &DesignReport::new(&at, d, &ctx.cfg.latency))?;
        ctx.write_json(&format!("design_b{b}.geojson"), &design_geojson(&at, d))?;
        csv.write_record([
            b.to_string(),
            d.towers_used.to_string(),
            d.built.len().to_string(),
            d.objective.to_string(),
            d.stats.mean.to_string(),
            d.stats.median.to_string(),
            d.stats.p95.to_string(),
        ])?;
        println!("budget {b}: {} links, {} towers, mean stretch {:.4}", d.built.len(), d.towers_used, d.stats.mean);
    }
    csv.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct FiberSummary {
    endpoints: usize,
    conduits: usize,
    total_fiber_km: f64,
    uniform: hybridnet::StretchStats,
    gravity: hybridnet::StretchStats,
    disconnected_pairs: usize,
}

#[derive(Serialize)]
struct LeaseSummary {
    aggregate_gbps: f64,
    term_months: u32,
    monthly_bandwidth_usd: f64,
    #[serde(flatten)]
    cost: hybridnet::fiber::LeaseCost,
}

pub fn fiber(ctx: &Ctx) -> Result<()> {
    let Some(g) = ctx.fiber()? else {
        bail!("inputs.fiber_endpoints and inputs.fiber_conduits are required for this command");
    };
    let sites: Vec<usize> = (0..g.endpoints.len()).collect();
    let demand = gravity_matrix(&g.endpoints)?;
    let model = &ctx.cfg.latency;
    let uniform = fiber_stretch_stats(&g, &sites, PairWeights::Uniform, model)?;
    let gravity = fiber_stretch_stats(&g, &sites, PairWeights::Traffic(&demand), model)?;
    ctx.write_json(
        "fiber_stats.json",
        &FiberSummary {
            endpoints: g.endpoints.len(),
            conduits: g.link_count(),
            total_fiber_km: g.total_fiber_km(),
            uniform: uniform.stats,
            gravity: gravity.stats,
            disconnected_pairs: uniform.disconnected.len(),
        },
    )?;
    let steps = prune_links(&g, &sites, PairWeights::Uniform, model)?;
    let curve = pruning_curve(&steps, &sites, &demand, ctx.cfg.aggregate_gbps, &ctx.cfg.lease_cost)?;
    write_curve_csv(ctx.create("pruning_curve.csv")?, &curve)?;
    let plan = provision_wavelengths(&g, &sites, &demand, ctx.cfg.aggregate_gbps)?;
    ctx.write_json("wavelengths.json", &plan)?;
    let cost = lease_cost(&plan, sites.len(), &ctx.cfg.lease_cost, ctx.cfg.aggregate_gbps)?;
    let monthly = plan
        .links
        .iter()
        .fold(0.0, |acc, l| acc + ctx.cfg.lease_cost.monthly_bandwidth_cost(l.capacity_gbps * l.count as f64, l.fiber_km));
    ctx.write_json(
        "lease_cost.json",
        &LeaseSummary {
            aggregate_gbps: ctx.cfg.aggregate_gbps,
            term_months: ctx.cfg.lease_cost.term_months,
            monthly_bandwidth_usd: monthly,
            cost,
        },
    )?;
    println!(
        "fiber mean stretch {:.4} (uniform), {:.4} (gravity); pruning curve {} steps; lease ${:.0}",
        uniform.stats.mean,
        gravity.stats.mean,
        curve.len(),
        cost.total_usd
    );
    Ok(())
}

pub fn augment_cmd(ctx: &Ctx) -> Result<()> {
    let p = ctx.final_design()?;
    let loads = route_demand(&p.design, &p.traffic, ctx.cfg.aggregate_gbps)?;
    let opts = AugmentOptions {
        attach_radius_km: ctx.cfg.augment.attach_radius_km,
    };
    let plan = augment(&p.input, &p.design, &loads, Some(&p.hops), &ctx.cfg.mw_cost, &opts)?;
    plan.write_links_csv(ctx.create("augment_links.csv")?)?;
    ctx.write_json("augmentation.json", &plan)?;
    let cost = mw_cost(&plan, &ctx.cfg.mw_cost, ctx.cfg.aggregate_gbps)?;
    ctx.write_json("mw_cost.json", &cost)?;
    println!(
        "{} links, {} existing towers, {} new towers, total ${:.0}",
        plan.links.len(),
        plan.existing_towers,
        plan.new_towers,
        cost.total_usd
    );
    Ok(())
}

pub fn weather(ctx: &Ctx) -> Result<()> {
    let i = &ctx.cfg.inputs;
    let field = match (&i.rain_dir, &i.rain_csv) {
        (Some(d), None) => RainField::load_grid_dir(d)?,
        (None, Some(c)) => RainField::read_link_csv(open(c)?, c)?,
        _ => bail!("exactly one of inputs.rain_dir and inputs.rain_csv is required for this command"),
    };
    let p = ctx.final_design()?;
    let w = &ctx.cfg.weather;
    let intervals = sample_intervals(&field, w.intervals_per_day, w.interval_minutes, ctx.cfg.seed)?;
    let failures = interval_failures(&p.input, &p.design, &field, &intervals, &w.attenuation)?;
    let report = reroute_and_stats(&p.input, &p.design, &failures)?;
    report.write_interval_csv(&p.input, &p.design, ctx.create("weather_intervals.csv")?)?;
    report.write_percentile_csv(&p.input, ctx.create("weather_percentiles.csv")?)?;
    let worst = report.intervals.iter().map(|r| r.stats.mean).fold(report.baseline.mean, f64::max);
    println!(
        "{} intervals; baseline mean stretch {:.4}, worst {:.4}",
        report.intervals.len(),
        report.baseline.mean,
        worst
    );
    Ok(())
}

#[derive(Serialize)]
struct SimSummary {
    load: f64,
    flows: usize,
    sent: u64,
    delivered: u64,
    dropped: u64,
    in_flight: u64,
    mean_delay_ms: f64,
    mean_queuing_ms: f64,
    loss_rate: f64,
    bound_violations: u64,
}

pub fn simulate(ctx: &Ctx) -> Result<()> {
    let p = ctx.final_design()?;
    let sim = &ctx.cfg.sim;
    let loads = route_demand(&p.design, &p.traffic, sim.run.aggregate_gbps)?;
    let topo = Topology::from_design(&p.input, &p.design, &loads, &ctx.cfg.latency, sim.min_capacity_gbps)?;
    topo.write_json(ctx.create("topology.json")?)?;
    let planned = flows_from_traffic(&p.traffic, sim.run.aggregate_gbps, 1.0);
    let table = build_routing(&topo, &planned, sim.run.routing)?;
    let flows = flows_from_traffic(&p.traffic, sim.run.aggregate_gbps, sim.run.load);
    let stats = run(&topo, &flows, &table, &sim.run)?;
    stats.write_flows_csv(&topo, ctx.create("sim_flows.csv")?)?;
    stats.write_utilization_csv(&topo, ctx.create("sim_utilization.csv")?)?;
    ctx.write_json(
        "sim_summary.json",
        &SimSummary {
            load: sim.run.load,
            flows: stats.flows.len(),
            sent: stats.sent,
            delivered: stats.delivered,
            dropped: stats.dropped,
            in_flight: stats.in_flight,
            mean_delay_ms: stats.mean_delay_ms,
            mean_queuing_ms: stats.mean_queuing_ms,
            loss_rate: stats.loss_rate,
            bound_violations: stats.bound_violations,
        },
    )?;
    println!(
        "load {}: {} flows, loss {:.6}, mean delay {:.4} ms, mean queuing {:.4} ms",
        sim.run.load,
        stats.flows.len(),
        stats.loss_rate,
        stats.mean_delay_ms,
        stats.mean_queuing_ms
    );
    if !sim.gammas.is_empty() {
        let rows = perturbation_experiment(&topo, &p.sites, &table, &sim.gammas, &sim.loads, &sim.run)?;
        write_experiment_csv(&rows, ctx.create("sim_experiment.csv")?)?;
        println!("perturbation sweep: {} points", rows.len());
    }
    Ok(())
}

pub fn export_geojson(ctx: &Ctx) -> Result<()> {
    let p = ctx.final_design()?;
    ctx.write_json("network.geojson", &design_geojson(&p.input, &p.design))?;
    println!("{} sites, {} microwave links", p.input.n(), p.design.built.len());
    Ok(())
}
