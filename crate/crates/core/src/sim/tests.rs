use approx::assert_relative_eq;
use proptest::prelude::*;

use super::*;
use crate::capacity::route_demand;
use crate::design::solve_heuristic;
use crate::synth::InstanceSpec;

fn link(a: usize, b: usize, km: f64, cap: f64) -> SimLink {
    SimLink {
        a,
        b,
        km,
        medium: Medium::Mw,
        capacity_gbps: cap,
    }
}

fn topo(n: usize, links: Vec<SimLink>) -> Topology {
    Topology::new((0..n).map(|i| format!("N{i}")).collect(), links, LatencyModel::default()).unwrap()
}

fn cfg(seconds: f64) -> SimConfig {
    SimConfig {
        sim_seconds: seconds,
        seed: 11,
        ..Default::default()
    }
}

#[test]
fn lone_flow_sees_propagation_plus_transmission() {
    let t = topo(2, vec![link(0, 1, 300.0, 1.0)]);
    let flows = [Flow { src: 0, dst: 1, gbps: 0.5 }];
    let table = build_routing(&t, &flows, RoutingScheme::ShortestPath).unwrap();
    let s = run(&t, &flows, &table, &cfg(0.02)).unwrap();
    assert_eq!(s.dropped, 0);
    assert!(s.delivered > 1000);
    let expect = 300.0 / 299_792.458 + 4000.0 / 1e9;
    assert_relative_eq!(s.mean_delay_ms, expect * 1e3, max_relative = 1e-9);
    assert_eq!(s.mean_queuing_ms, 0.0);
    assert!(s.arc_utilization[0] > 0.49 && s.arc_utilization[0] < 0.51);
}

#[test]
fn overloaded_shared_link_drops_a_third() {
    // 0 and 1 feed 2 over fast links, 2-3 is the bottleneck
    let t = topo(4, vec![link(0, 2, 10.0, 10.0), link(1, 2, 10.0, 10.0), link(2, 3, 10.0, 1.0)]);
    let flows = [Flow { src: 0, dst: 3, gbps: 0.75 }, Flow { src: 1, dst: 3, gbps: 0.75 }];
    let table = build_routing(&t, &flows, RoutingScheme::ShortestPath).unwrap();
    let s = run(&t, &flows, &table, &cfg(0.2)).unwrap();
    assert!((s.loss_rate - 1.0 / 3.0).abs() < 0.02, "loss {}", s.loss_rate);
    assert!(s.arc_utilization.iter().all(|&u| u <= 1.0));
    assert!(s.arc_utilization[4] > 0.99);
}

#[test]
fn triangle_takes_two_hops() {
    let t = topo(3, vec![link(0, 1, 100.0, 1.0), link(1, 2, 100.0, 1.0), link(0, 2, 300.0, 1.0)]);
    let flows = [Flow { src: 0, dst: 2, gbps: 0.1 }];
    let table = build_routing(&t, &flows, RoutingScheme::ShortestPath).unwrap();
    let hops = table.next_hops(0, 2);
    assert_eq!(hops.len(), 1);
    assert_eq!(t.arcs()[hops[0].0].to, 1);
}

#[test]
fn balanced_split_over_twin_paths() {
    let t = topo(4, vec![link(0, 1, 100.0, 1.0), link(1, 3, 100.0, 1.0), link(0, 2, 100.0, 1.0), link(2, 3, 100.0, 1.0)]);
    let flows = [Flow { src: 0, dst: 3, gbps: 1.5 }];
    for scheme in [RoutingScheme::MinMaxUtil, RoutingScheme::ThroughputOptimal] {
        let table = build_routing(&t, &flows, scheme).unwrap();
        let hops = table.next_hops(0, 3);
        assert_eq!(hops.len(), 2);
        for &(_, w) in hops {
            assert!((w - 0.5).abs() < 0.01, "{scheme:?} weight {w}");
        }
    }
    let sol = solve_splittable(&t, &flows, 0.001, 0.0).unwrap();
    assert_relative_eq!(sol.max_utilization, 0.75, max_relative = 0.002);
    assert_relative_eq!(sol.concurrent_flow(), 1.0 / 0.75, max_relative = 0.002);
}

/// Max utilization of path splits, given per-commodity path arc lists.
fn max_util(t: &Topology, paths: &[Vec<Vec<usize>>], demand: &[f64], split: &[Vec<f64>]) -> f64 {
    let arcs = t.arcs();
    let mut load = vec![0.0; arcs.len()];
    for k in 0..paths.len() {
        for (p, f) in paths[k].iter().zip(&split[k]) {
            for &a in p {
                load[a] += demand[k] * f;
            }
        }
    }
    load.iter().zip(&arcs).map(|(l, a)| l / a.capacity_gbps).fold(0.0, f64::max)
}

fn arc_path(t: &Topology, nodes: &[usize]) -> Vec<usize> {
    let arcs = t.arcs();
    nodes
        .windows(2)
        .map(|w| arcs.iter().position(|a| a.from == w[0] && a.to == w[1]).unwrap())
        .collect()
}

fn simplex3(step: f64, center: Option<[f64; 3]>, radius: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let (lo, hi) = match center {
        Some(c) => ([c[0] - radius, c[1] - radius], [c[0] + radius, c[1] + radius]),
        None => ([0.0, 0.0], [1.0, 1.0]),
    };
    let k = ((hi[0] - lo[0]) / step).round() as i64;
    let j = ((hi[1] - lo[1]) / step).round() as i64;
    for a in 0..=k {
        for b in 0..=j {
            let x = lo[0] + a as f64 * step;
            let y = lo[1] + b as f64 * step;
            let z = 1.0 - x - y;
            if x >= -1e-12 && y >= -1e-12 && z >= -1e-12 {
                out.push(vec![x.max(0.0), y.max(0.0), z.max(0.0)]);
            }
        }
    }
    out
}

#[test]
fn min_max_util_matches_grid_search() {
    let t = topo(
        5,
        vec![
            link(0, 1, 100.0, 1.0),
            link(0, 2, 100.0, 1.0),
            link(1, 3, 100.0, 1.0),
            link(2, 3, 100.0, 1.0),
            link(3, 4, 100.0, 2.0),
            link(2, 4, 100.0, 0.5),
        ],
    );
    let flows = [Flow { src: 0, dst: 3, gbps: 1.6 }, Flow { src: 2, dst: 4, gbps: 1.0 }];
    let paths = vec![
        vec![arc_path(&t, &[0, 1, 3]), arc_path(&t, &[0, 2, 3]), arc_path(&t, &[0, 2, 4, 3])],
        vec![arc_path(&t, &[2, 4]), arc_path(&t, &[2, 3, 4]), arc_path(&t, &[2, 0, 1, 3, 4])],
    ];
    let demand = [1.6, 1.0];
    let mut best = (f64::INFINITY, vec![]);
    let coarse = simplex3(0.02, None, 0.0);
    for a in &coarse {
        for b in &coarse {
            let u = max_util(&t, &paths, &demand, &[a.clone(), b.clone()]);
            if u < best.0 {
                best = (u, vec![a.clone(), b.clone()]);
            }
        }
    }
    let c0 = [best.1[0][0], best.1[0][1], best.1[0][2]];
    let c1 = [best.1[1][0], best.1[1][1], best.1[1][2]];
    let fine0 = simplex3(0.002, Some(c0), 0.02);
    let fine1 = simplex3(0.002, Some(c1), 0.02);
    for a in &fine0 {
        for b in &fine1 {
            let u = max_util(&t, &paths, &demand, &[a.clone(), b.clone()]);
            best.0 = best.0.min(u);
        }
    }
    let sol = solve_splittable(&t, &flows, 0.005, 0.0).unwrap();
    assert!((sol.max_utilization - best.0).abs() <= 0.01 * best.0, "{} vs {}", sol.max_utilization, best.0);
    assert!(sol.lower_bound <= best.0 * (1.0 + 1e-9));

    let table = build_routing(&t, &flows, RoutingScheme::MinMaxUtil).unwrap();
    // scaled to a planned peak of 0.9, the simulation realizes it
    let scaled: Vec<Flow> = flows.iter().map(|f| Flow { gbps: f.gbps * 0.9 / best.0, ..*f }).collect();
    let s = run(&t, &scaled, &table, &cfg(0.05)).unwrap();
    let top = s.arc_utilization.iter().copied().fold(0.0, f64::max);
    assert!((top - 0.9).abs() < 0.03, "simulated {top}");
}

#[test]
fn disconnected_topology_is_rejected() {
    let t = topo(3, vec![link(0, 1, 10.0, 1.0)]);
    let flows = [Flow { src: 0, dst: 2, gbps: 0.1 }];
    assert!(matches!(
        build_routing(&t, &flows, RoutingScheme::ShortestPath),
        Err(Error::Disconnected(..))
    ));
}

fn designed(n: usize, seed: u64, agg: f64) -> (Topology, Vec<crate::traffic::Site>, TrafficMatrix) {
    let input = InstanceSpec {
        n_sites: n,
        budget: 60.0,
        lat: (38.0, 42.0),
        lon: (-90.0, -84.0),
        km_per_tower: 40.0,
        ..Default::default()
    }
    .generate(seed)
    .unwrap();
    let d = solve_heuristic(&input).unwrap();
    let loads = route_demand(&d, &input.traffic, agg).unwrap();
    let t = Topology::from_design(&input, &d, &loads, &LatencyModel::default(), 0.01).unwrap();
    (t, input.sites.clone(), input.traffic.clone())
}

#[test]
fn designed_topology_light_and_heavy_load() {
    let (t, _, traffic) = designed(6, 2, 5.0);
    let table = build_routing(&t, &flows_from_traffic(&traffic, 5.0, 1.0), RoutingScheme::ShortestPath).unwrap();
    let c = SimConfig {
        aggregate_gbps: 5.0,
        ..cfg(0.02)
    };
    let light = run(&t, &flows_from_traffic(&traffic, 5.0, 0.7), &table, &c).unwrap();
    assert_eq!(light.dropped, 0);
    assert!(light.mean_queuing_ms < 0.1);
    assert_eq!(light.bound_violations, 0);
    let heavy = run(&t, &flows_from_traffic(&traffic, 5.0, 1.2), &table, &c).unwrap();
    assert!(heavy.loss_rate > 0.0);
    let again = run(&t, &flows_from_traffic(&traffic, 5.0, 1.2), &table, &c).unwrap();
    assert_eq!(heavy, again);
}

#[test]
fn perturbation_rows() {
    let (t, sites, traffic) = designed(5, 4, 2.0);
    let table = build_routing(&t, &flows_from_traffic(&traffic, 2.0, 1.0), RoutingScheme::ShortestPath).unwrap();
    let c = SimConfig {
        aggregate_gbps: 2.0,
        queue_capacity_packets: 20,
        ..cfg(0.01)
    };
    let rows = perturbation_experiment(&t, &sites, &table, &[0.0, 0.3], &[0.5, 1.5], &c).unwrap();
    assert_eq!(rows.len(), 4);
    let base = run(&t, &flows_from_traffic(&traffic, 2.0, 0.5), &table, &c).unwrap();
    assert_eq!(rows[0].mean_delay_ms, base.mean_delay_ms);
    assert_eq!(rows[0].loss_rate, 0.0);
    assert!(rows[1].loss_rate > rows[0].loss_rate);
    let mut buf = Vec::new();
    write_experiment_csv(&rows, &mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("gamma,load,mean_delay_ms,loss_rate\n"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn packets_are_conserved(seed in 0u64..1000, rate in 0.1f64..3.0, scheme in 0usize..3, per_flow in any::<bool>()) {
        let t = topo(4, vec![link(0, 1, 50.0, 1.0), link(1, 3, 80.0, 1.0), link(0, 2, 60.0, 1.0), link(2, 3, 70.0, 0.8), link(1, 2, 30.0, 0.5)]);
        let flows = [
            Flow { src: 0, dst: 3, gbps: rate },
            Flow { src: 3, dst: 0, gbps: rate / 2.0 },
            Flow { src: 1, dst: 2, gbps: 0.3 },
        ];
        let scheme = [RoutingScheme::ShortestPath, RoutingScheme::MinMaxUtil, RoutingScheme::ThroughputOptimal][scheme];
        let table = build_routing(&t, &flows, scheme).unwrap();
        let c = SimConfig {
            seed,
            sim_seconds: 0.004,
            queue_capacity_packets: 50,
            multipath: if per_flow { Multipath::PerFlow } else { Multipath::PerPacket },
            ..Default::default()
        };
        let s = run(&t, &flows, &table, &c).unwrap();
        for f in &s.flows {
            prop_assert_eq!(f.sent, f.delivered + f.dropped + f.in_flight);
            prop_assert!((0.0..=1.0).contains(&f.loss));
        }
        prop_assert_eq!(s.bound_violations, 0);
        prop_assert!(s.arc_utilization.iter().all(|&u| u <= 1.0));
        prop_assert_eq!(&s, &run(&t, &flows, &table, &c).unwrap());
    }
}

