use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hybridnet::los::{build_hop_graph, read_towers_csv, write_towers_csv, LosParams, TerrainGrid};
use hybridnet::synth::{random_towers, rolling_terrain};
use serde_json::{json, Value};

fn data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

fn golden() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn hybridnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hybridnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_demo(cmd: &str, out: &Path, extra: &[&str]) -> Output {
    let config = data().join("demo.json");
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = hybridnet(&args);
    assert!(o.status.success(), "{cmd} failed: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn write_config(dir: &Path, cfg: &Value) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn run_config(cmd: &str, cfg: &Path, out: &Path) -> Output {
    hybridnet(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Compares against the committed golden file; `UPDATE_GOLDEN=1` rewrites it.
fn check_golden(actual: &Path, name: &str) {
    let expected = golden().join(name);
    let got = std::fs::read_to_string(actual).unwrap();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden()).unwrap();
        std::fs::write(&expected, &got).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&expected).unwrap_or_else(|_| panic!("missing golden file {name}"));
    assert_eq!(got, want, "{name} differs from its golden file");
}

#[test]
fn help_documents_exit_codes() {
    let o = hybridnet(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("Exit codes"));
    assert!(text.contains("2  infeasible"));
    for cmd in ["hopgraph", "design", "fiber", "augment", "weather", "simulate", "export-geojson"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn usage_and_config_errors_exit_1() {
    assert_eq!(hybridnet(&["frobnicate"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = write_config(dir.path(), &json!({"los": {"frequency": 11}}));
    assert_eq!(run_config("hopgraph", &cfg, &out).status.code(), Some(1));
    let cfg = write_config(dir.path(), &json!({}));
    let o = run_config("design", &cfg, &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("inputs.sites"));
    let bad = hybridnet(&["design", "--out", out.to_str().unwrap(), "--set", "nope=1"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn empty_tower_file_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("towers.csv"), "id,lat,lon,height_m\n").unwrap();
    let cfg = write_config(dir.path(), &json!({"inputs": {"towers": "towers.csv"}}));
    let o = run_config("hopgraph", &cfg, &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(1));
    std::fs::write(dir.path().join("towers.csv"), "id,lat,lon,height_m\nA,40,-80,tall\n").unwrap();
    assert_eq!(run_config("hopgraph", &cfg, &dir.path().join("o")).status.code(), Some(1));
}

#[test]
fn disconnected_sites_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("sites.csv"), "id,lat,lon,population\nA,40,-80,1\nB,40,-79,1\nC,40,-78,1\n").unwrap();
    std::fs::write(d.join("towers.csv"), "id,lat,lon,height_m\nT1,45,-70,100\n").unwrap();
    std::fs::write(d.join("ep.csv"), "id,lat,lon\nA,40,-80\nB,40,-79\nC,40,-78\n").unwrap();
    std::fs::write(d.join("co.csv"), "endpoint_a,endpoint_b,fiber_km\nA,B,100\n").unwrap();
    let cfg = write_config(
        d,
        &json!({"inputs": {"sites": "sites.csv", "towers": "towers.csv",
                "fiber_endpoints": "ep.csv", "fiber_conduits": "co.csv"}}),
    );
    let o = run_config("design", &cfg, &d.join("o"));
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn hopgraph_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let towers = random_towers(100, (40.0, 40.6), (-80.0, -79.2), (40.0, 120.0), 3).unwrap();
    write_towers_csv(std::fs::File::create(d.join("towers.csv")).unwrap(), &towers).unwrap();
    let terrain = rolling_terrain(39.9, -80.1, 40.7, -79.1, 0.01, 80.0, 5).unwrap();
    std::fs::write(d.join("terrain.asc"), terrain.to_esri_ascii()).unwrap();
    let cfg = write_config(d, &json!({"inputs": {"towers": "towers.csv", "terrain": "terrain.asc"}}));
    let out = d.join("o");
    let o = run_config("hopgraph", &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let reread = read_towers_csv(std::fs::File::open(d.join("towers.csv")).unwrap(), &d.join("towers.csv")).unwrap();
    let terrain = TerrainGrid::load(&d.join("terrain.asc")).unwrap();
    let lib = build_hop_graph(&reread, &terrain, &LosParams::default()).unwrap();
    let summary = read_json(&out.join("hopgraph.json"));
    assert_eq!(summary["towers_kept"], 100);
    assert_eq!(summary["hops"], lib.hop_count());
    assert_eq!(read_csv(&out.join("hops.csv")).len(), lib.hop_count());
    assert!(lib.hop_count() > 0);
}

#[test]
fn hopgraph_cull_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    let cull = ["--set", "cull.enabled=true", "--set", "cull.grid_cell_deg=1", "--set", "cull.max_per_cell=3"];
    run_demo("hopgraph", &a, &cull);
    run_demo("hopgraph", &b, &cull);
    let mut other = cull.to_vec();
    other.extend(["--seed", "8"]);
    run_demo("hopgraph", &c, &other);
    let kept = |p: &Path| std::fs::read(p.join("towers.csv")).unwrap();
    assert_eq!(kept(&a), kept(&b));
    assert_ne!(kept(&a), kept(&c));
    assert!(read_json(&a.join("hopgraph.json"))["towers_kept"].as_u64().unwrap() < 52);
}

#[test]
fn design_ladder_and_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    run_demo("design", out, &[]);
    let rows = read_csv(&out.join("design_stats.csv"));
    assert_eq!(rows.len(), 5);
    let means: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(means.windows(2).all(|w| w[1] <= w[0]), "{means:?}");
    assert!(means[4] < means[0]);
    for r in &rows {
        let (budget, used): (f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        assert!(used <= budget);
        for ext in ["json", "geojson"] {
            assert!(out.join(format!("design_b{}.{ext}", r[0])).exists());
        }
    }
    let fiber_only = read_json(&out.join("design_b0.json"));
    assert_eq!(fiber_only["links"].as_array().unwrap().len(), 0);
    assert!(fiber_only["pairs"]
        .as_array()
        .unwrap()
        .iter()
        .all(|p| p["media"].as_array().unwrap().iter().all(|m| m == "fiber")));
    let geo = read_json(&out.join("design_b40.geojson"));
    assert_eq!(geo["type"], "FeatureCollection");
    check_golden(&out.join("design_stats.csv"), "design_stats.csv");
    check_golden(&out.join("design_b20.json"), "design_b20.json");
}

#[test]
fn budget_zero_is_fiber_only() {
    let dir = tempfile::tempdir().unwrap();
    run_demo("design", dir.path(), &["--set", "design.budgets=[0]"]);
    let zero = read_csv(&dir.path().join("design_stats.csv"));
    let dir2 = tempfile::tempdir().unwrap();
    run_demo("design", dir2.path(), &[]);
    let ladder = read_csv(&dir2.path().join("design_stats.csv"));
    assert_eq!(zero[0], ladder[0]);
    assert_eq!(zero[0][2], "0");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for cmd in ["design", "weather", "simulate"] {
        run_demo(cmd, &a, &[]);
        run_demo(cmd, &b, &[]);
    }
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 10);
    for n in names {
        assert_eq!(std::fs::read(a.join(&n)).unwrap(), std::fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn effective_config_echoes_overrides() {
    let dir = tempfile::tempdir().unwrap();
    run_demo("hopgraph", dir.path(), &["--seed", "11", "--set", "los.f_ghz=18"]);
    let cfg = read_json(&dir.path().join("config.effective.json"));
    assert_eq!(cfg["seed"], 11);
    assert_eq!(cfg["sim"]["run"]["seed"], 11);
    assert_eq!(cfg["los"]["f_ghz"], 18.0);
    assert_eq!(cfg["los"]["k_factor"], 1.3);
    assert_eq!(cfg["mw_cost"]["rent_per_tower_year"], 37500.0);
    let towers = cfg["inputs"]["towers"].as_str().unwrap();
    assert!(Path::new(towers).is_file(), "{towers}");
}

#[test]
fn fiber_demo_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    run_demo("fiber", out, &[]);
    let curve = read_csv(&out.join("pruning_curve.csv"));
    let means: Vec<f64> = curve.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(means.windows(2).all(|w| w[1] >= w[0]), "{means:?}");
    let links: Vec<usize> = curve.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(links[0], 9);
    assert_eq!(*links.last().unwrap(), 6);
    check_golden(&out.join("pruning_curve.csv"), "pruning_curve.csv");
    check_golden(&out.join("fiber_stats.json"), "fiber_stats.json");
}

#[test]
fn fiber_tree_has_single_step_curve() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("ep.csv"), "id,lat,lon,population\nA,40,-80,1\nB,40,-79,2\nC,41,-79,3\nD,39,-79,1\n").unwrap();
    std::fs::write(d.join("co.csv"), "endpoint_a,endpoint_b,fiber_km\nA,B,110\nB,C,130\nB,D,120\n").unwrap();
    let cfg = write_config(d, &json!({"inputs": {"fiber_endpoints": "ep.csv", "fiber_conduits": "co.csv"}}));
    let o = run_config("fiber", &cfg, &d.join("o"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_csv(&d.join("o/pruning_curve.csv")).len(), 1);
}

#[test]
fn fiber_single_link_lease_price() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("ep.csv"), "id,lat,lon,population\nNYC,40.7128,-74.006,1\nCHI,41.8781,-87.6298,1\n").unwrap();
    std::fs::write(d.join("co.csv"), "endpoint_a,endpoint_b,fiber_km\nNYC,CHI,1200\n").unwrap();
    let cfg = write_config(
        d,
        &json!({"inputs": {"fiber_endpoints": "ep.csv", "fiber_conduits": "co.csv"}, "aggregate_gbps": 80}),
    );
    let o = run_config("fiber", &cfg, &d.join("o"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let plan = read_json(&d.join("o/wavelengths.json"));
    assert_eq!(plan["links"][0]["capacity_gbps"], 100.0);
    assert_eq!(plan["links"][0]["count"], 1);
    let cost = read_json(&d.join("o/lease_cost.json"));
    assert_eq!(cost["monthly_bandwidth_usd"], 30_000.0);
    assert_eq!(cost["bandwidth_usd"], 30_000.0 * 60.0);
}

#[test]
fn weather_extremes_and_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    run_demo("weather", out, &[]);
    run_demo("design", out, &["--set", "design.budgets=[0,40]"]);
    let rows = read_csv(&out.join("weather_intervals.csv"));
    let at = |ts: &str| -> Vec<String> { rows.iter().filter(|r| r[0] == ts).map(|r| r[2].clone()).collect() };
    let stretch_of = |name: &str| -> Vec<String> {
        read_json(&out.join(name))["pairs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|p| p["stretch"].as_f64().unwrap().to_string())
            .collect()
    };
    assert_eq!(at("2024-06-01T00:00:00"), stretch_of("design_b40.json"));
    assert_eq!(at("2024-06-01T02:00:00"), stretch_of("design_b0.json"));
    assert_ne!(at("2024-06-01T01:00:00"), at("2024-06-01T00:00:00"));
    check_golden(&out.join("weather_intervals.csv"), "weather_intervals.csv");
    check_golden(&out.join("weather_percentiles.csv"), "weather_percentiles.csv");
}

#[test]
fn augment_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    run_demo("augment", out, &[]);
    let plan = read_json(&out.join("augmentation.json"));
    let links = plan["links"].as_array().unwrap();
    assert!(!links.is_empty());
    assert_eq!(read_csv(&out.join("augment_links.csv")).len(), links.len());
    let cost = read_json(&out.join("mw_cost.json"));
    let (capex, rent, total) = (
        cost["capex_usd"].as_f64().unwrap(),
        cost["rent_usd"].as_f64().unwrap(),
        cost["total_usd"].as_f64().unwrap(),
    );
    assert_eq!(capex + rent, total);
    assert!(cost["dollars_per_gb"].as_f64().unwrap() > 0.0);
}

#[test]
fn simulate_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    run_demo("simulate", out, &[]);
    let summary = read_json(&out.join("sim_summary.json"));
    assert_eq!(summary["bound_violations"], 0);
    assert_eq!(summary["loss_rate"], 0.0);
    let flows = read_csv(&out.join("sim_flows.csv"));
    assert_eq!(flows.len(), summary["flows"].as_u64().unwrap() as usize);
    assert_eq!(read_csv(&out.join("sim_experiment.csv")).len(), 4);
    assert!(out.join("sim_utilization.csv").exists());
    assert!(out.join("topology.json").exists());
}

#[test]
fn export_geojson_matches_design() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    run_demo("export-geojson", out, &[]);
    run_demo("design", out, &[]);
    assert_eq!(
        read_json(&out.join("network.geojson")),
        read_json(&out.join("design_b40.geojson"))
    );
}
