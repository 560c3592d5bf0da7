use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{DesignInput, LinkId, NetworkDesign};
use crate::geo::{GeoPoint, LatencyModel, Medium};
use crate::stats::StretchStats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub a: String,
    pub b: String,
    pub mw_km: f64,
    pub towers: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tower_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub src: String,
    pub dst: String,
    pub traffic: f64,
    pub stretch: f64,
    pub latency_ms: f64,
    pub path: Vec<String>,
    pub media: Vec<Medium>,
}

/// Serializable summary of a design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub budget: f64,
    pub towers_used: f64,
    pub objective: f64,
    pub stats: StretchStats,
    pub links: Vec<LinkReport>,
    pub pairs: Vec<PairReport>,
}

impl DesignReport {
    pub fn new(input: &DesignInput, design: &NetworkDesign, model: &LatencyModel) -> Self {
        let id = |i: usize| input.sites[i].id.clone();
        Self {
            budget: input.budget,
            towers_used: design.towers_used,
            objective: design.objective,
            stats: design.stats.clone(),
            links: design
                .built
                .iter()
                .map(|&l| LinkReport {
                    a: id(l.a),
                    b: id(l.b),
                    mw_km: input.mw_km[(l.a, l.b)].unwrap_or(f64::NAN),
                    towers: input.link_cost(l),
                    tower_ids: input.mw_route(l).map(|r| r.towers.clone()).unwrap_or_default(),
                })
                .collect(),
            pairs: design
                .routes
                .iter()
                .map(|r| PairReport {
                    src: id(r.s),
                    dst: id(r.t),
                    traffic: input.traffic.get(r.s, r.t),
                    stretch: r.stretch,
                    latency_ms: model.c_latency_ms(r.length_km),
                    path: r.path.iter().map(|&i| id(i)).collect(),
                    media: r.media.clone(),
                })
                .collect(),
        }
    }
}

fn coords(points: &[GeoPoint]) -> Value {
    Value::Array(points.iter().map(|p| json!([p.lon, p.lat])).collect())
}

/// Sites, built microwave routes and fiber segments in use, as a GeoJSON
/// FeatureCollection.
pub fn design_geojson(input: &DesignInput, design: &NetworkDesign) -> Value {
    let mut features = Vec::new();
    for s in &input.sites {
        features.push(json!({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [s.location.lon, s.location.lat]},
            "properties": {"kind": "site", "id": s.id, "population": s.population},
        }));
    }
    for &l in &design.built {
        let points = match input.mw_route(l) {
            Some(r) => r.points.clone(),
            None => vec![input.sites[l.a].location, input.sites[l.b].location],
        };
        features.push(json!({
            "type": "Feature",
            "geometry": {"type": "LineString", "coordinates": coords(&points)},
            "properties": {
                "kind": "link",
                "medium": "mw",
                "a": input.sites[l.a].id,
                "b": input.sites[l.b].id,
                "km": input.mw_km[(l.a, l.b)],
                "towers": input.link_cost(l),
            },
        }));
    }
    let fiber_used: BTreeSet<LinkId> = design
        .routes
        .iter()
        .flat_map(|r| {
            r.path
                .windows(2)
                .zip(&r.media)
                .filter(|(_, m)| **m == Medium::Fiber)
                .map(|(w, _)| LinkId::new(w[0], w[1]))
        })
        .collect();
    for l in fiber_used {
        features.push(json!({
            "type": "Feature",
            "geometry": {
                "type": "LineString",
                "coordinates": coords(&[input.sites[l.a].location, input.sites[l.b].location]),
            },
            "properties": {
                "kind": "link",
                "medium": "fiber",
                "a": input.sites[l.a].id,
                "b": input.sites[l.b].id,
                "km_equiv": input.fiber_km_equiv[(l.a, l.b)],
            },
        }));
    }
    json!({"type": "FeatureCollection", "features": features})
}
