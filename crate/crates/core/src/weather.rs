//! Rain-driven microwave link failures and rerouting over time.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Duration, NaiveDateTime};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::{evaluate_links, DesignInput, LinkId, NetworkDesign};
use crate::geo::{haversine_km, GeoPoint};
use crate::los::TerrainGrid;
use crate::stats::{StretchStats, WeightedSample};
use crate::{par, Error, Result};

/// Power-law rain attenuation `k * R^alpha` dB/km with a binary failure
/// threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttenuationModel {
    pub k_coeff: f64,
    pub alpha: f64,
    pub fail_threshold_db: f64,
}

impl Default for AttenuationModel {
    fn default() -> Self {
        Self {
            k_coeff: 0.01217,
            alpha: 1.2571,
            fail_threshold_db: 30.0,
        }
    }
}

impl AttenuationModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_coeff >= 0.0) || !(self.alpha > 0.0) || !(self.fail_threshold_db > 0.0) {
            return Err(Error::param("attenuation needs k >= 0, alpha > 0 and a positive threshold"));
        }
        Ok(())
    }
}

pub fn rain_attenuation_db(hop_km: f64, rain_mm_h: f64, model: &AttenuationModel) -> Result<f64> {
    if !(hop_km >= 0.0) || !(rain_mm_h >= 0.0) {
        return Err(Error::param("hop length and rain rate must be non-negative"));
    }
    Ok(model.k_coeff * rain_mm_h.powf(model.alpha) * hop_km)
}

/// Rain at one instant: a raster, or one rate per site-to-site link.
#[derive(Debug, Clone, PartialEq)]
pub enum RainData {
    Grid(TerrainGrid),
    PerLink(BTreeMap<String, f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RainFrame {
    pub time: NaiveDateTime,
    pub data: RainData,
}

/// Time-ordered rain frames.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RainField {
    pub frames: Vec<RainFrame>,
}

const TIME_FORMATS: [&str; 4] = ["%Y%m%dT%H%M", "%Y%m%dT%H%M%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M"];

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(t) = chrono::DateTime::parse_from_rfc3339(s) {
        return Some(t.naive_utc());
    }
    TIME_FORMATS.iter().find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

pub fn format_timestamp(t: NaiveDateTime) -> String {
    t.format("%Y-%m-%dT%H:%M:%S").to_string()
}

/// Key of a link in per-link rain data: site ids joined by `-`.
pub fn link_key(input: &DesignInput, l: LinkId) -> String {
    format!("{}-{}", input.sites[l.a].id, input.sites[l.b].id)
}

impl RainField {
    pub fn new(mut frames: Vec<RainFrame>) -> Result<Self> {
        for f in &frames {
            match &f.data {
                RainData::Grid(g) => {
                    if (0..g.nrows).any(|r| (0..g.ncols).any(|c| !(g.value(r, c) >= 0.0))) {
                        return Err(Error::param(format!("negative rain at {}", f.time)));
                    }
                }
                RainData::PerLink(m) => {
                    if m.values().any(|v| !(*v >= 0.0)) {
                        return Err(Error::param(format!("negative rain at {}", f.time)));
                    }
                }
            }
        }
        frames.sort_by_key(|f| f.time);
        Ok(Self { frames })
    }

    /// Every `*.asc` grid in `dir`, timestamped by file stem.
    pub fn load_grid_dir(dir: &Path) -> Result<Self> {
        let mut frames = Vec::new();
        let mut entries: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "asc"))
            .collect();
        entries.sort();
        for path in entries {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            let time = parse_timestamp(stem).ok_or_else(|| Error::parse(&path, "file name is not a timestamp"))?;
            frames.push(RainFrame {
                time,
                data: RainData::Grid(TerrainGrid::load(&path)?),
            });
        }
        if frames.is_empty() {
            return Err(Error::parse(dir, "no .asc rain grids found"));
        }
        Self::new(frames)
    }

    /// CSV `timestamp,link_id,rain_mm_h`.
    pub fn read_link_csv<R: Read>(reader: R, origin: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            timestamp: String,
            link_id: String,
            rain_mm_h: f64,
        }
        let mut by_time: BTreeMap<NaiveDateTime, BTreeMap<String, f64>> = BTreeMap::new();
        for (i, row) in csv::Reader::from_reader(reader).deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::parse(origin, format!("row {}: {e}", i + 1)))?;
            let t = parse_timestamp(&row.timestamp)
                .ok_or_else(|| Error::parse(origin, format!("row {}: bad timestamp {}", i + 1, row.timestamp)))?;
            by_time.entry(t).or_default().insert(row.link_id, row.rain_mm_h);
        }
        Self::new(
            by_time
                .into_iter()
                .map(|(time, m)| RainFrame {
                    time,
                    data: RainData::PerLink(m),
                })
                .collect(),
        )
    }
}

/// Hop geometry of a built link: the tower route when known, otherwise the
/// geodesic split into one hop per tower plus one.
pub fn link_hops(input: &DesignInput, l: LinkId) -> Vec<(GeoPoint, GeoPoint)> {
    let points = match input.mw_route(l) {
        Some(r) => r.points.clone(),
        None => {
            let (a, b) = (input.sites[l.a].location, input.sites[l.b].location);
            let n = input.link_cost(l).round().max(0.0) as usize + 1;
            (0..=n).map(|k| a.interpolate(b, k as f64 / n as f64)).collect()
        }
    };
    points.windows(2).map(|w| (w[0], w[1])).collect()
}

fn mean_rain_on_hop(g: &TerrainGrid, a: GeoPoint, b: GeoPoint) -> Result<f64> {
    let km = haversine_km(a, b);
    let n = (km.ceil() as usize).max(2);
    let mut sum = 0.0;
    for k in 0..=n {
        let p = a.interpolate(b, k as f64 / n as f64);
        sum += g.sample(p)?;
    }
    Ok(sum / (n + 1) as f64)
}

/// Built links with at least one hop over the failure threshold.
pub fn failed_links(
    input: &DesignInput,
    design: &NetworkDesign,
    frame: &RainFrame,
    model: &AttenuationModel,
) -> Result<Vec<LinkId>> {
    model.validate()?;
    let mut out = Vec::new();
    for &l in &design.built {
        let mut failed = false;
        for (a, b) in link_hops(input, l) {
            let rain = match &frame.data {
                RainData::Grid(g) => mean_rain_on_hop(g, a, b)?,
                RainData::PerLink(m) => {
                    let key = link_key(input, l);
                    let rev = format!("{}-{}", input.sites[l.b].id, input.sites[l.a].id);
                    *m.get(&key).or_else(|| m.get(&rev)).ok_or_else(|| {
                        Error::param(format!("no rain for link {key} at {}", format_timestamp(frame.time)))
                    })?
                }
            };
            if rain_attenuation_db(haversine_km(a, b), rain, model)? > model.fail_threshold_db {
                failed = true;
                break;
            }
        }
        if failed {
            out.push(l);
        }
    }
    Ok(out)
}

/// A window of frames analysed as one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub start: NaiveDateTime,
    pub frames: Vec<usize>,
}

/// Picks `per_day` seeded random start frames per calendar day and groups
/// the frames within `minutes` of each start. With `per_day == 0` every
/// frame is its own interval.
pub fn sample_intervals(field: &RainField, per_day: usize, minutes: i64, seed: u64) -> Result<Vec<Interval>> {
    if minutes <= 0 {
        return Err(Error::param("interval length must be positive"));
    }
    if per_day == 0 {
        return Ok(field
            .frames
            .iter()
            .enumerate()
            .map(|(i, f)| Interval {
                start: f.time,
                frames: vec![i],
            })
            .collect());
    }
    let mut days: BTreeMap<chrono::NaiveDate, Vec<usize>> = BTreeMap::new();
    for (i, f) in field.frames.iter().enumerate() {
        days.entry(f.time.date()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for frames in days.values() {
        let mut picks = rand::seq::index::sample(&mut rng, frames.len(), per_day.min(frames.len())).into_vec();
        picks.sort_unstable();
        for p in picks {
            let start = field.frames[frames[p]].time;
            let end = start + Duration::minutes(minutes);
            out.push(Interval {
                start,
                frames: frames.iter().copied().filter(|&i| field.frames[i].time >= start && field.frames[i].time < end).collect(),
            });
        }
    }
    Ok(out)
}

/// Links failed at any frame of each interval.
pub fn interval_failures(
    input: &DesignInput,
    design: &NetworkDesign,
    field: &RainField,
    intervals: &[Interval],
    model: &AttenuationModel,
) -> Result<Vec<(NaiveDateTime, Vec<LinkId>)>> {
    let per_frame = par::map_slice(&field.frames, |f| failed_links(input, design, f, model))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(intervals
        .iter()
        .map(|iv| {
            let mut failed: Vec<LinkId> = iv.frames.iter().flat_map(|&i| per_frame[i].iter().copied()).collect();
            failed.sort();
            failed.dedup();
            (iv.start, failed)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalResult {
    pub time: NaiveDateTime,
    pub failed: Vec<LinkId>,
    pub stats: StretchStats,
    /// Per-pair stretch in the order of the design's routes.
    pub stretch: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPercentiles {
    pub s: usize,
    pub t: usize,
    pub baseline: f64,
    pub p50: f64,
    pub p95: f64,
    pub p99: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherReport {
    pub baseline: StretchStats,
    pub intervals: Vec<IntervalResult>,
    pub pairs: Vec<PairPercentiles>,
}

/// Reroutes every interval over the surviving microwave links and fiber.
pub fn reroute_and_stats(
    input: &DesignInput,
    design: &NetworkDesign,
    failures: &[(NaiveDateTime, Vec<LinkId>)],
) -> Result<WeatherReport> {
    let intervals = par::map_slice(failures, |(time, failed)| {
        let up: Vec<LinkId> = design.built.iter().copied().filter(|l| !failed.contains(l)).collect();
        let d = evaluate_links(input, &up, false)?;
        Ok(IntervalResult {
            time: *time,
            failed: failed.clone(),
            stats: d.stats,
            stretch: d.routes.iter().map(|r| r.stretch).collect(),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let pairs = design
        .routes
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let series: Vec<(f64, f64)> = intervals.iter().map(|iv| (iv.stretch[k], 1.0)).collect();
            let (p50, p95, p99, max) = match WeightedSample::new(&series) {
                Some(w) => (w.quantile(0.5), w.quantile(0.95), w.quantile(0.99), w.max()),
                None => (r.stretch, r.stretch, r.stretch, r.stretch),
            };
            PairPercentiles {
                s: r.s,
                t: r.t,
                baseline: r.stretch,
                p50,
                p95,
                p99,
                max,
            }
        })
        .collect();
    Ok(WeatherReport {
        baseline: design.stats,
        intervals,
        pairs,
    })
}

impl WeatherReport {
    /// CSV `timestamp,pair,stretch`.
    pub fn write_interval_csv<W: Write>(&self, input: &DesignInput, design: &NetworkDesign, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["timestamp", "pair", "stretch"])?;
        for iv in &self.intervals {
            for (r, s) in design.routes.iter().zip(&iv.stretch) {
                w.write_record([
                    format_timestamp(iv.time),
                    link_key(input, LinkId::new(r.s, r.t)),
                    s.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// CSV `pair,baseline,p50,p95,p99,max`.
    pub fn write_percentile_csv<W: Write>(&self, input: &DesignInput, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["pair", "baseline", "p50", "p95", "p99", "max"])?;
        for p in &self.pairs {
            w.write_record([
                link_key(input, LinkId::new(p.s, p.t)),
                p.baseline.to_string(),
                p.p50.to_string(),
                p.p95.to_string(),
                p.p99.to_string(),
                p.max.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
