use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Hop, Tower};
use crate::geo::GeoPoint;
use crate::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct TowerRow {
    id: String,
    lat: f64,
    lon: f64,
    height_m: f64,
    #[serde(default, deserialize_with = "csv::invalid_option")]
    ground_elevation_m: Option<f64>,
}

/// Reads `id,lat,lon,height_m[,ground_elevation_m]`.
pub fn read_towers_csv<R: Read>(reader: R, origin: &Path) -> Result<Vec<Tower>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (line, row) in rdr.deserialize::<TowerRow>().enumerate() {
        let row = row.map_err(|e| Error::parse(origin, format!("row {}: {e}", line + 1)))?;
        let t = Tower {
            id: row.id,
            location: GeoPoint::new(row.lat, row.lon)?,
            height_m: row.height_m,
            ground_elevation_m: row.ground_elevation_m,
        };
        t.validate()?;
        out.push(t);
    }
    Ok(out)
}

pub fn write_towers_csv<W: Write>(writer: W, towers: &[Tower]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for t in towers {
        w.serialize(TowerRow {
            id: t.id.clone(),
            lat: t.location.lat,
            lon: t.location.lon,
            height_m: t.height_m,
            ground_elevation_m: t.ground_elevation_m,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Hop edge list `tower_a,tower_b,length_km`.
pub fn write_hops_csv<W: Write>(writer: W, hops: &[Hop]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for h in hops {
        w.serialize(h)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_hops_csv<R: Read>(reader: R, origin: &Path) -> Result<Vec<Hop>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize::<Hop>()
        .map(|r| r.map_err(|e| Error::parse(origin, e.to_string())))
        .collect()
}
