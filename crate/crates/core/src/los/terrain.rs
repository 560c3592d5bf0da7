//! Surface-elevation rasters in ESRI ASCII grid format.

use std::fmt::Write as _;
use std::path::Path;

use crate::geo::GeoPoint;
use crate::{Error, Result};

/// Elevation raster (terrain plus clutter), meters above sea level.
///
/// Values are stored row-major starting from the northernmost row, as in
/// the ASCII grid format, and are taken to sit at cell centers. No-data
/// cells read as 0 m.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainGrid {
    pub ncols: usize,
    pub nrows: usize,
    /// Longitude of the west edge.
    pub xllcorner: f64,
    /// Latitude of the south edge.
    pub yllcorner: f64,
    pub cellsize: f64,
    pub nodata: f64,
    values: Vec<f64>,
}

impl TerrainGrid {
    pub fn new(
        ncols: usize,
        nrows: usize,
        xllcorner: f64,
        yllcorner: f64,
        cellsize: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        if !(cellsize > 0.0) {
            return Err(Error::param("terrain cell size must be positive"));
        }
        if ncols == 0 || nrows == 0 || values.len() != ncols * nrows {
            return Err(Error::DimensionMismatch(format!(
                "terrain expects {ncols}x{nrows} values, got {}",
                values.len()
            )));
        }
        Ok(Self {
            ncols,
            nrows,
            xllcorner,
            yllcorner,
            cellsize,
            nodata: -9999.0,
            values,
        })
    }

    /// Constant-elevation grid covering the given box.
    pub fn flat(south: f64, west: f64, north: f64, east: f64, cellsize: f64, elevation: f64) -> Result<Self> {
        let ncols = ((east - west) / cellsize).ceil().max(1.0) as usize;
        let nrows = ((north - south) / cellsize).ceil().max(1.0) as usize;
        Self::new(ncols, nrows, west, south, cellsize, vec![elevation; ncols * nrows])
    }

    /// Grid whose cell-center values come from `f(lat, lon)`.
    pub fn from_fn(
        south: f64,
        west: f64,
        north: f64,
        east: f64,
        cellsize: f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut g = Self::flat(south, west, north, east, cellsize, 0.0)?;
        for r in 0..g.nrows {
            for c in 0..g.ncols {
                let (lat, lon) = g.cell_center(r, c);
                g.values[r * g.ncols + c] = f(lat, lon);
            }
        }
        Ok(g)
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let lon = self.xllcorner + (col as f64 + 0.5) * self.cellsize;
        let lat = self.yllcorner + (self.nrows as f64 - row as f64 - 0.5) * self.cellsize;
        (lat, lon)
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.ncols + col]
    }

    pub fn set_value(&mut self, row: usize, col: usize, v: f64) {
        self.values[row * self.ncols + col] = v;
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        let east = self.xllcorner + self.ncols as f64 * self.cellsize;
        let north = self.yllcorner + self.nrows as f64 * self.cellsize;
        (self.xllcorner..=east).contains(&p.lon) && (self.yllcorner..=north).contains(&p.lat)
    }

    /// Bilinear interpolation between cell centers, clamped at the edges.
    pub fn sample(&self, p: GeoPoint) -> Result<f64> {
        if !self.contains(p) {
            return Err(Error::OutOfBounds { lat: p.lat, lon: p.lon });
        }
        Ok(self.sample_unchecked(p))
    }

    pub(crate) fn sample_unchecked(&self, p: GeoPoint) -> f64 {
        let top = self.yllcorner + self.nrows as f64 * self.cellsize;
        let fc = ((p.lon - self.xllcorner) / self.cellsize - 0.5).clamp(0.0, (self.ncols - 1) as f64);
        let fr = ((top - p.lat) / self.cellsize - 0.5).clamp(0.0, (self.nrows - 1) as f64);
        let (c0, r0) = (fc.floor() as usize, fr.floor() as usize);
        let (c1, r1) = ((c0 + 1).min(self.ncols - 1), (r0 + 1).min(self.nrows - 1));
        let (tx, ty) = (fc - c0 as f64, fr - r0 as f64);
        let top_row = self.value(r0, c0) * (1.0 - tx) + self.value(r0, c1) * tx;
        let bottom_row = self.value(r1, c0) * (1.0 - tx) + self.value(r1, c1) * tx;
        top_row * (1.0 - ty) + bottom_row * ty
    }

    pub fn parse_esri_ascii(text: &str, origin: &Path) -> Result<Self> {
        let mut tokens = text.split_whitespace().peekable();
        let mut ncols = None;
        let mut nrows = None;
        let mut xll = None;
        let mut yll = None;
        let mut centered = (false, false);
        let mut cellsize = None;
        let mut nodata = -9999.0;
        while let Some(tok) = tokens.peek() {
            if tok.parse::<f64>().is_ok() {
                break;
            }
            let key = tokens.next().unwrap().to_ascii_lowercase();
            let val = tokens
                .next()
                .ok_or_else(|| Error::parse(origin, format!("missing value for `{key}`")))?;
            let num: f64 = val
                .parse()
                .map_err(|_| Error::parse(origin, format!("bad value `{val}` for `{key}`")))?;
            match key.as_str() {
                "ncols" => ncols = Some(num as usize),
                "nrows" => nrows = Some(num as usize),
                "xllcorner" => xll = Some(num),
                "yllcorner" => yll = Some(num),
                "xllcenter" => {
                    xll = Some(num);
                    centered.0 = true;
                }
                "yllcenter" => {
                    yll = Some(num);
                    centered.1 = true;
                }
                "cellsize" => cellsize = Some(num),
                "nodata_value" => nodata = num,
                other => return Err(Error::parse(origin, format!("unknown header `{other}`"))),
            }
        }
        let missing = |k: &str| Error::parse(origin, format!("missing header `{k}`"));
        let ncols = ncols.ok_or_else(|| missing("ncols"))?;
        let nrows = nrows.ok_or_else(|| missing("nrows"))?;
        let cellsize = cellsize.ok_or_else(|| missing("cellsize"))?;
        let mut xll = xll.ok_or_else(|| missing("xllcorner"))?;
        let mut yll = yll.ok_or_else(|| missing("yllcorner"))?;
        if centered.0 {
            xll -= cellsize / 2.0;
        }
        if centered.1 {
            yll -= cellsize / 2.0;
        }
        let values = tokens
            .map(|t| {
                t.parse::<f64>()
                    .map(|v| if v == nodata { 0.0 } else { v })
                    .map_err(|_| Error::parse(origin, format!("bad elevation `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != ncols * nrows {
            return Err(Error::parse(
                origin,
                format!("expected {} values, found {}", ncols * nrows, values.len()),
            ));
        }
        let mut g = Self::new(ncols, nrows, xll, yll, cellsize, values)?;
        g.nodata = nodata;
        Ok(g)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_esri_ascii(&text, path)
    }

    pub fn to_esri_ascii(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "ncols {}", self.ncols);
        let _ = writeln!(s, "nrows {}", self.nrows);
        let _ = writeln!(s, "xllcorner {}", self.xllcorner);
        let _ = writeln!(s, "yllcorner {}", self.yllcorner);
        let _ = writeln!(s, "cellsize {}", self.cellsize);
        let _ = writeln!(s, "NODATA_value {}", self.nodata);
        for row in self.values.chunks(self.ncols) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }
}
