//! Spherical-Earth geometry and latency arithmetic.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Mean Earth radius used for every great-circle computation.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Speed of light in vacuum, km/s.
pub const C_VACUUM_KM_S: f64 = 299_792.458;

/// A point on the Earth's surface in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::InvalidCoordinate { lat, lon });
        }
        Ok(Self { lat, lon })
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.lat, self.lon).map(|_| ())
    }

    fn to_unit(self) -> [f64; 3] {
        let (phi, lam) = (self.lat.to_radians(), self.lon.to_radians());
        [phi.cos() * lam.cos(), phi.cos() * lam.sin(), phi.sin()]
    }

    fn from_unit(v: [f64; 3]) -> Self {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let z = (v[2] / norm).clamp(-1.0, 1.0);
        Self {
            lat: z.asin().to_degrees(),
            lon: v[1].atan2(v[0]).to_degrees(),
        }
    }

    /// Point at fraction `t` of the great-circle arc from `self` to `other`.
    pub fn interpolate(self, other: GeoPoint, t: f64) -> GeoPoint {
        let a = self.to_unit();
        let b = other.to_unit();
        let dot = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0);
        let omega = dot.acos();
        if omega < 1e-12 {
            return self;
        }
        let s = omega.sin();
        let wa = ((1.0 - t) * omega).sin() / s;
        let wb = (t * omega).sin() / s;
        Self::from_unit([
            wa * a[0] + wb * b[0],
            wa * a[1] + wb * b[1],
            wa * a[2] + wb * b[2],
        ])
    }

    /// Point reached by travelling `dist_km` from `self` on initial bearing
    /// `bearing_deg` (clockwise from north).
    pub fn destination(self, bearing_deg: f64, dist_km: f64) -> GeoPoint {
        let delta = dist_km / EARTH_RADIUS_KM;
        let theta = bearing_deg.to_radians();
        let (phi1, lam1) = (self.lat.to_radians(), self.lon.to_radians());
        let phi2 = (phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos()).asin();
        let lam2 = lam1
            + (theta.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * phi2.sin());
        let lon = (lam2.to_degrees() + 540.0).rem_euclid(360.0) - 180.0;
        GeoPoint {
            lat: phi2.to_degrees(),
            lon,
        }
    }
}

/// Haversine great-circle distance.
pub fn geodesic_km(a: GeoPoint, b: GeoPoint) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    Ok(haversine_km(a, b))
}

/// Unchecked haversine for inner loops over already-validated points.
pub(crate) fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlam = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlam / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Transmission medium of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Medium {
    Mw,
    Fiber,
}

impl std::fmt::Display for Medium {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Medium::Mw => "mw",
            Medium::Fiber => "fiber",
        })
    }
}

/// Propagation-speed model. Light in fiber travels `c / fiber_slowdown`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatencyModel {
    pub c_vacuum: f64,
    pub fiber_slowdown: f64,
    pub mw_slowdown: f64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self {
            c_vacuum: C_VACUUM_KM_S,
            fiber_slowdown: 1.5,
            mw_slowdown: 1.0,
        }
    }
}

impl LatencyModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_vacuum > 0.0) || !(self.fiber_slowdown >= 1.0) || !(self.mw_slowdown >= 1.0) {
            return Err(Error::param(format!("invalid latency model {self:?}")));
        }
        Ok(())
    }

    pub fn slowdown(&self, medium: Medium) -> f64 {
        match medium {
            Medium::Mw => self.mw_slowdown,
            Medium::Fiber => self.fiber_slowdown,
        }
    }

    /// c-latency of a distance, in ms.
    pub fn c_latency_ms(&self, distance_km: f64) -> f64 {
        distance_km / self.c_vacuum * 1e3
    }
}

/// One-way propagation latency in ms.
pub fn latency_ms(distance_km: f64, medium: Medium, model: &LatencyModel) -> f64 {
    distance_km * model.slowdown(medium) / model.c_vacuum * 1e3
}

/// Ratio of a path latency to the c-latency between its endpoints.
pub fn stretch(path_latency_ms: f64, src: GeoPoint, dst: GeoPoint, model: &LatencyModel) -> Result<f64> {
    let d = geodesic_km(src, dst)?;
    if d == 0.0 {
        return Err(Error::CoincidentEndpoints);
    }
    Ok(path_latency_ms / model.c_latency_ms(d))
}
