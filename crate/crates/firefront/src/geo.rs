//! Geographic primitives: points, great-circle distances, and the local
//! planar projection used for grid geometry.

use serde::{Deserialize, Serialize};

use crate::error::FireError;

/// Mean Earth radius in meters (spherical model).
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// A latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, FireError> {
        if !(-90.0..=90.0).contains(&lat) || !lat.is_finite() {
            return Err(FireError::InvalidInput(format!("latitude {lat} out of [-90, 90]")));
        }
        if !(-180.0..=180.0).contains(&lon) || !lon.is_finite() {
            return Err(FireError::InvalidInput(format!("longitude {lon} out of [-180, 180]")));
        }
        Ok(Self { lat, lon })
    }
}

/// Haversine great-circle distance in meters on the mean-radius sphere.
pub fn great_circle_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();

    let s = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * s.sqrt().min(1.0).asin()
}

/// Equirectangular projection about a reference point. Good enough for the
/// domain sizes handled here (tens of kilometers); distortion is far below
/// the grid spacing.
#[derive(Debug, Clone, Copy)]
pub struct PlanarProjection {
    origin: GeoPoint,
    cos_lat0: f64,
}

impl PlanarProjection {
    pub fn new(origin: GeoPoint) -> Self {
        Self { origin, cos_lat0: origin.lat.to_radians().cos() }
    }

    /// Project to (x, y) in meters, x east and y north of the origin.
    pub fn to_xy(&self, p: GeoPoint) -> (f64, f64) {
        let x = (p.lon - self.origin.lon).to_radians() * self.cos_lat0 * EARTH_RADIUS_M;
        let y = (p.lat - self.origin.lat).to_radians() * EARTH_RADIUS_M;
        (x, y)
    }

    pub fn to_geo(&self, x: f64, y: f64) -> GeoPoint {
        GeoPoint {
            lat: self.origin.lat + (y / EARTH_RADIUS_M).to_degrees(),
            lon: self.origin.lon + (x / (EARTH_RADIUS_M * self.cos_lat0)).to_degrees(),
        }
    }
}

/// Monotone-chain convex hull of planar points, counterclockwise, without
/// the closing repeat of the first vertex.
pub fn convex_hull(points: &[(f64, f64)]) -> Result<Vec<(f64, f64)>, FireError> {
    if points.len() < 3 {
        return Err(FireError::InvalidInput("convex hull needs at least 3 points".into()));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return Err(FireError::InvalidInput("convex hull input degenerate".into()));
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        return Err(FireError::InvalidInput("convex hull input collinear".into()));
    }
    Ok(lower)
}

/// Ray-casting point-in-polygon test; boundary points count as inside.
pub fn point_in_polygon(p: (f64, f64), poly: &[(f64, f64)]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    // On-edge check first so the boundary is inclusive.
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
        let dot = (p.0 - a.0) * (b.0 - a.0) + (p.1 - a.1) * (b.1 - a.1);
        let len2 = (b.0 - a.0).powi(2) + (b.1 - a.1).powi(2);
        if cross.abs() < 1e-9 * len2.sqrt().max(1.0) && dot >= 0.0 && dot <= len2 {
            return true;
        }
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > p.1) != (yj > p.1) && p.0 < (xj - xi) * (p.1 - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}
