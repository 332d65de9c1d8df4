//! Computational grids and fire arrival time fields.
//!
//! A [`Grid`] is a regular mesh laid out in the local planar projection of
//! its [`FireDomain`], with the (0, 0) node at the southwest corner and
//! row-major node indexing (x fastest). Fire arrival times are stored in
//! decimal days since the domain start.

use serde::{Deserialize, Serialize};

use crate::error::FireError;
use crate::geo::{GeoPoint, PlanarProjection};

/// Spatial and temporal bounds of a fire simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FireDomain {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    /// Start time, decimal days. Usually 0.
    pub t_start: f64,
    /// End time, decimal days since the same origin as `t_start`.
    pub t_end: f64,
}

impl FireDomain {
    pub fn new(
        lat_min: f64,
        lat_max: f64,
        lon_min: f64,
        lon_max: f64,
        t_start: f64,
        t_end: f64,
    ) -> Result<Self, FireError> {
        GeoPoint::new(lat_min, lon_min)?;
        GeoPoint::new(lat_max, lon_max)?;
        if lat_max <= lat_min || lon_max <= lon_min {
            return Err(FireError::InvalidInput("degenerate bounding box".into()));
        }
        if t_end <= t_start {
            return Err(FireError::InvalidInput("t_end must exceed t_start".into()));
        }
        Ok(Self { lat_min, lat_max, lon_min, lon_max, t_start, t_end })
    }

    pub fn center(&self) -> GeoPoint {
        GeoPoint {
            lat: 0.5 * (self.lat_min + self.lat_max),
            lon: 0.5 * (self.lon_min + self.lon_max),
        }
    }

    pub fn projection(&self) -> PlanarProjection {
        PlanarProjection::new(self.center())
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lat >= self.lat_min && p.lat <= self.lat_max && p.lon >= self.lon_min && p.lon <= self.lon_max
    }
}

/// Regular computational grid over a domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub domain: FireDomain,
    /// Node spacing in meters.
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
    /// Planar coordinates of the (0, 0) node (southwest corner).
    x0: f64,
    y0: f64,
}

/// Node counts per axis: `ceil(extent / spacing) + 1`, corner node at the
/// southwest corner of the domain.
pub fn build_grid(domain: FireDomain, spacing: f64) -> Result<Grid, FireError> {
    if !(spacing > 0.0) {
        return Err(FireError::InvalidInput("spacing must be positive".into()));
    }
    let proj = domain.projection();
    let (x_min, y_min) = proj.to_xy(GeoPoint { lat: domain.lat_min, lon: domain.lon_min });
    let (x_max, y_max) = proj.to_xy(GeoPoint { lat: domain.lat_max, lon: domain.lon_max });
    let extent_x = x_max - x_min;
    let extent_y = y_max - y_min;
    if spacing >= extent_x || spacing >= extent_y {
        return Err(FireError::InvalidInput(format!(
            "spacing {spacing} m exceeds domain extent ({extent_x:.0} x {extent_y:.0} m)"
        )));
    }
    // Round off floating noise before the ceil so that an exact multiple of
    // the spacing does not gain a spurious extra node.
    let cells = |extent: f64| ((extent / spacing) - 1e-9).ceil() as usize;
    let nx = cells(extent_x) + 1;
    let ny = cells(extent_y) + 1;
    Ok(Grid { domain, spacing, nx, ny, x0: x_min, y0: y_min })
}

impl Grid {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix < self.nx && iy < self.ny);
        iy * self.nx + ix
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    /// Planar (x, y) of a node in meters.
    pub fn node_xy(&self, ix: usize, iy: usize) -> (f64, f64) {
        (self.x0 + ix as f64 * self.spacing, self.y0 + iy as f64 * self.spacing)
    }

    pub fn node_geo(&self, ix: usize, iy: usize) -> GeoPoint {
        let (x, y) = self.node_xy(ix, iy);
        self.domain.projection().to_geo(x, y)
    }

    /// Nearest node to a planar point, clamped to the grid.
    pub fn nearest_node(&self, x: f64, y: f64) -> (usize, usize) {
        let ix = ((x - self.x0) / self.spacing).round().max(0.0) as usize;
        let iy = ((y - self.y0) / self.spacing).round().max(0.0) as usize;
        (ix.min(self.nx - 1), iy.min(self.ny - 1))
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.domain == other.domain
    }
}

/// Fire arrival time per grid node, decimal days in `[t_start, t_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FireArrivalField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl FireArrivalField {
    pub fn constant(grid: Grid, value: f64) -> Self {
        let n = grid.len();
        Self { grid, values: vec![value; n] }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self, FireError> {
        if values.len() != grid.len() {
            return Err(FireError::GridMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.nx,
                grid.ny
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.grid.index(ix, iy)]
    }

    pub fn clamp_to_domain(&mut self) {
        let (lo, hi) = (self.grid.domain.t_start, self.grid.domain.t_end);
        for v in &mut self.values {
            *v = v.clamp(lo, hi);
        }
    }

    /// Bilinear sample at planar coordinates, clamped to the grid extent.
    pub fn sample_xy(&self, x: f64, y: f64) -> f64 {
        let g = &self.grid;
        let fx = ((x - g.x0) / g.spacing).clamp(0.0, (g.nx - 1) as f64);
        let fy = ((y - g.y0) / g.spacing).clamp(0.0, (g.ny - 1) as f64);
        let ix = (fx.floor() as usize).min(g.nx - 2);
        let iy = (fy.floor() as usize).min(g.ny - 2);
        let tx = fx - ix as f64;
        let ty = fy - iy as f64;
        let v00 = self.at(ix, iy);
        let v10 = self.at(ix + 1, iy);
        let v01 = self.at(ix, iy + 1);
        let v11 = self.at(ix + 1, iy + 1);
        v00 * (1.0 - tx) * (1.0 - ty) + v10 * tx * (1.0 - ty) + v01 * (1.0 - tx) * ty + v11 * tx * ty
    }
}

/// Bilinear resampling onto another grid over the same domain, with values
/// clamped to the domain's time window.
pub fn resample_field(field: &FireArrivalField, target: &Grid) -> Result<FireArrivalField, FireError> {
    if field.grid.domain != target.domain {
        return Err(FireError::GridMismatch("resample across different domains".into()));
    }
    let mut values = Vec::with_capacity(target.len());
    for iy in 0..target.ny {
        for ix in 0..target.nx {
            let (x, y) = target.node_xy(ix, iy);
            values.push(field.sample_xy(x, y));
        }
    }
    let mut out = FireArrivalField { grid: target.clone(), values };
    out.clamp_to_domain();
    Ok(out)
}

/// A domain centered at `origin` spanning `width_m` x `height_m` meters,
/// convenient for building test and synthetic scenarios.
pub fn domain_from_meters(
    origin: GeoPoint,
    width_m: f64,
    height_m: f64,
    t_start: f64,
    t_end: f64,
) -> Result<FireDomain, FireError> {
    let proj = PlanarProjection::new(origin);
    let sw = proj.to_geo(-width_m / 2.0, -height_m / 2.0);
    let ne = proj.to_geo(width_m / 2.0, height_m / 2.0);
    FireDomain::new(sw.lat, ne.lat, sw.lon, ne.lon, t_start, t_end)
}
