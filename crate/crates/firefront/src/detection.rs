//! Satellite detections and their snapping onto a computational grid.

use serde::{Deserialize, Serialize};

use crate::error::FireError;
use crate::geo::{great_circle_distance, GeoPoint};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionKind {
    Fire,
    NonfireLand,
    NonfireWater,
    Unknown,
}

impl DetectionKind {
    pub fn is_fire(self) -> bool {
        matches!(self, DetectionKind::Fire)
    }

    pub fn is_nonfire(self) -> bool {
        matches!(self, DetectionKind::NonfireLand | DetectionKind::NonfireWater)
    }
}

/// One satellite observation: a fire, non-fire, or unknown pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub pos: GeoPoint,
    /// Observation time in decimal days since the domain start.
    pub time: f64,
    pub kind: DetectionKind,
    /// Detection confidence, 0..=100.
    pub confidence: u8,
}

impl Detection {
    pub fn new(pos: GeoPoint, time: f64, kind: DetectionKind, confidence: u8) -> Result<Self, FireError> {
        if !time.is_finite() || time < 0.0 {
            return Err(FireError::InvalidInput(format!("detection time {time} must be >= 0")));
        }
        if confidence > 100 {
            return Err(FireError::InvalidInput(format!("confidence {confidence} out of [0, 100]")));
        }
        Ok(Self { pos, time, kind, confidence })
    }
}

/// Detections mapped to their nearest grid nodes.
#[derive(Debug, Clone)]
pub struct SnappedDetections {
    pub grid: Grid,
    pub detections: Vec<Detection>,
    /// Grid node index (row-major) per retained detection.
    pub node: Vec<usize>,
    /// Snap displacement in meters per retained detection.
    pub displacement: Vec<f64>,
    /// Detections outside the domain, dropped with a count.
    pub dropped: usize,
}

impl SnappedDetections {
    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    /// Snapped position (the grid node) of detection `i`.
    pub fn snapped_geo(&self, i: usize) -> GeoPoint {
        let (ix, iy) = self.grid.coords(self.node[i]);
        self.grid.node_geo(ix, iy)
    }
}

/// Map each in-domain detection to its nearest grid node. Out-of-domain
/// detections are dropped and counted, not treated as an error.
pub fn snap_detections(grid: &Grid, dets: &[Detection]) -> SnappedDetections {
    let proj = grid.domain.projection();
    let mut detections = Vec::new();
    let mut node = Vec::new();
    let mut displacement = Vec::new();
    let mut dropped = 0usize;
    for d in dets {
        if !grid.domain.contains(d.pos) {
            dropped += 1;
            continue;
        }
        let (x, y) = proj.to_xy(d.pos);
        let (ix, iy) = grid.nearest_node(x, y);
        let snapped = grid.node_geo(ix, iy);
        detections.push(*d);
        node.push(grid.index(ix, iy));
        displacement.push(great_circle_distance(d.pos, snapped));
    }
    SnappedDetections { grid: grid.clone(), detections, node, displacement, dropped }
}

/// Keep fire detections at or above the confidence threshold; non-fire
/// kinds pass through unfiltered.
pub fn filter_confidence(dets: &[Detection], threshold: u8) -> Vec<Detection> {
    dets.iter()
        .filter(|d| !d.kind.is_fire() || d.confidence >= threshold)
        .copied()
        .collect()
}
