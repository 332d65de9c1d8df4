//! Fire propagation graph: detections become vertices of a time-ordered
//! weighted digraph; clustering and intra-cluster distance shortening bend
//! shortest paths through intermediate detections.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::detection::SnappedDetections;
use crate::error::FireError;
use crate::geo::{great_circle_distance, GeoPoint, PlanarProjection};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// A graph vertex: one fire detection (or a synthetic ignition point) with
/// its geographic position, planar coordinates, and observation time.
#[derive(Debug, Clone, Copy)]
pub struct FireVertex {
    pub geo: GeoPoint,
    /// Planar coordinates in the domain projection, meters.
    pub xy: (f64, f64),
    /// Observation time, decimal days.
    pub time: f64,
}

/// Dense square matrix with row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }
}

/// Fire-kind vertices from snapped detections, at their snapped positions.
pub fn fire_vertices(snapped: &SnappedDetections) -> Vec<FireVertex> {
    let proj = snapped.grid.domain.projection();
    let mut verts = Vec::new();
    for i in 0..snapped.len() {
        if snapped.detections[i].kind.is_fire() {
            let geo = snapped.snapped_geo(i);
            verts.push(FireVertex { geo, xy: proj.to_xy(geo), time: snapped.detections[i].time });
        }
    }
    verts
}

/// Vertices from raw planar coordinates (meters), mapped near the equator
/// where the projection is distortion-free at small scales. Used by tests
/// and synthetic scenarios that work directly in the plane.
pub fn planar_vertices(points: &[(f64, f64)], times: &[f64]) -> Vec<FireVertex> {
    assert_eq!(points.len(), times.len());
    let proj = PlanarProjection::new(GeoPoint { lat: 0.0, lon: 0.0 });
    points
        .iter()
        .zip(times)
        .map(|(&(x, y), &t)| FireVertex { geo: proj.to_geo(x, y), xy: (x, y), time: t })
        .collect()
}

/// Great-circle distances between all vertex pairs, meters.
pub fn distance_matrix(verts: &[FireVertex]) -> Result<SquareMatrix, FireError> {
    if verts.len() < 2 {
        return Err(FireError::InvalidInput("distance matrix needs at least 2 vertices".into()));
    }
    let n = verts.len();
    let mut d = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = great_circle_distance(verts[i].geo, verts[j].geo);
            d.set(i, j, dist);
            d.set(j, i, dist);
        }
    }
    Ok(d)
}

/// Pairwise observation-time differences: Tmat(i, j) = t_j - t_i, days.
pub fn time_matrix(verts: &[FireVertex]) -> Result<SquareMatrix, FireError> {
    if verts.len() < 2 {
        return Err(FireError::InvalidInput("time matrix needs at least 2 vertices".into()));
    }
    let n = verts.len();
    let mut t = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            t.set(i, j, verts[j].time - verts[i].time);
        }
    }
    Ok(t)
}

/// K-means clustering result.
#[derive(Debug, Clone)]
pub struct ClusterAssignment {
    pub k: usize,
    pub labels: Vec<usize>,
    pub centroids: Vec<(f64, f64)>,
    /// Within-cluster sum of squares after each Lloyd iteration.
    pub wcss_history: Vec<f64>,
}

fn sq_dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

/// Lloyd's k-means with seeded random-distinct-point initialization.
/// Empty clusters are re-seeded to the point farthest from its centroid.
pub fn kmeans(
    points: &[(f64, f64)],
    k: usize,
    max_iter: usize,
    seed: u64,
) -> Result<ClusterAssignment, FireError> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(FireError::InvalidInput(format!("k = {k} out of range for {n} points")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut centroids: Vec<(f64, f64)> = order[..k].iter().map(|&i| points[i]).collect();

    let mut labels = vec![0usize; n];
    let mut wcss_history = Vec::new();
    for _ in 0..max_iter.max(1) {
        // Assignment step; ties go to the lowest cluster index.
        let mut changed = false;
        let mut wcss = 0.0;
        for (i, &p) in points.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, &ctr) in centroids.iter().enumerate() {
                let d = sq_dist(p, ctr);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
            wcss += best_d;
        }
        wcss_history.push(wcss);
        if !changed && wcss_history.len() > 1 {
            break;
        }
        // Update step.
        let mut sums = vec![(0.0f64, 0.0f64, 0usize); k];
        for (i, &p) in points.iter().enumerate() {
            let s = &mut sums[labels[i]];
            s.0 += p.0;
            s.1 += p.1;
            s.2 += 1;
        }
        for (c, s) in sums.iter().enumerate() {
            if s.2 > 0 {
                centroids[c] = (s.0 / s.2 as f64, s.1 / s.2 as f64);
            } else {
                // Re-seed an empty cluster to the point farthest from its
                // current centroid.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(points[a], centroids[labels[a]])
                            .total_cmp(&sq_dist(points[b], centroids[labels[b]]))
                    })
                    .unwrap();
                centroids[c] = points[far];
            }
        }
    }
    Ok(ClusterAssignment { k, labels, centroids, wcss_history })
}

/// Multiply same-cluster distances by `m` (default 0.25), deliberately
/// breaking the triangle inequality so shortest paths take detours through
/// intermediate detections.
pub fn shorten_intra_cluster(d: &SquareMatrix, labels: &[usize], m: f64) -> SquareMatrix {
    assert_eq!(d.n, labels.len());
    let mut out = d.clone();
    for i in 0..d.n {
        for j in 0..d.n {
            if i != j && labels[i] == labels[j] {
                out.set(i, j, d.get(i, j) * m);
            }
        }
    }
    out
}

/// Remove (set to infinite distance) pairs whose implied spread rate
/// exceeds `r_max` m/s. Time differences are in days.
pub fn apply_speed_limit(d: &SquareMatrix, tmat: &SquareMatrix, r_max: f64) -> SquareMatrix {
    assert_eq!(d.n, tmat.n);
    let mut out = d.clone();
    for i in 0..d.n {
        for j in 0..d.n {
            let dt = tmat.get(i, j);
            if dt > 0.0 && d.get(i, j) / (dt * SECONDS_PER_DAY) > r_max {
                out.set(i, j, f64::INFINITY);
                out.set(j, i, f64::INFINITY);
            }
        }
    }
    out
}

/// Detect a small secondary fire: 2-means split; if the smaller cluster
/// holds fewer than `ratio_threshold` of the vertices, disconnect it (all
/// incident distances infinite) and report its members.
pub fn split_secondary_fire(
    verts: &[FireVertex],
    d: &mut SquareMatrix,
    ratio_threshold: f64,
    seed: u64,
) -> Result<Vec<usize>, FireError> {
    if verts.len() < 4 {
        return Err(FireError::InvalidInput("secondary-fire split needs at least 4 vertices".into()));
    }
    let points: Vec<(f64, f64)> = verts.iter().map(|v| v.xy).collect();
    let clusters = kmeans(&points, 2, 100, seed)?;
    let count1 = clusters.labels.iter().filter(|&&l| l == 1).count();
    let count0 = verts.len() - count1;
    let (small_label, small_count) = if count0 <= count1 { (0, count0) } else { (1, count1) };
    if (small_count as f64) >= ratio_threshold * verts.len() as f64 {
        return Ok(Vec::new());
    }
    let removed: Vec<usize> = (0..verts.len()).filter(|&i| clusters.labels[i] == small_label).collect();
    for &i in &removed {
        for j in 0..d.n {
            if i != j {
                d.set(i, j, f64::INFINITY);
                d.set(j, i, f64::INFINITY);
            }
        }
    }
    Ok(removed)
}

/// The ignition vertex: either an existing vertex index, or a synthetic
/// vertex appended to `verts` (returned index) when several detections tie
/// for earliest time. The synthetic vertex sits at the mean location of
/// the tied detections, backdated by `backdate_h` hours.
pub fn infer_ignition(verts: &mut Vec<FireVertex>, backdate_h: f64) -> Result<usize, FireError> {
    if verts.is_empty() {
        return Err(FireError::InvalidInput("ignition inference needs at least 1 vertex".into()));
    }
    let t_min = verts.iter().map(|v| v.time).fold(f64::INFINITY, f64::min);
    let earliest: Vec<usize> = (0..verts.len()).filter(|&i| verts[i].time == t_min).collect();
    if earliest.len() == 1 {
        return Ok(earliest[0]);
    }
    let n = earliest.len() as f64;
    let mean_xy = earliest.iter().fold((0.0, 0.0), |acc, &i| {
        (acc.0 + verts[i].xy.0 / n, acc.1 + verts[i].xy.1 / n)
    });
    let mean_geo = earliest.iter().fold(GeoPoint { lat: 0.0, lon: 0.0 }, |acc, &i| GeoPoint {
        lat: acc.lat + verts[i].geo.lat / n,
        lon: acc.lon + verts[i].geo.lon / n,
    });
    verts.push(FireVertex { geo: mean_geo, xy: mean_xy, time: t_min - backdate_h / 24.0 });
    Ok(verts.len() - 1)
}

/// One shortest path from the ignition vertex.
#[derive(Debug, Clone)]
pub struct GraphPath {
    pub target: usize,
    /// Vertex indices, ignition first.
    pub seq: Vec<usize>,
    /// Total weight in meters.
    pub length: f64,
}

/// Shortest paths from the ignition to every reachable vertex.
#[derive(Debug, Clone)]
pub struct PathSet {
    pub vertices: Vec<FireVertex>,
    pub ignition: usize,
    pub paths: Vec<GraphPath>,
    pub unreachable: Vec<usize>,
}

#[derive(PartialEq)]
struct HeapItem {
    dist: f64,
    hops: usize,
    v: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reverse: BinaryHeap is a max-heap and we want the smallest key.
        other
            .dist
            .total_cmp(&self.dist)
            .then(other.hops.cmp(&self.hops))
            .then(other.v.cmp(&self.v))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source Dijkstra over the directed graph with edge i -> j present
/// iff t_j > t_i and the distance is finite. Ties are broken by fewer
/// hops, then by lowest predecessor index.
pub fn shortest_paths(verts: &[FireVertex], d: &SquareMatrix, ignition: usize) -> PathSet {
    let n = verts.len();
    assert_eq!(n, d.n);
    assert!(ignition < n);
    let mut dist = vec![f64::INFINITY; n];
    let mut hops = vec![usize::MAX; n];
    let mut pred = vec![usize::MAX; n];
    dist[ignition] = 0.0;
    hops[ignition] = 0;
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    heap.push(HeapItem { dist: 0.0, hops: 0, v: ignition });
    while let Some(item) = heap.pop() {
        let u = item.v;
        if done[u] || item.dist > dist[u] {
            continue;
        }
        done[u] = true;
        for v in 0..n {
            if v == u || !(verts[v].time > verts[u].time) {
                continue;
            }
            let w = d.get(u, v);
            if !w.is_finite() {
                continue;
            }
            let nd = dist[u] + w;
            let nh = hops[u] + 1;
            let better = nd < dist[v]
                || (nd == dist[v] && (nh < hops[v] || (nh == hops[v] && u < pred[v])));
            if better {
                dist[v] = nd;
                hops[v] = nh;
                pred[v] = u;
                heap.push(HeapItem { dist: nd, hops: nh, v });
            }
        }
    }

    let mut paths = Vec::new();
    let mut unreachable = Vec::new();
    for v in 0..n {
        if v == ignition {
            continue;
        }
        if !dist[v].is_finite() {
            unreachable.push(v);
            continue;
        }
        let mut seq = vec![v];
        let mut cur = v;
        while cur != ignition {
            cur = pred[cur];
            seq.push(cur);
        }
        seq.reverse();
        paths.push(GraphPath { target: v, seq, length: dist[v] });
    }
    PathSet { vertices: verts.to_vec(), ignition, paths, unreachable }
}

/// Graph-construction parameters.
#[derive(Debug, Clone, Copy)]
pub struct GraphConfig {
    /// Cluster count; reduced to n/2 when n < 40, clustering skipped when
    /// n < 4.
    pub k: usize,
    /// Intra-cluster distance multiplier.
    pub shorten_m: f64,
    /// Spread-rate cap in m/s; None disables the filter.
    pub speed_limit: Option<f64>,
    /// Smaller-cluster fraction below which a secondary fire is removed.
    pub split_threshold: f64,
    /// Synthetic-ignition backdating, hours.
    pub backdate_h: f64,
    pub kmeans_max_iter: usize,
    pub seed: u64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            k: 20,
            shorten_m: 0.25,
            speed_limit: None,
            split_threshold: 0.1,
            backdate_h: 6.0,
            kmeans_max_iter: 100,
            seed: 0,
        }
    }
}

/// A fully constructed detection graph with its shortest paths.
#[derive(Debug, Clone)]
pub struct DetectionGraph {
    pub vertices: Vec<FireVertex>,
    pub d: SquareMatrix,
    pub tmat: SquareMatrix,
    pub ignition: usize,
    pub clusters: Option<ClusterAssignment>,
    pub removed: Vec<usize>,
}

/// Build the full graph pipeline: ignition inference, distance and time
/// matrices, clustering with intra-cluster shortening, speed-limit filter,
/// and secondary-fire removal.
pub fn build_graph(mut verts: Vec<FireVertex>, config: &GraphConfig) -> Result<DetectionGraph, FireError> {
    if verts.is_empty() {
        return Err(FireError::InvalidInput("graph needs at least 1 fire detection".into()));
    }
    let ignition = infer_ignition(&mut verts, config.backdate_h)?;
    if verts.len() < 2 {
        return Err(FireError::InvalidInput("graph needs at least 2 vertices".into()));
    }
    let mut d = distance_matrix(&verts)?;
    let tmat = time_matrix(&verts)?;
    let n = verts.len();

    let clusters = if n >= 4 {
        let k = if n < 40 { (n / 2).min(config.k).max(1) } else { config.k.min(n) };
        let points: Vec<(f64, f64)> = verts.iter().map(|v| v.xy).collect();
        let assignment = kmeans(&points, k, config.kmeans_max_iter, config.seed)?;
        d = shorten_intra_cluster(&d, &assignment.labels, config.shorten_m);
        Some(assignment)
    } else {
        None
    };

    if let Some(r_max) = config.speed_limit {
        d = apply_speed_limit(&d, &tmat, r_max);
    }

    let removed = if n >= 4 {
        split_secondary_fire(&verts, &mut d, config.split_threshold, config.seed ^ 0x5f17)?
    } else {
        Vec::new()
    };

    Ok(DetectionGraph { vertices: verts, d, tmat, ignition, clusters, removed })
}
