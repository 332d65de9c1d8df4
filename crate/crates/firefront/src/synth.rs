//! Synthetic ground-truth fields and simulated satellite observations
//! for validation: multi-lobe cone arrival fields, a 1-D fireline
//! profile, random fire/non-fire detection scattering against a granule
//! schedule, and perimeter extraction from a truth field.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::detection::{Detection, DetectionKind};
use crate::error::FireError;
use crate::geo::GeoPoint;
use crate::grid::{FireArrivalField, Grid};

/// An anisotropic cone: arrival time grows linearly with distance from
/// the ignition point, with a direction-dependent slope. Anisotropy is
/// realized as one slope per equal angular sector (lobe) around the
/// ignition; a single lobe gives the classic isotropic cone.
#[derive(Debug, Clone)]
pub struct ConeSpec {
    pub ignition: GeoPoint,
    /// Ignition time, days.
    pub t0: f64,
    /// One positive slope (days per meter) per angular lobe, ordered
    /// counterclockwise starting at angle -pi.
    pub lobe_slopes: Vec<f64>,
}

impl ConeSpec {
    pub fn new(ignition: GeoPoint, t0: f64, lobe_slopes: Vec<f64>) -> Result<Self, FireError> {
        if lobe_slopes.is_empty() {
            return Err(FireError::InvalidInput("cone needs >= 1 lobe".into()));
        }
        if lobe_slopes.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(FireError::InvalidInput("cone slopes must be positive".into()));
        }
        Ok(Self { ignition, t0, lobe_slopes })
    }

    pub fn isotropic(ignition: GeoPoint, t0: f64, slope: f64) -> Result<Self, FireError> {
        Self::new(ignition, t0, vec![slope])
    }

    /// Slope applying in direction `theta` (radians from east).
    pub fn slope_at(&self, theta: f64) -> f64 {
        let n = self.lobe_slopes.len();
        let frac = (theta + std::f64::consts::PI) / (2.0 * std::f64::consts::PI);
        let k = ((frac * n as f64) as usize).min(n - 1);
        self.lobe_slopes[k]
    }
}

/// Ordered observation times within the domain's time span.
#[derive(Debug, Clone)]
pub struct GranuleSchedule {
    pub times: Vec<f64>,
}

impl GranuleSchedule {
    pub fn new(times: Vec<f64>) -> Result<Self, FireError> {
        if times.is_empty() {
            return Err(FireError::InvalidInput("empty granule schedule".into()));
        }
        for w in times.windows(2) {
            if w[1] <= w[0] {
                return Err(FireError::InvalidInput("granule times must strictly increase".into()));
            }
        }
        Ok(Self { times })
    }

    /// Every `interval_h` hours from `t_start` to `t_end` inclusive of
    /// the start; the default cadence is 6 h.
    pub fn regular(t_start: f64, t_end: f64, interval_h: f64) -> Result<Self, FireError> {
        if !(interval_h > 0.0) || t_end <= t_start {
            return Err(FireError::InvalidInput("bad granule schedule span or interval".into()));
        }
        let step = interval_h / 24.0;
        let n = ((t_end - t_start) / step).floor() as usize;
        Self::new((0..=n).map(|i| t_start + i as f64 * step).collect())
    }

    /// Earliest granule at or after `t`, if any.
    pub fn first_at_or_after(&self, t: f64) -> Option<f64> {
        self.times.iter().copied().find(|&g| g >= t)
    }
}

/// Arrival time `t0 + slope(theta) * r` from the ignition, clamped to
/// the domain's `t_end`; the ignition node reads exactly `t0`.
pub fn cone_field(spec: &ConeSpec, grid: &Grid) -> Result<FireArrivalField, FireError> {
    if !grid.domain.contains(spec.ignition) {
        return Err(FireError::InvalidInput("cone ignition outside domain".into()));
    }
    let proj = grid.domain.projection();
    let (ox, oy) = proj.to_xy(spec.ignition);
    let t_end = grid.domain.t_end;
    let mut field = FireArrivalField::constant(grid.clone(), t_end);
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let (x, y) = grid.node_xy(ix, iy);
            let (dx, dy) = (x - ox, y - oy);
            let r = (dx * dx + dy * dy).sqrt();
            let slope = spec.slope_at(dy.atan2(dx));
            field.values[grid.index(ix, iy)] = (spec.t0 + slope * r).min(t_end);
        }
    }
    Ok(field)
}

/// 1-D fireline arrival profile `T(x) = |x| + 1.2 cos(x) - 1`.
pub fn fireline_1d(x: f64) -> f64 {
    x.abs() + 1.2 * x.cos() - 1.0
}

/// Bernoulli fire-detection scattering over the burned nodes of a truth
/// field. Each node burning before `t_end` is selected with probability
/// `density`; its detection time is the earliest granule at or after the
/// arrival time (nodes burning after the last granule are dropped).
pub fn scatter_detections(
    truth: &FireArrivalField,
    density: f64,
    schedule: &GranuleSchedule,
    seed: u64,
) -> Result<Vec<Detection>, FireError> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(FireError::InvalidInput("detection density must be in (0, 1]".into()));
    }
    let g = &truth.grid;
    let t_end = g.domain.t_end;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for i in 0..g.len() {
        let arrival = truth.values[i];
        // Draw per node regardless of outcome so the sample stream, and
        // hence every detection, is independent of the truth values.
        let selected = rng.gen_bool(density);
        if arrival >= t_end || !selected {
            continue;
        }
        let Some(t) = schedule.first_at_or_after(arrival) else {
            continue;
        };
        let (ix, iy) = g.coords(i);
        out.push(Detection::new(g.node_geo(ix, iy), t, DetectionKind::Fire, 100)?);
    }
    Ok(out)
}

/// Non-fire scattering: every (node, granule) pair where the node has
/// not yet ignited (`truth > granule time`) is emitted with probability
/// `density` as a non-fire land observation.
pub fn scatter_nonfire(
    truth: &FireArrivalField,
    density: f64,
    schedule: &GranuleSchedule,
    seed: u64,
) -> Result<Vec<Detection>, FireError> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(FireError::InvalidInput("non-fire density must be in (0, 1]".into()));
    }
    let g = &truth.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for i in 0..g.len() {
        for &t in &schedule.times {
            let selected = rng.gen_bool(density);
            if truth.values[i] > t && selected {
                let (ix, iy) = g.coords(i);
                out.push(Detection::new(g.node_geo(ix, iy), t, DetectionKind::NonfireLand, 100)?);
            }
        }
    }
    Ok(out)
}

/// Marching-squares contour of the `t`-level set of the truth field,
/// chained into a closed loop and resampled to `n_points` by arclength.
/// Each returned point carries time `t`, so the list is directly usable
/// as fire detections.
pub fn synth_perimeter(
    truth: &FireArrivalField,
    t: f64,
    n_points: usize,
) -> Result<Vec<Detection>, FireError> {
    if n_points == 0 {
        return Err(FireError::InvalidInput("perimeter needs n_points >= 1".into()));
    }
    let segments = marching_squares(truth, t);
    if segments.is_empty() {
        return Err(FireError::InvalidInput(format!("empty level set at t = {t}")));
    }
    let loop_xy = chain_segments(&segments)?;
    let resampled = resample_closed(&loop_xy, n_points);
    let proj = truth.grid.domain.projection();
    resampled
        .into_iter()
        .map(|(x, y)| Detection::new(proj.to_geo(x, y), t, DetectionKind::Fire, 100))
        .collect()
}

type Seg = ((f64, f64), (f64, f64));

/// Level-crossing segments of `{T = t}` per grid cell. Corner values are
/// classified as inside (`T <= t`); crossings are linearly interpolated
/// along cell edges.
fn marching_squares(field: &FireArrivalField, t: f64) -> Vec<Seg> {
    let g = &field.grid;
    let mut segs = Vec::new();
    let interp = |pa: (f64, f64), va: f64, pb: (f64, f64), vb: f64| -> (f64, f64) {
        let denom = vb - va;
        let s = if denom.abs() < 1e-30 { 0.5 } else { ((t - va) / denom).clamp(0.0, 1.0) };
        (pa.0 + s * (pb.0 - pa.0), pa.1 + s * (pb.1 - pa.1))
    };
    for iy in 0..g.ny - 1 {
        for ix in 0..g.nx - 1 {
            // Corners counterclockwise from southwest.
            let p = [
                g.node_xy(ix, iy),
                g.node_xy(ix + 1, iy),
                g.node_xy(ix + 1, iy + 1),
                g.node_xy(ix, iy + 1),
            ];
            let v = [
                field.at(ix, iy),
                field.at(ix + 1, iy),
                field.at(ix + 1, iy + 1),
                field.at(ix, iy + 1),
            ];
            let inside = [v[0] <= t, v[1] <= t, v[2] <= t, v[3] <= t];
            let case = inside.iter().enumerate().fold(0usize, |acc, (k, &b)| acc | (usize::from(b) << k));
            // Edge midcrossings: 0 south, 1 east, 2 north, 3 west.
            let edge = |e: usize| match e {
                0 => interp(p[0], v[0], p[1], v[1]),
                1 => interp(p[1], v[1], p[2], v[2]),
                2 => interp(p[3], v[3], p[2], v[2]),
                _ => interp(p[0], v[0], p[3], v[3]),
            };
            let mut emit = |a: usize, b: usize| segs.push((edge(a), edge(b)));
            match case {
                0 | 15 => {}
                1 | 14 => emit(3, 0),
                2 | 13 => emit(0, 1),
                3 | 12 => emit(3, 1),
                4 | 11 => emit(1, 2),
                6 | 9 => emit(0, 2),
                7 | 8 => emit(2, 3),
                5 => {
                    // Saddle: resolve by the cell-center average.
                    let center = (v[0] + v[1] + v[2] + v[3]) / 4.0;
                    if center <= t {
                        emit(3, 2);
                        emit(0, 1);
                    } else {
                        emit(3, 0);
                        emit(1, 2);
                    }
                }
                10 => {
                    let center = (v[0] + v[1] + v[2] + v[3]) / 4.0;
                    if center <= t {
                        emit(0, 1);
                        emit(2, 3);
                    } else {
                        emit(0, 3);
                        emit(1, 2);
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    segs
}

/// Chain unordered segments into the longest closed loop by matching
/// quantized endpoints.
fn chain_segments(segs: &[Seg]) -> Result<Vec<(f64, f64)>, FireError> {
    use std::collections::HashMap;
    let quant = |p: (f64, f64)| ((p.0 * 1e6).round() as i64, (p.1 * 1e6).round() as i64);
    let mut adjacency: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, s) in segs.iter().enumerate() {
        adjacency.entry(quant(s.0)).or_default().push(i);
        adjacency.entry(quant(s.1)).or_default().push(i);
    }
    let mut used = vec![false; segs.len()];
    let mut best: Vec<(f64, f64)> = Vec::new();
    for start in 0..segs.len() {
        if used[start] {
            continue;
        }
        let mut pts = vec![segs[start].0, segs[start].1];
        used[start] = true;
        loop {
            let tail = quant(*pts.last().unwrap());
            let Some(next) = adjacency
                .get(&tail)
                .and_then(|c| c.iter().copied().find(|&i| !used[i]))
            else {
                break;
            };
            used[next] = true;
            let (a, b) = segs[next];
            pts.push(if quant(a) == tail { b } else { a });
        }
        // Closed when the last point returns to the first.
        if pts.len() > 3 && quant(pts[0]) == quant(*pts.last().unwrap()) {
            pts.pop();
            if pts.len() > best.len() {
                best = pts;
            }
        }
    }
    if best.is_empty() {
        return Err(FireError::InvalidInput("level set does not form a closed contour".into()));
    }
    Ok(best)
}

/// Resample a closed polyline to `n` points at equal arclength spacing.
fn resample_closed(pts: &[(f64, f64)], n: usize) -> Vec<(f64, f64)> {
    let m = pts.len();
    let mut cum = vec![0.0; m + 1];
    for i in 0..m {
        let a = pts[i];
        let b = pts[(i + 1) % m];
        cum[i + 1] = cum[i] + ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
    }
    let total = cum[m];
    let mut out = Vec::with_capacity(n);
    let mut seg = 0usize;
    for k in 0..n {
        let target = total * k as f64 / n as f64;
        while seg + 1 < m + 1 && cum[seg + 1] < target {
            seg += 1;
        }
        let a = pts[seg % m];
        let b = pts[(seg + 1) % m];
        let len = cum[seg + 1] - cum[seg];
        let s = if len > 0.0 { (target - cum[seg]) / len } else { 0.0 };
        out.push((a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1)));
    }
    out
}

/// Signed area of a closed polygon (shoelace), in the polyline's units.
pub fn polygon_area(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len();
    let mut sum = 0.0;
    for i in 0..m {
        let a = pts[i];
        let b = pts[(i + 1) % m];
        sum += a.0 * b.1 - b.0 * a.1;
    }
    sum.abs() / 2.0
}
