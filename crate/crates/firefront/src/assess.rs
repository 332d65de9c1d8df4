//! Metrics comparing an estimated or forecast fire arrival field with
//! ground truth or perimeter-derived burn masks: growth-curve error,
//! measures of effectiveness, the Sorenson similarity index, pointwise
//! relative error, and ROS/direction difference statistics.

use crate::error::FireError;
use crate::geo::GeoPoint;
use crate::grid::{FireArrivalField, Grid};

/// Per-node burned flags at a reference time.
#[derive(Debug, Clone)]
pub struct BurnMask {
    pub grid: Grid,
    pub burned: Vec<bool>,
}

impl BurnMask {
    /// Nodes with arrival time at or before `t_ref`.
    pub fn from_field(field: &FireArrivalField, t_ref: f64) -> Self {
        BurnMask {
            grid: field.grid.clone(),
            burned: field.values.iter().map(|&t| t <= t_ref).collect(),
        }
    }

    /// Rasterized interior of a closed perimeter polygon: cell centers
    /// inside (or on) the polygon are burned.
    pub fn from_perimeter(grid: &Grid, polygon: &[GeoPoint]) -> Result<Self, FireError> {
        if polygon.len() < 3 {
            return Err(FireError::InvalidInput("perimeter polygon needs >= 3 points".into()));
        }
        let proj = grid.domain.projection();
        let poly_xy: Vec<(f64, f64)> = polygon.iter().map(|p| proj.to_xy(*p)).collect();
        let mut burned = vec![false; grid.len()];
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                let (x, y) = grid.node_xy(ix, iy);
                burned[grid.index(ix, iy)] = crate::geo::point_in_polygon((x, y), &poly_xy);
            }
        }
        Ok(BurnMask { grid: grid.clone(), burned })
    }

    pub fn area_cells(&self) -> usize {
        self.burned.iter().filter(|&&b| b).count()
    }
}

/// Full comparison report; `rel_error` requires a truth field and the
/// ROS/direction statistics require ROS inputs, so both are optional.
#[derive(Debug, Clone)]
pub struct AssessmentReport {
    pub moe_x: f64,
    pub moe_y: f64,
    pub moe_norm: f64,
    pub sorenson: f64,
    pub rge: f64,
    pub rel_error: Option<f64>,
    pub mrd: f64,
    pub srd: f64,
    pub mdd: f64,
    pub sdd: f64,
}

/// Burned cell counts `|{T <= t}|` at each requested time.
pub fn fire_area_series(field: &FireArrivalField, times: &[f64]) -> Result<Vec<usize>, FireError> {
    for w in times.windows(2) {
        if w[1] <= w[0] {
            return Err(FireError::InvalidInput("area series times must increase".into()));
        }
    }
    Ok(times
        .iter()
        .map(|&t| field.values.iter().filter(|&&v| v <= t).count())
        .collect())
}

/// Relative growth error: `||A_e - A_g||_2 / ||A_g||_2`.
pub fn rge(a_est: &[f64], a_truth: &[f64]) -> Result<f64, FireError> {
    if a_est.len() != a_truth.len() {
        return Err(FireError::InvalidInput("area series lengths differ".into()));
    }
    let norm_g: f64 = a_truth.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_g == 0.0 {
        return Err(FireError::InvalidInput("zero ground-truth growth norm".into()));
    }
    let diff: f64 = a_est
        .iter()
        .zip(a_truth)
        .map(|(&e, &g)| (e - g) * (e - g))
        .sum::<f64>()
        .sqrt();
    Ok(diff / norm_g)
}

/// Measures of effectiveness with the misclassified cell sets.
#[derive(Debug, Clone)]
pub struct MoeResult {
    /// Overlap area over observed area.
    pub x: f64,
    /// Overlap area over predicted area.
    pub y: f64,
    /// Euclidean distance from the perfect score (1, 1), normalized to [0, 1].
    pub norm: f64,
    /// Observed-but-not-predicted cell indices.
    pub false_negative: Vec<usize>,
    /// Predicted-but-not-observed cell indices.
    pub false_positive: Vec<usize>,
}

pub fn moe(observed: &BurnMask, predicted: &BurnMask) -> Result<MoeResult, FireError> {
    if !observed.grid.same_shape(&predicted.grid) {
        return Err(FireError::GridMismatch("MOE masks on different grids".into()));
    }
    let a_ob = observed.area_cells();
    let a_pr = predicted.area_cells();
    if a_ob == 0 || a_pr == 0 {
        return Err(FireError::InvalidInput("MOE needs non-empty observed and predicted areas".into()));
    }
    let mut overlap = 0usize;
    let mut false_negative = Vec::new();
    let mut false_positive = Vec::new();
    for i in 0..observed.burned.len() {
        match (observed.burned[i], predicted.burned[i]) {
            (true, true) => overlap += 1,
            (true, false) => false_negative.push(i),
            (false, true) => false_positive.push(i),
            (false, false) => {}
        }
    }
    let x = overlap as f64 / a_ob as f64;
    let y = overlap as f64 / a_pr as f64;
    let norm = 1.0 - (((1.0 - x).powi(2) + (1.0 - y).powi(2)) / 2.0).sqrt();
    Ok(MoeResult { x, y, norm, false_negative, false_positive })
}

/// Sorenson similarity `2 |A ∩ B| / (|A| + |B|)`; both masks empty is
/// perfect agreement and scores 1.
pub fn sorenson(a: &BurnMask, b: &BurnMask) -> Result<f64, FireError> {
    if !a.grid.same_shape(&b.grid) {
        return Err(FireError::GridMismatch("Sorenson masks on different grids".into()));
    }
    let na = a.area_cells();
    let nb = b.area_cells();
    if na + nb == 0 {
        return Ok(1.0);
    }
    let overlap = a
        .burned
        .iter()
        .zip(&b.burned)
        .filter(|(&x, &y)| x && y)
        .count();
    Ok(2.0 * overlap as f64 / (na + nb) as f64)
}

/// Mean Sorenson score over aligned mask pairs.
pub fn mean_sorenson(pairs: &[(BurnMask, BurnMask)]) -> Result<f64, FireError> {
    if pairs.is_empty() {
        return Err(FireError::InvalidInput("no mask pairs".into()));
    }
    let mut sum = 0.0;
    for (a, b) in pairs {
        sum += sorenson(a, b)?;
    }
    Ok(sum / pairs.len() as f64)
}

/// Pointwise relative error `||T - T_e||_2 / ||T||_2` over all nodes.
pub fn relative_error(truth: &FireArrivalField, est: &FireArrivalField) -> Result<f64, FireError> {
    if !truth.grid.same_shape(&est.grid) {
        return Err(FireError::GridMismatch("relative error fields on different grids".into()));
    }
    let norm_t: f64 = truth.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_t == 0.0 {
        return Err(FireError::InvalidInput("zero-norm truth field".into()));
    }
    let diff: f64 = truth
        .values
        .iter()
        .zip(&est.values)
        .map(|(&t, &e)| (t - e) * (t - e))
        .sum::<f64>()
        .sqrt();
    Ok(diff / norm_t)
}

/// Wrap an angle difference into `(-pi, pi]`.
pub fn wrap_angle(d: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = d % two_pi;
    if w <= -std::f64::consts::PI {
        w += two_pi;
    } else if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

/// Mean/standard deviation of the ROS difference (estimate minus truth)
/// and of the wrapped spread-direction difference, over the masked cells.
pub fn ros_direction_stats(
    ros_truth: &[f64],
    theta_truth: &[f64],
    ros_est: &[f64],
    theta_est: &[f64],
    mask: &[bool],
) -> Result<(f64, f64, f64, f64), FireError> {
    let n = mask.len();
    if ros_truth.len() != n || theta_truth.len() != n || ros_est.len() != n || theta_est.len() != n {
        return Err(FireError::GridMismatch("ROS statistics input lengths differ".into()));
    }
    let mut rd = Vec::new();
    let mut dd = Vec::new();
    for i in 0..n {
        if mask[i] {
            rd.push(ros_est[i] - ros_truth[i]);
            dd.push(wrap_angle(theta_est[i] - theta_truth[i]));
        }
    }
    if rd.is_empty() {
        return Err(FireError::InvalidInput("empty ROS statistics mask".into()));
    }
    let stats = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64;
        (mean, var.sqrt())
    };
    let (mrd, srd) = stats(&rd);
    let (mdd, sdd) = stats(&dd);
    Ok((mrd, srd, mdd, sdd))
}

/// Per-cell agreement classes: 0 unburned in both, 1 overlap,
/// 2 false negative (observed only), 3 false positive (predicted only).
pub fn classification(observed: &BurnMask, predicted: &BurnMask) -> Result<Vec<u8>, FireError> {
    if !observed.grid.same_shape(&predicted.grid) {
        return Err(FireError::GridMismatch("classification masks on different grids".into()));
    }
    Ok(observed
        .burned
        .iter()
        .zip(&predicted.burned)
        .map(|(&o, &p)| match (o, p) {
            (false, false) => 0,
            (true, true) => 1,
            (true, false) => 2,
            (false, true) => 3,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, domain_from_meters};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Grid {
        let d = domain_from_meters(GeoPoint::new(40.0, -112.0).unwrap(), 5_000.0, 5_000.0, 0.0, 10.0)
            .unwrap();
        build_grid(d, 500.0).unwrap()
    }

    fn mask_from(bits: impl Fn(usize) -> bool) -> BurnMask {
        let g = grid();
        let burned = (0..g.len()).map(bits).collect();
        BurnMask { grid: g, burned }
    }

    fn cone(t0: f64, slope: f64) -> FireArrivalField {
        let g = grid();
        let mut f = FireArrivalField::constant(g.clone(), 10.0);
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                let (x, y) = g.node_xy(ix, iy);
                let i = g.index(ix, iy);
                f.values[i] = (t0 + slope * (x * x + y * y).sqrt()).min(10.0);
            }
        }
        f
    }

    #[test]
    fn area_series_monotone_and_endpoints() {
        let f = cone(1.0, 1e-3);
        let times = vec![0.0, 0.5, 1.0, 2.0, 5.0, 10.0];
        let areas = fire_area_series(&f, &times).unwrap();
        assert_eq!(areas[0], 0);
        assert_eq!(areas[1], 0);
        for w in areas.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert_eq!(*areas.last().unwrap(), f.grid.len());
        assert!(fire_area_series(&f, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn rge_basics() {
        let g = vec![10.0, 20.0, 40.0];
        assert_relative_eq!(rge(&g, &g).unwrap(), 0.0, epsilon = 1e-15);
        let double: Vec<f64> = g.iter().map(|v| 2.0 * v).collect();
        assert_relative_eq!(rge(&double, &g).unwrap(), 1.0, epsilon = 1e-12);
        // Scale invariance.
        let e = vec![12.0, 18.0, 44.0];
        let scaled_e: Vec<f64> = e.iter().map(|v| 7.0 * v).collect();
        let scaled_g: Vec<f64> = g.iter().map(|v| 7.0 * v).collect();
        assert_relative_eq!(
            rge(&e, &g).unwrap(),
            rge(&scaled_e, &scaled_g).unwrap(),
            epsilon = 1e-12
        );
        assert!(rge(&[1.0], &[0.0]).is_err());
        assert!(rge(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn moe_basics() {
        let a = mask_from(|i| i < 100);
        let r = moe(&a, &a).unwrap();
        assert_eq!((r.x, r.y), (1.0, 1.0));
        assert_relative_eq!(r.norm, 1.0, epsilon = 1e-15);
        assert!(r.false_negative.is_empty() && r.false_positive.is_empty());

        let b = mask_from(|i| (100..121).contains(&i));
        let disjoint = moe(&a, &b).unwrap();
        assert_eq!((disjoint.x, disjoint.y), (0.0, 0.0));

        // 100 observed, 100 predicted, 80 overlap.
        let obs = mask_from(|i| i < 100);
        let pred = mask_from(|i| (20..120).contains(&i));
        let r = moe(&obs, &pred).unwrap();
        assert_relative_eq!(r.x, 0.8, epsilon = 1e-15);
        assert_relative_eq!(r.y, 0.8, epsilon = 1e-15);
        assert_eq!(r.false_negative, (0..20).collect::<Vec<_>>());
        assert_eq!(r.false_positive, (100..120).collect::<Vec<_>>());

        let empty = mask_from(|_| false);
        assert!(moe(&empty, &a).is_err());
        assert!(moe(&a, &empty).is_err());
    }

    #[test]
    fn moe_nested_predicted_gives_y_one() {
        let obs = mask_from(|i| i < 60);
        let pred = mask_from(|i| i < 25);
        let r = moe(&obs, &pred).unwrap();
        assert_relative_eq!(r.y, 1.0, epsilon = 1e-15);
        assert!(r.x < 1.0);
    }

    #[test]
    fn sorenson_basics() {
        let a = mask_from(|i| i < 50);
        let b = mask_from(|i| (50..80).contains(&i));
        assert_relative_eq!(sorenson(&a, &a).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(sorenson(&a, &b).unwrap(), 0.0, epsilon = 1e-15);
        let empty = mask_from(|_| false);
        assert_relative_eq!(sorenson(&empty, &empty).unwrap(), 1.0, epsilon = 1e-15);
        // Symmetry.
        let c = mask_from(|i| i % 3 == 0);
        assert_eq!(sorenson(&a, &c).unwrap(), sorenson(&c, &a).unwrap());
    }

    #[test]
    fn sorenson_is_harmonic_mean_of_moe() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let p: f64 = rng.gen_range(0.2..0.8);
            let q: f64 = rng.gen_range(0.2..0.8);
            let bits_a: Vec<bool> = (0..grid().len()).map(|_| rng.gen_bool(p)).collect();
            let bits_b: Vec<bool> = (0..grid().len()).map(|_| rng.gen_bool(q)).collect();
            let a = BurnMask { grid: grid(), burned: bits_a };
            let b = BurnMask { grid: grid(), burned: bits_b };
            if a.area_cells() == 0 || b.area_cells() == 0 {
                continue;
            }
            let m = moe(&a, &b).unwrap();
            let s = sorenson(&a, &b).unwrap();
            let harmonic = if m.x + m.y > 0.0 { 2.0 * m.x * m.y / (m.x + m.y) } else { 0.0 };
            assert_relative_eq!(s, harmonic, epsilon = 1e-12);
        }
    }

    #[test]
    fn relative_error_basics() {
        let t = cone(1.0, 1e-3);
        assert_relative_eq!(relative_error(&t, &t).unwrap(), 0.0, epsilon = 1e-15);
        let mut shifted = t.clone();
        let eps = 0.25;
        for v in &mut shifted.values {
            *v += eps;
        }
        let norm_t: f64 = t.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        let expect = eps * (t.grid.len() as f64).sqrt() / norm_t;
        assert_relative_eq!(relative_error(&t, &shifted).unwrap(), expect, max_relative = 1e-12);
        let zero = FireArrivalField::constant(grid(), 0.0);
        assert!(relative_error(&zero, &t).is_err());
    }

    #[test]
    fn wrap_angle_range_and_symmetry() {
        use std::f64::consts::PI;
        assert_relative_eq!(wrap_angle(PI), PI, epsilon = 1e-15);
        assert_relative_eq!(wrap_angle(-PI), PI, epsilon = 1e-15);
        assert_relative_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(PI + 0.1), -PI + 0.1, epsilon = 1e-12);
        for i in -20..=20 {
            let w = wrap_angle(i as f64 * 0.7);
            assert!(w > -PI - 1e-12 && w <= PI + 1e-12);
        }
    }

    #[test]
    fn ros_direction_stats_basics() {
        use std::f64::consts::PI;
        let n = 50;
        let ros: Vec<f64> = (0..n).map(|i| 0.05 + 0.001 * i as f64).collect();
        let theta: Vec<f64> = (0..n).map(|i| -PI + 2.0 * PI * i as f64 / n as f64).collect();
        let mask = vec![true; n];
        let (mrd, srd, mdd, sdd) = ros_direction_stats(&ros, &theta, &ros, &theta, &mask).unwrap();
        assert_relative_eq!(mrd, 0.0, epsilon = 1e-15);
        assert_relative_eq!(srd, 0.0, epsilon = 1e-15);
        assert_relative_eq!(mdd, 0.0, epsilon = 1e-15);
        assert_relative_eq!(sdd, 0.0, epsilon = 1e-15);

        // Uniform +0.1 m/s offset.
        let off: Vec<f64> = ros.iter().map(|v| v + 0.1).collect();
        let (mrd, srd, _, _) = ros_direction_stats(&ros, &theta, &off, &theta, &mask).unwrap();
        assert_relative_eq!(mrd, 0.1, epsilon = 1e-12);
        assert_relative_eq!(srd, 0.0, epsilon = 1e-9);

        // +pi and -pi offsets wrap to the same magnitude: the mean
        // square mdd^2 + sdd^2 equals pi^2 either way, even when
        // rounding flips individual differences across the branch cut.
        let plus: Vec<f64> = theta.iter().map(|v| v + PI).collect();
        let minus: Vec<f64> = theta.iter().map(|v| v - PI).collect();
        let (_, _, mdd_p, sdd_p) = ros_direction_stats(&ros, &theta, &ros, &plus, &mask).unwrap();
        let (_, _, mdd_m, sdd_m) = ros_direction_stats(&ros, &theta, &ros, &minus, &mask).unwrap();
        assert_relative_eq!(mdd_p * mdd_p + sdd_p * sdd_p, PI * PI, epsilon = 1e-9);
        assert_relative_eq!(mdd_m * mdd_m + sdd_m * sdd_m, PI * PI, epsilon = 1e-9);

        assert!(ros_direction_stats(&ros, &theta, &ros, &theta, &vec![false; n]).is_err());
    }

    #[test]
    fn classification_classes() {
        let obs = mask_from(|i| i < 100);
        let pred = mask_from(|i| (20..120).contains(&i));
        let c = classification(&obs, &pred).unwrap();
        assert_eq!(c[0], 2);
        assert_eq!(c[50], 1);
        assert_eq!(c[110], 3);
        assert_eq!(c[120], 0);
    }

    #[test]
    fn perimeter_mask_disc() {
        let g = grid();
        // Square perimeter centered on the domain; 10 m of slack keeps
        // the 500 m-multiple nodes off the edge despite projection
        // round-trip noise.
        let proj = g.domain.projection();
        let poly: Vec<GeoPoint> = [(-1010.0, -1010.0), (1010.0, -1010.0), (1010.0, 1010.0), (-1010.0, 1010.0)]
            .iter()
            .map(|&(x, y)| proj.to_geo(x, y))
            .collect();
        let m = BurnMask::from_perimeter(&g, &poly).unwrap();
        // 2 km square at 500 m spacing: 5x5 nodes inclusive.
        assert_eq!(m.area_cells(), 25);
        assert!(BurnMask::from_perimeter(&g, &poly[..2]).is_err());
    }

    #[test]
    fn metrics_invariant_under_relabeling() {
        // Reversing the cell ordering of both masks leaves the scores
        // unchanged (the metrics are set-based).
        let obs = mask_from(|i| i % 7 < 3);
        let pred = mask_from(|i| i % 5 < 2);
        let rev = |m: &BurnMask| BurnMask {
            grid: m.grid.clone(),
            burned: m.burned.iter().rev().copied().collect(),
        };
        let m1 = moe(&obs, &pred).unwrap();
        let m2 = moe(&rev(&obs), &rev(&pred)).unwrap();
        assert_eq!((m1.x, m1.y), (m2.x, m2.y));
        assert_eq!(sorenson(&obs, &pred).unwrap(), sorenson(&rev(&obs), &rev(&pred)).unwrap());
    }
}
