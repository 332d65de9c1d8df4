//! Detection data likelihood: burn-decay heat proxy, logistic detection
//! probability, Gaussian geolocation error, their smoothed combination,
//! and the Laplacian smoothness prior.

use serde::{Deserialize, Serialize};

use crate::detection::SnappedDetections;
use crate::error::FireError;
use crate::grid::FireArrivalField;

pub const HOURS_PER_DAY: f64 = 24.0;

/// Parameters of the data likelihood. The logistic constants `a` and `b`
/// are derived from the anchor probabilities at construction.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LikelihoodParams {
    /// Geolocation error standard deviation, meters.
    pub sigma_geo: f64,
    /// Heat e-folding time, hours.
    pub c_decay: f64,
    /// False detection probability (detection with no fire).
    pub p_false: f64,
    /// Detection probability at the anchor lag.
    pub p_anchor: f64,
    /// Anchor lag after fire arrival, hours.
    pub t_anchor: f64,
    /// Arrival-window length for ROS uncertainty, hours.
    pub l_window: f64,
    /// Logistic slope, derived.
    pub a: f64,
    /// Logistic offset, derived; `1/(1+e^b)` is the false detection rate.
    pub b: f64,
}

impl LikelihoodParams {
    pub fn new(
        sigma_geo: f64,
        c_decay: f64,
        p_false: f64,
        p_anchor: f64,
        t_anchor: f64,
        l_window: f64,
    ) -> Result<Self, FireError> {
        if !(sigma_geo > 0.0) || !(c_decay > 0.0) || !(t_anchor > 0.0) || !(l_window > 0.0) {
            return Err(FireError::InvalidInput("likelihood scales must be positive".into()));
        }
        if !(p_false > 0.0 && p_false < 0.5) {
            return Err(FireError::InvalidInput("p_false must be in (0, 0.5)".into()));
        }
        if !(p_anchor > p_false && p_anchor < 1.0) {
            return Err(FireError::InvalidInput("p_anchor must be in (p_false, 1)".into()));
        }
        let b = solve_b(p_false)?;
        let a = solve_a(p_anchor, t_anchor, b, c_decay)?;
        Ok(Self { sigma_geo, c_decay, p_false, p_anchor, t_anchor, l_window, a, b })
    }
}

impl Default for LikelihoodParams {
    fn default() -> Self {
        Self::new(333.0, 10.0, 0.05, 0.3, 24.0, 6.0).expect("default parameters are valid")
    }
}

/// Heat proxy: zero before arrival, `exp(-lag/c)` after, with the lag in
/// hours. Times are decimal days.
pub fn burn_heat(t_obs: f64, t_arrival: f64, c_decay: f64) -> f64 {
    let lag_h = (t_obs - t_arrival) * HOURS_PER_DAY;
    if lag_h < 0.0 {
        0.0
    } else {
        (-lag_h / c_decay).exp()
    }
}

/// `b = ln((1 - p_false) / p_false)`.
pub fn solve_b(p_false: f64) -> Result<f64, FireError> {
    if !(p_false > 0.0 && p_false < 1.0) {
        return Err(FireError::InvalidInput("p_false must be in (0, 1)".into()));
    }
    Ok(((1.0 - p_false) / p_false).ln())
}

/// Logistic slope that produces `p_anchor` detection probability at a lag
/// of `t_anchor` hours: `a = [ln(p/(1-p)) + b] / h(t_anchor)`.
pub fn solve_a(p_anchor: f64, t_anchor: f64, b: f64, c_decay: f64) -> Result<f64, FireError> {
    if !(p_anchor > 0.0 && p_anchor < 1.0) {
        return Err(FireError::InvalidInput("p_anchor must be in (0, 1)".into()));
    }
    let h = (-t_anchor / c_decay).exp();
    if h <= 0.0 {
        return Err(FireError::InvalidInput("anchor heat must be positive".into()));
    }
    let a = ((p_anchor / (1.0 - p_anchor)).ln() + b) / h;
    if a <= 0.0 {
        return Err(FireError::InvalidInput(format!(
            "parameter combination yields non-positive logistic slope a = {a}"
        )));
    }
    Ok(a)
}

/// Logistic detection probability `1 / (1 + exp(-a h + b))`.
pub fn detection_probability(h: f64, a: f64, b: f64) -> f64 {
    1.0 / (1.0 + (-a * h + b).exp())
}

/// Isotropic bivariate Gaussian density at squared offset `r2` (meters^2).
pub fn geolocation_density(r2: f64, sigma_geo: f64) -> f64 {
    let s2 = sigma_geo * sigma_geo;
    (-r2 / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2)
}

/// Discrete geolocation kernel over a node: weights of the truncated
/// (4 sigma), renormalized Gaussian restricted to in-grid support, paired
/// with the node index each weight applies to.
fn geolocation_stencil(
    field: &FireArrivalField,
    node: usize,
    sigma_geo: f64,
) -> Vec<(usize, f64)> {
    let g = &field.grid;
    let sigma_cells = sigma_geo / g.spacing;
    let radius = (4.0 * sigma_cells).ceil().max(1.0) as isize;
    let (ix, iy) = g.coords(node);
    let mut out = Vec::new();
    let mut total = 0.0;
    for dy in -radius..=radius {
        let jy = iy as isize + dy;
        if jy < 0 || jy >= g.ny as isize {
            continue;
        }
        for dx in -radius..=radius {
            let jx = ix as isize + dx;
            if jx < 0 || jx >= g.nx as isize {
                continue;
            }
            let r2 = (dx * dx + dy * dy) as f64;
            let w = (-r2 / (2.0 * sigma_cells * sigma_cells)).exp();
            total += w;
            out.push((g.index(jx as usize, jy as usize), w));
        }
    }
    for (_, w) in &mut out {
        *w /= total;
    }
    out
}

/// Probability of a fire detection at `node` and time `t_obs` given the
/// arrival field: the heat field is convolved with the geolocation kernel
/// and the logistic applied at the node.
pub fn smoothed_detection_likelihood(
    field: &FireArrivalField,
    node: usize,
    t_obs: f64,
    params: &LikelihoodParams,
) -> f64 {
    let stencil = geolocation_stencil(field, node, params.sigma_geo);
    let mut h = 0.0;
    for (idx, w) in stencil {
        h += w * burn_heat(t_obs, field.values[idx], params.c_decay);
    }
    detection_probability(h, params.a, params.b)
}

/// Complement of [`smoothed_detection_likelihood`].
pub fn nondetection_likelihood(
    field: &FireArrivalField,
    node: usize,
    t_obs: f64,
    params: &LikelihoodParams,
) -> f64 {
    1.0 - smoothed_detection_likelihood(field, node, t_obs, params)
}

/// Sum of per-detection log likelihoods: fire pixels contribute
/// `ln p(d=1)`, non-fire pixels `ln p(d=0)`, unknown pixels nothing.
pub fn dataset_log_likelihood(
    field: &FireArrivalField,
    dets: &SnappedDetections,
    params: &LikelihoodParams,
) -> f64 {
    let mut total = 0.0;
    for i in 0..dets.len() {
        let d = &dets.detections[i];
        let node = dets.node[i];
        if d.kind.is_fire() {
            total += smoothed_detection_likelihood(field, node, d.time, params).ln();
        } else if d.kind.is_nonfire() {
            total += nondetection_likelihood(field, node, d.time, params).ln();
        }
    }
    total
}

/// Laplacian smoothness prior `(weight/2) * u' A u` with `u = T - T_ref`
/// and `A` the standard 5-point negative Laplacian scaled by `1/spacing^2`.
/// Differences are taken as zero outside the grid.
pub fn smoothness_penalty(
    field: &FireArrivalField,
    reference: &FireArrivalField,
    weight: f64,
) -> Result<f64, FireError> {
    let g = &field.grid;
    if !g.same_shape(&reference.grid) {
        return Err(FireError::GridMismatch("smoothness penalty grids differ".into()));
    }
    let h2 = g.spacing * g.spacing;
    let u: Vec<f64> = field
        .values
        .iter()
        .zip(&reference.values)
        .map(|(a, b)| a - b)
        .collect();
    let at = |ix: isize, iy: isize| -> f64 {
        if ix < 0 || iy < 0 || ix >= g.nx as isize || iy >= g.ny as isize {
            0.0
        } else {
            u[g.index(ix as usize, iy as usize)]
        }
    };
    let mut quad = 0.0;
    for iy in 0..g.ny as isize {
        for ix in 0..g.nx as isize {
            let center = at(ix, iy);
            let lap = (4.0 * center - at(ix - 1, iy) - at(ix + 1, iy) - at(ix, iy - 1) - at(ix, iy + 1)) / h2;
            quad += center * lap;
        }
    }
    Ok(0.5 * weight * quad)
}
