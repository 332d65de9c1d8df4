//! Fuel-moisture-content adjustment from the discrepancy between a
//! forecast fire and the data-driven arrival-time estimate.
//!
//! A burn curve relates fuel moisture content (FMC, a mass fraction) to
//! relative rate of spread; it is strictly decreasing (drier fuel burns
//! faster). When the forecast and the estimate disagree consistently in
//! both burned area and mean ROS, the curve is inverted to find the FMC
//! that would scale the forecast ROS onto the estimated one.

use crate::error::FireError;
use crate::grid::FireArrivalField;
use crate::rosuq::RosField;

/// Monotone samples of relative rate of spread as a function of FMC.
#[derive(Debug, Clone)]
pub struct BurnCurve {
    /// FMC fractions, strictly increasing in [0, 1].
    pub fmc: Vec<f64>,
    /// Relative ROS at each FMC, strictly decreasing, > 0.
    pub ros_rel: Vec<f64>,
    /// Fritsch-Carlson tangents for monotone cubic evaluation.
    slopes: Vec<f64>,
}

impl Default for BurnCurve {
    fn default() -> Self {
        BurnCurve::new(
            vec![0.02, 0.05, 0.10, 0.20, 0.30],
            vec![1.4, 1.0, 0.6, 0.25, 0.05],
        )
        .unwrap()
    }
}

impl BurnCurve {
    pub fn new(fmc: Vec<f64>, ros_rel: Vec<f64>) -> Result<Self, FireError> {
        if fmc.len() != ros_rel.len() || fmc.len() < 2 {
            return Err(FireError::InvalidInput(
                "burn curve needs >= 2 matching fmc/ros_rel samples".into(),
            ));
        }
        for (&m, &r) in fmc.iter().zip(&ros_rel) {
            if !(0.0..=1.0).contains(&m) || !(r > 0.0) || !m.is_finite() || !r.is_finite() {
                return Err(FireError::InvalidInput(
                    "burn curve samples need fmc in [0,1] and ros_rel > 0".into(),
                ));
            }
        }
        for w in fmc.windows(2) {
            if w[1] <= w[0] {
                return Err(FireError::InvalidInput("burn curve fmc must strictly increase".into()));
            }
        }
        for w in ros_rel.windows(2) {
            if w[1] >= w[0] {
                return Err(FireError::InvalidInput(
                    "burn curve ros_rel must strictly decrease in fmc".into(),
                ));
            }
        }
        let slopes = fritsch_carlson_slopes(&fmc, &ros_rel);
        Ok(Self { fmc, ros_rel, slopes })
    }

    /// Relative ROS at `fmc` by monotone (Fritsch-Carlson) piecewise
    /// cubic interpolation; clamped to the sampled FMC range.
    pub fn eval(&self, fmc: f64) -> f64 {
        let n = self.fmc.len();
        if fmc <= self.fmc[0] {
            return self.ros_rel[0];
        }
        if fmc >= self.fmc[n - 1] {
            return self.ros_rel[n - 1];
        }
        let k = match self.fmc.binary_search_by(|v| v.total_cmp(&fmc)) {
            Ok(i) => return self.ros_rel[i],
            Err(i) => i - 1,
        };
        let h = self.fmc[k + 1] - self.fmc[k];
        let t = (fmc - self.fmc[k]) / h;
        let (y0, y1) = (self.ros_rel[k], self.ros_rel[k + 1]);
        let (m0, m1) = (self.slopes[k] * h, self.slopes[k + 1] * h);
        let (t2, t3) = (t * t, t * t * t);
        y0 * (2.0 * t3 - 3.0 * t2 + 1.0)
            + m0 * (t3 - 2.0 * t2 + t)
            + y1 * (-2.0 * t3 + 3.0 * t2)
            + m1 * (t3 - t2)
    }

    pub fn ros_range(&self) -> (f64, f64) {
        (*self.ros_rel.last().unwrap(), self.ros_rel[0])
    }
}

/// Fritsch-Carlson tangents: monotonicity-preserving derivative limiting
/// on the secant slopes.
fn fritsch_carlson_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let d: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
    let mut m = vec![0.0; n];
    m[0] = d[0];
    m[n - 1] = d[n - 2];
    for i in 1..n - 1 {
        m[i] = if d[i - 1] * d[i] <= 0.0 { 0.0 } else { 0.5 * (d[i - 1] + d[i]) };
    }
    for i in 0..n - 1 {
        if d[i] == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
            continue;
        }
        let a = m[i] / d[i];
        let b = m[i + 1] / d[i];
        let s = (a * a + b * b).sqrt();
        if s > 3.0 {
            m[i] = 3.0 * a / s * d[i];
            m[i + 1] = 3.0 * b / s * d[i];
        }
    }
    m
}

/// FMC whose curve value equals `ros_rel_target`, by bisection on the
/// monotone cubic, so the round trip `curve.eval(invert(r)) = r` holds to
/// machine precision. Errors when the target lies outside the sampled
/// ROS range.
pub fn invert_burn_curve(curve: &BurnCurve, ros_rel_target: f64) -> Result<f64, FireError> {
    let (lo_r, hi_r) = curve.ros_range();
    if !(ros_rel_target >= lo_r && ros_rel_target <= hi_r) {
        return Err(FireError::InvalidInput(format!(
            "ros_rel target {ros_rel_target} outside burn curve range [{lo_r}, {hi_r}]"
        )));
    }
    // Exact hits at sample points return the sampled FMC.
    for (&m, &r) in curve.fmc.iter().zip(&curve.ros_rel) {
        if r == ros_rel_target {
            return Ok(m);
        }
    }
    // Bracket: eval is decreasing in fmc.
    let (mut lo, mut hi) = (curve.fmc[0], *curve.fmc.last().unwrap());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if curve.eval(mid) > ros_rel_target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Cells burned (arrival before `t_end`) in both fields.
pub fn overlap_mask(
    a: &FireArrivalField,
    b: &FireArrivalField,
    t_end: f64,
) -> Result<Vec<bool>, FireError> {
    if !a.grid.same_shape(&b.grid) {
        return Err(FireError::GridMismatch("overlap mask needs matching grids".into()));
    }
    Ok(a.values.iter().zip(&b.values).map(|(&x, &y)| x < t_end && y < t_end).collect())
}

/// Mean ROS of both fields over cells that are in `mask`, valid in both
/// ROS fields, and below `cutoff` m/s in both. Returns
/// `(mean_est, mean_fcst, mean_fcst - mean_est)`.
pub fn mean_ros_diff(
    ros_est: &RosField,
    ros_fcst: &RosField,
    mask: &[bool],
    cutoff: f64,
) -> Result<(f64, f64, f64), FireError> {
    if ros_est.ros.len() != mask.len() || ros_fcst.ros.len() != mask.len() {
        return Err(FireError::GridMismatch("ROS fields and mask sizes differ".into()));
    }
    let mut n = 0usize;
    let (mut se, mut sf) = (0.0, 0.0);
    for i in 0..mask.len() {
        if mask[i]
            && ros_est.valid[i]
            && ros_fcst.valid[i]
            && ros_est.ros[i] <= cutoff
            && ros_fcst.ros[i] <= cutoff
        {
            se += ros_est.ros[i];
            sf += ros_fcst.ros[i];
            n += 1;
        }
    }
    if n == 0 {
        return Err(FireError::InvalidInput("empty ROS overlap intersection".into()));
    }
    let mean_est = se / n as f64;
    let mean_fcst = sf / n as f64;
    Ok((mean_est, mean_fcst, mean_fcst - mean_est))
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Per-cycle FMC adjustment, as a signed fraction clamped to +-0.01.
///
/// When the area discrepancy and the ROS discrepancy disagree in sign the
/// evidence is inconsistent and no change is made. Otherwise the burn
/// curve is inverted for the FMC that rescales the forecast ROS onto the
/// estimate: `curve(fmc') = curve(current_fmc) * mean_est / mean_fcst`,
/// with the target clamped into the curve's sampled ROS range.
pub fn fmc_adjustment(
    est_area: f64,
    fcst_area: f64,
    mean_est_ros: f64,
    mean_fcst_ros: f64,
    curve: &BurnCurve,
    current_fmc: f64,
) -> Result<f64, FireError> {
    if !(est_area >= 0.0) || !(fcst_area >= 0.0) {
        return Err(FireError::InvalidInput("areas must be nonnegative".into()));
    }
    if !(mean_est_ros > 0.0) || !(mean_fcst_ros > 0.0) {
        return Err(FireError::InvalidInput("mean ROS must be positive".into()));
    }
    if sign(fcst_area - est_area) != sign(mean_fcst_ros - mean_est_ros) {
        return Ok(0.0);
    }
    let (lo_r, hi_r) = curve.ros_range();
    let target = (curve.eval(current_fmc) * mean_est_ros / mean_fcst_ros).clamp(lo_r, hi_r);
    let fmc_new = invert_burn_curve(curve, target)?;
    Ok((fmc_new - current_fmc).clamp(-0.01, 0.01))
}
