//! Rate of spread from fire-arrival-time gradients and along paths, and
//! the analytic distribution of path ROS under geolocation and
//! arrival-time uncertainty, with a Monte Carlo cross-check.
//!
//! Conventions: arrival times are days and grids are meters, so gradients
//! are days per meter and `ros = 1 / (|grad T| * 86400)` m/s. The
//! uncertainty model works in hours (time window) and meters (distance),
//! so its ROS moments are in meters per hour.

use crate::error::FireError;
use crate::graph::{FireVertex, SECONDS_PER_DAY};
use crate::grid::FireArrivalField;
use crate::parallel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gradient of the arrival field, days per meter: central differences in
/// the interior, one-sided at the edges.
pub fn gradient(field: &FireArrivalField) -> (Vec<f64>, Vec<f64>) {
    let g = &field.grid;
    assert!(g.nx >= 2 && g.ny >= 2);
    let h = g.spacing;
    let mut tx = vec![0.0; g.len()];
    let mut ty = vec![0.0; g.len()];
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            let i = g.index(ix, iy);
            tx[i] = if ix == 0 {
                (field.at(1, iy) - field.at(0, iy)) / h
            } else if ix == g.nx - 1 {
                (field.at(ix, iy) - field.at(ix - 1, iy)) / h
            } else {
                (field.at(ix + 1, iy) - field.at(ix - 1, iy)) / (2.0 * h)
            };
            ty[i] = if iy == 0 {
                (field.at(ix, 1) - field.at(ix, 0)) / h
            } else if iy == g.ny - 1 {
                (field.at(ix, iy) - field.at(ix, iy - 1)) / h
            } else {
                (field.at(ix, iy + 1) - field.at(ix, iy - 1)) / (2.0 * h)
            };
        }
    }
    (tx, ty)
}

/// Rate of spread and spread direction per node.
#[derive(Debug, Clone)]
pub struct RosField {
    /// Arrival-time gradient, days per meter.
    pub tx: Vec<f64>,
    pub ty: Vec<f64>,
    /// Rate of spread, m/s; meaningful only where `valid`.
    pub ros: Vec<f64>,
    /// Spread direction, radians counterclockwise from east.
    pub theta: Vec<f64>,
    /// False where the gradient vanishes or the ROS exceeds the cutoff.
    pub valid: Vec<bool>,
}

pub const GRADIENT_EPS: f64 = 1e-12;
pub const ROS_CUTOFF_DEFAULT: f64 = 2.0;

/// ROS as the reciprocal gradient magnitude, masked where the gradient is
/// (near) zero or the rate exceeds `cutoff` m/s.
pub fn ros_field(field: &FireArrivalField, cutoff: f64) -> RosField {
    let (tx, ty) = gradient(field);
    let n = tx.len();
    let mut ros = vec![0.0; n];
    let mut theta = vec![0.0; n];
    let mut valid = vec![false; n];
    for i in 0..n {
        let mag = (tx[i] * tx[i] + ty[i] * ty[i]).sqrt();
        theta[i] = ty[i].atan2(tx[i]);
        if mag < GRADIENT_EPS {
            continue;
        }
        let r = 1.0 / (mag * SECONDS_PER_DAY);
        if r > cutoff {
            continue;
        }
        ros[i] = r;
        valid[i] = true;
    }
    RosField { tx, ty, ros, theta, valid }
}

/// Edge-by-edge rate of spread along paths, m/s, with summary statistics.
#[derive(Debug, Clone)]
pub struct PathRos {
    pub edge_ros: Vec<f64>,
    pub mean: f64,
    pub median: f64,
}

pub fn path_ros(paths: &[Vec<FireVertex>]) -> Result<PathRos, FireError> {
    let mut edge_ros = Vec::new();
    for p in paths {
        for pair in p.windows(2) {
            let dt = pair[1].time - pair[0].time;
            if dt <= 0.0 {
                return Err(FireError::InvalidInput(
                    "path edge with non-positive time difference".into(),
                ));
            }
            let dist = crate::geo::great_circle_distance(pair[0].geo, pair[1].geo);
            edge_ros.push(dist / (dt * SECONDS_PER_DAY));
        }
    }
    if edge_ros.is_empty() {
        return Err(FireError::InvalidInput("no path edges for ROS".into()));
    }
    let mean = edge_ros.iter().sum::<f64>() / edge_ros.len() as f64;
    let mut sorted = edge_ros.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = sorted[sorted.len() / 2];
    Ok(PathRos { edge_ros, mean, median })
}

/// Inputs of the path-ROS uncertainty model.
#[derive(Debug, Clone, Copy)]
pub struct RosUncertaintyInputs {
    /// Nominal separation between the detections, meters.
    pub d: f64,
    /// Geolocation standard deviations, meters.
    pub sigma1: f64,
    pub sigma2: f64,
    /// Time between the detections, hours; must exceed the window.
    pub c: f64,
    /// Arrival-window length before each observation, hours.
    pub l: f64,
}

impl RosUncertaintyInputs {
    pub fn new(d: f64, sigma1: f64, sigma2: f64, c: f64, l: f64) -> Result<Self, FireError> {
        if !(d >= 0.0) || !(sigma1 > 0.0) || !(sigma2 > 0.0) {
            return Err(FireError::InvalidInput("distances and sigmas must be positive".into()));
        }
        if !(c > l && l > 0.0) {
            return Err(FireError::InvalidInput(format!(
                "need c > l > 0 for finite ROS moments, got c = {c}, l = {l}"
            )));
        }
        Ok(Self { d, sigma1, sigma2, c, l })
    }
}

fn check_cl(c: f64, l: f64) -> Result<(), FireError> {
    if !(c > l && l > 0.0) {
        return Err(FireError::InvalidInput(format!("need c > l > 0, got c = {c}, l = {l}")));
    }
    Ok(())
}

/// Triangular density of the time difference between two length-`l`
/// arrival windows separated by `c` hours: support `[c-l, c+l]`, apex
/// `1/l` at `c`.
pub fn time_diff_pdf(t: f64, c: f64, l: f64) -> f64 {
    if t <= c - l || t >= c + l {
        0.0
    } else if t <= c {
        (t - (c - l)) / (l * l)
    } else {
        ((c + l) - t) / (l * l)
    }
}

/// CDF of `S = 1/T`, the reciprocal time difference.
pub fn recip_cdf(s: f64, c: f64, l: f64) -> Result<f64, FireError> {
    check_cl(c, l)?;
    if s < 1.0 / (c + l) {
        return Ok(0.0);
    }
    if s > 1.0 / (c - l) {
        return Ok(1.0);
    }
    if s <= 1.0 / c {
        let u = 1.0 / s - (c + l);
        Ok(u * u / (2.0 * l * l))
    } else {
        let u = 1.0 / s - (c - l);
        Ok(1.0 - u * u / (2.0 * l * l))
    }
}

/// PDF of `S = 1/T`.
pub fn recip_pdf(s: f64, c: f64, l: f64) -> Result<f64, FireError> {
    check_cl(c, l)?;
    if s < 1.0 / (c + l) || s > 1.0 / (c - l) {
        return Ok(0.0);
    }
    let ls2 = (l * s) * (l * s);
    if s <= 1.0 / c {
        Ok((-1.0 / s + (c + l)) / ls2)
    } else {
        Ok((1.0 / s - (c - l)) / ls2)
    }
}

/// `E[S] = (1/l^2) ln[((c+l)/(c-l))^l ((c^2-l^2)/c^2)^c]`, per hour.
pub fn expected_s(c: f64, l: f64) -> Result<f64, FireError> {
    check_cl(c, l)?;
    let term = l * ((c + l) / (c - l)).ln() + c * ((c * c - l * l) / (c * c)).ln();
    Ok(term / (l * l))
}

/// `E[S^2] = (1/l^2) ln(c^2 / (c^2 - l^2))`, per hour squared.
pub fn expected_s2(c: f64, l: f64) -> Result<f64, FireError> {
    check_cl(c, l)?;
    Ok(((c * c) / (c * c - l * l)).ln() / (l * l))
}

pub fn var_s(c: f64, l: f64) -> Result<f64, FireError> {
    let e = expected_s(c, l)?;
    Ok(expected_s2(c, l)? - e * e)
}

/// Gaussian density of the signed distance difference: mean `d`, variance
/// `sigma1^2 + sigma2^2`.
pub fn distance_diff_density(z: f64, d: f64, sigma1: f64, sigma2: f64) -> f64 {
    let v = sigma1 * sigma1 + sigma2 * sigma2;
    (-(d - z) * (d - z) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
}

/// `Var[R] = (d^2 + sigma1^2 + sigma2^2) E[S^2] - d^2 E[S]^2`, with R in
/// meters per hour.
pub fn var_ros(inputs: &RosUncertaintyInputs) -> Result<f64, FireError> {
    let es = expected_s(inputs.c, inputs.l)?;
    let es2 = expected_s2(inputs.c, inputs.l)?;
    let d2 = inputs.d * inputs.d;
    let s2 = inputs.sigma1 * inputs.sigma1 + inputs.sigma2 * inputs.sigma2;
    Ok((d2 + s2) * es2 - d2 * es * es)
}

/// Mean of R = D S under the same model, meters per hour.
pub fn mean_ros(inputs: &RosUncertaintyInputs) -> Result<f64, FireError> {
    Ok(inputs.d * expected_s(inputs.c, inputs.l)?)
}

/// Streaming moment accumulator (mean and M2), mergeable in order.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * self.n as f64 * other.n as f64 / n as f64;
        Moments { n, mean, m2 }
    }
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Monte Carlo sample of R = D/T: D ~ Normal(d, sigma1^2 + sigma2^2),
/// T the difference of two uniform length-`l` windows `c` hours apart
/// (non-positive T rejected). Sharded with per-shard seeds derived from
/// the root seed, so results are identical for any thread count.
pub fn mc_ros_sample(inputs: &RosUncertaintyInputs, n: usize, seed: u64) -> (f64, f64) {
    const SHARDS: usize = 64;
    let mut state = seed;
    let shard_seeds: Vec<u64> = (0..SHARDS).map(|_| splitmix(&mut state)).collect();
    let per_shard = n / SHARDS;
    let remainder = n % SHARDS;
    let sd = (inputs.sigma1 * inputs.sigma1 + inputs.sigma2 * inputs.sigma2).sqrt();
    let (d, c, l) = (inputs.d, inputs.c, inputs.l);
    let shard_moments = parallel::map_indexed(SHARDS, |si| {
        let mut rng = ChaCha8Rng::seed_from_u64(shard_seeds[si]);
        let count = per_shard + usize::from(si < remainder);
        let mut m = Moments::default();
        let mut i = 0;
        while i < count {
            // Box-Muller for the Gaussian distance difference.
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            let dist = d + sd * z;
            let t = c + rng.gen_range(-l..0.0) - rng.gen_range(-l..0.0);
            if t <= 0.0 {
                continue;
            }
            m.push(dist / t);
            i += 1;
        }
        m
    });
    let total = shard_moments.into_iter().fold(Moments::default(), Moments::merge);
    let var = if total.n > 1 { total.m2 / (total.n - 1) as f64 } else { 0.0 };
    (total.mean, var)
}

/// Monte Carlo moments of S = 1/T alone (oracle for the closed forms).
pub fn mc_s_sample(c: f64, l: f64, n: usize, seed: u64) -> (f64, f64) {
    const SHARDS: usize = 64;
    let mut state = seed;
    let shard_seeds: Vec<u64> = (0..SHARDS).map(|_| splitmix(&mut state)).collect();
    let per_shard = n / SHARDS;
    let remainder = n % SHARDS;
    let shard_moments = parallel::map_indexed(SHARDS, |si| {
        let mut rng = ChaCha8Rng::seed_from_u64(shard_seeds[si]);
        let count = per_shard + usize::from(si < remainder);
        let mut m = Moments::default();
        let mut i = 0;
        while i < count {
            let t = c + rng.gen_range(-l..0.0) - rng.gen_range(-l..0.0);
            if t <= 0.0 {
                continue;
            }
            m.push(1.0 / t);
            i += 1;
        }
        m
    });
    let total = shard_moments.into_iter().fold(Moments::default(), Moments::merge);
    let var = if total.n > 1 { total.m2 / (total.n - 1) as f64 } else { 0.0 };
    (total.mean, var)
}
