//! Cubic smoothing splines along shortest paths and path densification
//! with interpolated pseudo-detections.
//!
//! The fitted curve minimizes
//! `p Σ w_j |y_j − f(s_j)|² + (1 − p) ∫ |f''|²`
//! over natural cubic splines: large `p` favors fitting the data, small
//! `p` favors straightness, `p = 1` interpolates and `p = 0` degenerates
//! to the weighted least-squares line.

use crate::error::FireError;
use crate::geo::great_circle_distance;
use crate::graph::FireVertex;

/// One fitted scalar channel: knot positions, fitted values, and second
/// derivatives (natural boundary: zero at both ends).
#[derive(Debug, Clone)]
pub struct SplineChannel {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub m: Vec<f64>,
}

/// Dense symmetric-positive-definite solve by Gaussian elimination with
/// partial pivoting. Sizes here are path lengths, so O(n^3) is fine.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, FireError> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[piv][col].abs() < 1e-14 {
            return Err(FireError::InvalidInput("singular spline system".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut sum = b[row];
        for k in (row + 1)..n {
            sum -= a[row][k] * x[k];
        }
        x[row] = sum / a[row][row];
    }
    Ok(x)
}

/// Weighted least-squares straight line through the data.
fn weighted_line(s: &[f64], y: &[f64], w: &[f64]) -> (f64, f64) {
    let sw: f64 = w.iter().sum();
    let sx: f64 = s.iter().zip(w).map(|(x, w)| x * w).sum();
    let sy: f64 = y.iter().zip(w).map(|(y, w)| y * w).sum();
    let sxx: f64 = s.iter().zip(w).map(|(x, w)| x * x * w).sum();
    let sxy: f64 = s.iter().zip(y).zip(w).map(|((x, y), w)| x * y * w).sum();
    let det = sw * sxx - sx * sx;
    if det.abs() < 1e-14 * sxx.max(1.0) {
        // All abscissae equal: flat line through the weighted mean.
        return (sy / sw, 0.0);
    }
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / sw;
    (intercept, slope)
}

/// Fit one smoothing-spline channel (Reinsch-type construction).
pub fn smoothing_spline(s: &[f64], y: &[f64], w: &[f64], p: f64) -> Result<SplineChannel, FireError> {
    let n = s.len();
    if n < 2 || y.len() != n || w.len() != n {
        return Err(FireError::InvalidInput("spline needs at least 2 knots with matching lengths".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(FireError::InvalidInput(format!("smoothing weight p = {p} outside [0, 1]")));
    }
    for pair in s.windows(2) {
        if pair[1] <= pair[0] {
            return Err(FireError::InvalidInput("spline knots must be strictly increasing".into()));
        }
    }
    if w.iter().any(|&wi| wi <= 0.0) {
        return Err(FireError::InvalidInput("spline weights must be positive".into()));
    }

    if p == 0.0 {
        // Pure curvature penalty: the weighted least-squares line.
        let (b0, b1) = weighted_line(s, y, w);
        let a: Vec<f64> = s.iter().map(|&x| b0 + b1 * x).collect();
        return Ok(SplineChannel { s: s.to_vec(), a, m: vec![0.0; n] });
    }
    if n == 2 {
        // Two knots: any p gives the connecting segment.
        return Ok(SplineChannel { s: s.to_vec(), a: y.to_vec(), m: vec![0.0; n] });
    }

    let h: Vec<f64> = s.windows(2).map(|x| x[1] - x[0]).collect();
    let k = n - 2;
    // R (k x k): the curvature Gram matrix over interior knots.
    let mut r = vec![vec![0.0f64; k]; k];
    for i in 0..k {
        r[i][i] = (h[i] + h[i + 1]) / 3.0;
        if i + 1 < k {
            r[i][i + 1] = h[i + 1] / 6.0;
            r[i + 1][i] = h[i + 1] / 6.0;
        }
    }
    // Q (n x k): second-difference operator, column j touching knots
    // j, j+1, j+2.
    let mut q = vec![vec![0.0f64; k]; n];
    for j in 0..k {
        q[j][j] = 1.0 / h[j];
        q[j + 1][j] = -1.0 / h[j] - 1.0 / h[j + 1];
        q[j + 2][j] = 1.0 / h[j + 1];
    }

    // System (pR + (1-p) Qᵀ W⁻¹ Q) m = p Qᵀ y.
    let mut sys = vec![vec![0.0f64; k]; k];
    for i in 0..k {
        for j in 0..k {
            let mut qtq = 0.0;
            for l in 0..n {
                qtq += q[l][i] * q[l][j] / w[l];
            }
            sys[i][j] = p * r[i][j] + (1.0 - p) * qtq;
        }
    }
    let rhs: Vec<f64> = (0..k)
        .map(|i| p * (0..n).map(|l| q[l][i] * y[l]).sum::<f64>())
        .collect();
    let m_int = solve_dense(sys, rhs)?;

    // a = y − ((1−p)/p) W⁻¹ Q m.
    let mut a = y.to_vec();
    let factor = (1.0 - p) / p;
    for l in 0..n {
        let mut qm = 0.0;
        for j in 0..k {
            qm += q[l][j] * m_int[j];
        }
        a[l] -= factor * qm / w[l];
    }
    let mut m = vec![0.0; n];
    m[1..(k + 1)].copy_from_slice(&m_int);
    Ok(SplineChannel { s: s.to_vec(), a, m })
}

impl SplineChannel {
    /// Evaluate the natural cubic spline; linear extrapolation outside the
    /// knot range (second derivative zero at the ends).
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.s.len();
        if n == 1 {
            return self.a[0];
        }
        let seg = match self.s.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        };
        let h = self.s[seg + 1] - self.s[seg];
        let t = (x - self.s[seg]) / h;
        if !(0.0..=1.0).contains(&t) {
            // Outside the range: extend linearly from the nearest end.
            let (i, j) = if t < 0.0 { (0, 1) } else { (n - 2, n - 1) };
            let slope = self.end_slope(i, j);
            let (x0, y0) = if t < 0.0 { (self.s[0], self.a[0]) } else { (self.s[n - 1], self.a[n - 1]) };
            return y0 + slope * (x - x0);
        }
        let (m0, m1) = (self.m[seg], self.m[seg + 1]);
        let (y0, y1) = (self.a[seg], self.a[seg + 1]);
        let u = 1.0 - t;
        u * y0 + t * y1
            + h * h / 6.0 * ((u * u * u - u) * m0 + (t * t * t - t) * m1)
    }

    fn end_slope(&self, i: usize, j: usize) -> f64 {
        let h = self.s[j] - self.s[i];
        // Derivative of the cubic at the outer knot of segment (i, j).
        let base = (self.a[j] - self.a[i]) / h;
        if i == 0 {
            base - h / 6.0 * (2.0 * self.m[i] + self.m[j])
        } else {
            base + h / 6.0 * (self.m[i] + 2.0 * self.m[j])
        }
    }

    /// Curvature energy of the fitted spline.
    pub fn curvature_energy(&self) -> f64 {
        let mut total = 0.0;
        for i in 0..self.s.len() - 1 {
            let h = self.s[i + 1] - self.s[i];
            let (m0, m1) = (self.m[i], self.m[i + 1]);
            total += h / 3.0 * (m0 * m0 + m0 * m1 + m1 * m1);
        }
        total
    }
}

/// The smoothing-spline objective evaluated for a fitted channel against
/// the original data.
pub fn functional_value(ch: &SplineChannel, s: &[f64], y: &[f64], w: &[f64], p: f64) -> f64 {
    let fit: f64 = s
        .iter()
        .zip(y)
        .zip(w)
        .map(|((&x, &yv), &wv)| wv * (yv - ch.eval(x)).powi(2))
        .sum();
    p * fit + (1.0 - p) * ch.curvature_energy()
}

/// A path fitted as three spline channels (x, y, time) versus arclength.
#[derive(Debug, Clone)]
pub struct PathSpline {
    pub arclength: Vec<f64>,
    pub x: SplineChannel,
    pub y: SplineChannel,
    pub t: SplineChannel,
}

/// Cumulative great-circle arclength along the path vertices, meters.
pub fn path_arclength(verts: &[FireVertex]) -> Vec<f64> {
    let mut s = Vec::with_capacity(verts.len());
    let mut total = 0.0;
    s.push(0.0);
    for pair in verts.windows(2) {
        total += great_circle_distance(pair[0].geo, pair[1].geo);
        s.push(total);
    }
    s
}

/// Fit the three channels of a path with smoothing weight `p`.
pub fn fit_path(verts: &[FireVertex], p: f64) -> Result<PathSpline, FireError> {
    if verts.len() < 2 {
        return Err(FireError::InvalidInput("path spline needs at least 2 vertices".into()));
    }
    let mut s = path_arclength(verts);
    // Guard against coincident consecutive vertices (zero-length segments).
    for i in 1..s.len() {
        if s[i] <= s[i - 1] {
            s[i] = s[i - 1] + 1e-6;
        }
    }
    let w = vec![1.0; verts.len()];
    let xs: Vec<f64> = verts.iter().map(|v| v.xy.0).collect();
    let ys: Vec<f64> = verts.iter().map(|v| v.xy.1).collect();
    let ts: Vec<f64> = verts.iter().map(|v| v.time).collect();
    Ok(PathSpline {
        x: smoothing_spline(&s, &xs, &w, p)?,
        y: smoothing_spline(&s, &ys, &w, p)?,
        t: smoothing_spline(&s, &ts, &w, p)?,
        arclength: s,
    })
}

/// Insert pseudo-detections along a path wherever consecutive vertices are
/// farther apart than `spacing_max`. Positions and times come from the
/// fitted splines; inserted times are clamped non-decreasing.
pub fn densify_path(
    verts: &[FireVertex],
    spacing_max: f64,
    n_insert: usize,
    p: f64,
) -> Result<Vec<FireVertex>, FireError> {
    if verts.len() < 2 {
        return Ok(verts.to_vec());
    }
    let spline = fit_path(verts, p)?;
    let s = &spline.arclength;
    // Inverse projection anchored on the first vertex so synthesized geo
    // positions stay consistent with the planar coordinates.
    let origin_xy = verts[0].xy;
    let local = crate::geo::PlanarProjection::new(verts[0].geo);
    let to_geo = |x: f64, y: f64| local.to_geo(x - origin_xy.0, y - origin_xy.1);

    let mut out: Vec<FireVertex> = Vec::new();
    for i in 0..verts.len() - 1 {
        out.push(verts[i]);
        let gap = s[i + 1] - s[i];
        if gap > spacing_max {
            // Enough points to bring chord gaps under spacing_max, with a
            // 5% margin so curved splines cannot re-trigger insertion.
            let needed = (gap / (0.95 * spacing_max)).ceil() as usize - 1;
            let k = n_insert.max(needed);
            for j in 1..=k {
                let si = s[i] + gap * j as f64 / (k + 1) as f64;
                let (x, y) = (spline.x.eval(si), spline.y.eval(si));
                out.push(FireVertex { geo: to_geo(x, y), xy: (x, y), time: spline.t.eval(si) });
            }
        }
    }
    out.push(*verts.last().unwrap());
    // Monotone-time clamp along the augmented path.
    for i in 1..out.len() {
        if out[i].time < out[i - 1].time {
            out[i].time = out[i - 1].time;
        }
    }
    Ok(out)
}
