//! Grid search for the ignition point and time: candidate (location,
//! time) pairs drive a cone surrogate forward model whose detection
//! log-likelihood is maximized over the candidate set.

use crate::detection::SnappedDetections;
use crate::error::FireError;
use crate::geo::GeoPoint;
use crate::grid::{FireArrivalField, FireDomain, Grid};
use crate::likelihood::{dataset_log_likelihood, smoothness_penalty, LikelihoodParams};
use crate::parallel;
use crate::synth::{cone_field, ConeSpec};

/// One ignition hypothesis; the surrogate forward model substitutes its
/// position and time into a cone template.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IgnitionCandidate {
    pub pos: GeoPoint,
    /// Ignition time, days.
    pub t0: f64,
}

/// Cartesian product of an `nx` x `ny` grid of cell-center positions
/// with the candidate times, in deterministic order: times outermost
/// (earliest first), then positions row-major from the southwest.
pub fn candidate_grid(
    domain: &FireDomain,
    nx: usize,
    ny: usize,
    times: &[f64],
) -> Result<Vec<IgnitionCandidate>, FireError> {
    if nx == 0 || ny == 0 || times.is_empty() {
        return Err(FireError::InvalidInput("candidate grid needs nx, ny >= 1 and times".into()));
    }
    let lat_span = domain.lat_max - domain.lat_min;
    let lon_span = domain.lon_max - domain.lon_min;
    let mut out = Vec::with_capacity(nx * ny * times.len());
    for &t0 in times {
        for iy in 0..ny {
            for ix in 0..nx {
                let lat = domain.lat_min + (iy as f64 + 0.5) * lat_span / ny as f64;
                let lon = domain.lon_min + (ix as f64 + 0.5) * lon_span / nx as f64;
                out.push(IgnitionCandidate { pos: GeoPoint::new(lat, lon)?, t0 });
            }
        }
    }
    Ok(out)
}

/// Cone arrival field with the candidate's position and time substituted
/// into the template's lobe slopes.
pub fn surrogate_forecast(
    candidate: &IgnitionCandidate,
    template: &ConeSpec,
    grid: &Grid,
) -> Result<FireArrivalField, FireError> {
    let spec = ConeSpec::new(candidate.pos, candidate.t0, template.lobe_slopes.clone())?;
    cone_field(&spec, grid)
}

/// Outcome of a grid search: the winner and the full per-candidate score
/// table (retained so the search can be repeated on a refined grid).
#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best_index: usize,
    pub best: IgnitionCandidate,
    pub scores: Vec<f64>,
}

/// Index of the best score; exact ties go to the earliest `t0`, then to
/// the lowest candidate index.
pub fn argmax_candidates(candidates: &[IgnitionCandidate], scores: &[f64]) -> usize {
    let mut best = 0usize;
    for i in 1..scores.len() {
        let better = scores[i] > scores[best]
            || (scores[i] == scores[best]
                && (candidates[i].t0 < candidates[best].t0
                    || (candidates[i].t0 == candidates[best].t0 && i < best)));
        if better {
            best = i;
        }
    }
    best
}

/// Evaluate every candidate's objective and return the argmax.
///
/// The objective is the detection data log-likelihood of the candidate's
/// surrogate forecast; when a smoothness reference and nonzero weight
/// are supplied, the Laplacian penalty against that reference is
/// subtracted.
pub fn grid_search(
    candidates: &[IgnitionCandidate],
    dets: &SnappedDetections,
    params: &LikelihoodParams,
    template: &ConeSpec,
    smoothness_ref: Option<&FireArrivalField>,
    weight: f64,
) -> Result<SearchResult, FireError> {
    if candidates.is_empty() {
        return Err(FireError::InvalidInput("no ignition candidates".into()));
    }
    if dets.is_empty() {
        return Err(FireError::InvalidInput("no detections for ignition search".into()));
    }
    let grid = &dets.grid;
    let results = parallel::map_slice(candidates, |c| -> Result<f64, FireError> {
        let forecast = surrogate_forecast(c, template, grid)?;
        let mut score = dataset_log_likelihood(&forecast, dets, params);
        if let Some(reference) = smoothness_ref {
            if weight != 0.0 {
                score -= smoothness_penalty(&forecast, reference, weight)?;
            }
        }
        Ok(score)
    });
    let scores = results.into_iter().collect::<Result<Vec<f64>, _>>()?;
    let best_index = argmax_candidates(candidates, &scores);
    Ok(SearchResult { best_index, best: candidates[best_index], scores })
}

/// Refined candidate set around a winner: an `nx` x `ny` x `nt` box of
/// half-width `dlat`/`dlon` degrees and `dt` days, with the winner
/// itself re-included as the first candidate so refinement can never
/// lose objective value.
pub fn refine_candidates(
    winner: &IgnitionCandidate,
    domain: &FireDomain,
    dlat: f64,
    dlon: f64,
    dt: f64,
    nx: usize,
    ny: usize,
    nt: usize,
) -> Result<Vec<IgnitionCandidate>, FireError> {
    if nx == 0 || ny == 0 || nt == 0 {
        return Err(FireError::InvalidInput("refinement needs nx, ny, nt >= 1".into()));
    }
    let mut out = vec![*winner];
    for it in 0..nt {
        let t0 = if nt == 1 {
            winner.t0
        } else {
            (winner.t0 - dt + 2.0 * dt * it as f64 / (nt - 1) as f64).max(0.0)
        };
        for iy in 0..ny {
            for ix in 0..nx {
                let lat = if ny == 1 {
                    winner.pos.lat
                } else {
                    winner.pos.lat - dlat + 2.0 * dlat * iy as f64 / (ny - 1) as f64
                };
                let lon = if nx == 1 {
                    winner.pos.lon
                } else {
                    winner.pos.lon - dlon + 2.0 * dlon * ix as f64 / (nx - 1) as f64
                };
                let lat = lat.clamp(domain.lat_min, domain.lat_max);
                let lon = lon.clamp(domain.lon_min, domain.lon_max);
                out.push(IgnitionCandidate { pos: GeoPoint::new(lat, lon)?, t0 });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::snap_detections;
    use crate::grid::{build_grid, domain_from_meters};
    use crate::synth::{scatter_detections, scatter_nonfire, GranuleSchedule};
    use approx::assert_relative_eq;

    fn domain() -> FireDomain {
        domain_from_meters(GeoPoint::new(40.0, -112.0).unwrap(), 20_000.0, 20_000.0, 0.0, 20.0)
            .unwrap()
    }

    fn grid() -> Grid {
        build_grid(domain(), 500.0).unwrap()
    }

    #[test]
    fn candidate_grid_counts_and_containment() {
        let d = domain();
        let c = candidate_grid(&d, 10, 10, &[0.0, 0.5, 1.0, 1.5, 2.0]).unwrap();
        assert_eq!(c.len(), 500);
        assert!(c.iter().all(|cand| d.contains(cand.pos)));
        // Single candidate sits at the domain center.
        let single = candidate_grid(&d, 1, 1, &[0.75]).unwrap();
        assert_eq!(single.len(), 1);
        let center = d.center();
        assert_relative_eq!(single[0].pos.lat, center.lat, epsilon = 1e-12);
        assert_relative_eq!(single[0].pos.lon, center.lon, epsilon = 1e-12);
        assert_eq!(single[0].t0, 0.75);
        assert!(candidate_grid(&d, 0, 1, &[0.0]).is_err());
        assert!(candidate_grid(&d, 1, 1, &[]).is_err());
    }

    #[test]
    fn surrogate_matches_truth_for_true_candidate() {
        let g = grid();
        let template = ConeSpec::isotropic(g.domain.center(), 0.0, 8e-4).unwrap();
        let truth = cone_field(&template, &g).unwrap();
        let cand = IgnitionCandidate { pos: template.ignition, t0: template.t0 };
        let f = surrogate_forecast(&cand, &template, &g).unwrap();
        for (a, b) in f.values.iter().zip(&truth.values) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn surrogate_t0_shift_is_additive_before_clamp() {
        let g = grid();
        let template = ConeSpec::isotropic(g.domain.center(), 0.0, 2e-4).unwrap();
        let cand0 = IgnitionCandidate { pos: template.ignition, t0: 0.5 };
        let cand1 = IgnitionCandidate { pos: template.ignition, t0: 1.5 };
        let f0 = surrogate_forecast(&cand0, &template, &g).unwrap();
        let f1 = surrogate_forecast(&cand1, &template, &g).unwrap();
        for (a, b) in f0.values.iter().zip(&f1.values) {
            if *b < g.domain.t_end {
                assert_relative_eq!(b - a, 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn surrogate_pos_shift_moves_argmin() {
        let g = grid();
        let template = ConeSpec::isotropic(g.domain.center(), 0.0, 2e-4).unwrap();
        let proj = g.domain.projection();
        let shifted = proj.to_geo(3_000.0, -2_000.0);
        let cand = IgnitionCandidate { pos: shifted, t0: 0.0 };
        let f = surrogate_forecast(&cand, &template, &g).unwrap();
        let argmin = f
            .values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        let (ix, iy) = g.coords(argmin);
        let (x, y) = g.node_xy(ix, iy);
        assert!((x - 3_000.0).abs() <= g.spacing / 2.0 + 1.0);
        assert!((y + 2_000.0).abs() <= g.spacing / 2.0 + 1.0);
    }

    /// Truth cone scenario with granule-snapped detections.
    fn scenario(granule_h: f64, density: f64) -> (Grid, ConeSpec, SnappedDetections, GranuleSchedule) {
        let g = grid();
        let template = ConeSpec::isotropic(g.domain.center(), 1.0, 8e-4).unwrap();
        let truth = cone_field(&template, &g).unwrap();
        let sched = GranuleSchedule::regular(0.0, 20.0, granule_h).unwrap();
        let dets = scatter_detections(&truth, density, &sched, 77).unwrap();
        let snapped = snap_detections(&g, &dets);
        (g, template, snapped, sched)
    }

    #[test]
    fn exact_recovery_from_dense_detections() {
        // Dense, fine-granule detections generated from one candidate's
        // cone: that candidate wins the search.
        let (g, template, snapped, _) = scenario(0.5, 0.35);
        let times = vec![0.0, 0.5, 1.0, 1.5, 2.0];
        let candidates = candidate_grid(&g.domain, 5, 5, &times).unwrap();
        // The true ignition is the center of the 5x5 position grid only
        // if 5 is odd: cell centers at (i+0.5)/5 include 0.5. Index 12 of
        // each time block is the center position.
        let params = LikelihoodParams::default();
        let result = grid_search(&candidates, &snapped, &params, &template, None, 0.0).unwrap();
        let best = result.best;
        assert_relative_eq!(best.pos.lat, template.ignition.lat, epsilon = 1e-9);
        assert_relative_eq!(best.pos.lon, template.ignition.lon, epsilon = 1e-9);
        assert_eq!(best.t0, 1.0);
    }

    #[test]
    fn coarse_granules_bias_t0_early() {
        // With 6 h granules every detection time is late relative to the
        // true arrival, and the one-sided heat model tolerates early
        // ignition far better than late: the recovered t0 never exceeds
        // the true one.
        let (g, template, snapped, _) = scenario(6.0, 0.2);
        let times: Vec<f64> = (0..9).map(|i| 0.25 * i as f64).collect(); // 0 .. 2 days
        let candidates = candidate_grid(&g.domain, 3, 3, &times).unwrap();
        let params = LikelihoodParams::default();
        let result = grid_search(&candidates, &snapped, &params, &template, None, 0.0).unwrap();
        assert!(
            result.best.t0 <= template.t0 + 1e-12,
            "recovered t0 {} later than true {}",
            result.best.t0,
            template.t0
        );
    }

    #[test]
    fn nonfire_penalizes_too_early_candidates() {
        let (g, template, snapped, sched) = scenario(1.0, 0.25);
        let truth = cone_field(&template, &g).unwrap();
        let params = LikelihoodParams::default();
        let true_cand = IgnitionCandidate { pos: template.ignition, t0: template.t0 };
        let early_cand = IgnitionCandidate { pos: template.ignition, t0: 0.0 };
        let candidates = vec![true_cand, early_cand];
        let fire_only = grid_search(&candidates, &snapped, &params, &template, None, 0.0).unwrap();

        // Add non-fire pixels (kept only outside the true fire by
        // construction: they are emitted where the truth has not burned).
        let nonfire = scatter_nonfire(&truth, 0.02, &sched, 31).unwrap();
        let mut all = snapped.detections.clone();
        all.extend(nonfire);
        let snapped_all = snap_detections(&g, &all);
        let with_nonfire =
            grid_search(&candidates, &snapped_all, &params, &template, None, 0.0).unwrap();

        let margin_before = fire_only.scores[0] - fire_only.scores[1];
        let margin_after = with_nonfire.scores[0] - with_nonfire.scores[1];
        assert!(
            margin_after > margin_before,
            "non-fire pixels should widen the margin: {margin_before} -> {margin_after}"
        );
    }

    #[test]
    fn argmax_tie_breaking() {
        let d = domain();
        let candidates = candidate_grid(&d, 2, 1, &[1.0, 0.5]).unwrap();
        // All scores equal: earliest t0 wins, then lowest index.
        let scores = vec![3.0; candidates.len()];
        let best = argmax_candidates(&candidates, &scores);
        assert_eq!(candidates[best].t0, 0.5);
        assert_eq!(best, 2);
        // Adding a constant leaves the argmax unchanged.
        let mut varied = vec![1.0, 5.0, 2.0, 5.0];
        let a1 = argmax_candidates(&candidates, &varied);
        for s in &mut varied {
            *s += 123.0;
        }
        assert_eq!(argmax_candidates(&candidates, &varied), a1);
        // Equal top scores: the earlier-t0 candidate (index 3) wins over
        // index 1.
        assert_eq!(a1, 3);
    }

    #[test]
    fn search_is_deterministic() {
        let (g, template, snapped, _) = scenario(6.0, 0.1);
        let candidates = candidate_grid(&g.domain, 3, 3, &[0.5, 1.0]).unwrap();
        let params = LikelihoodParams::default();
        let a = grid_search(&candidates, &snapped, &params, &template, None, 0.0).unwrap();
        let b = grid_search(&candidates, &snapped, &params, &template, None, 0.0).unwrap();
        assert_eq!(a.best_index, b.best_index);
        assert_eq!(a.scores, b.scores);
    }

    #[test]
    fn refinement_never_loses_objective() {
        let (g, template, snapped, _) = scenario(3.0, 0.15);
        let candidates = candidate_grid(&g.domain, 4, 4, &[0.0, 0.75, 1.5]).unwrap();
        let params = LikelihoodParams::default();
        let coarse = grid_search(&candidates, &snapped, &params, &template, None, 0.0).unwrap();
        let refined = refine_candidates(
            &coarse.best,
            &g.domain,
            0.01,
            0.01,
            0.375,
            3,
            3,
            3,
        )
        .unwrap();
        assert_eq!(refined[0], coarse.best);
        let fine = grid_search(&refined, &snapped, &params, &template, None, 0.0).unwrap();
        let coarse_best_score = coarse.scores[coarse.best_index];
        assert!(fine.scores[fine.best_index] >= coarse_best_score - 1e-12);
    }

    #[test]
    fn smoothness_penalty_changes_scores_not_determinism() {
        let (g, template, snapped, _) = scenario(6.0, 0.1);
        let candidates = candidate_grid(&g.domain, 2, 2, &[0.5]).unwrap();
        let params = LikelihoodParams::default();
        let reference = cone_field(&template, &g).unwrap();
        let plain = grid_search(&candidates, &snapped, &params, &template, None, 0.0).unwrap();
        let penalized =
            grid_search(&candidates, &snapped, &params, &template, Some(&reference), 1e-3).unwrap();
        // Candidates away from the reference pay a positive penalty.
        assert!(penalized
            .scores
            .iter()
            .zip(&plain.scores)
            .any(|(p, q)| p < q));
        // Zero weight reproduces the plain scores even with a reference.
        let zero =
            grid_search(&candidates, &snapped, &params, &template, Some(&reference), 0.0).unwrap();
        assert_eq!(zero.scores, plain.scores);
    }
}
