//! Run configuration: one TOML file covering every module, with
//! documented defaults and strict rejection of unknown keys.

use serde::{Deserialize, Serialize};

use crate::error::FireError;
use crate::estimator::{DensifyConfig, EstimatorConfig, MultigridSchedule};
use crate::fmc::BurnCurve;
use crate::geo::GeoPoint;
use crate::graph::GraphConfig;
use crate::grid::FireDomain;
use crate::likelihood::LikelihoodParams;
use crate::rosuq::RosUncertaintyInputs;
use crate::synth::ConeSpec;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LikelihoodSection {
    /// Geolocation standard deviation, meters.
    pub sigma_geo_m: f64,
    /// Heat decay time constant, hours.
    pub c_decay_h: f64,
    /// False-detection probability.
    pub p_false: f64,
    /// Detection probability at the anchor lag.
    pub p_anchor: f64,
    /// Anchor lag, hours.
    pub t_anchor_h: f64,
    /// Arrival-window length, hours.
    pub l_window_h: f64,
}

impl Default for LikelihoodSection {
    fn default() -> Self {
        Self {
            sigma_geo_m: 333.0,
            c_decay_h: 10.0,
            p_false: 0.05,
            p_anchor: 0.3,
            t_anchor_h: 24.0,
            l_window_h: 6.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSection {
    /// Smoothing kernel width in grid cells.
    pub kernel_sigma_cells: f64,
    /// Relative-difference convergence threshold.
    pub rd_threshold: f64,
    /// Maximum update/smooth passes per grid level.
    pub max_iter: usize,
    /// Coarsest multigrid spacing, meters.
    pub start_spacing_m: f64,
    /// Per-level spacing shrink factor.
    pub shrink: f64,
    /// Finest (evaluation) spacing, meters.
    pub min_spacing_m: f64,
    /// Pull never-burned nodes toward the domain end time.
    pub use_nonfire: bool,
    /// Minimum fire-detection confidence kept, 0..=100.
    pub confidence_threshold: u8,
    /// Densification: maximum anchor gap along a path, meters.
    pub densify_spacing_max_m: f64,
    /// Densification: minimum inserted points per long edge.
    pub densify_n_insert: usize,
    /// Densification: smoothing-spline p parameter.
    pub densify_p: f64,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self {
            kernel_sigma_cells: 2.0,
            rd_threshold: 1e-3,
            max_iter: 20,
            start_spacing_m: 2000.0,
            shrink: 0.8,
            min_spacing_m: 250.0,
            use_nonfire: false,
            confidence_threshold: 0,
            densify_spacing_max_m: 2000.0,
            densify_n_insert: 3,
            densify_p: 0.9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphSection {
    /// k-means cluster count.
    pub k: usize,
    /// Intra-cluster shorten fraction.
    pub shorten_m: f64,
    /// Optional physical speed limit, m/s; edges faster than this get
    /// infinite weight.
    pub speed_limit_mps: Option<f64>,
    /// Secondary-fire 2-means split threshold.
    pub split_threshold: f64,
    /// Synthetic-ignition backdating, hours.
    pub backdate_h: f64,
    /// k-means iteration cap.
    pub kmeans_max_iter: usize,
    /// Clustering seed.
    pub seed: u64,
}

impl Default for GraphSection {
    fn default() -> Self {
        let g = GraphConfig::default();
        Self {
            k: g.k,
            shorten_m: g.shorten_m,
            speed_limit_mps: g.speed_limit,
            split_threshold: g.split_threshold,
            backdate_h: g.backdate_h,
            kmeans_max_iter: g.kmeans_max_iter,
            seed: g.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainSection {
    pub center_lat: f64,
    pub center_lon: f64,
    pub width_m: f64,
    pub height_m: f64,
    /// Days.
    pub t_start: f64,
    /// Days.
    pub t_end: f64,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self {
            center_lat: 40.0,
            center_lon: -112.0,
            width_m: 50_000.0,
            height_m: 50_000.0,
            t_start: 0.0,
            t_end: 10.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    /// Cone ignition time, days.
    pub t0_days: f64,
    /// Per-lobe cone slopes, days per meter.
    pub lobe_slopes: Vec<f64>,
    /// Fire-detection density over burned nodes.
    pub density: f64,
    /// Non-fire density over (node, granule) pairs; 0 disables.
    pub nonfire_density: f64,
    /// Granule cadence, hours.
    pub granule_interval_h: f64,
    /// Points per synthetic perimeter.
    pub perimeter_points: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            t0_days: 0.5,
            lobe_slopes: vec![4e-4],
            density: 0.05,
            nonfire_density: 0.0,
            granule_interval_h: 6.0,
            perimeter_points: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FmcSection {
    /// Current fuel moisture content, fraction.
    pub current_fmc: f64,
    /// ROS spike cutoff, m/s.
    pub ros_cutoff_mps: f64,
    pub burn_curve: BurnCurveSection,
}

impl Default for FmcSection {
    fn default() -> Self {
        Self { current_fmc: 0.10, ros_cutoff_mps: 2.0, burn_curve: BurnCurveSection::default() }
    }
}

/// Burn curve as parallel arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BurnCurveSection {
    pub fmc: Vec<f64>,
    pub ros_rel: Vec<f64>,
}

impl Default for BurnCurveSection {
    fn default() -> Self {
        let c = BurnCurve::default();
        Self { fmc: c.fmc, ros_rel: c.ros_rel }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IgnitionSection {
    /// Candidate positions per axis.
    pub nx: usize,
    pub ny: usize,
    /// Candidate ignition times, days.
    pub t0_candidates: Vec<f64>,
    /// Smoothness penalty weight; 0 = pure likelihood.
    pub smoothness_weight: f64,
}

impl Default for IgnitionSection {
    fn default() -> Self {
        Self {
            nx: 10,
            ny: 10,
            t0_candidates: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            smoothness_weight: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RosSection {
    /// Physical ROS cutoff for masking, m/s.
    pub cutoff_mps: f64,
    /// Uncertainty model: detection separation, meters.
    pub d_m: f64,
    /// Geolocation sigmas, meters.
    pub sigma1_m: f64,
    pub sigma2_m: f64,
    /// Time between detections, hours.
    pub c_h: f64,
    /// Arrival-window length, hours.
    pub l_h: f64,
    /// Monte Carlo sample count.
    pub mc_samples: usize,
}

impl Default for RosSection {
    fn default() -> Self {
        Self {
            cutoff_mps: 2.0,
            d_m: 1500.0,
            sigma1_m: 335.0,
            sigma2_m: 335.0,
            c_h: 21.0,
            l_h: 6.0,
            mc_samples: 1_000_000,
        }
    }
}

/// Whole-run configuration; every field has a documented default, and
/// unknown keys anywhere in the file are rejected.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub domain: DomainSection,
    pub likelihood: LikelihoodSection,
    pub estimator: EstimatorSection,
    pub graph: GraphSection,
    pub synth: SynthSection,
    pub fmc: FmcSection,
    pub ignition: IgnitionSection,
    pub ros: RosSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, FireError> {
        toml::from_str(text).map_err(|e| FireError::InvalidInput(format!("config: {e}")))
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, FireError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn fire_domain(&self) -> Result<FireDomain, FireError> {
        let center = GeoPoint::new(self.domain.center_lat, self.domain.center_lon)?;
        crate::grid::domain_from_meters(
            center,
            self.domain.width_m,
            self.domain.height_m,
            self.domain.t_start,
            self.domain.t_end,
        )
    }

    pub fn likelihood_params(&self) -> Result<LikelihoodParams, FireError> {
        let l = &self.likelihood;
        LikelihoodParams::new(
            l.sigma_geo_m,
            l.c_decay_h,
            l.p_false,
            l.p_anchor,
            l.t_anchor_h,
            l.l_window_h,
        )
    }

    pub fn estimator_config(&self) -> EstimatorConfig {
        let e = &self.estimator;
        EstimatorConfig {
            kernel_sigma_cells: e.kernel_sigma_cells,
            rd_threshold: e.rd_threshold,
            max_iter: e.max_iter,
            multigrid: MultigridSchedule {
                start_spacing_m: e.start_spacing_m,
                shrink: e.shrink,
                min_spacing_m: e.min_spacing_m,
            },
            use_nonfire: e.use_nonfire,
        }
    }

    pub fn densify_config(&self) -> DensifyConfig {
        let e = &self.estimator;
        DensifyConfig {
            spacing_max_m: e.densify_spacing_max_m,
            n_insert: e.densify_n_insert,
            p: e.densify_p,
        }
    }

    pub fn graph_config(&self) -> GraphConfig {
        let g = &self.graph;
        GraphConfig {
            k: g.k,
            shorten_m: g.shorten_m,
            speed_limit: g.speed_limit_mps,
            split_threshold: g.split_threshold,
            backdate_h: g.backdate_h,
            kmeans_max_iter: g.kmeans_max_iter,
            seed: g.seed,
        }
    }

    pub fn cone_template(&self) -> Result<ConeSpec, FireError> {
        let center = GeoPoint::new(self.domain.center_lat, self.domain.center_lon)?;
        ConeSpec::new(center, self.synth.t0_days, self.synth.lobe_slopes.clone())
    }

    pub fn burn_curve(&self) -> Result<BurnCurve, FireError> {
        BurnCurve::new(self.fmc.burn_curve.fmc.clone(), self.fmc.burn_curve.ros_rel.clone())
    }

    pub fn ros_uncertainty(&self) -> Result<RosUncertaintyInputs, FireError> {
        let r = &self.ros;
        RosUncertaintyInputs::new(r.d_m, r.sigma1_m, r.sigma2_m, r.c_h, r.l_h)
    }
}

/// Every config key with its default value, for `--help` output.
pub fn config_keys_help() -> String {
    let d = RunConfig::default();
    toml::to_string_pretty(&d).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn defaults_match_cited_values() {
        let c = RunConfig::default();
        assert_relative_eq!(c.likelihood.sigma_geo_m, 333.0);
        assert_relative_eq!(c.likelihood.c_decay_h, 10.0);
        assert_relative_eq!(c.likelihood.p_false, 0.05);
        assert_relative_eq!(c.likelihood.p_anchor, 0.3);
        assert_relative_eq!(c.likelihood.t_anchor_h, 24.0);
        assert_relative_eq!(c.likelihood.l_window_h, 6.0);
        assert_relative_eq!(c.estimator.start_spacing_m, 2000.0);
        assert_relative_eq!(c.estimator.shrink, 0.8);
        assert_relative_eq!(c.estimator.min_spacing_m, 250.0);
        assert_eq!(c.graph.k, 20);
        assert_relative_eq!(c.graph.shorten_m, 0.25);
        assert_relative_eq!(c.graph.split_threshold, 0.1);
        assert_relative_eq!(c.graph.backdate_h, 6.0);
        assert_relative_eq!(c.synth.density, 0.05);
        assert_relative_eq!(c.synth.granule_interval_h, 6.0);
        assert_relative_eq!(c.fmc.burn_curve.fmc[1], 0.05);
        assert_relative_eq!(c.fmc.burn_curve.ros_rel[1], 1.0);
        assert_eq!(c.ignition.nx * c.ignition.ny * c.ignition.t0_candidates.len(), 500);
        // Derivable objects build cleanly.
        c.likelihood_params().unwrap();
        c.fire_domain().unwrap();
        c.burn_curve().unwrap();
        c.cone_template().unwrap();
        c.ros_uncertainty().unwrap();
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = RunConfig::from_toml_str(
            "[likelihood]\nsigma_geo_m = 400.0\n\n[estimator]\nmax_iter = 5\n",
        )
        .unwrap();
        assert_relative_eq!(c.likelihood.sigma_geo_m, 400.0);
        assert_relative_eq!(c.likelihood.c_decay_h, 10.0);
        assert_eq!(c.estimator.max_iter, 5);
        assert_relative_eq!(c.estimator.shrink, 0.8);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml_str("[likelihood]\nsigmageo = 1.0\n").is_err());
        assert!(RunConfig::from_toml_str("[nonsense]\nx = 1\n").is_err());
        assert!(RunConfig::from_toml_str("[fmc.burn_curve]\nfmcs = [0.1]\n").is_err());
    }

    #[test]
    fn round_trip_through_toml() {
        let c = RunConfig::default();
        let text = toml::to_string_pretty(&c).unwrap();
        let back = RunConfig::from_toml_str(&text).unwrap();
        assert_relative_eq!(back.likelihood.sigma_geo_m, c.likelihood.sigma_geo_m);
        assert_eq!(back.ignition.t0_candidates, c.ignition.t0_candidates);
    }

    #[test]
    fn help_lists_every_key() {
        let help = config_keys_help();
        for key in [
            "sigma_geo_m",
            "c_decay_h",
            "p_false",
            "p_anchor",
            "t_anchor_h",
            "l_window_h",
            "kernel_sigma_cells",
            "rd_threshold",
            "max_iter",
            "start_spacing_m",
            "shrink",
            "min_spacing_m",
            "use_nonfire",
            "confidence_threshold",
            "densify_spacing_max_m",
            "densify_n_insert",
            "densify_p",
            "shorten_m",
            "split_threshold",
            "backdate_h",
            "kmeans_max_iter",
            "center_lat",
            "center_lon",
            "width_m",
            "height_m",
            "t_start",
            "t_end",
            "t0_days",
            "lobe_slopes",
            "density",
            "nonfire_density",
            "granule_interval_h",
            "perimeter_points",
            "current_fmc",
            "ros_cutoff_mps",
            "ros_rel",
            "t0_candidates",
            "smoothness_weight",
            "cutoff_mps",
            "d_m",
            "sigma1_m",
            "sigma2_m",
            "c_h",
            "l_h",
            "mc_samples",
        ] {
            assert!(help.contains(key), "help missing key {key}");
        }
    }
}
