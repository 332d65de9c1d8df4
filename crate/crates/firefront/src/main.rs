//! Command-line entry point: reproducible pipelines over the firefront
//! library. Every command is a pure function of (config, inputs, seed);
//! stochastic commands require an explicit seed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use firefront::assess::{classification, moe, relative_error, sorenson, BurnMask};
use firefront::config::{config_keys_help, RunConfig};
use firefront::estimator::{assimilate, multigrid_estimate, prepare_data, single_grid_estimate};
use firefront::fmc::{fmc_adjustment, mean_ros_diff, overlap_mask};
use firefront::grid::{build_grid, FireArrivalField};
use firefront::ignition::{candidate_grid, grid_search};
use firefront::io;
use firefront::likelihood::dataset_log_likelihood;
use firefront::rosuq::{expected_s, expected_s2, mc_ros_sample, ros_field, var_ros, var_s};
use firefront::synth::{cone_field, scatter_detections, scatter_nonfire, GranuleSchedule};
use firefront::FireError;

#[derive(Parser)]
#[command(
    name = "firefront",
    about = "Fire arrival time estimation from satellite detections",
    after_long_help = help_footer(),
    version
)]
struct Cli {
    /// TOML configuration file; omitted keys take the documented defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

fn help_footer() -> String {
    format!(
        "Configuration keys and their defaults (TOML):\n\n{}\nEnvironment:\n  FIREFRONT_THREADS  cap on worker threads\n",
        config_keys_help()
    )
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic truth raster, detection CSV, and manifest.
    Generate {
        /// RNG seed for detection scattering.
        #[arg(long)]
        seed: u64,
        /// Output directory (created if missing).
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Estimate a fire arrival time field from a detection CSV.
    Estimate {
        #[arg(long)]
        detections: PathBuf,
        /// Output arrival-time raster.
        #[arg(long)]
        out: PathBuf,
        /// Optional convergence-history CSV.
        #[arg(long)]
        rd_history: Option<PathBuf>,
        /// Estimation strategy.
        #[arg(long, default_value = "multigrid", value_parser = ["multigrid", "single"])]
        strategy: String,
    },
    /// Assimilate detections into a forecast arrival-time raster.
    Assimilate {
        #[arg(long)]
        forecast: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rate of spread from an arrival-time raster, plus uncertainty moments.
    Ros {
        #[arg(long)]
        field: PathBuf,
        /// Output ROS raster (m/s; masked cells NODATA).
        #[arg(long)]
        out: PathBuf,
        /// Output CSV of analytic and Monte Carlo moments.
        #[arg(long)]
        moments: Option<PathBuf>,
        /// Monte Carlo seed (required when --moments is set).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare an estimate raster against a truth raster.
    Assess {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Burn-mask reference time, days; defaults to the domain end.
        #[arg(long)]
        t_ref: Option<f64>,
        /// Output report CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Optional classification raster (0 unburned, 1 overlap,
        /// 2 false negative, 3 false positive).
        #[arg(long)]
        classes: Option<PathBuf>,
    },
    /// Fuel-moisture adjustment from estimate/forecast disagreement.
    FmcAdjust {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        forecast: PathBuf,
    },
    /// Grid search for the ignition point and time.
    IgnitionSearch {
        #[arg(long)]
        detections: PathBuf,
        /// Output score table CSV (lat,lon,t0_days,loglik).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the synthetic validation battery and print a summary per strategy.
    Bench {
        #[arg(long, default_value_t = 3)]
        scenarios: usize,
        #[arg(long)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(path) => RunConfig::from_file(path),
        None => Ok(RunConfig::default()),
    };
    let config = match config {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(cli.command, &config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command, config: &RunConfig) -> Result<(), FireError> {
    match command {
        Command::Generate { seed, out_dir } => cmd_generate(config, seed, &out_dir),
        Command::Estimate { detections, out, rd_history, strategy } => {
            cmd_estimate(config, &detections, &out, rd_history.as_deref(), &strategy)
        }
        Command::Assimilate { forecast, detections, out } => {
            cmd_assimilate(config, &forecast, &detections, &out)
        }
        Command::Ros { field, out, moments, seed } => {
            cmd_ros(config, &field, &out, moments.as_deref(), seed)
        }
        Command::Assess { estimate, truth, t_ref, out, classes } => {
            cmd_assess(config, &estimate, &truth, t_ref, out.as_deref(), classes.as_deref())
        }
        Command::FmcAdjust { estimate, forecast } => cmd_fmc(config, &estimate, &forecast),
        Command::IgnitionSearch { detections, out } => {
            cmd_ignition_search(config, &detections, out.as_deref())
        }
        Command::Bench { scenarios, seed } => cmd_bench(config, scenarios, seed),
    }
}

fn granule_schedule(config: &RunConfig) -> Result<GranuleSchedule, FireError> {
    GranuleSchedule::regular(
        config.domain.t_start,
        config.domain.t_end,
        config.synth.granule_interval_h,
    )
}

fn cmd_generate(config: &RunConfig, seed: u64, out_dir: &std::path::Path) -> Result<(), FireError> {
    std::fs::create_dir_all(out_dir)?;
    let domain = config.fire_domain()?;
    let grid = build_grid(domain, config.estimator.min_spacing_m)?;
    let spec = config.cone_template()?;
    let truth = cone_field(&spec, &grid)?;
    let schedule = granule_schedule(config)?;
    let mut dets = scatter_detections(&truth, config.synth.density, &schedule, seed)?;
    if config.synth.nonfire_density > 0.0 {
        dets.extend(scatter_nonfire(
            &truth,
            config.synth.nonfire_density,
            &schedule,
            seed ^ 0x6e6f6e66,
        )?);
    }
    io::write_ascii_raster(&out_dir.join("truth.asc"), &truth)?;
    io::write_detection_csv(&out_dir.join("detections.csv"), &dets)?;
    io::write_manifest(
        &out_dir.join("manifest.json"),
        &io::Manifest {
            seed,
            description: "synthetic cone scenario".into(),
            domain,
            spacing_m: config.estimator.min_spacing_m,
            granule_times: schedule.times.clone(),
            detection_density: config.synth.density,
        },
    )?;
    println!("wrote {} detections to {}", dets.len(), out_dir.display());
    Ok(())
}

fn cmd_estimate(
    config: &RunConfig,
    detections: &std::path::Path,
    out: &std::path::Path,
    rd_history: Option<&std::path::Path>,
    strategy: &str,
) -> Result<(), FireError> {
    let domain = config.fire_domain()?;
    let grid = build_grid(domain, config.estimator.min_spacing_m)?;
    let dets = io::read_detection_csv(detections)?;
    let data = prepare_data(
        &grid,
        &dets,
        config.estimator.confidence_threshold,
        &config.graph_config(),
        Some(config.densify_config()),
    )?;
    let cfg = config.estimator_config();
    let (field, history) = match strategy {
        "single" => single_grid_estimate(&domain, &data, &cfg)?,
        _ => multigrid_estimate(&domain, &data, &cfg)?,
    };
    io::write_ascii_raster(out, &field)?;
    if let Some(path) = rd_history {
        io::write_rd_history(path, &history)?;
    }
    println!("estimate written to {}", out.display());
    Ok(())
}

fn cmd_assimilate(
    config: &RunConfig,
    forecast: &std::path::Path,
    detections: &std::path::Path,
    out: &std::path::Path,
) -> Result<(), FireError> {
    let forecast = io::read_field(forecast, config.domain.t_start, config.domain.t_end)?;
    let dets = io::read_detection_csv(detections)?;
    let data = prepare_data(
        &forecast.grid,
        &dets,
        config.estimator.confidence_threshold,
        &config.graph_config(),
        Some(config.densify_config()),
    )?;
    let params = config.likelihood_params()?;
    let (analysis, _) = assimilate(&forecast, &data, &params, &config.estimator_config());
    io::write_ascii_raster(out, &analysis)?;
    println!("analysis written to {}", out.display());
    Ok(())
}

fn cmd_ros(
    config: &RunConfig,
    field: &std::path::Path,
    out: &std::path::Path,
    moments: Option<&std::path::Path>,
    seed: Option<u64>,
) -> Result<(), FireError> {
    if moments.is_some() && seed.is_none() {
        return Err(FireError::InvalidInput("--seed is required with --moments (Monte Carlo)".into()));
    }
    let field = io::read_field(field, config.domain.t_start, config.domain.t_end)?;
    let ros = ros_field(&field, config.ros.cutoff_mps);
    let mut raster = FireArrivalField::constant(field.grid.clone(), f64::NAN);
    for i in 0..ros.ros.len() {
        if ros.valid[i] {
            raster.values[i] = ros.ros[i];
        }
    }
    io::write_ascii_raster(out, &raster)?;
    if let Some(path) = moments {
        let seed = seed.expect("checked above");
        let inputs = config.ros_uncertainty()?;
        let (c, l) = (inputs.c, inputs.l);
        let (mc_mean, mc_var) = mc_ros_sample(&inputs, config.ros.mc_samples, seed);
        let header = "quantity,analytic,monte_carlo";
        let rows = vec![
            format!("expected_s,{},", expected_s(c, l)?),
            format!("expected_s2,{},", expected_s2(c, l)?),
            format!("var_s,{},", var_s(c, l)?),
            format!("mean_ros,{},{}", firefront::rosuq::mean_ros(&inputs)?, mc_mean),
            format!("var_ros,{},{}", var_ros(&inputs)?, mc_var),
        ];
        io::write_csv(path, header, &rows)?;
    }
    println!("ros raster written to {}", out.display());
    Ok(())
}

fn cmd_assess(
    config: &RunConfig,
    estimate: &std::path::Path,
    truth: &std::path::Path,
    t_ref: Option<f64>,
    out: Option<&std::path::Path>,
    classes: Option<&std::path::Path>,
) -> Result<(), FireError> {
    let (t0, t1) = (config.domain.t_start, config.domain.t_end);
    let est = io::read_field(estimate, t0, t1)?;
    let tru = io::read_field(truth, t0, t1)?;
    let t_ref = t_ref.unwrap_or(t1);
    // Masks use strict inequality at the end time so the never-burned
    // background (clamped to t_end) is not counted as burned.
    let eps = 1e-9;
    let observed = BurnMask::from_field(&tru, (t_ref - eps).min(t1 - eps));
    let predicted = BurnMask::from_field(&est, (t_ref - eps).min(t1 - eps));
    let m = moe(&observed, &predicted)?;
    let s = sorenson(&observed, &predicted)?;
    let re = relative_error(&tru, &est)?;
    let header = "spacing_m,moe_x,moe_y,moe_norm,sorenson,rel_error";
    let row = format!("{},{},{},{},{},{}", est.grid.spacing, m.x, m.y, m.norm, s, re);
    match out {
        Some(path) => io::write_csv(path, header, &[row])?,
        None => {
            println!("{header}");
            println!("{row}");
        }
    }
    if let Some(path) = classes {
        let codes = classification(&observed, &predicted)?;
        let mut raster = FireArrivalField::constant(est.grid.clone(), 0.0);
        for (v, &c) in raster.values.iter_mut().zip(&codes) {
            *v = c as f64;
        }
        io::write_ascii_raster(path, &raster)?;
    }
    Ok(())
}

fn cmd_fmc(
    config: &RunConfig,
    estimate: &std::path::Path,
    forecast: &std::path::Path,
) -> Result<(), FireError> {
    let (t0, t1) = (config.domain.t_start, config.domain.t_end);
    let est = io::read_field(estimate, t0, t1)?;
    let fcst = io::read_field(forecast, t0, t1)?;
    let cutoff = config.fmc.ros_cutoff_mps;
    let mask = overlap_mask(&est, &fcst, t1)?;
    let ros_est = ros_field(&est, cutoff);
    let ros_fcst = ros_field(&fcst, cutoff);
    let (mean_est, mean_fcst, _) = mean_ros_diff(&ros_est, &ros_fcst, &mask, cutoff)?;
    let eps = 1e-9;
    let area_est = BurnMask::from_field(&est, t1 - eps).area_cells() as f64;
    let area_fcst = BurnMask::from_field(&fcst, t1 - eps).area_cells() as f64;
    let curve = config.burn_curve()?;
    let delta =
        fmc_adjustment(area_est, area_fcst, mean_est, mean_fcst, &curve, config.fmc.current_fmc)?;
    println!("delta_fmc {delta}");
    Ok(())
}

fn cmd_ignition_search(
    config: &RunConfig,
    detections: &std::path::Path,
    out: Option<&std::path::Path>,
) -> Result<(), FireError> {
    let domain = config.fire_domain()?;
    let grid = build_grid(domain, config.estimator.min_spacing_m)?;
    let dets = io::read_detection_csv(detections)?;
    let snapped = firefront::detection::snap_detections(&grid, &dets);
    let candidates =
        candidate_grid(&domain, config.ignition.nx, config.ignition.ny, &config.ignition.t0_candidates)?;
    let params = config.likelihood_params()?;
    let template = config.cone_template()?;
    let result = grid_search(&candidates, &snapped, &params, &template, None, 0.0)?;
    if let Some(path) = out {
        let rows: Vec<String> = candidates
            .iter()
            .zip(&result.scores)
            .map(|(c, s)| format!("{},{},{},{}", c.pos.lat, c.pos.lon, c.t0, s))
            .collect();
        io::write_csv(path, "lat,lon,t0_days,loglik", &rows)?;
    }
    println!(
        "winner lat {} lon {} t0_days {} loglik {}",
        result.best.pos.lat,
        result.best.pos.lon,
        result.best.t0,
        result.scores[result.best_index]
    );
    Ok(())
}

fn cmd_bench(config: &RunConfig, scenarios: usize, seed: u64) -> Result<(), FireError> {
    let domain = config.fire_domain()?;
    let grid = build_grid(domain, config.estimator.min_spacing_m)?;
    let spec = config.cone_template()?;
    let truth = cone_field(&spec, &grid)?;
    let schedule = granule_schedule(config)?;
    let params = config.likelihood_params()?;
    let eps = 1e-9;
    let observed = BurnMask::from_field(&truth, domain.t_end - eps);
    let mut summary: Vec<(String, f64, f64, f64, f64)> = Vec::new();
    for strategy in ["multigrid", "single"] {
        let (mut mre, mut mx, mut my, mut sor) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..scenarios.max(1) {
            let dets = scatter_detections(
                &truth,
                config.synth.density,
                &schedule,
                seed.wrapping_add(i as u64),
            )?;
            let data = prepare_data(
                &grid,
                &dets,
                config.estimator.confidence_threshold,
                &config.graph_config(),
                Some(config.densify_config()),
            )?;
            let cfg = config.estimator_config();
            let (field, _) = match strategy {
                "single" => single_grid_estimate(&domain, &data, &cfg)?,
                _ => multigrid_estimate(&domain, &data, &cfg)?,
            };
            let predicted = BurnMask::from_field(&field, domain.t_end - eps);
            let m = moe(&observed, &predicted)?;
            mre += relative_error(&truth, &field)?;
            mx += m.x;
            my += m.y;
            sor += sorenson(&observed, &predicted)?;
            // Keep the likelihood wired in so regressions in the data
            // model surface here too.
            let snapped = firefront::detection::snap_detections(&grid, &dets);
            let _ = dataset_log_likelihood(&field, &snapped, &params);
        }
        let n = scenarios.max(1) as f64;
        summary.push((strategy.to_string(), mre / n, mx / n, my / n, sor / n));
    }
    println!("strategy,mre,moe_x,moe_y,sorenson");
    for (name, mre, mx, my, sor) in &summary {
        println!("{name},{mre},{mx},{my},{sor}");
    }
    Ok(())
}
