//! Experiment overrides from `key = value` files and `CLAP_*` variables.
//!
//! Estimator and filter keys keep their library names. Baseline, metric
//! and sensor keys carry a prefix (`mcl_`, `icp_`, `jump_`, `divergence_`,
//! `sensor_`).

use clap_localization::config::{ConfigError, KeyValueDoc};
use clap_localization::{EstimatorConfig, FilterConfig};

use crate::experiment::ExperimentConfig;

pub const BENCH_KEYS: &[&str] = &[
    "mcl_particles",
    "mcl_alpha_slow",
    "mcl_alpha_fast",
    "mcl_sigma",
    "mcl_z_rand",
    "mcl_motion_xy",
    "mcl_motion_theta",
    "mcl_init_xy",
    "mcl_init_theta",
    "icp_max_iterations",
    "icp_convergence",
    "reseed_xy",
    "reseed_theta",
    "jump_linear",
    "jump_angular",
    "jump_require_both",
    "divergence_position",
    "divergence_orientation",
    "divergence_require_both",
    "sensor_fov_deg",
    "sensor_max_range",
    "sensor_max_landmarks",
    "sensor_frame_rate",
    "speed",
];

/// Every key [`apply_doc`] accepts.
pub fn known_keys() -> Vec<&'static str> {
    EstimatorConfig::KEYS
        .iter()
        .chain(FilterConfig::KEYS)
        .chain(BENCH_KEYS)
        .copied()
        .collect()
}

/// Overlay `doc` on `cfg`. Unknown keys are rejected. The match tolerance
/// keeps the noise preset's value unless `tolerance` is given.
pub fn apply_doc(doc: &KeyValueDoc, cfg: &mut ExperimentConfig) -> Result<(), ConfigError> {
    doc.deny_unknown(&known_keys())?;

    let tolerance = cfg.configs.estimator.tolerance.clone();
    let mut estimator = EstimatorConfig::from_doc(doc)?;
    if doc.get_raw("tolerance").is_none() {
        estimator.tolerance = tolerance;
    }
    let mut filter = FilterConfig::from_doc(doc)?;
    filter.metric = estimator.metric;
    cfg.configs.estimator = estimator;
    cfg.configs.filter = filter;

    let mcl = &mut cfg.configs.mcl;
    doc.read_into("mcl_particles", &mut mcl.particles)?;
    doc.read_into("mcl_alpha_slow", &mut mcl.alpha_slow)?;
    doc.read_into("mcl_alpha_fast", &mut mcl.alpha_fast)?;
    doc.read_into("mcl_sigma", &mut mcl.sigma)?;
    doc.read_into("mcl_z_rand", &mut mcl.z_rand)?;
    doc.read_into("mcl_motion_xy", &mut mcl.motion_xy)?;
    doc.read_into("mcl_motion_theta", &mut mcl.motion_theta)?;
    doc.read_into("mcl_init_xy", &mut mcl.init_xy)?;
    doc.read_into("mcl_init_theta", &mut mcl.init_theta)?;
    mcl.validate().map_err(ConfigError::Invalid)?;

    doc.read_into("icp_max_iterations", &mut cfg.configs.icp.max_iterations)?;
    doc.read_into("icp_convergence", &mut cfg.configs.icp.convergence)?;
    doc.read_into("reseed_xy", &mut cfg.configs.reseed_xy)?;
    doc.read_into("reseed_theta", &mut cfg.configs.reseed_theta)?;

    doc.read_into("jump_linear", &mut cfg.jumps.linear)?;
    doc.read_into("jump_angular", &mut cfg.jumps.angular)?;
    doc.read_into("jump_require_both", &mut cfg.jumps.require_both)?;
    doc.read_into("divergence_position", &mut cfg.divergence.position)?;
    doc.read_into("divergence_orientation", &mut cfg.divergence.orientation)?;
    doc.read_into("divergence_require_both", &mut cfg.divergence.require_both)?;

    if let Some(deg) = doc.get::<f64>("sensor_fov_deg")? {
        cfg.sensor.fov = deg.to_radians();
    }
    doc.read_into("sensor_max_range", &mut cfg.sensor.max_range)?;
    doc.read_into("sensor_max_landmarks", &mut cfg.sensor.max_landmarks)?;
    doc.read_into("sensor_frame_rate", &mut cfg.sensor.frame_rate)?;
    doc.read_into("speed", &mut cfg.trajectory.speed)?;
    Ok(())
}
