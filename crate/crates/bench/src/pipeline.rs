//! Uniform per-frame interface over CLAP and the baselines.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use clap_localization::estimator::EstimatorError;
use clap_localization::fusion::{FilterError, Velocity2D};
use clap_localization::sim::SimFrame;
use clap_localization::{
    ClapEstimator, EstimateSource, EstimatorConfig, FieldMap, FilterConfig, ParticleFilter, Pose2D,
};
use rand_chacha::ChaCha8Rng;

use crate::baselines::{icp_baseline_step, IcpConfig, MclConfig, MclState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Estimator fused through the particle filter.
    Clap,
    /// Estimator output alone.
    ClapRaw,
    Mcl,
    Icp,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Clap, Method::ClapRaw, Method::Mcl, Method::Icp];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Clap => "clap",
            Method::ClapRaw => "clap-raw",
            Method::Mcl => "mcl",
            Method::Icp => "icp",
        }
    }

    /// RNG stream reserved for this method within a cell.
    pub(crate) fn stream(&self) -> u64 {
        match self {
            Method::Clap => 16,
            Method::ClapRaw => 17,
            Method::Mcl => 18,
            Method::Icp => 19,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| format!("unknown method {s:?}; expected one of clap, clap-raw, mcl, icp"))
    }
}

pub fn parse_methods(list: &str) -> Result<Vec<Method>, String> {
    let mut out = Vec::new();
    for item in list.split(',').filter(|s| !s.trim().is_empty()) {
        let m: Method = item.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err("no methods given".into());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub pose: Pose2D,
    pub n_candidates: usize,
}

/// Anything that turns a stream of frames into poses.
pub trait Localizer: Send {
    fn method(&self) -> Method;

    /// `dt` is the time since the previous frame (0 on the first).
    fn step(&mut self, frame: &SimFrame, dt: f64) -> StepOutput;
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodConfigs {
    pub estimator: EstimatorConfig,
    pub filter: FilterConfig,
    pub mcl: MclConfig,
    pub icp: IcpConfig,
    /// Spread of the particle cloud re-seeded after a global reset.
    pub reseed_xy: f64,
    pub reseed_theta: f64,
}

impl Default for MethodConfigs {
    fn default() -> Self {
        Self {
            estimator: EstimatorConfig::default(),
            filter: FilterConfig::default(),
            mcl: MclConfig::default(),
            icp: IcpConfig::default(),
            reseed_xy: 0.1,
            reseed_theta: 0.05,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error("{0}")]
    Config(String),
}

/// Estimator with optional particle-filter fusion.
pub struct ClapLocalizer {
    estimator: ClapEstimator,
    filter: Option<ParticleFilter>,
    filter_config: FilterConfig,
    reseed: (f64, f64),
    rng: ChaCha8Rng,
    fused: bool,
}

impl ClapLocalizer {
    pub fn new(
        map: Arc<FieldMap>,
        configs: &MethodConfigs,
        start: Pose2D,
        fused: bool,
        rng: ChaCha8Rng,
    ) -> Result<Self, PipelineError> {
        let estimator = ClapEstimator::new(map, configs.estimator.clone(), start)?;
        let filter = if fused {
            Some(ParticleFilter::new(configs.filter.clone(), start)?)
        } else {
            None
        };
        Ok(Self {
            estimator,
            filter,
            filter_config: configs.filter.clone(),
            reseed: (configs.reseed_xy, configs.reseed_theta),
            rng,
            fused,
        })
    }

    pub fn estimator(&self) -> &ClapEstimator {
        &self.estimator
    }

    fn reseed(&mut self, center: Pose2D) {
        let pf = ParticleFilter::around(
            self.filter_config.clone(),
            center,
            self.reseed.0,
            self.reseed.1,
            &mut self.rng,
        )
        .expect("filter config validated at construction");
        self.filter = Some(pf);
    }
}

impl Localizer for ClapLocalizer {
    fn method(&self) -> Method {
        if self.fused {
            Method::Clap
        } else {
            Method::ClapRaw
        }
    }

    fn step(&mut self, frame: &SimFrame, dt: f64) -> StepOutput {
        let out = self.estimator.step(&frame.observations, &frame.odometry_delta);
        let Some(pf) = self.filter.as_mut() else {
            return StepOutput {
                pose: out.pose,
                n_candidates: out.candidate_count,
            };
        };
        if dt > 0.0 {
            pf.predict(&Velocity2D::from_delta(&frame.odometry_delta, dt), dt, &mut self.rng);
        }
        match out.source {
            EstimateSource::OdometryOnly => {}
            EstimateSource::GlobalReset => self.reseed(out.pose),
            EstimateSource::Local => {
                if pf.update(&out.pose, &mut self.rng).reinitialized {
                    self.reseed(out.pose);
                }
            }
        }
        StepOutput {
            pose: self.filter.as_ref().expect("fused").estimate(),
            n_candidates: out.candidate_count,
        }
    }
}

pub struct MclLocalizer {
    state: MclState,
    map: Arc<FieldMap>,
    rng: ChaCha8Rng,
}

impl MclLocalizer {
    pub fn new(map: Arc<FieldMap>, config: MclConfig, start: Pose2D, mut rng: ChaCha8Rng) -> Result<Self, PipelineError> {
        config.validate().map_err(PipelineError::Config)?;
        let state = MclState::around(config, &map, start, &mut rng);
        Ok(Self { state, map, rng })
    }
}

impl Localizer for MclLocalizer {
    fn method(&self) -> Method {
        Method::Mcl
    }

    fn step(&mut self, frame: &SimFrame, _dt: f64) -> StepOutput {
        let pose = self
            .state
            .step(&frame.observations, &frame.odometry_delta, &self.map, &mut self.rng);
        StepOutput {
            pose,
            n_candidates: 0,
        }
    }
}

pub struct IcpLocalizer {
    prev: Pose2D,
    map: Arc<FieldMap>,
    config: IcpConfig,
}

impl IcpLocalizer {
    pub fn new(map: Arc<FieldMap>, config: IcpConfig, start: Pose2D) -> Self {
        Self {
            prev: start,
            map,
            config,
        }
    }
}

impl Localizer for IcpLocalizer {
    fn method(&self) -> Method {
        Method::Icp
    }

    fn step(&mut self, frame: &SimFrame, _dt: f64) -> StepOutput {
        self.prev = icp_baseline_step(
            &self.prev,
            &frame.observations,
            &frame.odometry_delta,
            &self.map,
            &self.config,
        );
        StepOutput {
            pose: self.prev,
            n_candidates: 0,
        }
    }
}

/// Build a localizer starting at `start`, drawing randomness from `rng`.
pub fn make_localizer(
    method: Method,
    map: Arc<FieldMap>,
    configs: &MethodConfigs,
    start: Pose2D,
    rng: ChaCha8Rng,
) -> Result<Box<dyn Localizer>, PipelineError> {
    Ok(match method {
        Method::Clap => Box::new(ClapLocalizer::new(map, configs, start, true, rng)?),
        Method::ClapRaw => Box::new(ClapLocalizer::new(map, configs, start, false, rng)?),
        Method::Mcl => Box::new(MclLocalizer::new(map, configs.mcl, start, rng)?),
        Method::Icp => Box::new(IcpLocalizer::new(map, configs.icp, start)),
    })
}
