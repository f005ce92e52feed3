//! Odometry noise model and the particle filter that smooths estimator
//! output between camera frames.

use rand::Rng;
use thiserror::Error;

use crate::config::{ConfigError, KeyValueDoc};
use crate::geometry::{circular_mean, pose_distance, Pose2D, PoseMetric};

/// Dead-reckoning stand-in for the inertial estimator: each step of length
/// `interval` picks up independent uniform error within the bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryModel {
    pub position_bound: f64,
    pub heading_bound: f64,
    pub interval: f64,
}

impl Default for OdometryModel {
    /// ±0.02 m, ±0.02 rad every 10 ms.
    fn default() -> Self {
        Self {
            position_bound: 0.02,
            heading_bound: 0.02,
            interval: 0.01,
        }
    }
}

impl OdometryModel {
    pub fn exact(interval: f64) -> Self {
        Self {
            position_bound: 0.0,
            heading_bound: 0.0,
            interval,
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, bound: f64) -> f64 {
    if bound > 0.0 {
        rng.gen_range(-bound..=bound)
    } else {
        0.0
    }
}

/// Perturb one odometry increment.
pub fn dead_reckon<R: Rng + ?Sized>(model: &OdometryModel, true_delta: &Pose2D, rng: &mut R) -> Pose2D {
    Pose2D::new(
        true_delta.x + uniform(rng, model.position_bound),
        true_delta.y + uniform(rng, model.position_bound),
        true_delta.theta + uniform(rng, model.heading_bound),
    )
}

/// Body-frame velocity `(vx, vy, ω)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Velocity2D {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl Velocity2D {
    pub fn new(vx: f64, vy: f64, omega: f64) -> Self {
        Self { vx, vy, omega }
    }

    /// Average velocity that integrates to `delta` over `dt`.
    pub fn from_delta(delta: &Pose2D, dt: f64) -> Self {
        Self::new(delta.x / dt, delta.y / dt, delta.theta / dt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub pose: Pose2D,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub particle_count: usize,
    /// Width of the squared-exponential measurement kernel (metric units).
    pub kernel_width: f64,
    /// Resample when ESS drops below this fraction of the particle count.
    pub resample_threshold: f64,
    /// Per-predict uniform jitter bound on x and y (m). The default matches
    /// the spread of two 10 ms odometry steps per 50 Hz frame.
    pub process_noise_xy: f64,
    /// Per-predict uniform jitter bound on heading (rad).
    pub process_noise_theta: f64,
    pub metric: PoseMetric,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            particle_count: 300,
            kernel_width: 0.5,
            resample_threshold: 0.5,
            process_noise_xy: 0.03,
            process_noise_theta: 0.03,
            metric: PoseMetric::default(),
        }
    }
}

impl FilterConfig {
    pub const KEYS: &'static [&'static str] = &[
        "particle_count",
        "kernel_width",
        "resample_threshold",
        "process_noise_xy",
        "process_noise_theta",
    ];

    pub fn from_doc(doc: &KeyValueDoc) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        doc.read_into("particle_count", &mut cfg.particle_count)?;
        doc.read_into("kernel_width", &mut cfg.kernel_width)?;
        doc.read_into("resample_threshold", &mut cfg.resample_threshold)?;
        doc.read_into("process_noise_xy", &mut cfg.process_noise_xy)?;
        doc.read_into("process_noise_theta", &mut cfg.process_noise_theta)?;
        doc.read_into("theta_weight", &mut cfg.metric.theta_weight)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.particle_count == 0 {
            return bad("particle_count must be >= 1");
        }
        if !(self.kernel_width > 0.0) {
            return bad("kernel_width must be > 0");
        }
        if !(0.0..=1.0).contains(&self.resample_threshold) {
            return bad("resample_threshold must lie in [0, 1]");
        }
        if !(self.process_noise_xy >= 0.0 && self.process_noise_theta >= 0.0) {
            return bad("process noise bounds must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("particle set must not be empty")]
    NoParticles,
    #[error("particle weights must be nonnegative with a positive finite sum")]
    InvalidWeights,
}

/// What an [`ParticleFilter::update`] did beyond reweighting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateReport {
    /// All weights underflowed; they were reset to uniform.
    pub reinitialized: bool,
    pub resampled: bool,
    /// ESS right after reweighting, before any resampling.
    pub ess: f64,
}

#[derive(Debug, Clone)]
pub struct ParticleFilter {
    particles: Vec<Particle>,
    config: FilterConfig,
}

impl ParticleFilter {
    /// Every particle starts exactly at `initial`.
    pub fn new(config: FilterConfig, initial: Pose2D) -> Result<Self, FilterError> {
        config.validate()?;
        let n = config.particle_count;
        Ok(Self {
            particles: vec![
                Particle {
                    pose: initial,
                    weight: 1.0 / n as f64,
                };
                n
            ],
            config,
        })
    }

    /// Particles spread uniformly within `±spread_xy`, `±spread_theta` of
    /// `center`.
    pub fn around<R: Rng + ?Sized>(
        config: FilterConfig,
        center: Pose2D,
        spread_xy: f64,
        spread_theta: f64,
        rng: &mut R,
    ) -> Result<Self, FilterError> {
        let poses = (0..config.particle_count)
            .map(|_| {
                Pose2D::new(
                    center.x + uniform(rng, spread_xy),
                    center.y + uniform(rng, spread_xy),
                    center.theta + uniform(rng, spread_theta),
                )
            })
            .collect();
        Self::from_poses(config, poses)
    }

    /// Uniform weights over the given poses; `particle_count` follows the
    /// number of poses.
    pub fn from_poses(mut config: FilterConfig, poses: Vec<Pose2D>) -> Result<Self, FilterError> {
        if poses.is_empty() {
            return Err(FilterError::NoParticles);
        }
        config.particle_count = poses.len();
        config.validate()?;
        let w = 1.0 / poses.len() as f64;
        Ok(Self {
            particles: poses
                .into_iter()
                .map(|pose| Particle { pose, weight: w })
                .collect(),
            config,
        })
    }

    /// Weighted particles; weights are normalized and must have a positive,
    /// finite sum.
    pub fn from_particles(
        mut config: FilterConfig,
        mut particles: Vec<Particle>,
    ) -> Result<Self, FilterError> {
        if particles.is_empty() {
            return Err(FilterError::NoParticles);
        }
        let total: f64 = particles.iter().map(|p| p.weight).sum();
        if !(total > 0.0 && total.is_finite()) || particles.iter().any(|p| !(p.weight >= 0.0)) {
            return Err(FilterError::InvalidWeights);
        }
        config.particle_count = particles.len();
        config.validate()?;
        particles.iter_mut().for_each(|p| p.weight /= total);
        Ok(Self { particles, config })
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Effective sample size `1 / Σw²` of the normalized weights.
    pub fn ess(&self) -> f64 {
        1.0 / self.particles.iter().map(|p| p.weight * p.weight).sum::<f64>()
    }

    /// Move every particle by `velocity · dt` in its own body frame, plus
    /// independent uniform jitter.
    pub fn predict<R: Rng + ?Sized>(&mut self, velocity: &Velocity2D, dt: f64, rng: &mut R) {
        let (bxy, bt) = (self.config.process_noise_xy, self.config.process_noise_theta);
        for p in &mut self.particles {
            let delta = Pose2D::new(
                velocity.vx * dt + uniform(rng, bxy),
                velocity.vy * dt + uniform(rng, bxy),
                velocity.omega * dt + uniform(rng, bt),
            );
            p.pose = p.pose.compose(&delta);
        }
    }

    /// Reweight against a pose measurement and resample when the ESS
    /// falls below the configured fraction.
    pub fn update<R: Rng + ?Sized>(&mut self, measurement: &Pose2D, rng: &mut R) -> UpdateReport {
        let two_w2 = 2.0 * self.config.kernel_width * self.config.kernel_width;
        for p in &mut self.particles {
            let d = pose_distance(&p.pose, measurement, &self.config.metric);
            p.weight *= (-d * d / two_w2).exp();
        }
        let total: f64 = self.particles.iter().map(|p| p.weight).sum();
        let reinitialized = !(total > 0.0 && total.is_finite());
        if reinitialized {
            let w = 1.0 / self.particles.len() as f64;
            self.particles.iter_mut().for_each(|p| p.weight = w);
        } else {
            self.particles.iter_mut().for_each(|p| p.weight /= total);
        }
        let ess = self.ess();
        let resampled = ess < self.config.resample_threshold * self.particles.len() as f64;
        if resampled {
            self.resample(rng);
        }
        UpdateReport {
            reinitialized,
            resampled,
            ess,
        }
    }

    /// Weighted mean position and weighted circular-mean heading.
    pub fn estimate(&self) -> Pose2D {
        let total: f64 = self.particles.iter().map(|p| p.weight).sum();
        let x = self.particles.iter().map(|p| p.weight * p.pose.x).sum::<f64>() / total;
        let y = self.particles.iter().map(|p| p.weight * p.pose.y).sum::<f64>() / total;
        let theta = circular_mean(self.particles.iter().map(|p| (p.pose.theta, p.weight)));
        Pose2D::new(x, y, theta)
    }

    /// Systematic (low-variance) resampling to uniform weights.
    pub fn resample<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.particles.len();
        let step = 1.0 / n as f64;
        let start = rng.gen_range(0.0..step);
        let mut out = Vec::with_capacity(n);
        let mut cumulative = self.particles[0].weight;
        let mut i = 0;
        for k in 0..n {
            let target = start + k as f64 * step;
            while target > cumulative && i + 1 < n {
                i += 1;
                cumulative += self.particles[i].weight;
            }
            out.push(Particle {
                pose: self.particles[i].pose,
                weight: step,
            });
        }
        self.particles = out;
    }
}
