//! Comparison localizers: augmented Monte Carlo localization and an
//! ICP-style landmark matcher without outlier rejection.

use clap_localization::geometry::circular_mean;
use clap_localization::{BodyLandmark, FieldMap, MapLandmark, Pose2D};
use nalgebra::Vector2;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MclConfig {
    pub particles: usize,
    /// Decay rate of the long-term mean likelihood.
    pub alpha_slow: f64,
    /// Decay rate of the short-term mean likelihood.
    pub alpha_fast: f64,
    /// Observation kernel width (m).
    pub sigma: f64,
    /// Weight of a uniform component that absorbs false detections; 0 is
    /// the plain squared-exponential kernel.
    pub z_rand: f64,
    /// Per-frame uniform motion jitter.
    pub motion_xy: f64,
    pub motion_theta: f64,
    /// Initial spread around the starting pose.
    pub init_xy: f64,
    pub init_theta: f64,
}

impl Default for MclConfig {
    fn default() -> Self {
        Self {
            particles: 500,
            alpha_slow: 0.1,
            alpha_fast: 0.5,
            sigma: 0.5,
            z_rand: 0.0,
            motion_xy: 0.03,
            motion_theta: 0.03,
            init_xy: 0.2,
            init_theta: 0.1,
        }
    }
}

impl MclConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.particles == 0 {
            return Err("mcl particle count must be >= 1".into());
        }
        if !(0.0 < self.alpha_slow && self.alpha_slow <= self.alpha_fast && self.alpha_fast <= 1.0) {
            return Err("mcl decay rates need 0 < alpha_slow <= alpha_fast <= 1".into());
        }
        if !(self.sigma > 0.0) {
            return Err("mcl sigma must be > 0".into());
        }
        if !(0.0..1.0).contains(&self.z_rand) {
            return Err("mcl z_rand must be in [0, 1)".into());
        }
        if !(self.motion_xy >= 0.0 && self.motion_theta >= 0.0 && self.init_xy >= 0.0 && self.init_theta >= 0.0) {
            return Err("mcl noise bounds must be >= 0".into());
        }
        Ok(())
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, bound: f64) -> f64 {
    if bound > 0.0 {
        rng.gen_range(-bound..=bound)
    } else {
        0.0
    }
}

/// Nearest landmark with the observation's label.
fn nearest_same_label<'m>(map: &'m FieldMap, label: clap_localization::LandmarkLabel, world: &Vector2<f64>) -> Option<(&'m MapLandmark, f64)> {
    map.landmarks()
        .iter()
        .filter(|lm| lm.label == label)
        .map(|lm| (lm, (lm.position - world).norm_squared()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Augmented MCL state.
#[derive(Debug, Clone)]
pub struct MclState {
    config: MclConfig,
    poses: Vec<Pose2D>,
    weights: Vec<f64>,
    w_slow: f64,
    w_fast: f64,
    bounds: (Vector2<f64>, Vector2<f64>),
}

impl MclState {
    /// Particles spread around `start`; random injections cover `map`'s
    /// bounding box plus `margin`.
    pub fn around<R: Rng + ?Sized>(config: MclConfig, map: &FieldMap, start: Pose2D, rng: &mut R) -> Self {
        let poses = (0..config.particles)
            .map(|_| {
                Pose2D::new(
                    start.x + uniform(rng, config.init_xy),
                    start.y + uniform(rng, config.init_xy),
                    start.theta + uniform(rng, config.init_theta),
                )
            })
            .collect();
        Self::with_poses(config, map, poses)
    }

    /// Particles uniform over the field.
    pub fn uniform<R: Rng + ?Sized>(config: MclConfig, map: &FieldMap, rng: &mut R) -> Self {
        let mut s = Self::with_poses(config, map, Vec::new());
        s.poses = (0..config.particles).map(|_| s.random_pose(rng)).collect();
        s.weights = vec![1.0 / config.particles as f64; config.particles];
        s
    }

    fn with_poses(config: MclConfig, map: &FieldMap, poses: Vec<Pose2D>) -> Self {
        let (lo, hi) = map.bounds();
        let margin = Vector2::new(0.5, 0.5);
        let n = poses.len().max(1);
        Self {
            config,
            weights: vec![1.0 / n as f64; poses.len()],
            poses,
            w_slow: 0.0,
            w_fast: 0.0,
            bounds: (lo - margin, hi + margin),
        }
    }

    fn random_pose<R: Rng + ?Sized>(&self, rng: &mut R) -> Pose2D {
        let (lo, hi) = self.bounds;
        Pose2D::new(
            rng.gen_range(lo.x..=hi.x),
            rng.gen_range(lo.y..=hi.y),
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        )
    }

    pub fn poses(&self) -> &[Pose2D] {
        &self.poses
    }

    pub fn estimate(&self) -> Pose2D {
        let x = self.poses.iter().zip(&self.weights).map(|(p, w)| p.x * w).sum();
        let y = self.poses.iter().zip(&self.weights).map(|(p, w)| p.y * w).sum();
        let theta = circular_mean(self.poses.iter().zip(&self.weights).map(|(p, &w)| (p.theta, w)));
        Pose2D::new(x, y, theta)
    }

    /// Mean per-observation log-likelihood, in (-inf, 0].
    fn log_likelihood(&self, pose: &Pose2D, observations: &[BodyLandmark], map: &FieldMap) -> f64 {
        let two_s2 = 2.0 * self.config.sigma * self.config.sigma;
        let z_rand = self.config.z_rand;
        let mut total = 0.0;
        let mut used = 0usize;
        for obs in observations {
            let world = pose.transform_body_to_world(&obs.position);
            if let Some((_, d2)) = nearest_same_label(map, obs.label, &world) {
                total += ((1.0 - z_rand) * (-d2 / two_s2).exp() + z_rand).ln();
                used += 1;
            }
        }
        if used == 0 {
            0.0
        } else {
            total / used as f64
        }
    }

    /// One iteration: propagate, weight, update the likelihood averages,
    /// take the weighted mean, then resample with random injection.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        observations: &[BodyLandmark],
        odometry_delta: &Pose2D,
        map: &FieldMap,
        rng: &mut R,
    ) -> Pose2D {
        let (bxy, bt) = (self.config.motion_xy, self.config.motion_theta);
        for p in &mut self.poses {
            let noisy = Pose2D::new(
                odometry_delta.x + uniform(rng, bxy),
                odometry_delta.y + uniform(rng, bxy),
                odometry_delta.theta + uniform(rng, bt),
            );
            *p = p.compose(&noisy);
        }
        if observations.is_empty() {
            return self.estimate();
        }

        let log_w: Vec<f64> = self
            .poses
            .iter()
            .map(|p| self.log_likelihood(p, observations, map))
            .collect();
        let w_avg = log_w.iter().map(|l| l.exp()).sum::<f64>() / log_w.len() as f64;
        if self.w_slow == 0.0 {
            self.w_slow = w_avg;
            self.w_fast = w_avg;
        } else {
            self.w_slow += self.config.alpha_slow * (w_avg - self.w_slow);
            self.w_fast += self.config.alpha_fast * (w_avg - self.w_fast);
        }

        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut weights: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        self.weights = weights;
        let estimate = self.estimate();

        let inject = if self.w_slow > 0.0 {
            (1.0 - self.w_fast / self.w_slow).max(0.0)
        } else {
            0.0
        };
        self.resample(inject, rng);
        estimate
    }

    /// Low-variance resampling; each slot is replaced by a random pose with
    /// probability `inject`.
    fn resample<R: Rng + ?Sized>(&mut self, inject: f64, rng: &mut R) {
        let n = self.poses.len();
        let step = 1.0 / n as f64;
        let start = rng.gen_range(0.0..step);
        let mut out = Vec::with_capacity(n);
        let mut cumulative = self.weights[0];
        let mut i = 0;
        for k in 0..n {
            let target = start + k as f64 * step;
            while target > cumulative && i + 1 < n {
                i += 1;
                cumulative += self.weights[i];
            }
            if inject > 0.0 && rng.gen::<f64>() < inject {
                out.push(self.random_pose(rng));
            } else {
                out.push(self.poses[i]);
            }
        }
        self.poses = out;
        self.weights = vec![step; n];
    }
}

/// One aMCL iteration; see [`MclState::step`].
pub fn mcl_baseline_step<R: Rng + ?Sized>(
    state: &mut MclState,
    observations: &[BodyLandmark],
    odometry_delta: &Pose2D,
    map: &FieldMap,
    rng: &mut R,
) -> Pose2D {
    state.step(observations, odometry_delta, map, rng)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpConfig {
    pub max_iterations: usize,
    /// Stop when an iteration moves the pose less than this (m and rad).
    pub convergence: f64,
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self {
            max_iterations: 20,
            convergence: 1e-6,
        }
    }
}

/// Least-squares rigid transform mapping `body` points onto `world` points.
/// A single correspondence fixes only the translation, so `heading` is kept.
pub fn rigid_fit(body: &[Vector2<f64>], world: &[Vector2<f64>], heading: f64) -> Option<Pose2D> {
    let n = body.len();
    if n == 0 || n != world.len() {
        return None;
    }
    let bc = body.iter().sum::<Vector2<f64>>() / n as f64;
    let wc = world.iter().sum::<Vector2<f64>>() / n as f64;
    let theta = if n == 1 {
        heading
    } else {
        let (mut dot, mut cross) = (0.0, 0.0);
        for (b, w) in body.iter().zip(world) {
            let (b, w) = (b - bc, w - wc);
            dot += b.dot(&w);
            cross += b.x * w.y - b.y * w.x;
        }
        if dot == 0.0 && cross == 0.0 {
            heading
        } else {
            cross.atan2(dot)
        }
    };
    let r = nalgebra::Rotation2::new(theta);
    Some(Pose2D::from_parts(wc - r * bc, theta))
}

/// Iterate nearest same-label correspondence and rigid refit from the
/// odometry-propagated previous pose.
pub fn icp_baseline_step(
    prev: &Pose2D,
    observations: &[BodyLandmark],
    odometry_delta: &Pose2D,
    map: &FieldMap,
    config: &IcpConfig,
) -> Pose2D {
    let mut pose = prev.compose(odometry_delta);
    let mut body = Vec::with_capacity(observations.len());
    let mut world = Vec::with_capacity(observations.len());
    for _ in 0..config.max_iterations {
        body.clear();
        world.clear();
        for obs in observations {
            let w = pose.transform_body_to_world(&obs.position);
            if let Some((lm, _)) = nearest_same_label(map, obs.label, &w) {
                body.push(obs.position);
                world.push(lm.position);
            }
        }
        let Some(next) = rigid_fit(&body, &world, pose.theta) else {
            break;
        };
        let moved = (next.position() - pose.position()).norm()
            + clap_localization::wrap_angle(next.theta - pose.theta).abs();
        pose = next;
        if moved < config.convergence {
            break;
        }
    }
    pose
}
