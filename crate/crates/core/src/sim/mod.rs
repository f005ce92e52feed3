//! Deterministic frame generator: ground-truth motion, a wedge-shaped
//! camera, distance-banded or flat observation noise, false landmark
//! injection and noisy odometry.
//!
//! Every random draw comes from a ChaCha8 generator seeded per run, with
//! separate streams for odometry, observation noise and outliers so that
//! changing one noise source leaves the others untouched.

mod trajectory;

use std::f64::consts::TAU;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::field_map::{ErrorBands, FieldMap, LandmarkLabel, MapLandmark};
use crate::fusion::{dead_reckon, OdometryModel};
use crate::geometry::{BodyLandmark, Pose2D};

pub use trajectory::{
    make_trajectory, parse_waypoints, HeadingPolicy, TimedPose, Trajectory, TrajectoryKind,
    TrajectorySpec, Waypoint,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("waypoint line {line}: expected `x y [theta]`, got {text:?}")]
    WaypointParse { line: usize, text: String },
    #[error(
        "frame interval {frame_interval} s is not a whole multiple of odometry interval {odometry_interval} s"
    )]
    RateMismatch {
        frame_interval: f64,
        odometry_interval: f64,
    },
    #[error("invalid sensor: {0}")]
    InvalidSensor(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    /// Per-coordinate uniform error bounded by `band(d) · d`.
    Banded,
    /// Per-coordinate uniform error bounded by a flat distance.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseProfile {
    pub bands: ErrorBands,
    pub landmark_uniform_bound: f64,
    /// Outlier-to-inlier ratio injected into every frame.
    pub false_positive_rate: f64,
    pub mode: NoiseMode,
    pub odometry: OdometryModel,
}

impl Default for NoiseProfile {
    fn default() -> Self {
        Self::banded()
    }
}

impl NoiseProfile {
    /// Perception error bands with a 3% false landmark ratio.
    pub fn banded() -> Self {
        Self {
            bands: ErrorBands::perception_default(),
            landmark_uniform_bound: 0.5,
            false_positive_rate: 0.03,
            mode: NoiseMode::Banded,
            odometry: OdometryModel::default(),
        }
    }

    /// ±0.5 m flat landmark noise, ±0.02 m / ±0.02 rad per 10 ms odometry,
    /// no false landmarks.
    pub fn uniform() -> Self {
        Self {
            false_positive_rate: 0.0,
            mode: NoiseMode::Uniform,
            ..Self::banded()
        }
    }

    pub fn noiseless() -> Self {
        Self {
            bands: ErrorBands::new(vec![(f64::INFINITY, 0.0)]).expect("valid band"),
            landmark_uniform_bound: 0.0,
            false_positive_rate: 0.0,
            mode: NoiseMode::Uniform,
            odometry: OdometryModel::exact(0.01),
        }
    }

    pub fn with_outlier_ratio(mut self, ratio: f64) -> Self {
        self.false_positive_rate = ratio;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSpec {
    /// Full horizontal field of view (rad).
    pub fov: f64,
    pub max_range: f64,
    pub max_landmarks: usize,
    /// Camera frames per second.
    pub frame_rate: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            fov: 110f64.to_radians(),
            max_range: 10.0,
            max_landmarks: 7,
            frame_rate: 40.0,
        }
    }
}

impl SensorSpec {
    /// Sees everything, everywhere.
    pub fn omniscient(frame_rate: f64) -> Self {
        Self {
            fov: TAU,
            max_range: f64::INFINITY,
            max_landmarks: usize::MAX,
            frame_rate,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.fov > 0.0 && self.fov <= TAU) {
            return Err(SimError::InvalidSensor(format!("fov {} outside (0, 2π]", self.fov)));
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(SimError::InvalidSensor("frame rate must be positive".into()));
        }
        if !(self.max_range > 0.0) {
            return Err(SimError::InvalidSensor("max range must be positive".into()));
        }
        Ok(())
    }

    /// Whether a body-frame point lies inside the camera wedge.
    pub fn sees(&self, body: &Vector2<f64>) -> bool {
        let range = body.norm();
        let bearing = body.y.atan2(body.x);
        range <= self.max_range && (self.fov >= TAU || bearing.abs() <= self.fov / 2.0)
    }
}

/// Map landmarks inside the camera wedge, nearest first (ties by id),
/// truncated to the sensor's landmark limit.
pub fn visible_landmarks(gt: &Pose2D, map: &FieldMap, sensor: &SensorSpec) -> Vec<MapLandmark> {
    let mut seen: Vec<(f64, MapLandmark)> = map
        .landmarks()
        .iter()
        .filter_map(|lm| {
            let b = gt.transform_world_to_body(&lm.position);
            sensor.sees(&b).then(|| (b.norm(), *lm))
        })
        .collect();
    seen.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.id.cmp(&b.1.id)));
    seen.truncate(sensor.max_landmarks);
    seen.into_iter().map(|(_, lm)| lm).collect()
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, bound: f64) -> f64 {
    if bound > 0.0 {
        rng.gen_range(-bound..=bound)
    } else {
        0.0
    }
}

/// Per-coordinate bound applied to an observation at `range`.
pub fn noise_bound(profile: &NoiseProfile, mode: NoiseMode, range: f64) -> f64 {
    match mode {
        NoiseMode::Banded => profile.bands.fraction_at(range) * range,
        NoiseMode::Uniform => profile.landmark_uniform_bound,
    }
}

pub fn apply_noise<R: Rng + ?Sized>(
    landmarks: &[BodyLandmark],
    profile: &NoiseProfile,
    mode: NoiseMode,
    rng: &mut R,
) -> Vec<BodyLandmark> {
    landmarks
        .iter()
        .map(|lm| {
            let bound = noise_bound(profile, mode, lm.range());
            BodyLandmark {
                label: lm.label,
                position: lm.position + Vector2::new(uniform(rng, bound), uniform(rng, bound)),
            }
        })
        .collect()
}

/// Number of false landmarks appended for `inliers` real ones.
pub fn outlier_count(ratio: f64, inliers: usize) -> usize {
    (ratio.max(0.0) * inliers as f64).round() as usize
}

/// Append `round(ratio · n)` false landmarks with uniform labels, spread
/// uniformly over the area of the camera wedge.
pub fn inject_outliers<R: Rng + ?Sized>(
    mut landmarks: Vec<BodyLandmark>,
    ratio: f64,
    wedge: &SensorSpec,
    rng: &mut R,
) -> Vec<BodyLandmark> {
    let count = outlier_count(ratio, landmarks.len());
    let half = wedge.fov.min(TAU) / 2.0;
    for _ in 0..count {
        let label = LandmarkLabel::ALL[rng.gen_range(0..LandmarkLabel::ALL.len())];
        let r = wedge.max_range * rng.gen::<f64>().sqrt();
        let bearing = rng.gen_range(-half..=half);
        landmarks.push(BodyLandmark {
            label,
            position: Vector2::new(r * bearing.cos(), r * bearing.sin()),
        });
    }
    landmarks
}

/// One camera tick.
#[derive(Debug, Clone, PartialEq)]
pub struct SimFrame {
    pub index: usize,
    pub t: f64,
    pub gt: Pose2D,
    /// Noisy real landmarks first (`inliers` of them), then outliers.
    pub observations: Vec<BodyLandmark>,
    pub inliers: usize,
    /// Noisy motion since the previous frame, in the previous body frame.
    pub odometry_delta: Pose2D,
}

/// Streaming frame generator; see [`simulate`].
pub struct Simulator<'a> {
    map: &'a FieldMap,
    trajectory: &'a Trajectory,
    sensor: SensorSpec,
    profile: NoiseProfile,
    substeps: usize,
    frame_count: usize,
    next: usize,
    odometry_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    outlier_rng: ChaCha8Rng,
}

impl<'a> Simulator<'a> {
    pub fn new(
        map: &'a FieldMap,
        trajectory: &'a Trajectory,
        sensor: SensorSpec,
        profile: NoiseProfile,
        seed: u64,
    ) -> Result<Self, SimError> {
        sensor.validate()?;
        let frame_interval = 1.0 / sensor.frame_rate;
        let odometry_interval = profile.odometry.interval;
        let ratio = frame_interval / odometry_interval;
        let substeps = ratio.round();
        if !(odometry_interval > 0.0) || substeps < 1.0 || (ratio - substeps).abs() > 1e-6 {
            return Err(SimError::RateMismatch {
                frame_interval,
                odometry_interval,
            });
        }
        let stream = |n: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(n);
            rng
        };
        Ok(Self {
            map,
            trajectory,
            frame_count: (trajectory.duration() * sensor.frame_rate + 1e-9).floor() as usize + 1,
            sensor,
            profile,
            substeps: substeps as usize,
            next: 0,
            odometry_rng: stream(1),
            noise_rng: stream(2),
            outlier_rng: stream(3),
        })
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    fn time(&self, frame: usize) -> f64 {
        frame as f64 / self.sensor.frame_rate
    }

    fn odometry_since_previous(&mut self, frame: usize) -> Pose2D {
        if frame == 0 {
            return Pose2D::identity();
        }
        let t0 = self.time(frame - 1);
        let dt = 1.0 / (self.sensor.frame_rate * self.substeps as f64);
        let mut accumulated = Pose2D::identity();
        let mut prev = self.trajectory.pose_at(t0);
        for k in 1..=self.substeps {
            let pose = self.trajectory.pose_at(t0 + k as f64 * dt);
            let noisy = dead_reckon(&self.profile.odometry, &prev.delta_to(&pose), &mut self.odometry_rng);
            accumulated = accumulated.compose(&noisy);
            prev = pose;
        }
        accumulated
    }
}

impl Iterator for Simulator<'_> {
    type Item = SimFrame;

    fn next(&mut self) -> Option<SimFrame> {
        if self.next >= self.frame_count {
            return None;
        }
        let index = self.next;
        self.next += 1;
        let t = self.time(index);
        let gt = self.trajectory.pose_at(t);
        let odometry_delta = self.odometry_since_previous(index);
        let projected: Vec<BodyLandmark> = visible_landmarks(&gt, self.map, &self.sensor)
            .iter()
            .map(|lm| BodyLandmark {
                label: lm.label,
                position: gt.transform_world_to_body(&lm.position),
            })
            .collect();
        let noisy = apply_noise(&projected, &self.profile, self.profile.mode, &mut self.noise_rng);
        let inliers = noisy.len();
        let observations = inject_outliers(
            noisy,
            self.profile.false_positive_rate,
            &self.sensor,
            &mut self.outlier_rng,
        );
        Some(SimFrame {
            index,
            t,
            gt,
            observations,
            inliers,
            odometry_delta,
        })
    }
}

/// Run a whole simulation. Identical arguments give identical frames.
pub fn simulate(
    map: &FieldMap,
    trajectory: &Trajectory,
    sensor: &SensorSpec,
    profile: &NoiseProfile,
    seed: u64,
) -> Result<Vec<SimFrame>, SimError> {
    Ok(Simulator::new(map, trajectory, *sensor, profile.clone(), seed)?.collect())
}
