//! Planar pose algebra, the pair-to-pair pose solver and the candidate
//! counting formulas.
//!
//! All angle arithmetic goes through [`wrap_angle`], which maps onto the
//! half-open interval (-π, π].

use std::f64::consts::{PI, TAU};

use nalgebra::{Rotation2, Vector2};
use thiserror::Error;

use crate::field_map::{LandmarkLabel, MapLandmark};

/// Minimum separation (m) for a landmark pair to define a bearing.
pub const PAIR_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate landmark pair: separation {separation:e} m is at or below {PAIR_EPSILON:e} m")]
    DegeneratePair { separation: f64 },
    #[error("label order mismatch: body ({body:?}) vs world ({world:?})")]
    LabelMismatch {
        body: (LandmarkLabel, LandmarkLabel),
        world: (LandmarkLabel, LandmarkLabel),
    },
    #[error("count out of domain: {0}")]
    Domain(String),
}

/// Wrap an angle into (-π, π].
pub fn wrap_angle(theta: f64) -> f64 {
    let a = theta.rem_euclid(TAU);
    if a > PI {
        a - TAU
    } else {
        a
    }
}

/// Mean direction of a set of weighted angles, wrapped.
///
/// Returns 0 when the resultant vector vanishes (e.g. two opposite angles).
pub fn circular_mean<I>(angles: I) -> f64
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let (s, c, total) = angles.into_iter().fold((0.0, 0.0, 0.0), |(s, c, t), (theta, w)| {
        (s + w * theta.sin(), c + w * theta.cos(), t + w.abs())
    });
    if s.hypot(c) <= 1e-12 * total || total == 0.0 {
        0.0
    } else {
        wrap_angle(s.atan2(c))
    }
}

/// Robot pose in the field frame. `theta` is kept in (-π, π] by every
/// constructor and operation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn from_parts(position: Vector2<f64>, theta: f64) -> Self {
        Self::new(position.x, position.y, theta)
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn rotation(&self) -> Rotation2<f64> {
        Rotation2::new(self.theta)
    }

    /// `self ∘ delta`, with `delta` expressed in this pose's body frame.
    pub fn compose(&self, delta: &Pose2D) -> Pose2D {
        let p = self.position() + self.rotation() * delta.position();
        Pose2D::from_parts(p, self.theta + delta.theta)
    }

    pub fn inverse(&self) -> Pose2D {
        let r_inv = self.rotation().inverse();
        Pose2D::from_parts(-(r_inv * self.position()), -self.theta)
    }

    /// Increment `d` such that `self.compose(&d) == other`.
    pub fn delta_to(&self, other: &Pose2D) -> Pose2D {
        self.inverse().compose(other)
    }

    /// Body-frame point to field frame.
    pub fn transform_body_to_world(&self, body_point: &Vector2<f64>) -> Vector2<f64> {
        self.position() + self.rotation() * body_point
    }

    /// Field-frame point to body frame: `R(-θ)(p - p_robot)`.
    pub fn transform_world_to_body(&self, world_point: &Vector2<f64>) -> Vector2<f64> {
        self.rotation().inverse() * (world_point - self.position())
    }

    /// The pose related to this one by the field's half-turn symmetry.
    pub fn symmetric_twin(&self) -> Pose2D {
        Pose2D::new(-self.x, -self.y, self.theta + PI)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

/// Free-function form of [`Pose2D::transform_world_to_body`].
pub fn transform_world_to_body(pose: &Pose2D, world_point: &Vector2<f64>) -> Vector2<f64> {
    pose.transform_world_to_body(world_point)
}

/// A landmark as seen from the robot, in the body frame (x forward).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyLandmark {
    pub label: LandmarkLabel,
    pub position: Vector2<f64>,
}

impl BodyLandmark {
    pub fn new(label: LandmarkLabel, x: f64, y: f64) -> Self {
        Self {
            label,
            position: Vector2::new(x, y),
        }
    }

    pub fn range(&self) -> f64 {
        self.position.norm()
    }
}

/// Distance on poses mixing meters and radians: `w_θ` converts heading
/// error into meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseMetric {
    pub theta_weight: f64,
}

impl Default for PoseMetric {
    fn default() -> Self {
        Self { theta_weight: 2.0 }
    }
}

impl PoseMetric {
    pub fn new(theta_weight: f64) -> Self {
        Self { theta_weight }
    }

    pub fn distance(&self, a: &Pose2D, b: &Pose2D) -> f64 {
        pose_distance(a, b, self)
    }
}

/// `sqrt(Δx² + Δy² + (w_θ · wrap(Δθ))²)`
pub fn pose_distance(a: &Pose2D, b: &Pose2D, metric: &PoseMetric) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dt = metric.theta_weight * wrap_angle(a.theta - b.theta);
    (dx * dx + dy * dy + dt * dt).sqrt()
}

/// Solve the pose that maps the ordered body pair onto the ordered world
/// pair. The heading is the difference of the two pair bearings; the
/// position follows from anchoring the first body point on the first
/// world point.
pub fn solve_pair_pose(
    body: (&Vector2<f64>, &Vector2<f64>),
    world: (&Vector2<f64>, &Vector2<f64>),
) -> Result<Pose2D, GeometryError> {
    let db = body.1 - body.0;
    let dw = world.1 - world.0;
    for separation in [db.norm(), dw.norm()] {
        if separation <= PAIR_EPSILON {
            return Err(GeometryError::DegeneratePair { separation });
        }
    }
    let theta = wrap_angle(dw.y.atan2(dw.x) - db.y.atan2(db.x));
    let p = world.0 - Rotation2::new(theta) * body.0;
    Ok(Pose2D::from_parts(p, theta))
}

/// Pose hypothesis from one body-pair / world-pair correspondence.
pub fn mirror_match(
    body_pair: (&BodyLandmark, &BodyLandmark),
    world_pair: (&MapLandmark, &MapLandmark),
) -> Result<Pose2D, GeometryError> {
    let body_labels = (body_pair.0.label, body_pair.1.label);
    let world_labels = (world_pair.0.label, world_pair.1.label);
    if body_labels != world_labels {
        return Err(GeometryError::LabelMismatch {
            body: body_labels,
            world: world_labels,
        });
    }
    solve_pair_pose(
        (&body_pair.0.position, &body_pair.1.position),
        (&world_pair.0.position, &world_pair.1.position),
    )
}

/// Total candidate count for `l` observed landmarks of which `d` pairs
/// share a label: `l(l-1)/2 + d`.
pub fn candidate_count(l: u64, d: u64) -> Result<u64, GeometryError> {
    let pairs = l * l.saturating_sub(1) / 2;
    if d > pairs {
        return Err(GeometryError::Domain(format!(
            "same-label pair count {d} exceeds the {pairs} pairs of {l} landmarks"
        )));
    }
    Ok(pairs + d)
}

/// Pairs touching at least one of `m` false detections among `l`
/// landmarks: `(2ml - m² - m) / 2`.
pub fn false_pair_count(l: u64, m: u64) -> Result<u64, GeometryError> {
    if m > l {
        return Err(GeometryError::Domain(format!(
            "false detections {m} exceed total landmarks {l}"
        )));
    }
    // m(2l - m - 1) is even and nonnegative for m <= l.
    Ok(m * (2 * l - m).saturating_sub(1) / 2)
}
