use std::str::FromStr;

use nalgebra::Vector2;

use crate::geometry::Pose2D;

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub theta: Option<f64>,
}

impl Waypoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y, theta: None }
    }

    fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    Box,
    CShape,
    XShape,
    Zigzag,
    Waypoints,
}

impl FromStr for TrajectoryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "box" => Ok(Self::Box),
            "c" | "c_shape" => Ok(Self::CShape),
            "x" | "x_shape" => Ok(Self::XShape),
            "zigzag" => Ok(Self::Zigzag),
            "waypoints" => Ok(Self::Waypoints),
            other => Err(format!("unknown trajectory kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeadingPolicy {
    /// Heading follows the current segment direction.
    FaceTravel,
    /// Heading is the `theta` of the waypoint starting the segment (0 when
    /// absent).
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    pub waypoints: Vec<Waypoint>,
    /// Meters per second along the path.
    pub speed: f64,
    pub heading: HeadingPolicy,
    /// Closed shapes return to the start each lap; open shapes walk out
    /// and back.
    pub laps: usize,
}

fn pts(coords: &[(f64, f64)]) -> Vec<Waypoint> {
    coords.iter().map(|&(x, y)| Waypoint::new(x, y)).collect()
}

impl TrajectorySpec {
    /// Built-in shape at 0.3 m/s facing the direction of travel.
    ///
    /// `Box` runs around the positive-goal penalty area corners of the
    /// default field; the other shapes cover the same half (zigzag spans
    /// the whole length).
    pub fn preset(kind: TrajectoryKind) -> Self {
        let waypoints = match kind {
            TrajectoryKind::Box => pts(&[(4.0, -3.0), (7.0, -3.0), (7.0, 3.0), (4.0, 3.0)]),
            TrajectoryKind::CShape => pts(&[(5.5, 3.0), (2.0, 3.0), (2.0, -3.0), (5.5, -3.0)]),
            TrajectoryKind::XShape => pts(&[(2.0, 3.0), (6.0, -3.0), (6.0, 3.0), (2.0, -3.0)]),
            TrajectoryKind::Zigzag => pts(&[
                (-5.0, -2.5),
                (-2.5, 2.5),
                (0.0, -2.5),
                (2.5, 2.5),
                (5.0, -2.5),
            ]),
            TrajectoryKind::Waypoints => Vec::new(),
        };
        Self {
            kind,
            waypoints,
            speed: 0.3,
            heading: HeadingPolicy::FaceTravel,
            laps: 1,
        }
    }

    pub fn custom(waypoints: Vec<Waypoint>) -> Self {
        Self {
            waypoints,
            ..Self::preset(TrajectoryKind::Waypoints)
        }
    }

    pub fn with_laps(mut self, laps: usize) -> Self {
        self.laps = laps;
        self
    }

    pub fn with_speed(mut self, speed: f64) -> Self {
        self.speed = speed;
        self
    }

    fn is_closed(&self) -> bool {
        self.kind == TrajectoryKind::Box
    }
}

/// Parse a waypoint document: one `x y [theta]` per line, `#` comments.
pub fn parse_waypoints(text: &str) -> Result<Vec<Waypoint>, SimError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let nums: Result<Vec<f64>, _> = content.split_whitespace().map(str::parse::<f64>).collect();
        let bad = || SimError::WaypointParse {
            line,
            text: content.to_string(),
        };
        let nums = nums.map_err(|_| bad())?;
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(bad());
        }
        match nums.as_slice() {
            [x, y] => out.push(Waypoint::new(*x, *y)),
            [x, y, t] => out.push(Waypoint {
                x: *x,
                y: *y,
                theta: Some(*t),
            }),
            _ => return Err(bad()),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
struct Segment {
    start: Vector2<f64>,
    dir: Vector2<f64>,
    length: f64,
    /// Path length at the segment start.
    offset: f64,
    heading: f64,
}

/// Constant-speed piecewise-linear path.
#[derive(Debug, Clone)]
pub struct Trajectory {
    segments: Vec<Segment>,
    speed: f64,
    length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedPose {
    pub t: f64,
    pub pose: Pose2D,
}

impl Trajectory {
    pub fn new(spec: &TrajectorySpec) -> Result<Self, SimError> {
        if !(spec.speed > 0.0 && spec.speed.is_finite()) {
            return Err(SimError::InvalidTrajectory(format!(
                "speed must be positive, got {}",
                spec.speed
            )));
        }
        if spec.waypoints.len() < 2 {
            return Err(SimError::InvalidTrajectory(
                "at least 2 waypoints required".into(),
            ));
        }
        if spec.laps == 0 {
            return Err(SimError::InvalidTrajectory("laps must be >= 1".into()));
        }
        let mut lap: Vec<Waypoint> = spec.waypoints.clone();
        if spec.is_closed() {
            lap.push(spec.waypoints[0]);
        } else {
            lap.extend(spec.waypoints.iter().rev().skip(1).copied());
        }
        let mut path = lap.clone();
        for _ in 1..spec.laps {
            path.extend(lap.iter().skip(1).copied());
        }

        let mut segments = Vec::with_capacity(path.len() - 1);
        let mut offset = 0.0;
        for w in path.windows(2) {
            let d = w[1].position() - w[0].position();
            let length = d.norm();
            if !(length > 1e-9) {
                return Err(SimError::InvalidTrajectory(format!(
                    "consecutive waypoints coincide at ({}, {})",
                    w[0].x, w[0].y
                )));
            }
            let heading = match spec.heading {
                HeadingPolicy::FaceTravel => d.y.atan2(d.x),
                HeadingPolicy::Fixed => w[0].theta.unwrap_or(0.0),
            };
            segments.push(Segment {
                start: w[0].position(),
                dir: d / length,
                length,
                offset,
                heading,
            });
            offset += length;
        }
        Ok(Self {
            segments,
            speed: spec.speed,
            length: offset,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn duration(&self) -> f64 {
        self.length / self.speed
    }

    /// Pose at time `t`, clamped to the path ends. At a vertex the outgoing
    /// segment's heading applies.
    pub fn pose_at(&self, t: f64) -> Pose2D {
        let s = (t * self.speed).clamp(0.0, self.length);
        let idx = self
            .segments
            .partition_point(|seg| seg.offset <= s)
            .saturating_sub(1);
        let seg = &self.segments[idx];
        let along = (s - seg.offset).min(seg.length);
        Pose2D::from_parts(seg.start + seg.dir * along, seg.heading)
    }

    /// Samples at `k / rate` for every `k` with `k / rate <= duration`.
    pub fn sample(&self, rate: f64) -> Vec<TimedPose> {
        let n = (self.duration() * rate + 1e-9).floor() as usize;
        (0..=n)
            .map(|k| {
                let t = k as f64 / rate;
                TimedPose {
                    t,
                    pose: self.pose_at(t),
                }
            })
            .collect()
    }
}

pub fn make_trajectory(spec: &TrajectorySpec, rate: f64) -> Result<Vec<TimedPose>, SimError> {
    if !(rate > 0.0) {
        return Err(SimError::InvalidTrajectory(format!("rate must be positive, got {rate}")));
    }
    Ok(Trajectory::new(spec)?.sample(rate))
}
