use crate::geometry::{circular_mean, pose_distance, Pose2D};

use super::{CandidateState, EstimatorConfig, EstimatorError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalCluster {
    pub pose: Pose2D,
    pub size: usize,
}

/// Unweighted mean of the candidates strictly within `delta_t` of `prev`.
pub fn local_cluster(
    candidates: &[CandidateState],
    prev: &Pose2D,
    cfg: &EstimatorConfig,
) -> Option<LocalCluster> {
    let members: Vec<&Pose2D> = candidates
        .iter()
        .map(|c| &c.pose)
        .filter(|p| pose_distance(p, prev, &cfg.metric) < cfg.delta_t)
        .collect();
    if members.is_empty() {
        return None;
    }
    let n = members.len() as f64;
    let x = members.iter().map(|p| p.x).sum::<f64>() / n;
    let y = members.iter().map(|p| p.y).sum::<f64>() / n;
    let theta = circular_mean(members.iter().map(|p| (p.theta, 1.0)));
    Some(LocalCluster {
        pose: Pose2D::new(x, y, theta),
        size: members.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalCluster {
    /// Centroid nearest the previous pose.
    pub pose: Pose2D,
    /// Points assigned to that centroid after the last trim.
    pub size: usize,
    /// Both final centroids; `None` when a centroid ended up empty.
    pub centroids: [Option<Pose2D>; 2],
}

type Point = [f64; 4];

fn embed(p: &Pose2D, w: f64) -> Point {
    [p.x, p.y, w * p.theta.cos(), w * p.theta.sin()]
}

fn decode(c: &Point) -> Pose2D {
    let theta = if c[2] == 0.0 && c[3] == 0.0 {
        0.0
    } else {
        c[3].atan2(c[2])
    };
    Pose2D::new(c[0], c[1], theta)
}

fn dist2(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct TwoMeans<'a> {
    points: &'a [Point],
    centroids: [Point; 2],
    members: [usize; 2],
    assignment: Vec<usize>,
}

impl<'a> TwoMeans<'a> {
    fn nearest(&self, p: &Point) -> usize {
        if dist2(p, &self.centroids[1]) < dist2(p, &self.centroids[0]) {
            1
        } else {
            0
        }
    }

    fn refit(&mut self, active: &[usize]) {
        let mut sums = [[0.0; 4]; 2];
        let mut counts = [0usize; 2];
        for &i in active {
            let k = self.assignment[i];
            counts[k] += 1;
            for (s, v) in sums[k].iter_mut().zip(&self.points[i]) {
                *s += v;
            }
        }
        for k in 0..2 {
            if counts[k] > 0 {
                let n = counts[k] as f64;
                self.centroids[k] = sums[k].map(|s| s / n);
            }
        }
        self.members = counts;
    }

    fn assign(&mut self, active: &[usize]) {
        for &i in active {
            self.assignment[i] = self.nearest(&self.points[i]);
        }
    }

    /// Drop the `fraction` of active points farthest from their centroid.
    fn trim(&self, active: &mut Vec<usize>, fraction: f64) {
        let drop = ((active.len() as f64) * fraction).floor() as usize;
        let drop = drop.min(active.len().saturating_sub(1));
        if drop == 0 {
            return;
        }
        let residual =
            |i: usize| dist2(&self.points[i], &self.centroids[self.assignment[i]]);
        active.sort_by(|&a, &b| residual(a).total_cmp(&residual(b)).then(a.cmp(&b)));
        active.truncate(active.len() - drop);
        active.sort_unstable();
    }
}

/// Trimmed 2-means over buffered candidate poses.
///
/// Headings enter as `w_θ·(cos θ, sin θ)` so the clustering space has no
/// seam at ±π. Seeds are `prev` and its half-turn twin. Each round assigns
/// the surviving points, discards `trim_fraction` of them by residual to the
/// centroids they were assigned against, then refits.
pub fn global_cluster(
    poses: &[Pose2D],
    prev: &Pose2D,
    cfg: &EstimatorConfig,
) -> Result<GlobalCluster, EstimatorError> {
    if poses.len() < 2 {
        return Err(EstimatorError::InsufficientCandidates { found: poses.len() });
    }
    let w = cfg.metric.theta_weight;
    let points: Vec<Point> = poses.iter().map(|p| embed(p, w)).collect();
    let mut km = TwoMeans {
        points: &points,
        centroids: [embed(prev, w), embed(&prev.symmetric_twin(), w)],
        members: [0, 0],
        assignment: vec![usize::MAX; points.len()],
    };
    let mut active: Vec<usize> = (0..points.len()).collect();
    for _ in 0..cfg.kmeans_iterations {
        km.assign(&active);
        km.trim(&mut active, cfg.trim_fraction);
        km.refit(&active);
    }

    let centroids = [0, 1].map(|k| (km.members[k] > 0).then(|| decode(&km.centroids[k])));
    let (k, pose) = centroids
        .iter()
        .enumerate()
        .filter_map(|(k, c)| c.map(|c| (k, c)))
        .min_by(|(_, a), (_, b)| {
            pose_distance(a, prev, &cfg.metric).total_cmp(&pose_distance(b, prev, &cfg.metric))
        })
        .expect("at least one centroid holds the surviving points");
    Ok(GlobalCluster {
        pose,
        size: km.members[k],
        centroids,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimateSource {
    Local,
    GlobalReset,
    OdometryOnly,
}

impl EstimateSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimateSource::Local => "local",
            EstimateSource::GlobalReset => "global-reset",
            EstimateSource::OdometryOnly => "odometry-only",
        }
    }
}

/// Pick the frame's pose from the local and (when run) global clusters.
///
/// With no local cluster the previous pose stands in for it in the
/// disagreement test, so a far-off global centroid still resets.
pub fn merge_estimates(
    local: Option<&Pose2D>,
    global: Option<&Pose2D>,
    prev: &Pose2D,
    cfg: &EstimatorConfig,
) -> (Pose2D, EstimateSource) {
    let reference = local.unwrap_or(prev);
    if let Some(g) = global {
        if pose_distance(reference, g, &cfg.metric) > cfg.delta_c {
            return (*g, EstimateSource::GlobalReset);
        }
    }
    match local {
        Some(l) => (*l, EstimateSource::Local),
        None => (*prev, EstimateSource::OdometryOnly),
    }
}
