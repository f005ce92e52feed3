//! Candidate generation, local and global clustering, and the per-frame
//! estimator state machine.
//!
//! Each frame: every observation pair is matched against map pairs of the
//! same labels and similar separation, and each match yields one candidate
//! pose. The local estimate averages candidates near the previous pose.
//! Every `global_every` frames a trimmed 2-means over a multi-frame buffer
//! checks the local estimate and replaces it when the two disagree by more
//! than `delta_c` on `reset_confirmations` consecutive checks.

mod candidates;
mod cluster;
mod config;

use std::sync::Arc;

use thiserror::Error;

use crate::config::ConfigError;
use crate::field_map::FieldMap;
use crate::geometry::{pose_distance, BodyLandmark, Pose2D};

pub use candidates::{generate_candidates, propagate_buffer, CandidateBuffer, CandidateState};
pub use cluster::{
    global_cluster, local_cluster, merge_estimates, EstimateSource, GlobalCluster, LocalCluster,
};
pub use config::EstimatorConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("global clustering needs at least 2 candidates, found {found}")]
    InsufficientCandidates { found: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOutput {
    pub pose: Pose2D,
    pub source: EstimateSource,
    pub candidate_count: usize,
    pub local_cluster_size: usize,
    pub local: Option<Pose2D>,
    pub global: Option<Pose2D>,
}

/// Single-threaded estimator state; call [`ClapEstimator::step`] once per
/// camera frame.
#[derive(Debug, Clone)]
pub struct ClapEstimator {
    map: Arc<FieldMap>,
    config: EstimatorConfig,
    prev: Pose2D,
    buffer: CandidateBuffer,
    frame: u64,
    /// Disagreeing global centroid awaiting confirmation, and how many
    /// consecutive checks have agreed with it.
    pending_reset: Option<(Pose2D, usize)>,
}

impl ClapEstimator {
    pub fn new(
        map: Arc<FieldMap>,
        config: EstimatorConfig,
        initial: Pose2D,
    ) -> Result<Self, EstimatorError> {
        config.validate()?;
        Ok(Self {
            map,
            buffer: CandidateBuffer::new(config.buffer_frames),
            config,
            prev: initial,
            frame: 0,
            pending_reset: None,
        })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn map(&self) -> &FieldMap {
        &self.map
    }

    pub fn pose(&self) -> Pose2D {
        self.prev
    }

    /// Overwrite the previous pose without touching the buffer. Any
    /// pending reset is dropped.
    pub fn set_pose(&mut self, pose: Pose2D) {
        self.prev = pose;
        self.pending_reset = None;
    }

    pub fn frame(&self) -> u64 {
        self.frame
    }

    pub fn buffer(&self) -> &CandidateBuffer {
        &self.buffer
    }

    /// Advance one frame. `odometry_delta` is the motion since the last
    /// call, expressed in the previous body frame.
    pub fn step(&mut self, observations: &[BodyLandmark], odometry_delta: &Pose2D) -> EstimateOutput {
        self.prev = self.prev.compose(odometry_delta);
        self.buffer.propagate(odometry_delta);
        if let Some((p, _)) = self.pending_reset.as_mut() {
            *p = p.compose(odometry_delta);
        }

        let candidates = generate_candidates(observations, &self.map, &self.config, self.frame);
        let local = local_cluster(&candidates, &self.prev, &self.config);

        let observed = observations.len().min(self.config.max_landmarks);
        let global = if self.frame.is_multiple_of(self.config.global_every as u64)
            && observed >= self.config.global_min_observations
        {
            let (lo, hi) = self.map.bounds();
            let m = self.config.field_margin;
            let on_field = |p: &Pose2D| {
                p.x >= lo.x - m && p.x <= hi.x + m && p.y >= lo.y - m && p.y <= hi.y + m
            };
            let mut poses = self.buffer.poses();
            poses.extend(candidates.iter().map(|c| c.pose));
            poses.retain(on_field);
            global_cluster(&poses, &self.prev, &self.config).ok()
        } else {
            None
        };

        let local_pose = local.map(|l| l.pose);
        let global_pose = global.map(|g| g.pose);
        let (mut pose, mut source) = merge_estimates(
            local_pose.as_ref(),
            global_pose.as_ref(),
            &self.prev,
            &self.config,
        );
        if let Some(g) = global_pose {
            if source == EstimateSource::GlobalReset {
                let streak = match self.pending_reset {
                    Some((p, n)) if pose_distance(&p, &g, &self.config.metric) <= self.config.delta_c => n + 1,
                    _ => 1,
                };
                if streak < self.config.reset_confirmations {
                    self.pending_reset = Some((g, streak));
                    (pose, source) = merge_estimates(local_pose.as_ref(), None, &self.prev, &self.config);
                } else {
                    self.pending_reset = None;
                }
            } else {
                self.pending_reset = None;
            }
        }

        let out = EstimateOutput {
            pose,
            source,
            candidate_count: candidates.len(),
            local_cluster_size: local.map_or(0, |l| l.size),
            local: local_pose,
            global: global_pose,
        };
        self.buffer.push(candidates);
        self.prev = pose;
        self.frame += 1;
        out
    }
}
