use std::collections::VecDeque;

use crate::field_map::FieldMap;
use crate::geometry::{solve_pair_pose, BodyLandmark, Pose2D};

use super::EstimatorConfig;

/// One pose hypothesis from matching an observation pair to a map pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateState {
    pub pose: Pose2D,
    /// Indices into the observation slice handed to [`generate_candidates`].
    pub body_pair: (usize, usize),
    /// Map landmark ids, in the same order as `body_pair`.
    pub world_pair: (usize, usize),
    pub frame: u64,
}

/// Observation indices kept after truncating to the `max` nearest,
/// ordered by range (stable for ties).
pub(crate) fn nearest_first(observations: &[BodyLandmark], max: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..observations.len()).collect();
    order.sort_by(|&a, &b| observations[a].range().total_cmp(&observations[b].range()));
    order.truncate(max);
    order
}

/// Enumerate every candidate pose for one frame.
///
/// Observation pairs are visited as `(i, j)` with `i` before `j` in
/// nearest-first order; map pairs come back in ascending id order, so the
/// output order is fully determined by the inputs.
pub fn generate_candidates(
    observations: &[BodyLandmark],
    map: &FieldMap,
    cfg: &EstimatorConfig,
    frame: u64,
) -> Vec<CandidateState> {
    let kept = nearest_first(observations, cfg.max_landmarks);
    if kept.len() < 2 {
        return Vec::new();
    }

    let mut pairs = Vec::with_capacity(kept.len() * (kept.len() - 1) / 2);
    for (n, &i) in kept.iter().enumerate() {
        for &j in &kept[n + 1..] {
            let separation = (observations[j].position - observations[i].position).norm();
            if separation > crate::geometry::PAIR_EPSILON {
                pairs.push((i, j, separation));
            }
        }
    }
    let unique_pairs = pairs
        .iter()
        .filter(|(i, j, _)| observations[*i].label != observations[*j].label)
        .count();
    let skip_same_label = unique_pairs >= cfg.min_unique_pairs_to_skip_nonunique;

    let mut out = Vec::new();
    for (i, j, separation) in pairs {
        let (a, b) = (&observations[i], &observations[j]);
        if skip_same_label && a.label == b.label {
            continue;
        }
        for (wa, wb) in map.match_pairs(a.label, b.label, separation, &cfg.tolerance) {
            if let Ok(pose) =
                solve_pair_pose((&a.position, &b.position), (&wa.position, &wb.position))
            {
                out.push(CandidateState {
                    pose,
                    body_pair: (i, j),
                    world_pair: (wa.id, wb.id),
                    frame,
                });
            }
        }
    }
    out
}

/// Candidates from recent frames, each kept current by composing it with
/// every odometry increment since it was captured.
#[derive(Debug, Clone)]
pub struct CandidateBuffer {
    capacity: usize,
    frames: VecDeque<Vec<CandidateState>>,
}

impl CandidateBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            frames: VecDeque::with_capacity(capacity.max(1) + 1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Append one frame, evicting the oldest when over capacity.
    pub fn push(&mut self, frame: Vec<CandidateState>) {
        self.frames.push_back(frame);
        while self.frames.len() > self.capacity {
            self.frames.pop_front();
        }
    }

    pub fn propagate(&mut self, delta: &Pose2D) {
        for c in self.frames.iter_mut().flatten() {
            c.pose = c.pose.compose(delta);
        }
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn candidate_count(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.candidate_count() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &CandidateState> {
        self.frames.iter().flatten()
    }

    pub fn poses(&self) -> Vec<Pose2D> {
        self.iter().map(|c| c.pose).collect()
    }

    pub fn clear(&mut self) {
        self.frames.clear();
    }
}

/// Compose every buffered candidate with `delta`.
pub fn propagate_buffer(buffer: &mut CandidateBuffer, delta: &Pose2D) {
    buffer.propagate(delta);
}
