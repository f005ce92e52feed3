//! Per-frame run records and the summary statistics computed from them.

use clap_localization::geometry::wrap_angle;
use clap_localization::Pose2D;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("invalid threshold: {0}")]
    InvalidThreshold(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRow {
    pub t: f64,
    pub gt: Pose2D,
    pub est: Pose2D,
    pub n_candidates: usize,
    pub jump: bool,
    pub diverged: bool,
    pub frame_time_s: f64,
}

/// One method's output over one simulated run, in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub method: String,
    pub rows: Vec<FrameRow>,
}

impl RunRecord {
    pub fn new(method: impl Into<String>) -> Self {
        Self {
            method: method.into(),
            rows: Vec::new(),
        }
    }

    /// Recompute the jump and divergence flags from the pose columns.
    pub fn annotate(&mut self, jumps: &JumpSpec, divergence: &DivergenceSpec) {
        for k in 0..self.rows.len() {
            let jump = k > 0 && jumps.is_jump(&self.rows[k - 1], &self.rows[k]);
            let row = &mut self.rows[k];
            row.jump = jump;
            row.diverged = divergence.is_diverged(row);
        }
    }
}

/// A frame-to-frame estimate change counts as a jump when its finite
/// difference speed exceeds the thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpSpec {
    /// m/s
    pub linear: f64,
    /// rad/s
    pub angular: f64,
    /// Both thresholds must be exceeded (otherwise either suffices).
    pub require_both: bool,
}

impl Default for JumpSpec {
    fn default() -> Self {
        Self {
            linear: 16.0,
            angular: 4.0,
            require_both: true,
        }
    }
}

impl JumpSpec {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if !(self.linear > 0.0 && self.angular > 0.0) {
            return Err(MetricsError::InvalidThreshold(format!(
                "jump thresholds must be positive, got {} m/s and {} rad/s",
                self.linear, self.angular
            )));
        }
        Ok(())
    }

    pub fn is_jump(&self, prev: &FrameRow, cur: &FrameRow) -> bool {
        let dt = cur.t - prev.t;
        if !(dt > 0.0) {
            return false;
        }
        let v = (cur.est.position() - prev.est.position()).norm() / dt;
        let w = wrap_angle(cur.est.theta - prev.est.theta).abs() / dt;
        let (fast, turning) = (v > self.linear, w > self.angular);
        if self.require_both {
            fast && turning
        } else {
            fast || turning
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceSpec {
    /// m
    pub position: f64,
    /// rad
    pub orientation: f64,
    /// Both thresholds must be exceeded (otherwise either suffices).
    pub require_both: bool,
}

impl Default for DivergenceSpec {
    fn default() -> Self {
        Self {
            position: 0.5,
            orientation: 0.15,
            require_both: false,
        }
    }
}

impl DivergenceSpec {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if !(self.position > 0.0 && self.orientation > 0.0) {
            return Err(MetricsError::InvalidThreshold(format!(
                "divergence thresholds must be positive, got {} m and {} rad",
                self.position, self.orientation
            )));
        }
        Ok(())
    }

    pub fn is_diverged(&self, row: &FrameRow) -> bool {
        let (far, turned) = (
            position_error(row) > self.position,
            orientation_error(row) > self.orientation,
        );
        if self.require_both {
            far && turned
        } else {
            far || turned
        }
    }

    pub fn rule(&self) -> &'static str {
        if self.require_both {
            "and"
        } else {
            "or"
        }
    }
}

pub fn position_error(row: &FrameRow) -> f64 {
    (row.est.position() - row.gt.position()).norm()
}

pub fn orientation_error(row: &FrameRow) -> f64 {
    wrap_angle(row.est.theta - row.gt.theta).abs()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaeStats {
    pub position_mae: f64,
    pub position_std: f64,
    pub orientation_mae_deg: f64,
    pub orientation_std_deg: f64,
}

/// Mean and sample standard deviation (n − 1).
fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Position MAE in meters and orientation MAE in degrees, each with one
/// sample standard deviation of the per-frame errors.
pub fn mae_stats(record: &RunRecord) -> Result<MaeStats, MetricsError> {
    if record.rows.len() < 2 {
        return Err(MetricsError::TooFewRows(record.rows.len()));
    }
    let (position_mae, position_std) = mean_std(record.rows.iter().map(position_error));
    let (orientation_mae_deg, orientation_std_deg) =
        mean_std(record.rows.iter().map(|r| orientation_error(r).to_degrees()));
    Ok(MaeStats {
        position_mae,
        position_std,
        orientation_mae_deg,
        orientation_std_deg,
    })
}

pub fn count_velocity_jumps(record: &RunRecord, spec: &JumpSpec) -> usize {
    record
        .rows
        .windows(2)
        .filter(|w| spec.is_jump(&w[0], &w[1]))
        .count()
}

/// 0 for an empty record.
pub fn divergence_fraction(record: &RunRecord, spec: &DivergenceSpec) -> f64 {
    if record.rows.is_empty() {
        return 0.0;
    }
    let diverged = record.rows.iter().filter(|r| spec.is_diverged(r)).count();
    diverged as f64 / record.rows.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LatencyStats {
    pub mean: f64,
    pub max: f64,
    pub p50: f64,
    pub p99: f64,
}

/// Nearest-rank percentile of sorted values, `q` in [0, 1].
fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn latency_stats(record: &RunRecord) -> LatencyStats {
    let mut times: Vec<f64> = record.rows.iter().map(|r| r.frame_time_s).collect();
    if times.is_empty() {
        return LatencyStats::default();
    }
    times.sort_by(f64::total_cmp);
    LatencyStats {
        mean: times.iter().sum::<f64>() / times.len() as f64,
        max: *times.last().unwrap(),
        p50: percentile(&times, 0.5),
        p99: percentile(&times, 0.99),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub method: String,
    pub accuracy: MaeStats,
    pub jumps: usize,
    pub diverged_fraction: f64,
    /// `"or"` or `"and"`, whichever rule produced `diverged_fraction`.
    pub divergence_rule: &'static str,
    pub latency: LatencyStats,
}

impl MetricsReport {
    pub fn compute(
        record: &RunRecord,
        jumps: &JumpSpec,
        divergence: &DivergenceSpec,
    ) -> Result<Self, MetricsError> {
        Ok(Self {
            method: record.method.clone(),
            accuracy: mae_stats(record)?,
            jumps: count_velocity_jumps(record, jumps),
            diverged_fraction: divergence_fraction(record, divergence),
            divergence_rule: divergence.rule(),
            latency: latency_stats(record),
        })
    }
}
