use crate::config::{ConfigError, KeyValueDoc};
use crate::field_map::MatchTolerance;
use crate::geometry::PoseMetric;

/// Thresholds and schedules for [`super::ClapEstimator`].
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// Local cluster radius around the previous pose (metric units).
    pub delta_t: f64,
    /// Local/global disagreement that triggers a reset (metric units).
    pub delta_c: f64,
    pub metric: PoseMetric,
    pub tolerance: MatchTolerance,
    /// Observations beyond this count are dropped, farthest first.
    pub max_landmarks: usize,
    /// Same-label pairs are skipped once this many distinct-label pairs are
    /// available. `usize::MAX` never skips.
    pub min_unique_pairs_to_skip_nonunique: usize,
    pub kmeans_iterations: usize,
    /// Fraction of the active points discarded after each K-means round.
    pub trim_fraction: f64,
    pub buffer_frames: usize,
    /// Frames between global clustering checks; 1 runs it every frame.
    pub global_every: usize,
    /// Frames with fewer observations skip the global check.
    pub global_min_observations: usize,
    /// Global clustering ignores candidates farther than this outside the
    /// landmark bounding box. `f64::INFINITY` keeps them all.
    pub field_margin: f64,
    /// Consecutive disagreeing global checks, mutually within `delta_c`,
    /// needed before a reset. 1 resets on the first.
    pub reset_confirmations: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            delta_t: 0.8,
            delta_c: 1.5,
            metric: PoseMetric::default(),
            tolerance: MatchTolerance::default(),
            max_landmarks: 7,
            min_unique_pairs_to_skip_nonunique: 3,
            kmeans_iterations: 10,
            trim_fraction: 0.2,
            buffer_frames: 10,
            global_every: 10,
            global_min_observations: 5,
            field_margin: 1.0,
            reset_confirmations: 2,
        }
    }
}

impl EstimatorConfig {
    pub const KEYS: &'static [&'static str] = &[
        "delta_t",
        "delta_c",
        "theta_weight",
        "tolerance",
        "max_landmarks",
        "min_unique_pairs_to_skip_nonunique",
        "kmeans_iterations",
        "trim_fraction",
        "buffer_frames",
        "global_every",
        "global_min_observations",
        "field_margin",
        "reset_confirmations",
    ];

    /// Defaults overridden by whichever of [`Self::KEYS`] are present.
    /// Other keys are ignored.
    pub fn from_doc(doc: &KeyValueDoc) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        doc.read_into("delta_t", &mut cfg.delta_t)?;
        doc.read_into("delta_c", &mut cfg.delta_c)?;
        doc.read_into("theta_weight", &mut cfg.metric.theta_weight)?;
        doc.read_into("tolerance", &mut cfg.tolerance)?;
        doc.read_into("max_landmarks", &mut cfg.max_landmarks)?;
        doc.read_into(
            "min_unique_pairs_to_skip_nonunique",
            &mut cfg.min_unique_pairs_to_skip_nonunique,
        )?;
        doc.read_into("kmeans_iterations", &mut cfg.kmeans_iterations)?;
        doc.read_into("trim_fraction", &mut cfg.trim_fraction)?;
        doc.read_into("buffer_frames", &mut cfg.buffer_frames)?;
        doc.read_into("global_every", &mut cfg.global_every)?;
        doc.read_into("global_min_observations", &mut cfg.global_min_observations)?;
        doc.read_into("field_margin", &mut cfg.field_margin)?;
        doc.read_into("reset_confirmations", &mut cfg.reset_confirmations)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(self.delta_t > 0.0) {
            return fail("delta_t must be > 0");
        }
        if !(self.delta_c > 0.0) {
            return fail("delta_c must be > 0");
        }
        if !(self.metric.theta_weight > 0.0) {
            return fail("theta_weight must be > 0");
        }
        if !(0.0..0.5).contains(&self.trim_fraction) {
            return fail("trim_fraction must lie in [0, 0.5)");
        }
        if self.buffer_frames < 1 {
            return fail("buffer_frames must be >= 1");
        }
        if self.global_every < 1 {
            return fail("global_every must be >= 1");
        }
        if !(self.field_margin >= 0.0) {
            return fail("field_margin must be >= 0");
        }
        if self.reset_confirmations < 1 {
            return fail("reset_confirmations must be >= 1");
        }
        if self.max_landmarks < 2 {
            return fail("max_landmarks must be >= 2");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        EstimatorConfig::default().validate().unwrap();
    }

    #[test]
    fn doc_overrides() {
        let doc = KeyValueDoc::parse(
            "delta_t = 0.5\ntheta_weight = 1.0\ntolerance = 1.0\nglobal_every = 1\nunrelated = 3\n",
        )
        .unwrap();
        let cfg = EstimatorConfig::from_doc(&doc).unwrap();
        assert_eq!(cfg.delta_t, 0.5);
        assert_eq!(cfg.metric.theta_weight, 1.0);
        assert_eq!(cfg.tolerance, MatchTolerance::Fixed(1.0));
        assert_eq!(cfg.global_every, 1);
        assert_eq!(cfg.delta_c, 1.5);
    }

    #[test]
    fn invalid_values_rejected() {
        for text in [
            "delta_t = 0",
            "trim_fraction = 0.5",
            "buffer_frames = 0",
            "max_landmarks = 1",
            "global_every = 0",
            "delta_c = -1",
            "kmeans_iterations = many",
        ] {
            let doc = KeyValueDoc::parse(text).unwrap();
            assert!(EstimatorConfig::from_doc(&doc).is_err(), "{text}");
        }
    }
}
