//! Landmark-pair pose estimation for a humanoid robot on a soccer field.
//!
//! Every pair of observed field features is matched against map pairs with
//! the same labels and a similar separation. Each match fixes a full 2D
//! pose, and clustering the candidate poses over time gives an estimate
//! that tolerates false detections and recovers from being lost.

// `!(x > 0.0)` checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod estimator;
pub mod field_map;
pub mod fusion;
pub mod geometry;
pub mod sim;

pub use estimator::{ClapEstimator, EstimateOutput, EstimateSource, EstimatorConfig};
pub use field_map::{default_adult_field, load_field_map, FieldMap, LandmarkLabel, MapLandmark};
pub use fusion::{FilterConfig, OdometryModel, ParticleFilter};
pub use geometry::{mirror_match, pose_distance, wrap_angle, BodyLandmark, Pose2D, PoseMetric};
