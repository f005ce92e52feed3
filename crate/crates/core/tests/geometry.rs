use std::f64::consts::PI;

use clap_localization::geometry::{
    candidate_count, false_pair_count, solve_pair_pose, wrap_angle, GeometryError,
};
use clap_localization::{mirror_match, pose_distance, BodyLandmark, LandmarkLabel, Pose2D, PoseMetric};
use clap_localization::field_map::MapLandmark;
use nalgebra::Vector2;
use proptest::prelude::*;

fn pose_strategy() -> impl Strategy<Value = Pose2D> {
    (-10.0..10.0f64, -10.0..10.0f64, -PI..PI).prop_map(|(x, y, t)| Pose2D::new(x, y, t))
}

fn point() -> impl Strategy<Value = Vector2<f64>> {
    (-12.0..12.0f64, -12.0..12.0f64).prop_map(|(x, y)| Vector2::new(x, y))
}

fn angle_gap(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// Every way of picking an unordered pair from labels, counting a same-label
/// pair twice (both world orderings).
fn brute_candidates(labels: &[u8]) -> u64 {
    let mut n = 0;
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            n += if labels[i] == labels[j] { 2 } else { 1 };
        }
    }
    n
}

/// Pairs among `l` items that touch at least one of the first `m`.
fn brute_false_pairs(l: u64, m: u64) -> u64 {
    let mut n = 0;
    for i in 0..l {
        for j in i + 1..l {
            if i < m || j < m {
                n += 1;
            }
        }
    }
    n
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn mirror_match_round_trip(truth in pose_strategy(), a in point(), b in point()) {
        prop_assume!((a - b).norm() > 1e-3);
        let wa = MapLandmark::new(0, LandmarkLabel::Tee, a.x, a.y);
        let wb = MapLandmark::new(1, LandmarkLabel::Corner, b.x, b.y);
        let ba = BodyLandmark { label: LandmarkLabel::Tee, position: truth.transform_world_to_body(&a) };
        let bb = BodyLandmark { label: LandmarkLabel::Corner, position: truth.transform_world_to_body(&b) };
        let got = mirror_match((&ba, &bb), (&wa, &wb)).unwrap();
        prop_assert!((got.x - truth.x).abs() < 1e-9);
        prop_assert!((got.y - truth.y).abs() < 1e-9);
        prop_assert!(angle_gap(got.theta, truth.theta) < 1e-9);
    }
}

proptest! {
    #[test]
    fn swapped_world_order_differs_by_half_turn(truth in pose_strategy(), a in point(), b in point()) {
        prop_assume!((a - b).norm() > 1e-2);
        let (ba, bb) = (truth.transform_world_to_body(&a), truth.transform_world_to_body(&b));
        let right = solve_pair_pose((&ba, &bb), (&a, &b)).unwrap();
        let flipped = solve_pair_pose((&ba, &bb), (&b, &a)).unwrap();
        prop_assert!((angle_gap(right.theta, flipped.theta) - PI).abs() < 1e-9);
        // The flipped solution maps the pair midpoint onto itself.
        let mid_body = (ba + bb) / 2.0;
        let mid = (a + b) / 2.0;
        prop_assert!((flipped.transform_body_to_world(&mid_body) - mid).norm() < 1e-8);
    }

    #[test]
    fn wrap_is_idempotent_and_in_range(t in -1e4..1e4f64) {
        let w = wrap_angle(t);
        prop_assert!(w > -PI && w <= PI);
        prop_assert_eq!(wrap_angle(w), w);
        let turns = (t - w) / (2.0 * PI);
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn compose_inverse_identity(a in pose_strategy(), b in pose_strategy()) {
        let back = a.compose(&a.delta_to(&b));
        prop_assert!(pose_distance(&back, &b, &PoseMetric::default()) < 1e-9);
    }

    #[test]
    fn metric_symmetric_and_triangle(a in pose_strategy(), b in pose_strategy(), c in pose_strategy()) {
        let m = PoseMetric::default();
        let ab = pose_distance(&a, &b, &m);
        prop_assert!((ab - pose_distance(&b, &a, &m)).abs() < 1e-12);
        prop_assert!(ab <= pose_distance(&a, &c, &m) + pose_distance(&c, &b, &m) + 1e-9);
    }

    #[test]
    fn world_body_round_trip(p in pose_strategy(), q in point()) {
        let back = p.transform_body_to_world(&p.transform_world_to_body(&q));
        prop_assert!((back - q).norm() < 1e-9);
    }
}

#[test]
fn degenerate_pairs_rejected() {
    let a = Vector2::new(1.0, 1.0);
    let b = a + Vector2::new(1e-7, 0.0);
    let far = Vector2::new(3.0, 0.0);
    assert!(matches!(
        solve_pair_pose((&a, &b), (&a, &far)),
        Err(GeometryError::DegeneratePair { .. })
    ));
    assert!(matches!(
        solve_pair_pose((&a, &far), (&a, &a)),
        Err(GeometryError::DegeneratePair { .. })
    ));
}

#[test]
fn candidate_count_matches_enumeration() {
    // d ranges over every feasible same-label pair count.
    for l in 0..=12u64 {
        let max_d = l * l.saturating_sub(1) / 2;
        for d in 0..=max_d {
            let expected = brute_candidates_for(l, d);
            assert_eq!(candidate_count(l, d).unwrap(), expected, "l={l} d={d}");
        }
        assert!(candidate_count(l, max_d + 1).is_err());
    }
    // Concrete label vectors: d is the number of same-label pairs.
    for labels in [vec![0u8, 1, 2, 3], vec![0, 0, 1], vec![2; 6], vec![0, 1, 0, 1, 2, 2, 3]] {
        let l = labels.len() as u64;
        let mut d = 0;
        for i in 0..labels.len() {
            for j in i + 1..labels.len() {
                d += u64::from(labels[i] == labels[j]);
            }
        }
        assert_eq!(candidate_count(l, d).unwrap(), brute_candidates(&labels));
    }
}

/// Enumerates the first `d` pairs as same-label and counts their orderings.
fn brute_candidates_for(l: u64, d: u64) -> u64 {
    let mut n = 0;
    let mut seen = 0;
    for i in 0..l {
        for _ in i + 1..l {
            n += if seen < d { 2 } else { 1 };
            seen += 1;
        }
    }
    n
}

#[test]
fn false_pair_count_matches_enumeration() {
    for l in 0..=12u64 {
        for m in 0..=l {
            assert_eq!(false_pair_count(l, m).unwrap(), brute_false_pairs(l, m), "l={l} m={m}");
        }
        assert!(false_pair_count(l, l + 1).is_err());
    }
}

#[test]
fn mirror_match_checks_label_order() {
    let w0 = MapLandmark::new(0, LandmarkLabel::Tee, 0.0, 4.5);
    let w1 = MapLandmark::new(1, LandmarkLabel::Corner, 7.0, 4.5);
    let b0 = BodyLandmark::new(LandmarkLabel::Corner, 1.0, 0.0);
    let b1 = BodyLandmark::new(LandmarkLabel::Tee, 2.0, 0.0);
    assert!(matches!(
        mirror_match((&b0, &b1), (&w0, &w1)),
        Err(GeometryError::LabelMismatch { .. })
    ));
}
