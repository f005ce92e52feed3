//! Acceptance report. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any enforced criterion fails. The symmetric-twin reset is
//! reported but not enforced: on a half-turn symmetric map the twin pose
//! sees exactly the same observations as the truth.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;

use clap_bench::experiment::{cell_frames, run_experiment, run_method, write_record_csv, ExperimentConfig, NoisePreset};
use clap_bench::pipeline::Method;
use clap_localization::estimator::generate_candidates;
use clap_localization::field_map::MatchTolerance;
use clap_localization::fusion::{Particle, Velocity2D};
use clap_localization::geometry::{candidate_count, circular_mean, false_pair_count};
use clap_localization::sim::{simulate, SensorSpec, Trajectory, TrajectoryKind, TrajectorySpec, NoiseProfile};
use clap_localization::{
    default_adult_field, load_field_map, mirror_match, pose_distance, wrap_angle, BodyLandmark, ClapEstimator,
    EstimateSource, EstimatorConfig, FieldMap, FilterConfig, LandmarkLabel, MapLandmark, ParticleFilter, Pose2D,
};
use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
    enforced: bool,
}

fn outcome(name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { name, pass, detail, enforced: true }
}

fn project(map: &FieldMap, pose: &Pose2D, ids: &[usize]) -> Vec<BodyLandmark> {
    ids.iter()
        .map(|&id| {
            let lm = map.landmark(id).unwrap();
            BodyLandmark { label: lm.label, position: pose.transform_world_to_body(&lm.position) }
        })
        .collect()
}

fn box_accuracy() -> Outcome {
    let traj = TrajectorySpec::preset(TrajectoryKind::Box).with_laps(3);
    let mut cfg = ExperimentConfig::new(traj, NoisePreset::Uniform);
    cfg.seeds = (0..5).collect();
    let runs: Vec<_> = run_experiment(&cfg)
        .unwrap()
        .into_iter()
        .map(|o| o.result.unwrap().remove(0).report.accuracy)
        .collect();
    let n = runs.len() as f64;
    let pos = runs.iter().map(|a| a.position_mae).sum::<f64>() / n;
    let ori = runs.iter().map(|a| a.orientation_mae_deg.to_radians()).sum::<f64>() / n;
    outcome(
        "box-accuracy",
        pos <= 0.25 && ori <= 0.06,
        format!("position MAE {pos:.4} m (limit 0.25), orientation MAE {ori:.4} rad (limit 0.06), 3 laps x 5 seeds"),
    )
}

fn unique_label_map(rng: &mut ChaCha8Rng) -> FieldMap {
    loop {
        let pts: Vec<(f64, f64)> = (0..4).map(|_| (rng.gen_range(-7.0..7.0), rng.gen_range(-4.5..4.5))).collect();
        let spread = (0..4).all(|i| (i + 1..4).all(|j| (pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1) >= 0.5));
        if spread {
            let text: String = LandmarkLabel::ALL.iter().zip(&pts).map(|(l, (x, y))| format!("{l} {x} {y}\n")).collect();
            return load_field_map(&text).unwrap();
        }
    }
}

fn noiseless_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let traj = Trajectory::new(&TrajectorySpec::preset(TrajectoryKind::Box)).unwrap();
    let (mut checked, mut worst) = (0usize, 0.0f64);
    let mut pass = true;
    for trial in 0..10 {
        let map = Arc::new(unique_label_map(&mut rng));
        for sensor in [SensorSpec::omniscient(50.0), SensorSpec { frame_rate: 50.0, ..SensorSpec::default() }] {
            let frames = simulate(&map, &traj, &sensor, &NoiseProfile::noiseless(), trial).unwrap();
            let mut est = ClapEstimator::new(map.clone(), EstimatorConfig::default(), frames[0].gt).unwrap();
            for f in &frames {
                let out = est.step(&f.observations, &f.odometry_delta);
                if f.observations.len() < 2 {
                    continue;
                }
                checked += 1;
                let err = (out.pose.x - f.gt.x)
                    .abs()
                    .max((out.pose.y - f.gt.y).abs())
                    .max(wrap_angle(out.pose.theta - f.gt.theta).abs());
                worst = worst.max(err);
                pass &= err <= 1e-6;
            }
        }
    }
    outcome(
        "noiseless-exactness",
        pass && checked > 0,
        format!("{checked} frames with >= 2 observations, worst error {worst:.2e} (limit 1e-6)"),
    )
}

fn combinatorics() -> Outcome {
    let mut failures = Vec::new();
    for l in 0..=12usize {
        // Every label multiset of size l over the four labels.
        for a in 0..=l {
            for b in 0..=l - a {
                for c in 0..=l - a - b {
                    let counts = [a, b, c, l - a - b - c];
                    let labels: Vec<usize> = (0..4).flat_map(|k| std::iter::repeat_n(k, counts[k])).collect();
                    let (mut same, mut total) = (0u64, 0u64);
                    for i in 0..l {
                        for j in i + 1..l {
                            let s = labels[i] == labels[j];
                            same += s as u64;
                            total += if s { 2 } else { 1 };
                        }
                    }
                    if candidate_count(l as u64, same).ok() != Some(total) {
                        failures.push(format!("candidate_count({l},{same})"));
                    }
                }
            }
        }
        let pairs = (l * l.saturating_sub(1) / 2) as u64;
        if candidate_count(l as u64, pairs + 1).is_ok() {
            failures.push(format!("candidate_count({l},{}) accepted", pairs + 1));
        }
        for m in 0..=l {
            let brute = (0..l).flat_map(|i| (i + 1..l).map(move |j| (i, j))).filter(|&(i, j)| i < m || j < m).count();
            if false_pair_count(l as u64, m as u64).ok() != Some(brute as u64) {
                failures.push(format!("false_pair_count({l},{m})"));
            }
        }
        if false_pair_count(l as u64, l as u64 + 1).is_ok() {
            failures.push(format!("false_pair_count({l},{}) accepted", l + 1));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut scenes = 0;
    for _ in 0..50 {
        let map = unique_label_map(&mut rng);
        let truth = Pose2D::new(rng.gen_range(-5.0..5.0), rng.gen_range(-3.0..3.0), rng.gen_range(-PI..PI));
        for l in 2..=4usize {
            let ids: Vec<usize> = (0..l).collect();
            let n = generate_candidates(&project(&map, &truth, &ids), &map, &EstimatorConfig::default(), 0).len();
            scenes += 1;
            if n as u64 != candidate_count(l as u64, 0).unwrap() {
                failures.push(format!("unique scene l={l}: {n} candidates"));
            }
        }
    }
    // One repeated label: the L-L pair has a single map counterpart.
    let map = load_field_map("L 0 0\nT 3 0.5\nX -1 2.2\nL 1.7 -2.9\nG 4 3\n").unwrap();
    let cfg = EstimatorConfig {
        min_unique_pairs_to_skip_nonunique: usize::MAX,
        tolerance: MatchTolerance::Fixed(0.01),
        ..EstimatorConfig::default()
    };
    let truth = Pose2D::new(0.4, 0.3, 0.2);
    for (ids, l, d) in [(&[0, 1, 2, 3][..], 4, 1), (&[0, 1, 2, 3, 4][..], 5, 1), (&[0, 3][..], 2, 1)] {
        let n = generate_candidates(&project(&map, &truth, ids), &map, &cfg, 0).len();
        scenes += 1;
        if n as u64 != candidate_count(l, d).unwrap() {
            failures.push(format!("repeated-label scene {ids:?}: {n} candidates"));
        }
    }
    outcome(
        "combinatorics",
        failures.is_empty(),
        if failures.is_empty() {
            format!("all l <= 12 enumerations and {scenes} constructed scenes agree")
        } else {
            failures.join("; ")
        },
    )
}

fn robustness() -> Outcome {
    let mut cfg = ExperimentConfig::new(TrajectorySpec::preset(TrajectoryKind::Zigzag), NoisePreset::Banded);
    cfg.methods = vec![Method::Clap, Method::Mcl, Method::Icp];
    cfg.outlier_ratios = vec![0.2, 0.6, 1.2];
    cfg.seeds = (0..5).collect();
    let outcomes = run_experiment(&cfg).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for &ratio in &cfg.outlier_ratios {
        let cells: Vec<_> = outcomes
            .iter()
            .filter(|o| o.outlier_ratio == ratio)
            .map(|o| o.result.as_ref().unwrap())
            .collect();
        let pick = |m: Method| -> Vec<_> {
            cells.iter().map(|runs| runs.iter().find(|r| r.method == m).unwrap().report.clone()).collect()
        };
        let (clap, mcl, icp) = (pick(Method::Clap), pick(Method::Mcl), pick(Method::Icp));
        let ordered = clap.iter().zip(&mcl).filter(|(c, m)| c.jumps <= m.jumps).count();
        let mean = |r: &[clap_bench::MetricsReport]| r.iter().map(|x| x.diverged_fraction).sum::<f64>() / r.len() as f64;
        let (clap_div, icp_div) = (mean(&clap), mean(&icp));
        pass &= ordered == clap.len() && clap_div <= 0.10 && (ratio < 0.4 || icp_div >= 0.5);
        let jumps = |r: &[clap_bench::MetricsReport]| r.iter().map(|x| x.jumps.to_string()).collect::<Vec<_>>().join("/");
        parts.push(format!(
            "ratio {ratio:.1}: jumps clap {} vs mcl {} ({ordered}/{} ordered), diverged clap {clap_div:.3} icp {icp_div:.3}",
            jumps(&clap),
            jumps(&mcl),
            clap.len()
        ));
    }
    outcome("robustness-ordering", pass, parts.join("; "))
}

/// Teleport prev onto the field twin of the truth and watch for a reset.
fn symmetry_reset() -> Vec<Outcome> {
    let map = Arc::new(default_adult_field());
    let all: Vec<usize> = (0..map.len()).collect();
    let cfg = EstimatorConfig { global_every: 1, ..EstimatorConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut twin_ok, mut twin_resets, mut offset_ok) = (0, 0, 0);
    let seeds = 20;
    for _ in 0..seeds {
        let truth = Pose2D::new(rng.gen_range(-6.0..6.0), rng.gen_range(-4.0..4.0), rng.gen_range(-PI..PI));
        let obs = project(&map, &truth, &all);
        let phi = rng.gen_range(-PI..PI);
        let offset = Pose2D::new(truth.x + 2.5 * phi.cos(), truth.y + 2.5 * phi.sin(), truth.theta);
        for (prior, twin) in [(truth.symmetric_twin(), true), (offset, false)] {
            let mut est = ClapEstimator::new(map.clone(), cfg.clone(), truth).unwrap();
            for _ in 0..cfg.buffer_frames {
                est.step(&obs, &Pose2D::identity());
            }
            est.set_pose(prior);
            let mut reset = false;
            let mut back = false;
            for _ in 0..cfg.buffer_frames {
                let out = est.step(&obs, &Pose2D::identity());
                reset |= out.source == EstimateSource::GlobalReset;
                back = pose_distance(&out.pose, &truth, &cfg.metric) < cfg.delta_t;
                if reset && back {
                    break;
                }
            }
            match (twin, reset && back) {
                (true, ok) => {
                    twin_ok += ok as usize;
                    twin_resets += reset as usize;
                }
                (false, ok) => offset_ok += ok as usize,
            }
        }
    }
    vec![
        Outcome {
            name: "symmetry-reset",
            pass: twin_ok == seeds,
            detail: format!(
                "{twin_ok}/{seeds} recovered, {twin_resets} resets; the twin observes the same scene as the truth, so no \
                 estimator can tell them apart on this map (not enforced)"
            ),
            enforced: false,
        },
        outcome(
            "displaced-reset",
            offset_ok == seeds,
            format!("{offset_ok}/{seeds} recovered from a 2.5 m displaced prior within {} frames", cfg.buffer_frames),
        ),
    ]
}

fn throughput() -> Outcome {
    let spec = TrajectorySpec::preset(TrajectoryKind::Box);
    let lap_frames = Trajectory::new(&spec).unwrap().duration() * 50.0;
    let laps = (10_000.0 / lap_frames).ceil() as usize + 1;
    let mut cfg = ExperimentConfig::new(spec.with_laps(laps), NoisePreset::Banded);
    cfg.sensor = SensorSpec { fov: 2.0 * PI, max_range: 10.0, max_landmarks: 7, frame_rate: 50.0 };
    cfg.max_frames = Some(10_000);
    cfg.timing = true;
    let frames = cell_frames(&cfg, 0, 1.2).unwrap();
    let seven = frames.iter().filter(|f| f.inliers == 7 && f.observations.len() == 15).count();
    let record = run_method(&cfg, Method::Clap, &frames, 0).unwrap();
    let n = record.rows.len() as f64;
    let mean = record.rows.iter().map(|r| r.frame_time_s).sum::<f64>() / n;
    let max = record.rows.iter().map(|r| r.frame_time_s).fold(0.0, f64::max);
    outcome(
        "throughput",
        mean < 4e-3 && record.rows.len() == 10_000 && seven == frames.len(),
        format!(
            "mean step {:.3} ms (limit 4), max {:.3} ms over {} frames, {seven} with 7 landmarks + 8 outliers",
            mean * 1e3,
            max * 1e3,
            record.rows.len()
        ),
    )
}

fn mirror_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut cases, mut worst) = (0, 0.0f64);
    while cases < 10_000 {
        let truth = Pose2D::new(rng.gen_range(-8.0..8.0), rng.gen_range(-6.0..6.0), rng.gen_range(-PI..PI));
        let w1 = Vector2::new(rng.gen_range(-8.0..8.0), rng.gen_range(-6.0..6.0));
        let w2 = Vector2::new(rng.gen_range(-8.0..8.0), rng.gen_range(-6.0..6.0));
        if (w1 - w2).norm() < 0.1 {
            continue;
        }
        let (la, lb) = (LandmarkLabel::ALL[rng.gen_range(0..4)], LandmarkLabel::ALL[rng.gen_range(0..4)]);
        let world = (MapLandmark::new(0, la, w1.x, w1.y), MapLandmark::new(1, lb, w2.x, w2.y));
        let body = (
            BodyLandmark { label: la, position: truth.transform_world_to_body(&w1) },
            BodyLandmark { label: lb, position: truth.transform_world_to_body(&w2) },
        );
        let got = mirror_match((&body.0, &body.1), (&world.0, &world.1)).unwrap();
        let err = (got.x - truth.x)
            .abs()
            .max((got.y - truth.y).abs())
            .max(wrap_angle(got.theta - truth.theta).abs());
        worst = worst.max(err);
        cases += 1;
    }
    outcome(
        "mirror-round-trip",
        worst <= 1e-9,
        format!("{cases} cases, worst error {worst:.2e} (limit 1e-9)"),
    )
}

fn filter_contracts() -> Outcome {
    let quiet = FilterConfig { process_noise_xy: 0.0, process_noise_theta: 0.0, ..FilterConfig::default() };
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(17);

    for n in [1, 7, 300, 1000] {
        let cfg = FilterConfig { particle_count: n, ..FilterConfig::default() };
        let mut pf = ParticleFilter::around(cfg, Pose2D::new(1.0, -1.0, 2.0), 2.0, 1.0, &mut rng).unwrap();
        for _ in 0..20 {
            pf.predict(&Velocity2D::new(0.3, 0.0, 0.1), 0.02, &mut rng);
            let rep = pf.update(&Pose2D::new(1.5, -0.5, 2.2), &mut rng);
            let sum: f64 = pf.particles().iter().map(|p| p.weight).sum();
            if (sum - 1.0).abs() > 1e-9 || pf.len() != n || !(rep.ess > 0.0 && rep.ess <= n as f64 + 1e-9) {
                failures.push(format!("update n={n}: sum {sum}, len {}, ess {}", pf.len(), rep.ess));
                break;
            }
            pf.resample(&mut rng);
            if pf.len() != n {
                failures.push(format!("resample n={n}: len {}", pf.len()));
                break;
            }
        }
    }

    let n = 1000;
    let poses: Vec<Pose2D> = (0..n).map(|i| Pose2D::new(i as f64 * 0.01, 0.0, 0.0)).collect();
    let mut weights = vec![0.0; n];
    weights[..3].copy_from_slice(&[0.5, 0.25, 0.25]);
    let sigma = [0.5f64, 0.25, 0.25].map(|p| (n as f64 * p * (1.0 - p)).sqrt());
    for seed in 0..50 {
        let particles = poses.iter().zip(&weights).map(|(&pose, &weight)| Particle { pose, weight }).collect();
        let mut pf = ParticleFilter::from_particles(quiet.clone(), particles).unwrap();
        pf.resample(&mut ChaCha8Rng::seed_from_u64(seed));
        let copies: Vec<usize> = poses[..3].iter().map(|p| pf.particles().iter().filter(|q| q.pose == *p).count()).collect();
        let within = (0..3).all(|k| (copies[k] as f64 - n as f64 * weights[k]).abs() <= 3.0 * sigma[k]);
        if !within || copies.iter().sum::<usize>() != n {
            failures.push(format!("multiplicity seed {seed}: {copies:?}"));
        }
    }

    let seam = ParticleFilter::from_poses(quiet.clone(), vec![Pose2D::new(0.0, 0.0, PI - 0.1), Pose2D::new(0.0, 0.0, -PI + 0.1)])
        .unwrap();
    if wrap_angle(seam.estimate().theta - PI).abs() > 1e-12 {
        failures.push(format!("seam mean {}", seam.estimate().theta));
    }
    let pair = vec![
        Particle { pose: Pose2D::new(0.0, 0.0, 0.0), weight: 0.9 },
        Particle { pose: Pose2D::new(1.0, 0.0, 0.0), weight: 0.1 },
    ];
    if (ParticleFilter::from_particles(quiet, pair).unwrap().estimate().x - 0.1).abs() > 1e-12 {
        failures.push("weighted mean".into());
    }
    for _ in 0..1000 {
        let base: Vec<f64> = (0..rng.gen_range(1..20)).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let shift = rng.gen_range(-PI..PI);
        let a = circular_mean(base.iter().map(|&t| (t, 1.0)));
        let b = circular_mean(base.iter().map(|&t| (t + shift, 1.0)));
        if wrap_angle(b - a - shift).abs() > 1e-9 {
            failures.push(format!("circular mean shift {shift}"));
            break;
        }
    }
    outcome(
        "filter-contracts",
        failures.is_empty(),
        if failures.is_empty() {
            "normalization, count, resampling multiplicity and circular mean hold".into()
        } else {
            failures.join("; ")
        },
    )
}

fn determinism() -> Outcome {
    let mut cfg = ExperimentConfig::new(TrajectorySpec::preset(TrajectoryKind::Zigzag), NoisePreset::Banded);
    cfg.methods = Method::ALL.to_vec();
    cfg.outlier_ratios = vec![0.6];
    cfg.seeds = vec![2, 9];
    let bytes = |outcomes: Vec<clap_bench::experiment::CellOutcome>| -> Vec<Vec<u8>> {
        outcomes
            .into_iter()
            .flat_map(|o| o.result.unwrap())
            .map(|run| {
                let mut buf = Vec::new();
                write_record_csv(&mut buf, &run.record).unwrap();
                buf
            })
            .collect()
    };
    let first = bytes(run_experiment(&cfg).unwrap());
    let second = bytes(run_experiment(&cfg).unwrap());
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let serial = bytes(pool.install(|| run_experiment(&cfg).unwrap()));
    let size: usize = first.iter().map(Vec::len).sum();
    outcome(
        "determinism",
        first == second && first == serial,
        format!("{} cell CSVs, {size} bytes, identical across reruns and thread counts", first.len()),
    )
}

fn main() -> ExitCode {
    // Timing first, before the heavy runs warm the machine.
    let mut results = vec![throughput()];
    results.extend([box_accuracy(), noiseless_exactness(), combinatorics(), robustness()]);
    results.extend(symmetry_reset());
    results.extend([mirror_round_trip(), filter_contracts(), determinism()]);

    let mut failed = 0;
    for r in &results {
        println!("{} {:<20} {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
        failed += (!r.pass && r.enforced) as usize;
    }
    println!("{} criteria, {} passed, {failed} enforced failures", results.len(), results.iter().filter(|r| r.pass).count());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
