use std::fs;
use std::path::Path;

use clap_bench::experiment::{
    cell_frames, load_cells, run_experiment, write_outputs, CellOutcome, ExperimentConfig, ExperimentError,
    NoisePreset, SummaryRow,
};
use clap_bench::metrics::{count_velocity_jumps, divergence_fraction, MetricsReport};
use clap_bench::pipeline::Method;
use clap_localization::sim::{TrajectoryKind, TrajectorySpec};

fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(TrajectorySpec::preset(TrajectoryKind::Zigzag), NoisePreset::Banded);
    cfg.methods = Method::ALL.to_vec();
    cfg.outlier_ratios = vec![0.2, 1.2];
    cfg.seeds = vec![3, 4];
    cfg.max_frames = Some(300);
    cfg
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir.join("cells"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.push(dir.join("summary.csv"));
    files.sort();
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let cfg = small_config();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_outputs(a.path(), &run_experiment(&cfg).unwrap()).unwrap();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let outcomes = single.install(|| run_experiment(&cfg).unwrap());
    write_outputs(b.path(), &outcomes).unwrap();
    let (fa, fb) = (dir_bytes(a.path()), dir_bytes(b.path()));
    assert_eq!(fa.len(), 4 * 2 * 2 + 1);
    assert_eq!(fa, fb);
}

#[test]
fn frames_depend_only_on_seed_and_ratio() {
    let cfg = small_config();
    let x = cell_frames(&cfg, 3, 0.2).unwrap();
    let y = cell_frames(&cfg, 3, 0.2).unwrap();
    let z = cell_frames(&cfg, 4, 0.2).unwrap();
    assert_eq!(format!("{x:?}"), format!("{y:?}"));
    assert_ne!(format!("{x:?}"), format!("{z:?}"));
}

#[test]
fn csv_flags_and_summary_match_recomputation() {
    let cfg = small_config();
    let dir = tempfile::tempdir().unwrap();
    let (summary, failures) = write_outputs(dir.path(), &run_experiment(&cfg).unwrap()).unwrap();
    assert!(failures.is_empty());

    let mut rdr = csv::Reader::from_path(dir.path().join("summary.csv")).unwrap();
    let on_disk: Vec<SummaryRow> = rdr.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(on_disk, summary);

    for (method, ratio, seed, rec) in load_cells(dir.path()).unwrap() {
        assert_eq!(rec.method, method.as_str());
        assert_eq!(rec.rows.len(), 300);
        let mut fresh = rec.clone();
        fresh.annotate(&cfg.jumps, &cfg.divergence);
        assert!(rec.rows.iter().zip(&fresh.rows).all(|(a, b)| a.jump == b.jump && a.diverged == b.diverged));
        assert_eq!(rec.rows.iter().filter(|r| r.jump).count(), count_velocity_jumps(&rec, &cfg.jumps));
        let frac = rec.rows.iter().filter(|r| r.diverged).count() as f64 / rec.rows.len() as f64;
        assert_eq!(frac, divergence_fraction(&rec, &cfg.divergence));

        let report = MetricsReport::compute(&rec, &cfg.jumps, &cfg.divergence).unwrap();
        let row = summary
            .iter()
            .find(|s| s.method == rec.method && s.outlier_ratio == ratio && s.seed == seed)
            .unwrap();
        assert_eq!(*row, SummaryRow::new(&report, ratio, seed, rec.rows.len()));
    }
}

#[test]
fn failed_cells_do_not_block_others() {
    let mut cfg = small_config();
    cfg.outlier_ratios = vec![0.2];
    cfg.seeds = vec![1];
    let mut outcomes = run_experiment(&cfg).unwrap();
    outcomes.push(CellOutcome {
        seed: 2,
        outlier_ratio: 0.2,
        result: Err(ExperimentError::Invalid("synthetic".into())),
    });
    let dir = tempfile::tempdir().unwrap();
    let (summary, failures) = write_outputs(dir.path(), &outcomes).unwrap();
    assert_eq!(summary.len(), 4);
    assert_eq!(failures.len(), 1);
    assert!(failures[0].contains("seed 2"));
}

#[test]
fn timing_fills_latency_column() {
    let mut cfg = small_config();
    cfg.methods = vec![Method::Clap];
    cfg.outlier_ratios = vec![0.6];
    cfg.seeds = vec![0];
    cfg.max_frames = Some(50);
    cfg.timing = true;
    let outcomes = run_experiment(&cfg).unwrap();
    let run = &outcomes[0].result.as_ref().unwrap()[0];
    assert!(run.record.rows.iter().all(|r| r.frame_time_s > 0.0));
    assert!(run.report.latency.p99 >= run.report.latency.p50);
}
