//! Experiment cells, CSV output and summaries.
//!
//! A cell is one (seed, outlier ratio) pair. Its frames are simulated once
//! and fed to every method, so methods within a cell see identical input.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use clap_localization::field_map::MatchTolerance;
use clap_localization::sim::{simulate, NoiseProfile, SensorSpec, SimError, SimFrame, Trajectory, TrajectorySpec};
use clap_localization::{default_adult_field, FieldMap, Pose2D};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::{DivergenceSpec, FrameRow, JumpSpec, MetricsError, MetricsReport, RunRecord};
use crate::pipeline::{make_localizer, Method, MethodConfigs, PipelineError};

pub const CSV_HEADER: &str =
    "t,gt_x,gt_y,gt_theta,est_x,est_y,est_theta,method,n_candidates,jump,diverged,frame_time_s";

/// Frame rate used by experiments: a whole number of 10 ms odometry steps.
pub const EXPERIMENT_FRAME_RATE: f64 = 50.0;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        source: csv::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoisePreset {
    /// ±0.5 m flat landmark noise.
    Uniform,
    /// Distance-banded perception noise.
    Banded,
}

impl NoisePreset {
    pub fn profile(&self, outlier_ratio: f64) -> NoiseProfile {
        match self {
            NoisePreset::Uniform => NoiseProfile::uniform(),
            NoisePreset::Banded => NoiseProfile::banded(),
        }
        .with_outlier_ratio(outlier_ratio)
    }

    /// Pair-distance slack suited to the preset's noise level.
    pub fn tolerance(&self) -> MatchTolerance {
        match self {
            NoisePreset::Uniform => MatchTolerance::Fixed(1.0),
            NoisePreset::Banded => MatchTolerance::default(),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            NoisePreset::Uniform => "uniform",
            NoisePreset::Banded => "banded",
        }
    }
}

impl FromStr for NoisePreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(NoisePreset::Uniform),
            "banded" => Ok(NoisePreset::Banded),
            other => Err(format!("unknown noise preset {other:?}; expected uniform or banded")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub map: Arc<FieldMap>,
    pub trajectory: TrajectorySpec,
    pub sensor: SensorSpec,
    pub noise: NoisePreset,
    pub methods: Vec<Method>,
    pub outlier_ratios: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Truncate each run to this many frames.
    pub max_frames: Option<usize>,
    pub configs: MethodConfigs,
    pub jumps: JumpSpec,
    pub divergence: DivergenceSpec,
    /// Record wall-clock step latency. Off keeps CSV output reproducible.
    pub timing: bool,
}

impl ExperimentConfig {
    /// Defaults for the given route and noise preset: shipped map, one seed,
    /// no outliers, CLAP only.
    pub fn new(trajectory: TrajectorySpec, noise: NoisePreset) -> Self {
        let mut configs = MethodConfigs::default();
        configs.estimator.tolerance = noise.tolerance();
        Self {
            map: Arc::new(default_adult_field()),
            trajectory,
            sensor: SensorSpec {
                frame_rate: EXPERIMENT_FRAME_RATE,
                ..SensorSpec::default()
            },
            noise,
            methods: vec![Method::Clap],
            outlier_ratios: vec![0.0],
            seeds: vec![0],
            max_frames: None,
            configs,
            jumps: JumpSpec::default(),
            divergence: DivergenceSpec::default(),
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Invalid(m));
        if self.methods.is_empty() {
            return bad("no methods".into());
        }
        if self.seeds.is_empty() {
            return bad("no seeds".into());
        }
        if self.outlier_ratios.is_empty() {
            return bad("no outlier ratios".into());
        }
        if let Some(r) = self.outlier_ratios.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
            return bad(format!("outlier ratio {r} must be a finite value >= 0"));
        }
        if self.max_frames == Some(0) {
            return bad("frame limit must be >= 1".into());
        }
        self.sensor.validate()?;
        self.jumps.validate()?;
        self.divergence.validate()?;
        self.configs
            .estimator
            .validate()
            .map_err(|e| ExperimentError::Invalid(e.to_string()))?;
        self.configs
            .filter
            .validate()
            .map_err(|e| ExperimentError::Invalid(e.to_string()))?;
        self.configs.mcl.validate().map_err(ExperimentError::Invalid)?;
        Ok(())
    }
}

/// Frames for one cell.
pub fn cell_frames(cfg: &ExperimentConfig, seed: u64, ratio: f64) -> Result<Vec<SimFrame>, ExperimentError> {
    let traj = Trajectory::new(&cfg.trajectory)?;
    let mut frames = simulate(&cfg.map, &traj, &cfg.sensor, &cfg.noise.profile(ratio), seed)?;
    if let Some(n) = cfg.max_frames {
        frames.truncate(n);
    }
    Ok(frames)
}

/// Run one method over prepared frames, starting from the first frame's
/// ground truth.
pub fn run_method(
    cfg: &ExperimentConfig,
    method: Method,
    frames: &[SimFrame],
    seed: u64,
) -> Result<RunRecord, ExperimentError> {
    let start = frames.first().map_or(Pose2D::identity(), |f| f.gt);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(method.stream());
    let mut localizer = make_localizer(method, cfg.map.clone(), &cfg.configs, start, rng)?;
    let mut record = RunRecord::new(method.as_str());
    record.rows.reserve(frames.len());
    let mut last_t = None;
    for frame in frames {
        let dt = last_t.map_or(0.0, |t| frame.t - t);
        last_t = Some(frame.t);
        let (out, elapsed) = if cfg.timing {
            let t0 = Instant::now();
            let out = localizer.step(frame, dt);
            (out, t0.elapsed().as_secs_f64())
        } else {
            (localizer.step(frame, dt), 0.0)
        };
        record.rows.push(FrameRow {
            t: frame.t,
            gt: frame.gt,
            est: out.pose,
            n_candidates: out.n_candidates,
            jump: false,
            diverged: false,
            frame_time_s: elapsed,
        });
    }
    record.annotate(&cfg.jumps, &cfg.divergence);
    Ok(record)
}

#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: Method,
    pub record: RunRecord,
    pub report: MetricsReport,
}

#[derive(Debug)]
pub struct CellOutcome {
    pub seed: u64,
    pub outlier_ratio: f64,
    /// Failures stay confined to their cell.
    pub result: Result<Vec<MethodRun>, ExperimentError>,
}

pub fn run_cell(cfg: &ExperimentConfig, seed: u64, ratio: f64) -> Result<Vec<MethodRun>, ExperimentError> {
    let frames = cell_frames(cfg, seed, ratio)?;
    cfg.methods
        .iter()
        .map(|&method| {
            let record = run_method(cfg, method, &frames, seed)?;
            let report = MetricsReport::compute(&record, &cfg.jumps, &cfg.divergence)?;
            Ok(MethodRun { method, record, report })
        })
        .collect()
}

/// Every (seed, ratio) cell, in ratio-major order, run in parallel.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<CellOutcome>, ExperimentError> {
    cfg.validate()?;
    let cells: Vec<(f64, u64)> = cfg
        .outlier_ratios
        .iter()
        .flat_map(|&r| cfg.seeds.iter().map(move |&s| (r, s)))
        .collect();
    Ok(cells
        .par_iter()
        .map(|&(outlier_ratio, seed)| CellOutcome {
            seed,
            outlier_ratio,
            result: run_cell(cfg, seed, outlier_ratio),
        })
        .collect())
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    t: f64,
    gt_x: f64,
    gt_y: f64,
    gt_theta: f64,
    est_x: f64,
    est_y: f64,
    est_theta: f64,
    method: String,
    n_candidates: usize,
    jump: bool,
    diverged: bool,
    frame_time_s: f64,
}

pub fn write_record_csv<W: Write>(writer: W, record: &RunRecord) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    for r in &record.rows {
        w.serialize(CsvRow {
            t: r.t,
            gt_x: r.gt.x,
            gt_y: r.gt.y,
            gt_theta: r.gt.theta,
            est_x: r.est.x,
            est_y: r.est.y,
            est_theta: r.est.theta,
            method: record.method.clone(),
            n_candidates: r.n_candidates,
            jump: r.jump,
            diverged: r.diverged,
            frame_time_s: r.frame_time_s,
        })?;
    }
    if record.rows.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_record_csv<R: Read>(reader: R) -> Result<RunRecord, csv::Error> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut record = RunRecord::new(String::new());
    for row in rdr.deserialize() {
        let row: CsvRow = row?;
        if record.method.is_empty() {
            record.method = row.method.clone();
        }
        record.rows.push(FrameRow {
            t: row.t,
            gt: Pose2D::new(row.gt_x, row.gt_y, row.gt_theta),
            est: Pose2D::new(row.est_x, row.est_y, row.est_theta),
            n_candidates: row.n_candidates,
            jump: row.jump,
            diverged: row.diverged,
            frame_time_s: row.frame_time_s,
        });
    }
    Ok(record)
}

pub fn cell_file_name(method: Method, ratio: f64, seed: u64) -> String {
    format!("{}_ratio{:.2}_seed{}.csv", method.as_str(), ratio, seed)
}

/// Inverse of [`cell_file_name`].
pub fn parse_cell_file_name(name: &str) -> Option<(Method, f64, u64)> {
    let stem = name.strip_suffix(".csv")?;
    let (rest, seed) = stem.rsplit_once("_seed")?;
    let (method, ratio) = rest.rsplit_once("_ratio")?;
    Some((method.parse().ok()?, ratio.parse().ok()?, seed.parse().ok()?))
}

#[derive(Debug, Serialize, Deserialize, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub outlier_ratio: f64,
    pub seed: u64,
    pub frames: usize,
    pub position_mae_m: f64,
    pub position_std_m: f64,
    pub orientation_mae_deg: f64,
    pub orientation_std_deg: f64,
    pub jumps: usize,
    pub diverged_fraction: f64,
    pub divergence_rule: String,
    pub latency_mean_s: f64,
    pub latency_max_s: f64,
    pub latency_p50_s: f64,
    pub latency_p99_s: f64,
}

impl SummaryRow {
    pub fn new(report: &MetricsReport, ratio: f64, seed: u64, frames: usize) -> Self {
        Self {
            method: report.method.clone(),
            outlier_ratio: ratio,
            seed,
            frames,
            position_mae_m: report.accuracy.position_mae,
            position_std_m: report.accuracy.position_std,
            orientation_mae_deg: report.accuracy.orientation_mae_deg,
            orientation_std_deg: report.accuracy.orientation_std_deg,
            jumps: report.jumps,
            diverged_fraction: report.diverged_fraction,
            divergence_rule: report.divergence_rule.to_string(),
            latency_mean_s: report.latency.mean,
            latency_max_s: report.latency.max,
            latency_p50_s: report.latency.p50,
            latency_p99_s: report.latency.p99,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Write `cells/<method>_ratio<r>_seed<s>.csv` for every successful run and
/// `summary.csv` over them. Returns the summary rows and the failed cells.
pub fn write_outputs(
    out_dir: &Path,
    outcomes: &[CellOutcome],
) -> Result<(Vec<SummaryRow>, Vec<String>), ExperimentError> {
    let cells = out_dir.join("cells");
    fs::create_dir_all(&cells).map_err(io_err(&cells))?;
    let mut summary = Vec::new();
    let mut failures = Vec::new();
    for cell in outcomes {
        match &cell.result {
            Ok(runs) => {
                for run in runs {
                    let path = cells.join(cell_file_name(run.method, cell.outlier_ratio, cell.seed));
                    let file = fs::File::create(&path).map_err(io_err(&path))?;
                    write_record_csv(std::io::BufWriter::new(file), &run.record).map_err(csv_err(&path))?;
                    summary.push(SummaryRow::new(
                        &run.report,
                        cell.outlier_ratio,
                        cell.seed,
                        run.record.rows.len(),
                    ));
                }
            }
            Err(e) => failures.push(format!(
                "ratio {:.2} seed {}: {e}",
                cell.outlier_ratio, cell.seed
            )),
        }
    }
    write_summary(&out_dir.join("summary.csv"), &summary)?;
    Ok((summary, failures))
}

/// Load every cell CSV under `dir` (or `dir/cells`), sorted by file name.
pub fn load_cells(dir: &Path) -> Result<Vec<(Method, f64, u64, RunRecord)>, ExperimentError> {
    let cells = if dir.join("cells").is_dir() {
        dir.join("cells")
    } else {
        dir.to_path_buf()
    };
    let mut names: Vec<String> = fs::read_dir(&cells)
        .map_err(io_err(&cells))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| parse_cell_file_name(n).is_some())
        .collect();
    names.sort();
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let (method, ratio, seed) = parse_cell_file_name(&name).expect("filtered above");
        let path = cells.join(&name);
        let file = fs::File::open(&path).map_err(io_err(&path))?;
        let record = read_record_csv(std::io::BufReader::new(file)).map_err(csv_err(&path))?;
        out.push((method, ratio, seed, record));
    }
    Ok(out)
}

/// Mean of each summary column over seeds, per (method, ratio).
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub method: String,
    pub outlier_ratio: f64,
    pub seeds: usize,
    pub position_mae_m: f64,
    pub orientation_mae_deg: f64,
    pub jumps: f64,
    pub diverged_fraction: f64,
    pub latency_mean_s: f64,
}

pub fn aggregate(rows: &[SummaryRow]) -> Vec<AggregateRow> {
    let mut keys: Vec<(String, f64)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|(m, q)| *m == r.method && *q == r.outlier_ratio) {
            keys.push((r.method.clone(), r.outlier_ratio));
        }
    }
    keys.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    keys.into_iter()
        .map(|(method, ratio)| {
            let group: Vec<&SummaryRow> = rows
                .iter()
                .filter(|r| r.method == method && r.outlier_ratio == ratio)
                .collect();
            let n = group.len() as f64;
            let mean = |f: fn(&SummaryRow) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / n;
            AggregateRow {
                method,
                outlier_ratio: ratio,
                seeds: group.len(),
                position_mae_m: mean(|r| r.position_mae_m),
                orientation_mae_deg: mean(|r| r.orientation_mae_deg),
                jumps: mean(|r| r.jumps as f64),
                diverged_fraction: mean(|r| r.diverged_fraction),
                latency_mean_s: mean(|r| r.latency_mean_s),
            }
        })
        .collect()
}

/// Fixed-width text table of aggregates.
pub fn format_table(rows: &[AggregateRow], divergence_rule: &str) -> String {
    let mut s = format!(
        "{:<9} {:>6} {:>5} {:>10} {:>11} {:>8} {:>10} {:>11}\n",
        "method", "ratio", "seeds", "pos_mae_m", "ori_mae_deg", "jumps", format!("div({divergence_rule})"), "latency_ms"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<9} {:>6.2} {:>5} {:>10.4} {:>11.3} {:>8.1} {:>10.3} {:>11.4}\n",
            r.method,
            r.outlier_ratio,
            r.seeds,
            r.position_mae_m,
            r.orientation_mae_deg,
            r.jumps,
            r.diverged_fraction,
            r.latency_mean_s * 1e3
        ));
    }
    s
}
