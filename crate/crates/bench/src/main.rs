use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use clap_bench::config::apply_doc;
use clap_bench::experiment::{
    aggregate, format_table, load_cells, run_experiment, write_outputs, write_summary, ExperimentConfig,
    NoisePreset, SummaryRow,
};
use clap_bench::metrics::{DivergenceSpec, JumpSpec, MetricsReport, RunRecord};
use clap_bench::pipeline::{parse_methods, Method};
use clap_bench::plot::{plot_bars, plot_trajectories};
use clap_localization::config::KeyValueDoc;
use clap_localization::sim::{parse_waypoints, TrajectoryKind, TrajectorySpec};
use clap_localization::{default_adult_field, load_field_map, FieldMap};

#[derive(Parser)]
#[command(name = "clap-bench", version, about = "Simulated localization benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate, localize and write per-cell CSVs plus summary.csv.
    Run(RunArgs),
    /// Recompute metrics from a run directory.
    Metrics(MetricsArgs),
    /// Draw trajectory overlays and jump/divergence bar charts.
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Landmark map file; the built-in adult-size field when omitted.
    #[arg(long)]
    map: Option<PathBuf>,
    /// box, c, x, zigzag, or a waypoint file.
    #[arg(long, default_value = "box")]
    traj: String,
    #[arg(long, default_value = "clap,mcl,icp")]
    methods: String,
    /// uniform or banded.
    #[arg(long, default_value = "banded")]
    noise: NoisePreset,
    /// Comma-separated outlier ratios.
    #[arg(long = "outlier-ratio", value_delimiter = ',', default_value = "0")]
    outlier_ratio: Vec<f64>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seed: Vec<u64>,
    /// Stop each run after this many frames.
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long, default_value_t = 1)]
    laps: usize,
    /// Record per-step latency (makes CSVs non-reproducible).
    #[arg(long)]
    timing: bool,
    /// `key = value` overrides; CLAP_* environment variables apply on top.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn read_map(path: Option<&Path>) -> Result<FieldMap> {
    match path {
        None => Ok(default_adult_field()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            load_field_map(&text).with_context(|| format!("parsing map {}", p.display()))
        }
    }
}

fn read_trajectory(arg: &str) -> Result<TrajectorySpec> {
    if let Ok(kind) = arg.parse::<TrajectoryKind>() {
        if kind != TrajectoryKind::Waypoints {
            return Ok(TrajectorySpec::preset(kind));
        }
    }
    let text = fs::read_to_string(arg)
        .with_context(|| format!("{arg:?} is neither a built-in trajectory nor a readable file"))?;
    Ok(TrajectorySpec::custom(parse_waypoints(&text)?))
}

fn read_doc(path: Option<&Path>) -> Result<KeyValueDoc> {
    let doc = match path {
        None => KeyValueDoc::default(),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            KeyValueDoc::parse(&text).with_context(|| format!("parsing {}", p.display()))?
        }
    };
    Ok(doc.with_process_env())
}

/// Jump and divergence thresholds from an optional config.
fn metric_specs(config: Option<&Path>) -> Result<(JumpSpec, DivergenceSpec)> {
    let mut cfg = ExperimentConfig::new(TrajectorySpec::preset(TrajectoryKind::Box), NoisePreset::Banded);
    apply_doc(&read_doc(config)?, &mut cfg)?;
    cfg.jumps.validate()?;
    cfg.divergence.validate()?;
    Ok((cfg.jumps, cfg.divergence))
}

fn run(args: RunArgs) -> Result<()> {
    let mut trajectory = read_trajectory(&args.traj)?;
    trajectory.laps = args.laps;
    let mut cfg = ExperimentConfig::new(trajectory, args.noise);
    cfg.map = Arc::new(read_map(args.map.as_deref())?);
    cfg.methods = parse_methods(&args.methods).map_err(anyhow::Error::msg)?;
    cfg.outlier_ratios = args.outlier_ratio;
    cfg.seeds = args.seed;
    cfg.max_frames = args.frames;
    cfg.timing = args.timing;
    apply_doc(&read_doc(args.config.as_deref())?, &mut cfg)?;

    let outcomes = run_experiment(&cfg)?;
    let (summary, failures) = write_outputs(&args.out, &outcomes)?;
    print!("{}", format_table(&aggregate(&summary), cfg.divergence.rule()));
    println!("wrote {} runs to {}", summary.len(), args.out.display());
    if !failures.is_empty() {
        for f in &failures {
            eprintln!("cell failed: {f}");
        }
        bail!("{} of {} cells failed", failures.len(), outcomes.len());
    }
    Ok(())
}

fn recompute(
    cells: &[(Method, f64, u64, RunRecord)],
    jumps: &JumpSpec,
    divergence: &DivergenceSpec,
) -> Result<Vec<SummaryRow>> {
    cells
        .iter()
        .map(|(_, ratio, seed, rec)| {
            let mut rec = rec.clone();
            rec.annotate(jumps, divergence);
            let report = MetricsReport::compute(&rec, jumps, divergence)?;
            Ok(SummaryRow::new(&report, *ratio, *seed, rec.rows.len()))
        })
        .collect()
}

fn metrics(args: MetricsArgs) -> Result<()> {
    let (jumps, divergence) = metric_specs(args.config.as_deref())?;
    let cells = load_cells(&args.input)?;
    if cells.is_empty() {
        bail!("no cell CSVs under {}", args.input.display());
    }
    let rows = recompute(&cells, &jumps, &divergence)?;
    for r in &rows {
        println!(
            "{:<9} ratio {:.2} seed {:<4} pos {:.4}±{:.4} m  ori {:.3}±{:.3}°  jumps {:<5} diverged {:.3}",
            r.method,
            r.outlier_ratio,
            r.seed,
            r.position_mae_m,
            r.position_std_m,
            r.orientation_mae_deg,
            r.orientation_std_deg,
            r.jumps,
            r.diverged_fraction
        );
    }
    println!();
    print!("{}", format_table(&aggregate(&rows), divergence.rule()));
    let path = args.input.join("metrics.csv");
    write_summary(&path, &rows)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn plot(args: PlotArgs) -> Result<()> {
    let (jumps, divergence) = metric_specs(args.config.as_deref())?;
    let map = read_map(args.map.as_deref())?;
    let cells = load_cells(&args.input)?;
    if cells.is_empty() {
        bail!("no cell CSVs under {}", args.input.display());
    }
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let mut groups: BTreeMap<(u64, u64), Vec<&RunRecord>> = BTreeMap::new();
    for (_, ratio, seed, rec) in &cells {
        groups.entry((ratio.to_bits(), *seed)).or_default().push(rec);
    }
    for ((ratio_bits, seed), records) in &groups {
        let ratio = f64::from_bits(*ratio_bits);
        let path = args.out.join(format!("trajectory_ratio{ratio:.2}_seed{seed}.svg"));
        plot_trajectories(&path, &map, records)?;
    }

    let agg = aggregate(&recompute(&cells, &jumps, &divergence)?);
    plot_bars(&args.out.join("jumps.svg"), "velocity jumps per run", &agg, |r| r.jumps)?;
    plot_bars(
        &args.out.join("divergence.svg"),
        "diverged fraction",
        &agg,
        |r| r.diverged_fraction,
    )?;
    println!("wrote {} figures to {}", groups.len() + 2, args.out.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::Metrics(a) => metrics(a),
        Command::Plot(a) => plot(a),
    }
}
