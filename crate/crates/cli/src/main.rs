//! `mhd-slam`: simulate, slam, eval and export-map in one binary.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mhd_slam::eval::{associate, map_metrics, mean_std, path_length, pose_metrics, reference_map};
use mhd_slam::io;
use mhd_slam::pipeline::{build_map, run, ControlMode};
use mhd_slam::sim::SimConfig;
use mhd_slam::{PipelineConfig, Result, SlamError};

use crate::manifest::Recorder;

const EXIT_PARSE: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "mhd-slam",
    version,
    about = "2D scan-matching SLAM on sliced 3D lidar sweeps"
)]
struct Cli {
    /// Key-value config file (simulator keys for `simulate`, pipeline keys otherwise).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the random seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate scans, odometry, ground truth and the world description.
    Simulate(SimulateArgs),
    /// Run SLAM on a scan log.
    Slam(SlamArgs),
    /// Score estimated trajectories (and maps) against ground truth.
    Eval(EvalArgs),
    /// Write a PGM map: a world raster, or a rebuild from scans and poses.
    ExportMap(ExportArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Override the number of laps.
    #[arg(long)]
    laps: Option<usize>,
}

#[derive(Debug, Args)]
struct SlamArgs {
    #[arg(long, value_name = "PATH")]
    scans: PathBuf,
    /// Odometry log; without it the pipeline extrapolates its own motion.
    #[arg(long, value_name = "PATH")]
    controls: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Estimated trajectory; repeat to aggregate across runs.
    #[arg(long = "est", value_name = "PATH", required = true)]
    est: Vec<PathBuf>,
    #[arg(long, value_name = "PATH")]
    gt: PathBuf,
    /// Estimated map (PGM with sidecar); repeat to aggregate across runs.
    #[arg(long = "map", value_name = "PATH")]
    map: Vec<PathBuf>,
    /// World description the reference map is rasterized from.
    #[arg(long, value_name = "PATH", conflicts_with = "reference")]
    world: Option<PathBuf>,
    /// Reference map (PGM with sidecar) to score against instead of a world.
    #[arg(long, value_name = "PATH")]
    reference: Option<PathBuf>,
    /// Maximum timestamp gap when pairing poses, seconds.
    #[arg(long, default_value_t = 0.05)]
    tolerance: f64,
}

#[derive(Debug, Args)]
struct ExportArgs {
    /// Rasterize this world description.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["scans", "trajectory"])]
    world: Option<PathBuf>,
    /// Rebuild from this scan log (needs `--trajectory`).
    #[arg(long, value_name = "PATH", requires = "trajectory")]
    scans: Option<PathBuf>,
    #[arg(long, value_name = "PATH", requires = "scans")]
    trajectory: Option<PathBuf>,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "export.pgm")]
    name: String,
}

struct Ctx {
    out: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_parse() { EXIT_PARSE } else { EXIT_RUNTIME })
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    fs::create_dir_all(&cli.out)?;
    let ctx = Ctx {
        out: cli.out.clone(),
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Simulate(a) => simulate(&ctx, cli.config.as_deref(), cli.seed, a),
        Command::Slam(a) => slam(&ctx, pipeline_config(cli.config.as_deref())?, a),
        Command::Eval(a) => evaluate(&ctx, pipeline_config(cli.config.as_deref())?, a),
        Command::ExportMap(a) => export_map(&ctx, pipeline_config(cli.config.as_deref())?, a),
    }
}

fn pipeline_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn to_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn source(path: &Path) -> String {
    path.display().to_string()
}

fn simulate(ctx: &Ctx, config: Option<&Path>, seed: Option<u64>, a: SimulateArgs) -> Result<()> {
    let mut sim = match config {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    if let Some(s) = seed {
        sim.seed = s;
    }
    if let Some(l) = a.laps {
        if l == 0 {
            return Err(SlamError::invalid("laps", "must be >= 1"));
        }
        sim.laps = l;
    }
    let mut rec = Recorder::new("simulate", &ctx.out, Some(sim.seed), sim.to_text());
    let data = sim.run()?;
    rec.write_output("scans.csv", &to_bytes(|b| io::write_scan_log(b, &data.scans))?)?;
    rec.write_output("controls.csv", &to_bytes(|b| io::write_control_log(b, &data.controls))?)?;
    rec.write_output(
        "ground_truth.csv",
        &to_bytes(|b| io::write_poses(b, &data.ground_truth))?,
    )?;
    rec.write_output("world.csv", &to_bytes(|b| io::write_world(b, &data.world))?)?;
    let manifest = rec.finish()?;
    ctx.note(format!(
        "simulated {} scans over {} lap(s); manifest {}",
        data.scans.len(),
        sim.laps,
        manifest.display()
    ));
    Ok(())
}

fn slam(ctx: &Ctx, mut cfg: PipelineConfig, a: SlamArgs) -> Result<()> {
    let controls_path = match &a.controls {
        Some(p) if p.exists() => Some(p),
        Some(p) => {
            ctx.note(format!(
                "notice: controls file {} not found; using pseudo-control",
                p.display()
            ));
            None
        }
        None => {
            ctx.note("notice: no controls given; using pseudo-control");
            None
        }
    };
    if controls_path.is_none() {
        cfg.control_mode = ControlMode::ConstantVelocity;
    }
    let mut rec = Recorder::new("slam", &ctx.out, None, cfg.to_text());
    let bytes = rec.read_input(&a.scans)?;
    let scans = io::read_scan_log(&bytes[..], &source(&a.scans), cfg.min_range, cfg.max_range)?;
    let controls = match controls_path {
        Some(p) => {
            let bytes = rec.read_input(p)?;
            Some(io::read_control_log(&bytes[..], &source(p))?)
        }
        None => None,
    };
    let (records, map) = run(&scans, controls.as_deref(), &cfg)?;
    rec.write_output("trajectory.csv", &to_bytes(|b| io::write_trajectory(b, &records))?)?;
    rec.write_output("map.pgm", &to_bytes(|b| io::write_pgm(b, &map))?)?;
    rec.write_output("map.meta", &to_bytes(|b| io::write_sidecar(b, &map.meta))?)?;
    let manifest = rec.finish()?;
    let fallbacks = records.iter().filter(|r| r.fallback).count();
    ctx.note(format!(
        "processed {} of {} scans ({} dead-reckoned); manifest {}",
        records.len(),
        scans.len(),
        fallbacks,
        manifest.display()
    ));
    Ok(())
}

fn aggregate(runs: &[Vec<(&'static str, f64)>]) -> Vec<(String, f64, f64)> {
    let names: Vec<&str> = runs[0].iter().map(|(n, _)| *n).collect();
    names
        .iter()
        .enumerate()
        .map(|(k, n)| {
            let vals: Vec<f64> = runs.iter().map(|r| r[k].1).collect();
            let (m, s) = mean_std(&vals);
            (n.to_string(), m, s)
        })
        .collect()
}

fn evaluate(ctx: &Ctx, cfg: PipelineConfig, a: EvalArgs) -> Result<()> {
    let mut rec = Recorder::new("eval", &ctx.out, None, cfg.to_text());
    let gt_bytes = rec.read_input(&a.gt)?;
    let gt = io::read_poses(&gt_bytes[..], &source(&a.gt))?;
    let len = path_length(&gt);
    let mut pose_runs = Vec::new();
    for p in &a.est {
        let bytes = rec.read_input(p)?;
        let est = io::read_poses(&bytes[..], &source(p))?;
        let pair = associate(&est, &gt, a.tolerance)?;
        ctx.note(format!(
            "{}: paired {} of {} estimates (tolerance {} s)",
            p.display(),
            pair.pairs.len(),
            est.len(),
            a.tolerance
        ));
        pose_runs.push(pose_metrics(&pair, len)?.named());
    }
    let mut map_runs = Vec::new();
    if !a.map.is_empty() {
        let world = match &a.world {
            Some(w) => Some(io::read_world(&rec.read_input(w)?[..], &source(w))?),
            None => None,
        };
        let fixed = match &a.reference {
            Some(r) => Some(load_map_recorded(&mut rec, r, &cfg)?),
            None => None,
        };
        for p in &a.map {
            let est = load_map_recorded(&mut rec, p, &cfg)?;
            let reference = match (&fixed, &world) {
                (Some(r), _) => r.clone(),
                (None, Some(w)) => reference_map(w, &est.meta, cfg.log_odds)?,
                (None, None) => return Err(SlamError::invalid("map", "needs --world or --reference")),
            };
            map_runs.push(map_metrics(&est, &reference)?.named());
        }
    }
    let mut rows: Vec<(String, f64)> = Vec::new();
    let mut table = String::new();
    for (label, runs) in [("pose", &pose_runs), ("map", &map_runs)] {
        let n = runs.len();
        if n == 0 {
            continue;
        }
        let stats = aggregate(runs);
        if n == 1 {
            for (name, m, _) in &stats {
                rows.push((name.clone(), *m));
                table.push_str(&format!("{name:<26} {m:>12.6}\n"));
            }
        } else {
            table.push_str(&format!(
                "{:<26} {:>12} {:>12}   ({label} metrics across {n} runs)\n",
                "", "mean", "std"
            ));
            for (name, m, s) in &stats {
                rows.push((format!("{name}.mean"), *m));
                rows.push((format!("{name}.std"), *s));
                table.push_str(&format!("{name:<26} {m:>12.6} {s:>12.6}\n"));
            }
            rows.push((format!("{label}_runs"), n as f64));
        }
    }
    rec.write_output("metrics.csv", &to_bytes(|b| io::write_metrics(b, &rows))?)?;
    rec.finish()?;
    if !ctx.quiet {
        print!("{table}");
    }
    Ok(())
}

fn load_map_recorded(rec: &mut Recorder, path: &Path, cfg: &PipelineConfig) -> Result<mhd_slam::OccupancyGrid> {
    rec.read_input(path)?;
    rec.read_input(&io::sidecar_path(path))?;
    io::load_map(path, cfg.log_odds)
}

fn export_map(ctx: &Ctx, cfg: PipelineConfig, a: ExportArgs) -> Result<()> {
    let mut rec = Recorder::new("export-map", &ctx.out, None, cfg.to_text());
    let grid = match (&a.world, &a.scans, &a.trajectory) {
        (Some(w), _, _) => {
            let bytes = rec.read_input(w)?;
            let world = io::read_world(&bytes[..], &source(w))?;
            let lattice = mhd_slam::GridMeta::new(cfg.resolution, [0.0, 0.0], 1, 1)?;
            reference_map(&world, &lattice, cfg.log_odds)?
        }
        (None, Some(s), Some(t)) => {
            let scan_bytes = rec.read_input(s)?;
            let scans = io::read_scan_log(&scan_bytes[..], &source(s), cfg.min_range, cfg.max_range)?;
            let traj_bytes = rec.read_input(t)?;
            let poses = io::read_poses(&traj_bytes[..], &source(t))?;
            let (grid, used) = build_map(&scans, &poses, &cfg, 1e-6)?;
            ctx.note(format!("fused {used} of {} scans", scans.len()));
            grid
        }
        _ => {
            return Err(SlamError::invalid(
                "export-map",
                "give either --world or both --scans and --trajectory",
            ))
        }
    };
    let pgm = rec.write_output(&a.name, &to_bytes(|b| io::write_pgm(b, &grid))?)?;
    let meta_name = io::sidecar_path(Path::new(&a.name)).display().to_string();
    rec.write_output(&meta_name, &to_bytes(|b| io::write_sidecar(b, &grid.meta))?)?;
    rec.finish()?;
    ctx.note(format!("wrote {}", pgm.display()));
    Ok(())
}
