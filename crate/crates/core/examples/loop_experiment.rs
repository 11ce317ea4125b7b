//! Simulate the rectangular loop, run SLAM, and print pose and map metrics.
//!
//! `cargo run --release -p mhd-slam --example loop_experiment -- [outlier_rate] [k_fraction] [laps]`

use mhd_slam::eval::{associate, map_metrics, path_length, pose_metrics, reference_map};
use mhd_slam::pipeline::{run, trajectory_of};
use mhd_slam::sim::SimConfig;
use mhd_slam::PipelineConfig;

fn main() -> mhd_slam::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut sim = SimConfig::default();
    let mut cfg = PipelineConfig::default();
    if let Some(&o) = args.first() {
        sim.sensor.outlier_rate = o;
    }
    if let Some(&k) = args.get(1) {
        cfg.matcher.k_fraction = k;
    }
    if let Some(&l) = args.get(2) {
        sim.laps = l as usize;
    }
    let t0 = std::time::Instant::now();
    let data = sim.run()?;
    let t1 = t0.elapsed();
    let (records, map) = run(&data.scans, Some(&data.controls), &cfg)?;
    let t2 = t0.elapsed();
    let est = trajectory_of(&records);
    let pair = associate(&est, &data.ground_truth, 0.5 * sim.sample_dt)?;
    let pm = pose_metrics(&pair, path_length(&data.ground_truth))?;
    let reference = reference_map(&data.world, &map.meta, cfg.log_odds)?;
    let mm = map_metrics(&map, &reference)?;
    let fallbacks = records.iter().filter(|r| r.fallback).count();
    println!(
        "sim {:.2?}  slam {:.2?}  frames {}  fallbacks {}",
        t1,
        t2 - t1,
        records.len(),
        fallbacks
    );
    for (k, v) in pm.named().into_iter().chain(mm.named()) {
        println!("{k:>24} {v:.5}");
    }
    Ok(())
}
