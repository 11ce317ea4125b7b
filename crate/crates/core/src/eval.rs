//! Trajectory and map accuracy metrics.

use crate::error::{Result, SlamError};
use crate::geometry::{wrap_angle, Pose2D};
use crate::grid::{GridMeta, LogOddsParams, OccupancyGrid};
use crate::sim::WorldModel;

/// Time-stamped poses, sorted by time.
pub type Trajectory2D = Vec<(f64, Pose2D)>;

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedTrajectoryPair {
    /// `(t, estimate, ground truth)`.
    pub pairs: Vec<(f64, Pose2D, Pose2D)>,
    pub tolerance: f64,
    pub unpaired: usize,
}

/// Pair each estimate with the nearest-in-time ground-truth sample.
pub fn associate(est: &[(f64, Pose2D)], gt: &[(f64, Pose2D)], tol: f64) -> Result<AlignedTrajectoryPair> {
    if est.is_empty() || gt.is_empty() {
        return Err(SlamError::NoPairs {
            tolerance: tol,
            unpaired: est.len(),
        });
    }
    let mut pairs = Vec::with_capacity(est.len());
    let mut unpaired = 0;
    for &(t, e) in est {
        let k = gt.partition_point(|(tg, _)| *tg < t);
        let best = [k.checked_sub(1), (k < gt.len()).then_some(k)]
            .into_iter()
            .flatten()
            .min_by(|&a, &b| (gt[a].0 - t).abs().total_cmp(&(gt[b].0 - t).abs()));
        match best {
            Some(i) if (gt[i].0 - t).abs() <= tol => pairs.push((t, e, gt[i].1)),
            _ => unpaired += 1,
        }
    }
    if pairs.is_empty() {
        return Err(SlamError::NoPairs {
            tolerance: tol,
            unpaired,
        });
    }
    Ok(AlignedTrajectoryPair {
        pairs,
        tolerance: tol,
        unpaired,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PoseMetrics {
    pub mean_pos_error: f64,
    /// Degrees.
    pub mean_ang_error: f64,
    pub rms_pos: f64,
    pub rms_ang: f64,
    pub mean_inc_pos: f64,
    pub mean_inc_ang: f64,
    pub rms_inc_pos: f64,
    pub rms_inc_ang: f64,
    /// Mean positional error over ground-truth path length.
    pub pct_error: f64,
    /// Final estimate vs final ground truth.
    pub loop_error: f64,
    /// Final estimate vs first estimate (diagnostic).
    pub loop_error_self: f64,
}

impl PoseMetrics {
    pub fn named(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("mean_pos_error_m", self.mean_pos_error),
            ("mean_ang_error_deg", self.mean_ang_error),
            ("rms_pos_error_m", self.rms_pos),
            ("rms_ang_error_deg", self.rms_ang),
            ("mean_inc_pos_error_m", self.mean_inc_pos),
            ("mean_inc_ang_error_deg", self.mean_inc_ang),
            ("rms_inc_pos_error_m", self.rms_inc_pos),
            ("rms_inc_ang_error_deg", self.rms_inc_ang),
            ("pct_error", self.pct_error),
            ("loop_error_m", self.loop_error),
            ("loop_error_self_m", self.loop_error_self),
        ]
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

pub fn path_length(traj: &[(f64, Pose2D)]) -> f64 {
    traj.windows(2).map(|w| w[0].1.distance(&w[1].1)).sum()
}

pub fn pose_metrics(pair: &AlignedTrajectoryPair, path_length: f64) -> Result<PoseMetrics> {
    let p = &pair.pairs;
    if p.len() < 2 {
        return Err(SlamError::TooFewPairs {
            required: 2,
            got: p.len(),
        });
    }
    let pos: Vec<f64> = p.iter().map(|(_, e, g)| e.distance(g)).collect();
    let ang: Vec<f64> = p
        .iter()
        .map(|(_, e, g)| wrap_angle(e.theta - g.theta).abs().to_degrees())
        .collect();
    let (inc_pos, inc_ang): (Vec<f64>, Vec<f64>) = p
        .windows(2)
        .map(|w| {
            let de = w[1].1.relative_to(&w[0].1);
            let dg = w[1].2.relative_to(&w[0].2);
            (
                (de.x - dg.x).hypot(de.y - dg.y),
                wrap_angle(de.theta - dg.theta).abs().to_degrees(),
            )
        })
        .unzip();
    let last = p.last().unwrap();
    let mean_pos = mean(&pos);
    Ok(PoseMetrics {
        mean_pos_error: mean_pos,
        mean_ang_error: mean(&ang),
        rms_pos: rms(&pos),
        rms_ang: rms(&ang),
        mean_inc_pos: mean(&inc_pos),
        mean_inc_ang: mean(&inc_ang),
        rms_inc_pos: rms(&inc_pos),
        rms_inc_ang: rms(&inc_ang),
        pct_error: if path_length > 0.0 { mean_pos / path_length } else { 0.0 },
        loop_error: last.1.distance(&last.2),
        loop_error_self: last.1.distance(&p[0].1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MapMetrics {
    /// Pixels.
    pub mean_map_error: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub precision: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

impl MapMetrics {
    pub fn named(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("mean_map_error_px", self.mean_map_error),
            ("accuracy", self.accuracy),
            ("f1", self.f1),
            ("precision", self.precision),
            ("sensitivity", self.sensitivity),
            ("specificity", self.specificity),
        ]
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Compare an estimated map to a reference over their common extent.
/// Unknown estimate cells count as not occupied.
pub fn map_metrics(est: &OccupancyGrid, reference: &OccupancyGrid) -> Result<MapMetrics> {
    let (re, rr) = (est.meta.resolution, reference.meta.resolution);
    if (re - rr).abs() > 1e-9 * re.max(rr) {
        return Err(SlamError::ResolutionMismatch(re, rr));
    }
    let ref_field = reference.distance_field().map_err(|_| SlamError::EmptyReference)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    let mut err_sum = 0.0;
    let mut err_n = 0usize;
    for j in 0..est.meta.height {
        for i in 0..est.meta.width {
            let c = est.meta.cell_center(i, j);
            let Some((ri, rj)) = reference.meta.world_to_cell(c) else {
                continue;
            };
            let e = est.is_occupied_value(est.get(i, j));
            let r = reference.is_occupied_value(reference.get(ri, rj));
            match (e, r) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => tn += 1,
            }
            if e {
                err_sum += ref_field.get(ri, rj) / rr;
                err_n += 1;
            }
        }
    }
    let precision = ratio(tp, tp + fp);
    let sensitivity = ratio(tp, tp + fn_);
    let f1 = if precision + sensitivity > 0.0 {
        2.0 * precision * sensitivity / (precision + sensitivity)
    } else {
        0.0
    };
    Ok(MapMetrics {
        mean_map_error: if err_n > 0 { err_sum / err_n as f64 } else { 0.0 },
        accuracy: ratio(tp + tn, tp + tn + fp + fn_),
        f1,
        precision,
        sensitivity,
        specificity: ratio(tn, tn + fp),
        true_positive: tp,
        false_positive: fp,
        true_negative: tn,
        false_negative: fn_,
    })
}

/// Rasterize the world's circles onto `meta`: a cell is occupied when the
/// circle boundary passes through its square.
pub fn rasterize_world(world: &WorldModel, meta: GridMeta, params: LogOddsParams) -> OccupancyGrid {
    let mut grid = OccupancyGrid::new(meta, params);
    let res = meta.resolution;
    for c in &world.obstacles {
        let lo = [c.center[0] - c.radius - res, c.center[1] - c.radius - res];
        let hi = [c.center[0] + c.radius + res, c.center[1] + c.radius + res];
        let i0 = ((lo[0] - meta.origin[0]) / res).floor().max(0.0) as usize;
        let j0 = ((lo[1] - meta.origin[1]) / res).floor().max(0.0) as usize;
        let i1 = (((hi[0] - meta.origin[0]) / res).ceil().max(0.0) as usize).min(meta.width);
        let j1 = (((hi[1] - meta.origin[1]) / res).ceil().max(0.0) as usize).min(meta.height);
        for j in j0..j1 {
            for i in i0..i1 {
                let x0 = meta.origin[0] + i as f64 * res;
                let y0 = meta.origin[1] + j as f64 * res;
                let dx_near = (c.center[0] - c.center[0].clamp(x0, x0 + res)).abs();
                let dy_near = (c.center[1] - c.center[1].clamp(y0, y0 + res)).abs();
                let near = dx_near.hypot(dy_near);
                let dx_far = (c.center[0] - x0).abs().max((c.center[0] - x0 - res).abs());
                let dy_far = (c.center[1] - y0).abs().max((c.center[1] - y0 - res).abs());
                let far = dx_far.hypot(dy_far);
                if near <= c.radius && c.radius <= far {
                    grid.set(i, j, params.max);
                }
            }
        }
    }
    grid
}

/// Reference map of `world` over its ground extent, on the lattice of
/// `like` so cells line up one to one with the estimate.
pub fn reference_map(world: &WorldModel, like: &GridMeta, params: LogOddsParams) -> Result<OccupancyGrid> {
    let res = like.resolution;
    let snap_lo = |v: f64, o: f64| o + ((v - o) / res).floor() * res;
    let origin = [
        snap_lo(world.extent_min[0], like.origin[0]),
        snap_lo(world.extent_min[1], like.origin[1]),
    ];
    let cells = |lo: f64, hi: f64| (((hi - lo) / res - 1e-9).ceil().max(1.0)) as usize;
    let meta = GridMeta::new(
        res,
        origin,
        cells(origin[0], world.extent_max[0]),
        cells(origin[1], world.extent_max[1]),
    )?;
    Ok(rasterize_world(world, meta, params))
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let m = mean(values);
    if values.len() < 2 {
        return (m, 0.0);
    }
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    (m, var.sqrt())
}
