//! Scan-to-map alignment by minimizing the trimmed directed Modified
//! Hausdorff Distance over a coarse-to-fine grid of rigid transforms.

use crate::error::{Result, SlamError};
use crate::geometry::Pose2D;
use crate::grid::DistanceField;
use crate::par;
use crate::scan::{FilteredScan2D, PointSet2D};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchParams {
    /// Fraction of best-matching points averaged, in `(0, 1]`.
    pub k_fraction: f64,
    pub search_radius_xy: f64,
    pub search_radius_theta: f64,
    pub coarse_step_xy: f64,
    pub coarse_step_theta: f64,
    pub refine_levels: u32,
    /// Minimum number of valid bins required to attempt a match.
    pub min_points: usize,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            k_fraction: 0.8,
            search_radius_xy: 0.5,
            search_radius_theta: 10f64.to_radians(),
            coarse_step_xy: 0.1,
            coarse_step_theta: 2f64.to_radians(),
            refine_levels: 3,
            min_points: 10,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_fraction > 0.0 && self.k_fraction <= 1.0) {
            return Err(SlamError::invalid("k_fraction", "must lie in (0, 1]"));
        }
        if !(self.coarse_step_xy > 0.0 && self.coarse_step_theta > 0.0) {
            return Err(SlamError::invalid("coarse_step", "steps must be positive"));
        }
        if self.search_radius_xy < self.coarse_step_xy {
            return Err(SlamError::invalid("search_radius_xy", "must be >= coarse_step_xy"));
        }
        if self.search_radius_theta < self.coarse_step_theta {
            return Err(SlamError::invalid(
                "search_radius_theta",
                "must be >= coarse_step_theta",
            ));
        }
        Ok(())
    }

    pub fn finest_step_xy(&self) -> f64 {
        self.coarse_step_xy / 2f64.powi(self.refine_levels as i32)
    }

    pub fn finest_step_theta(&self) -> f64 {
        self.coarse_step_theta / 2f64.powi(self.refine_levels as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    pub pose: Pose2D,
    /// Trimmed MHD at `pose`, meters.
    pub score: f64,
    pub candidates_evaluated: usize,
    /// Minimizer lies strictly inside the search window.
    pub converged: bool,
}

fn kept_count(n: usize, k_fraction: f64) -> usize {
    ((k_fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

/// Mean of the smallest `ceil(k*n)` values; reorders `d`.
fn trimmed_mean(d: &mut [f64], k_fraction: f64) -> f64 {
    let m = kept_count(d.len(), k_fraction);
    if m < d.len() {
        d.select_nth_unstable_by(m - 1, f64::total_cmp);
    }
    d[..m].iter().sum::<f64>() / m as f64
}

/// Trimmed directed MHD from `points` to the map behind `field`.
pub fn directed_mhd(points: &PointSet2D, field: &DistanceField, k_fraction: f64) -> Result<f64> {
    if points.is_empty() {
        return Err(SlamError::EmptyPointSet);
    }
    let mut d: Vec<f64> = points.points.iter().map(|p| field.sample(*p)).collect();
    Ok(trimmed_mean(&mut d, k_fraction))
}

#[derive(Debug, Clone, Copy)]
struct Scored {
    offset: [f64; 3],
    score: f64,
}

/// Lowest score wins; ties keep the earlier candidate in (theta, x, y) order.
fn better(a: &Scored, b: &Scored) -> bool {
    a.score < b.score
}

fn offsets(radius: f64, step: f64) -> Vec<f64> {
    let n = ((radius / step) + 1e-9).floor() as i64;
    (-n..=n).map(|k| k as f64 * step).collect()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Exec {
    Sequential,
    Parallel,
}

struct Problem<'a> {
    sensor: Vec<[f64; 2]>,
    field: &'a DistanceField,
    initial: Pose2D,
    params: &'a MatchParams,
}

impl Problem<'_> {
    /// Scores of the cartesian product `thetas x xs x ys`, in that order.
    fn evaluate(&self, thetas: &[f64], xs: &[f64], ys: &[f64], exec: Exec) -> Vec<Scored> {
        let tasks: Vec<(f64, f64)> = thetas.iter().flat_map(|&t| xs.iter().map(move |&x| (t, x))).collect();
        let run = |&(dt, dx): &(f64, f64)| -> Vec<Scored> {
            let theta = self.initial.theta + dt;
            let (s, c) = theta.sin_cos();
            let rotated: Vec<[f64; 2]> = self
                .sensor
                .iter()
                .map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]])
                .collect();
            let mut d = vec![0.0; rotated.len()];
            ys.iter()
                .map(|&dy| {
                    let tx = self.initial.x + dx;
                    let ty = self.initial.y + dy;
                    for (slot, p) in d.iter_mut().zip(&rotated) {
                        *slot = self.field.sample([p[0] + tx, p[1] + ty]);
                    }
                    Scored {
                        offset: [dx, dy, dt],
                        score: trimmed_mean(&mut d, self.params.k_fraction),
                    }
                })
                .collect()
        };
        let nested = match exec {
            Exec::Parallel => par::map(&tasks, run),
            Exec::Sequential => tasks.iter().map(run).collect(),
        };
        nested.into_iter().flatten().collect()
    }
}

fn search(
    initial: &Pose2D,
    scan: &FilteredScan2D,
    field: &DistanceField,
    params: &MatchParams,
    exec: Exec,
) -> Result<MatchResult> {
    params.validate()?;
    let valid = scan.valid_count();
    if valid < params.min_points {
        return Err(SlamError::DegenerateScan {
            valid,
            required: params.min_points,
        });
    }
    let problem = Problem {
        sensor: scan.sensor_points().points,
        field,
        initial: *initial,
        params,
    };
    let rxy = params.search_radius_xy;
    let rth = params.search_radius_theta;

    let coarse_xy = offsets(rxy, params.coarse_step_xy);
    let coarse_th = offsets(rth, params.coarse_step_theta);
    let scored = problem.evaluate(&coarse_th, &coarse_xy, &coarse_xy, exec);
    let mut evaluated = scored.len();
    let mut best = pick(&scored);

    let (mut sxy, mut sth) = (params.coarse_step_xy, params.coarse_step_theta);
    for _ in 0..params.refine_levels {
        sxy /= 2.0;
        sth /= 2.0;
        let local = |center: f64, step: f64, radius: f64| -> Vec<f64> {
            (-2..=2)
                .map(|k| center + k as f64 * step)
                .filter(|v| v.abs() <= radius + 1e-12)
                .collect()
        };
        let xs = local(best.offset[0], sxy, rxy);
        let ys = local(best.offset[1], sxy, rxy);
        let ts = local(best.offset[2], sth, rth);
        let scored = problem.evaluate(&ts, &xs, &ys, exec);
        evaluated += scored.len();
        let cand = pick(&scored);
        if better(&cand, &best) {
            best = cand;
        }
    }

    let [dx, dy, dt] = best.offset;
    let interior = |v: f64, r: f64| v.abs() < r - 1e-12;
    Ok(MatchResult {
        pose: Pose2D::new(initial.x + dx, initial.y + dy, initial.theta + dt),
        score: best.score,
        candidates_evaluated: evaluated,
        converged: interior(dx, rxy) && interior(dy, rxy) && interior(dt, rth),
    })
}

fn pick(scored: &[Scored]) -> Scored {
    let mut best = scored[0];
    for s in &scored[1..] {
        if better(s, &best) {
            best = *s;
        }
    }
    best
}

/// Align `scan` against the map behind `field`, searching around
/// `initial_guess`. Candidate scoring runs data-parallel when the `parallel`
/// feature is enabled; the result is identical either way.
pub fn match_scan(
    initial_guess: &Pose2D,
    scan: &FilteredScan2D,
    field: &DistanceField,
    params: &MatchParams,
) -> Result<MatchResult> {
    search(initial_guess, scan, field, params, Exec::Parallel)
}

/// Single-threaded variant of [`match_scan`].
pub fn match_scan_sequential(
    initial_guess: &Pose2D,
    scan: &FilteredScan2D,
    field: &DistanceField,
    params: &MatchParams,
) -> Result<MatchResult> {
    search(initial_guess, scan, field, params, Exec::Sequential)
}
