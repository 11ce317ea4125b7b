//! The online loop: filter, predict, match against the previous map, fuse,
//! integrate.

use nalgebra::{Matrix2, Matrix3};

use crate::ekf::{self, BeliefState, Control};
use crate::error::{Result, SlamError};
use crate::geometry::Pose2D;
use crate::grid::{DistanceField, GridMeta, LogOddsParams, OccupancyGrid};
use crate::matcher::{match_scan, MatchParams};
use crate::scan::{scan_to_world, FilteredScan2D, PolarScan3D, ScanFilter};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlMode {
    /// Use the supplied control log; fall back to pseudo-control where it has gaps.
    External,
    /// Ignore controls and extrapolate the previous corrected motion.
    ConstantVelocity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub filter: ScanFilter,
    pub resolution: f64,
    /// Half-size of the initial square grid around the origin, meters.
    pub initial_extent: f64,
    /// Padding kept around every scan when growing the grid, meters.
    pub grid_margin: f64,
    pub log_odds: LogOddsParams,
    pub matcher: MatchParams,
    /// Control noise standard deviations (v in m/s, omega in rad/s).
    pub q_sigma_v: f64,
    pub q_sigma_omega: f64,
    /// Scan-match measurement standard deviations.
    pub r_sigma_xy: f64,
    pub r_sigma_theta: f64,
    pub initial_variance: f64,
    /// Matches scoring above this are rejected. Defaults to 5 cells.
    pub score_gate: Option<f64>,
    pub control_mode: ControlMode,
    /// Range limits applied to scans read from logs.
    pub min_range: f64,
    pub max_range: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            filter: ScanFilter::default(),
            resolution: 0.05,
            initial_extent: 10.0,
            grid_margin: 2.0,
            log_odds: LogOddsParams::default(),
            matcher: MatchParams::default(),
            q_sigma_v: 0.02,
            q_sigma_omega: 0.02,
            r_sigma_xy: 0.05,
            r_sigma_theta: 0.5f64.to_radians(),
            initial_variance: 1e-4,
            score_gate: None,
            control_mode: ControlMode::External,
            min_range: 0.1,
            max_range: 30.0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.log_odds.validate()?;
        self.matcher.validate()?;
        if !(self.filter.z_min < self.filter.z_max) {
            return Err(SlamError::invalid("slice_z_min", "must be below slice_z_max"));
        }
        if self.filter.bin_count == 0 {
            return Err(SlamError::invalid("bin_count", "must be >= 1"));
        }
        if !(self.resolution > 0.0) {
            return Err(SlamError::invalid("resolution", "must be positive"));
        }
        if !(self.initial_extent > 0.0) {
            return Err(SlamError::invalid("initial_extent", "must be positive"));
        }
        for (name, v) in [
            ("q_sigma_v", self.q_sigma_v),
            ("q_sigma_omega", self.q_sigma_omega),
            ("r_sigma_xy", self.r_sigma_xy),
            ("r_sigma_theta", self.r_sigma_theta),
            ("initial_variance", self.initial_variance),
            ("grid_margin", self.grid_margin),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SlamError::invalid(name, "must be finite and non-negative"));
            }
        }
        if let Some(g) = self.score_gate {
            if !(g > 0.0) {
                return Err(SlamError::invalid("score_gate", "must be positive"));
            }
        }
        if !(self.max_range > self.min_range && self.min_range >= 0.0) {
            return Err(SlamError::invalid("max_range", "need 0 <= min_range < max_range"));
        }
        Ok(())
    }

    pub fn effective_score_gate(&self) -> f64 {
        self.score_gate.unwrap_or(5.0 * self.resolution)
    }

    pub fn control_noise(&self) -> Matrix2<f64> {
        Matrix2::new(self.q_sigma_v.powi(2), 0.0, 0.0, self.q_sigma_omega.powi(2))
    }

    /// Measurement noise, inflated for poorly scoring matches.
    pub fn measurement_noise(&self, score: f64) -> Matrix3<f64> {
        let scale = (score / self.resolution).max(1.0);
        Matrix3::from_diagonal(&nalgebra::Vector3::new(
            self.r_sigma_xy.powi(2),
            self.r_sigma_xy.powi(2),
            self.r_sigma_theta.powi(2),
        )) * scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub timestamp: f64,
    /// Index of the raw scan within the input log.
    pub scan_index: usize,
    pub predicted: Pose2D,
    /// Matched pose and score, when the matcher produced one.
    pub matched: Option<(Pose2D, f64)>,
    pub corrected: Pose2D,
    pub covariance_trace: f64,
    pub map_updated: bool,
    /// Dead-reckoned frame: no measurement update, no map update.
    pub fallback: bool,
}

pub struct SlamPipeline {
    config: PipelineConfig,
    grid: OccupancyGrid,
    belief: BeliefState,
    last_time: f64,
    /// Corrected motion over the previous interval and its duration.
    last_motion: Option<(Pose2D, f64)>,
    field: Option<(u64, DistanceField)>,
    scan_count: usize,
}

impl SlamPipeline {
    /// Build `M_0` from the first scan at the origin.
    pub fn initialize(first_scan: &PolarScan3D, config: PipelineConfig) -> Result<(Self, FrameRecord)> {
        config.validate()?;
        let filtered = config.filter.apply(first_scan)?;
        let valid = filtered.valid_count();
        if valid < config.matcher.min_points {
            return Err(SlamError::DegenerateScan {
                valid,
                required: config.matcher.min_points,
            });
        }
        let e = config.initial_extent;
        let meta = GridMeta::covering(config.resolution, [-e, -e], [e, e])?;
        let grid = OccupancyGrid::new(meta, config.log_odds);
        let belief = BeliefState::new(
            Pose2D::identity(),
            Matrix3::from_diagonal_element(config.initial_variance),
        );
        let mut pipeline = Self {
            grid,
            belief,
            last_time: first_scan.timestamp,
            last_motion: None,
            field: None,
            scan_count: 1,
            config,
        };
        pipeline.integrate(&Pose2D::identity(), &filtered)?;
        let record = FrameRecord {
            timestamp: first_scan.timestamp,
            scan_index: 0,
            predicted: Pose2D::identity(),
            matched: Some((Pose2D::identity(), 0.0)),
            corrected: Pose2D::identity(),
            covariance_trace: pipeline.belief.trace(),
            map_updated: true,
            fallback: false,
        };
        Ok((pipeline, record))
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn map(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn into_map(self) -> OccupancyGrid {
        self.grid
    }

    pub fn belief(&self) -> &BeliefState {
        &self.belief
    }

    fn integrate(&mut self, pose: &Pose2D, scan: &FilteredScan2D) -> Result<()> {
        integrate_scan(&mut self.grid, pose, scan, self.config.grid_margin)
    }

    fn snapshot(&mut self) -> Result<&DistanceField> {
        let rev = self.grid.revision();
        let stale = !matches!(&self.field, Some((r, _)) if *r == rev);
        if stale {
            self.field = Some((rev, self.grid.distance_field()?));
        }
        Ok(&self.field.as_ref().unwrap().1)
    }

    /// Advance with an optional single control held over the whole interval.
    pub fn step(&mut self, scan: &PolarScan3D, u: Option<Control>) -> Result<FrameRecord> {
        match u {
            Some(c) => self.step_with_controls(scan, &[c]),
            None => self.step_with_controls(scan, &[]),
        }
    }

    /// Advance with the controls covering the interval since the previous
    /// scan, applied in order. An empty slice triggers pseudo-control.
    pub fn step_with_controls(&mut self, scan: &PolarScan3D, controls: &[Control]) -> Result<FrameRecord> {
        let t = scan.timestamp;
        if !(t > self.last_time) {
            return Err(SlamError::OutOfOrder {
                previous: self.last_time,
                got: t,
            });
        }
        let dt = t - self.last_time;
        let q = self.config.control_noise();
        let prior_mean = self.belief.mean;

        let use_external = self.config.control_mode == ControlMode::External && !controls.is_empty();
        let mut belief = self.belief;
        if use_external {
            for u in controls {
                belief = ekf::predict(&belief, u, &q)?;
            }
        } else {
            let u = match self.last_motion {
                Some((delta, prev_dt)) => Control {
                    v: delta.x / prev_dt,
                    omega: delta.theta / prev_dt,
                    dt,
                },
                None => Control { v: 0.0, omega: 0.0, dt },
            };
            belief = ekf::predict(&belief, &u, &q)?;
        }
        let predicted = belief.mean;

        let filtered = self.config.filter.apply(scan).ok();
        let params = self.config.matcher;
        let matched = match &filtered {
            Some(f) => {
                let field = self.snapshot()?;
                match_scan(&predicted, f, field, &params).ok()
            }
            None => None,
        };
        let gate = self.config.effective_score_gate();
        let accepted = matched.filter(|m| m.score <= gate);
        if let Some(m) = accepted {
            let r = self.config.measurement_noise(m.score);
            belief = ekf::update(&belief, &m.pose, &r)?;
        }
        let fallback = accepted.is_none();
        if !fallback {
            self.integrate(&belief.mean, filtered.as_ref().unwrap())?;
        }

        self.belief = belief;
        self.last_motion = Some((belief.mean.relative_to(&prior_mean), dt));
        self.last_time = t;
        let index = self.scan_count;
        self.scan_count += 1;
        Ok(FrameRecord {
            timestamp: t,
            scan_index: index,
            predicted,
            matched: matched.map(|m| (m.pose, m.score)),
            corrected: belief.mean,
            covariance_trace: belief.trace(),
            map_updated: !fallback,
            fallback,
        })
    }
}

/// Controls overlapping `(from, to]`, clipped to that interval. Each
/// command in `log` is held from its start time until the next command
/// starts (the last one for its own `dt`).
pub fn controls_between(log: &[(f64, Control)], from: f64, to: f64) -> Vec<Control> {
    let start = log.partition_point(|(t, u)| t + u.dt <= from);
    let mut out = Vec::new();
    for (k, &(t0, u)) in log.iter().enumerate().skip(start) {
        if t0 >= to {
            break;
        }
        let end = match log.get(k + 1) {
            Some(&(t1, _)) => t1.min(t0 + u.dt),
            None => t0 + u.dt,
        };
        let a = t0.max(from);
        let b = end.min(to);
        if b - a > 1e-9 {
            out.push(Control { dt: b - a, ..u });
        }
    }
    out
}

/// Run a whole log. Leading scans that cannot seed the map are skipped.
pub fn run(
    scans: &[PolarScan3D],
    controls: Option<&[(f64, Control)]>,
    config: &PipelineConfig,
) -> Result<(Vec<FrameRecord>, OccupancyGrid)> {
    config.validate()?;
    if scans.is_empty() {
        return Err(SlamError::EmptyLog);
    }
    let mut last_err = None;
    let mut start = None;
    for (k, s) in scans.iter().enumerate() {
        match SlamPipeline::initialize(s, config.clone()) {
            Ok((p, mut rec)) => {
                rec.scan_index = k;
                start = Some((k, p, rec));
                break;
            }
            Err(e @ (SlamError::DegenerateScan { .. } | SlamError::EmptyScan)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    let Some((first, mut pipeline, rec)) = start else {
        return Err(last_err.unwrap_or(SlamError::EmptyLog));
    };
    let mut records = Vec::with_capacity(scans.len() - first);
    records.push(rec);
    let mut prev_t = scans[first].timestamp;
    for (k, s) in scans.iter().enumerate().skip(first + 1) {
        let us = match (controls, config.control_mode) {
            (Some(log), ControlMode::External) => controls_between(log, prev_t, s.timestamp),
            _ => Vec::new(),
        };
        let mut rec = pipeline.step_with_controls(s, &us)?;
        rec.scan_index = k;
        records.push(rec);
        prev_t = s.timestamp;
    }
    Ok((records, pipeline.into_map()))
}

/// Grow `grid` to fit the scan with `margin` padding, then fuse it at `pose`.
pub fn integrate_scan(grid: &mut OccupancyGrid, pose: &Pose2D, scan: &FilteredScan2D, margin: f64) -> Result<()> {
    let pts = scan_to_world(scan, pose);
    let mut lo = [pose.x - margin, pose.y - margin];
    let mut hi = [pose.x + margin, pose.y + margin];
    for p in &pts.points {
        for ax in 0..2 {
            lo[ax] = lo[ax].min(p[ax] - margin);
            hi[ax] = hi[ax].max(p[ax] + margin);
        }
    }
    grid.ensure_capacity(lo, hi);
    grid.update(pose, scan)
}

/// Rebuild a map by fusing each scan at the pose with the same timestamp
/// (within `tol` seconds). Scans without a pose are skipped.
pub fn build_map(
    scans: &[PolarScan3D],
    poses: &[(f64, Pose2D)],
    config: &PipelineConfig,
    tol: f64,
) -> Result<(OccupancyGrid, usize)> {
    config.validate()?;
    let e = config.initial_extent;
    let meta = GridMeta::covering(config.resolution, [-e, -e], [e, e])?;
    let mut grid = OccupancyGrid::new(meta, config.log_odds);
    let mut used = 0;
    for s in scans {
        let k = poses.partition_point(|(t, _)| *t < s.timestamp - tol);
        let Some((t, pose)) = poses.get(k) else { continue };
        if (t - s.timestamp).abs() > tol {
            continue;
        }
        let filtered = match config.filter.apply(s) {
            Ok(f) => f,
            Err(SlamError::EmptyScan) => continue,
            Err(e) => return Err(e),
        };
        integrate_scan(&mut grid, pose, &filtered, config.grid_margin)?;
        used += 1;
    }
    if used == 0 {
        return Err(SlamError::EmptyLog);
    }
    Ok((grid, used))
}

pub fn trajectory_of(records: &[FrameRecord]) -> Vec<(f64, Pose2D)> {
    records.iter().map(|r| (r.timestamp, r.corrected)).collect()
}
