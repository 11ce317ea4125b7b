//! Synthetic orchard worlds, closed-loop trajectories, and lidar sweeps with
//! ground truth, for desk-scale reproduction of field experiments.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::ekf::{integrate_motion, Control};
use crate::error::{Result, SlamError};
use crate::geometry::Pose2D;
use crate::par;
use crate::scan::PolarScan3D;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Circle {
    /// Distance along the unit ray `dir` from `origin` to the first
    /// boundary crossing ahead of the origin.
    pub fn ray_hit(&self, origin: [f64; 2], dir: [f64; 2]) -> Option<f64> {
        let w = [origin[0] - self.center[0], origin[1] - self.center[1]];
        let b = w[0] * dir[0] + w[1] * dir[1];
        let c = w[0] * w[0] + w[1] * w[1] - self.radius * self.radius;
        let disc = b * b - c;
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        let near = -b - sq;
        if near > 1e-12 {
            return Some(near);
        }
        let far = -b + sq;
        (far > 1e-12).then_some(far)
    }

    pub fn boundary_distance(&self, p: [f64; 2]) -> f64 {
        ((p[0] - self.center[0]).hypot(p[1] - self.center[1]) - self.radius).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    pub obstacles: Vec<Circle>,
    pub extent_min: [f64; 2],
    pub extent_max: [f64; 2],
}

impl WorldModel {
    pub fn from_obstacles(obstacles: Vec<Circle>, margin: f64) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for c in &obstacles {
            for ax in 0..2 {
                lo[ax] = lo[ax].min(c.center[ax] - c.radius);
                hi[ax] = hi[ax].max(c.center[ax] + c.radius);
            }
        }
        if obstacles.is_empty() {
            lo = [0.0; 2];
            hi = [0.0; 2];
        }
        Self {
            obstacles,
            extent_min: [lo[0] - margin, lo[1] - margin],
            extent_max: [hi[0] + margin, hi[1] + margin],
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|ax| p[ax] >= self.extent_min[ax] && p[ax] <= self.extent_max[ax])
    }

    pub fn nearest_boundary_distance(&self, p: [f64; 2]) -> f64 {
        self.obstacles
            .iter()
            .map(|c| c.boundary_distance(p))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Tree lattice: `rows` rows along x spaced `row_spacing` apart in y.
#[allow(clippy::too_many_arguments)]
pub fn generate_world(
    rows: usize,
    trees_per_row: usize,
    row_spacing: f64,
    tree_spacing: f64,
    trunk_radius: f64,
    jitter: f64,
    seed: u64,
) -> Result<WorldModel> {
    if rows == 0 || trees_per_row == 0 {
        return Err(SlamError::invalid("rows/trees_per_row", "must be >= 1"));
    }
    if !(row_spacing > 0.0 && tree_spacing > 0.0 && trunk_radius > 0.0) {
        return Err(SlamError::invalid("spacing/radius", "must be positive"));
    }
    if jitter < 0.0 {
        return Err(SlamError::invalid("jitter", "must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obstacles = Vec::with_capacity(rows * trees_per_row);
    for r in 0..rows {
        for t in 0..trees_per_row {
            let mut center = [t as f64 * tree_spacing, r as f64 * row_spacing];
            if jitter > 0.0 {
                let dx: f64 = rng.sample(StandardNormal);
                let dy: f64 = rng.sample(StandardNormal);
                center[0] += jitter * dx;
                center[1] += jitter * dy;
            }
            obstacles.push(Circle {
                center,
                radius: trunk_radius,
            });
        }
    }
    Ok(WorldModel::from_obstacles(obstacles, row_spacing.max(tree_spacing)))
}

/// Cones lining a rectangular course: one ring `margin` outside the
/// rectangle `[min, max]` and, when room remains, one ring `margin` inside.
pub fn perimeter_world(min: [f64; 2], max: [f64; 2], margin: f64, spacing: f64, radius: f64) -> Result<WorldModel> {
    if !(spacing > 0.0 && radius > 0.0 && margin > 0.0) {
        return Err(SlamError::invalid("cone spacing/radius/margin", "must be positive"));
    }
    let mut obstacles = Vec::new();
    let mut ring = |lo: [f64; 2], hi: [f64; 2]| {
        let (w, h) = (hi[0] - lo[0], hi[1] - lo[1]);
        if w <= 0.0 || h <= 0.0 {
            return;
        }
        let nx = (w / spacing).round().max(1.0) as usize;
        let ny = (h / spacing).round().max(1.0) as usize;
        let (sx, sy) = (w / nx as f64, h / ny as f64);
        for k in 0..nx {
            obstacles.push([lo[0] + k as f64 * sx, lo[1]]);
            obstacles.push([hi[0] - k as f64 * sx, hi[1]]);
        }
        for k in 0..ny {
            obstacles.push([hi[0], lo[1] + k as f64 * sy]);
            obstacles.push([lo[0], hi[1] - k as f64 * sy]);
        }
    };
    ring([min[0] - margin, min[1] - margin], [max[0] + margin, max[1] + margin]);
    ring([min[0] + margin, min[1] + margin], [max[0] - margin, max[1] - margin]);
    let obstacles = obstacles.into_iter().map(|center| Circle { center, radius }).collect();
    Ok(WorldModel::from_obstacles(obstacles, 2.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Ground-truth samples `(t, pose)`.
    pub poses: Vec<(f64, Pose2D)>,
    /// `controls[i]` starts at `poses[i].0` and carries the robot to `poses[i + 1]`.
    pub controls: Vec<(f64, Control)>,
}

impl Trajectory {
    pub fn path_length(&self) -> f64 {
        self.poses.windows(2).map(|w| w[0].1.distance(&w[1].1)).sum()
    }
}

/// Counter-clockwise laps of a `width x height` rectangle starting at the
/// origin heading +x, corners rounded to `corner_radius`. Poses are produced
/// by integrating the controls, so the two are consistent by construction.
pub fn rectangle_loop(
    width: f64,
    height: f64,
    speed: f64,
    sample_dt: f64,
    laps: usize,
    corner_radius: f64,
) -> Result<Trajectory> {
    for (name, v) in [
        ("width", width),
        ("height", height),
        ("speed", speed),
        ("sample_dt", sample_dt),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(SlamError::invalid(name, "must be positive"));
        }
    }
    if laps == 0 {
        return Err(SlamError::invalid("laps", "must be >= 1"));
    }
    let radius = corner_radius.clamp(0.0, 0.5 * width.min(height));
    let step = speed * sample_dt;
    let straight = |len: f64| -> Vec<Control> {
        if len <= 1e-12 {
            return Vec::new();
        }
        let n = (len / step).round().max(1.0) as usize;
        vec![
            Control {
                v: len / (n as f64 * sample_dt),
                omega: 0.0,
                dt: sample_dt
            };
            n
        ]
    };
    let corner = || -> Vec<Control> {
        let arc = FRAC_PI_2 * radius;
        let n = (arc / step).round().max(1.0) as usize;
        let t = n as f64 * sample_dt;
        vec![
            Control {
                v: arc / t,
                omega: FRAC_PI_2 / t,
                dt: sample_dt
            };
            n
        ]
    };
    let mut lap = Vec::new();
    for len in [width, height, width, height] {
        lap.extend(straight(len - 2.0 * radius));
        lap.extend(corner());
    }

    let mut poses = vec![(0.0, Pose2D::identity())];
    let mut controls = Vec::with_capacity(lap.len() * laps);
    let mut pose = Pose2D::identity();
    let mut k = 0usize;
    for _ in 0..laps {
        for u in &lap {
            let t = k as f64 * sample_dt;
            controls.push((t, *u));
            pose = integrate_motion(&pose, u);
            k += 1;
            poses.push((k as f64 * sample_dt, pose));
        }
    }
    Ok(Trajectory { poses, controls })
}

/// Perturb commanded controls into what wheel/leg odometry would report.
pub fn noisy_odometry(controls: &[(f64, Control)], sigma_v: f64, sigma_omega: f64, seed: u64) -> Vec<(f64, Control)> {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ 0x0D0_0E7E));
    controls
        .iter()
        .map(|&(t, u)| {
            let nv: f64 = rng.sample(StandardNormal);
            let nw: f64 = rng.sample(StandardNormal);
            (
                t,
                Control {
                    v: u.v + sigma_v * nv,
                    omega: u.omega + sigma_omega * nw,
                    dt: u.dt,
                },
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorSpec {
    pub azimuth_count: usize,
    /// Elevation of each ring, radians.
    pub elevations: Vec<f64>,
    pub min_range: f64,
    pub max_range: f64,
    pub range_sigma: f64,
    pub angle_sigma: f64,
    pub outlier_rate: f64,
    pub dropout_rate: f64,
    /// Sensor height above ground; used for ground returns.
    pub mount_height: f64,
    pub ground_returns: bool,
    pub seed: u64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            azimuth_count: 360,
            elevations: rings(16, 15f64.to_radians()),
            min_range: 0.1,
            max_range: 30.0,
            range_sigma: 0.03,
            angle_sigma: 0.0005,
            outlier_rate: 0.05,
            dropout_rate: 0.0,
            mount_height: 0.3,
            ground_returns: true,
            seed: 42,
        }
    }
}

/// `count` rings spread evenly over `[-half_span, half_span]`.
pub fn rings(count: usize, half_span: f64) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n)
            .map(|k| -half_span + 2.0 * half_span * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

impl SensorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.azimuth_count == 0 || self.elevations.is_empty() {
            return Err(SlamError::invalid("azimuth_count/rings", "must be >= 1"));
        }
        if !(self.max_range > 0.0 && self.min_range >= 0.0 && self.min_range < self.max_range) {
            return Err(SlamError::invalid("max_range", "need 0 <= min_range < max_range"));
        }
        if !(0.0..1.0).contains(&self.outlier_rate) {
            return Err(SlamError::invalid("outlier_rate", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(SlamError::invalid("dropout_rate", "must lie in [0, 1)"));
        }
        if self.range_sigma < 0.0 || self.angle_sigma < 0.0 {
            return Err(SlamError::invalid("noise sigma", "must be non-negative"));
        }
        if self.elevations.iter().any(|e| e.abs() >= FRAC_PI_2) {
            return Err(SlamError::invalid("rings", "elevations must lie in (-pi/2, pi/2)"));
        }
        Ok(())
    }

    pub fn beams_per_scan(&self) -> usize {
        self.azimuth_count * self.elevations.len()
    }

    /// Azimuth of column `k`; columns sit at the centers of a uniform
    /// partition of `[-pi, pi)`.
    pub fn azimuth(&self, k: usize) -> f64 {
        -PI + (k as f64 + 0.5) * 2.0 * PI / self.azimuth_count as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamKind {
    Obstacle,
    Ground,
    Outlier,
    Dropout,
    NoReturn,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn scan_seed(seed: u64, pose: &Pose2D) -> u64 {
    [pose.x, pose.y, pose.theta]
        .iter()
        .fold(splitmix(seed), |acc, v| splitmix(acc ^ v.to_bits()))
}

/// Simulate one sweep, also returning how each beam was generated.
pub fn simulate_scan_labeled(
    world: &WorldModel,
    pose: &Pose2D,
    spec: &SensorSpec,
    timestamp: f64,
) -> (PolarScan3D, Vec<BeamKind>) {
    let mut rng = ChaCha8Rng::seed_from_u64(scan_seed(spec.seed, pose));
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut scan = PolarScan3D::new(timestamp, spec.min_range, spec.max_range);
    let mut kinds = Vec::with_capacity(spec.beams_per_scan());
    let origin = [pose.x, pose.y];
    for k in 0..spec.azimuth_count {
        let az = spec.azimuth(k);
        let (s, c) = (az + pose.theta).sin_cos();
        let planar = world
            .obstacles
            .iter()
            .filter_map(|o| o.ray_hit(origin, [c, s]))
            .fold(f64::INFINITY, f64::min);
        for &el in &spec.elevations {
            // fixed draw count per beam keeps streams aligned across configs
            let u_drop: f64 = rng.random();
            let u_out: f64 = rng.random();
            let u_range: f64 = rng.random();
            let n_r = unit.sample(&mut rng);
            let n_az = unit.sample(&mut rng);
            let n_el = unit.sample(&mut rng);

            let mut slant = planar / el.cos();
            let mut kind = BeamKind::Obstacle;
            if spec.ground_returns && el < 0.0 && spec.mount_height > 0.0 {
                let g = spec.mount_height / (-el).sin();
                if g < slant {
                    slant = g;
                    kind = BeamKind::Ground;
                }
            }
            let rep_az = crate::geometry::wrap_angle(az + spec.angle_sigma * n_az);
            let rep_el = (el + spec.angle_sigma * n_el).clamp(-FRAC_PI_2, FRAC_PI_2);
            if u_drop < spec.dropout_rate {
                scan.push_no_return(rep_az, rep_el);
                kinds.push(BeamKind::Dropout);
                continue;
            }
            if u_out < spec.outlier_rate {
                let r = spec.min_range + u_range * (spec.max_range - spec.min_range);
                scan.push_return(r, rep_az, rep_el);
                kinds.push(BeamKind::Outlier);
                continue;
            }
            let r = slant + spec.range_sigma * n_r;
            if slant.is_finite() && r >= spec.min_range && r <= spec.max_range {
                scan.push_return(r, rep_az, rep_el);
                kinds.push(kind);
            } else {
                scan.push_no_return(rep_az, rep_el);
                kinds.push(BeamKind::NoReturn);
            }
        }
    }
    (scan, kinds)
}

pub fn simulate_scan(world: &WorldModel, pose: &Pose2D, spec: &SensorSpec, timestamp: f64) -> PolarScan3D {
    simulate_scan_labeled(world, pose, spec, timestamp).0
}

/// Everything a SLAM run and its evaluation need.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedRun {
    pub world: WorldModel,
    pub ground_truth: Vec<(f64, Pose2D)>,
    /// Odometry as reported to the estimator (noisy).
    pub controls: Vec<(f64, Control)>,
    pub scans: Vec<PolarScan3D>,
}

/// Full description of a simulated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub width: f64,
    pub height: f64,
    pub speed: f64,
    pub sample_dt: f64,
    pub laps: usize,
    pub corner_radius: f64,
    pub layout: Layout,
    pub cone_margin: f64,
    pub cone_spacing: f64,
    pub cone_radius: f64,
    pub rows: usize,
    pub trees_per_row: usize,
    pub row_spacing: f64,
    pub tree_spacing: f64,
    pub jitter: f64,
    pub odom_sigma_v: f64,
    pub odom_sigma_omega: f64,
    pub sensor: SensorSpec,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Cones lining the course inside and outside.
    Perimeter,
    /// Tree lattice from [`generate_world`].
    Orchard,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            width: 6.0,
            height: 2.0,
            speed: 0.5,
            sample_dt: 0.1,
            laps: 5,
            corner_radius: 0.25,
            layout: Layout::Perimeter,
            cone_margin: 0.5,
            cone_spacing: 1.0,
            cone_radius: 0.1,
            rows: 3,
            trees_per_row: 8,
            row_spacing: 3.0,
            tree_spacing: 1.5,
            jitter: 0.05,
            odom_sigma_v: 0.02,
            odom_sigma_omega: 0.02,
            sensor: SensorSpec::default(),
            seed: 42,
        }
    }
}

impl SimConfig {
    pub fn world(&self) -> Result<WorldModel> {
        match self.layout {
            Layout::Perimeter => {
                let r = self.corner_radius.clamp(0.0, 0.5 * self.width.min(self.height));
                perimeter_world(
                    [-r, 0.0],
                    [self.width - r, self.height],
                    self.cone_margin,
                    self.cone_spacing,
                    self.cone_radius,
                )
            }
            Layout::Orchard => {
                let mut w = generate_world(
                    self.rows,
                    self.trees_per_row,
                    self.row_spacing,
                    self.tree_spacing,
                    self.cone_radius,
                    self.jitter,
                    self.seed,
                )?;
                // shift so the course sits between the first two rows
                let dx = -0.5 * self.tree_spacing;
                let dy = -0.5 * self.row_spacing + 0.5 * self.height;
                for o in &mut w.obstacles {
                    o.center[0] += dx;
                    o.center[1] -= dy;
                }
                Ok(WorldModel::from_obstacles(
                    w.obstacles,
                    self.row_spacing.max(self.tree_spacing),
                ))
            }
        }
    }

    pub fn trajectory(&self) -> Result<Trajectory> {
        rectangle_loop(
            self.width,
            self.height,
            self.speed,
            self.sample_dt,
            self.laps,
            self.corner_radius,
        )
    }

    pub fn run(&self) -> Result<SimulatedRun> {
        self.sensor.validate()?;
        let world = self.world()?;
        let traj = self.trajectory()?;
        let mut spec = self.sensor.clone();
        spec.seed = splitmix(self.seed ^ spec.seed);
        let scans = par::map(&traj.poses, |(t, p)| simulate_scan(&world, p, &spec, *t));
        let controls = noisy_odometry(&traj.controls, self.odom_sigma_v, self.odom_sigma_omega, self.seed);
        Ok(SimulatedRun {
            world,
            ground_truth: traj.poses,
            controls,
            scans,
        })
    }
}
