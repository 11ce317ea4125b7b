//! Log-odds occupancy grid, ray integration of filtered scans, and the
//! distance field the scan matcher evaluates against.

use crate::edt;
use crate::error::{Result, SlamError};
use crate::geometry::Pose2D;
use crate::scan::{FilteredScan2D, Frame, PointSet2D};

/// Geometry of a regular grid. Cell `(i, j)` covers
/// `[origin + i*res, origin + (i+1)*res) x [origin + j*res, origin + (j+1)*res)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMeta {
    pub resolution: f64,
    pub origin: [f64; 2],
    pub width: usize,
    pub height: usize,
}

impl GridMeta {
    pub fn new(resolution: f64, origin: [f64; 2], width: usize, height: usize) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(SlamError::invalid("resolution", "must be positive"));
        }
        if width == 0 || height == 0 {
            return Err(SlamError::invalid("grid size", "width and height must be >= 1"));
        }
        Ok(Self {
            resolution,
            origin,
            width,
            height,
        })
    }

    /// Smallest grid anchored at `min` that covers the box.
    pub fn covering(resolution: f64, min: [f64; 2], max: [f64; 2]) -> Result<Self> {
        let w = (((max[0] - min[0]) / resolution) - 1e-9).ceil().max(1.0) as usize;
        let h = (((max[1] - min[1]) / resolution) - 1e-9).ceil().max(1.0) as usize;
        Self::new(resolution, min, w, h)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    pub fn world_to_cell(&self, p: [f64; 2]) -> Option<(usize, usize)> {
        let u = ((p[0] - self.origin[0]) / self.resolution).floor();
        let v = ((p[1] - self.origin[1]) / self.resolution).floor();
        if u < 0.0 || v < 0.0 || u >= self.width as f64 || v >= self.height as f64 {
            return None;
        }
        Some((u as usize, v as usize))
    }

    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.resolution,
            self.origin[1] + (j as f64 + 0.5) * self.resolution,
        ]
    }

    pub fn max_corner(&self) -> [f64; 2] {
        [
            self.origin[0] + self.width as f64 * self.resolution,
            self.origin[1] + self.height as f64 * self.resolution,
        ]
    }

    /// Continuous cell coordinates (cell `i` spans `[i, i+1)`).
    fn continuous(&self, p: [f64; 2]) -> [f64; 2] {
        [
            (p[0] - self.origin[0]) / self.resolution,
            (p[1] - self.origin[1]) / self.resolution,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogOddsParams {
    pub hit: f64,
    pub free: f64,
    pub min: f64,
    pub max: f64,
    pub occ_threshold: f64,
}

impl Default for LogOddsParams {
    fn default() -> Self {
        Self {
            hit: 0.85,
            free: -0.40,
            min: -4.0,
            max: 4.0,
            occ_threshold: 0.65,
        }
    }
}

impl LogOddsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.min < 0.0 && self.max > 0.0) {
            return Err(SlamError::invalid("log_odds_min/max", "need min < 0 < max"));
        }
        if !(self.occ_threshold > 0.0 && self.occ_threshold < 1.0) {
            return Err(SlamError::invalid("occ_threshold", "must lie in (0, 1)"));
        }
        if !(self.hit > 0.0 && self.free < 0.0) {
            return Err(SlamError::invalid("log_odds_hit/free", "need hit > 0 > free"));
        }
        Ok(())
    }

    pub fn occupied_log_odds(&self) -> f64 {
        logit(self.occ_threshold)
    }

    pub fn free_log_odds(&self) -> f64 {
        logit(1.0 - self.occ_threshold)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn probability(log_odds: f64) -> f64 {
    1.0 / (1.0 + (-log_odds).exp())
}

/// Ternary reading of a cell against the occupancy threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellState {
    Occupied,
    Free,
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub meta: GridMeta,
    cells: Vec<f64>,
    pub params: LogOddsParams,
    revision: u64,
}

impl OccupancyGrid {
    pub fn new(meta: GridMeta, params: LogOddsParams) -> Self {
        Self {
            cells: vec![0.0; meta.len()],
            meta,
            params,
            revision: 0,
        }
    }

    pub fn from_cells(meta: GridMeta, params: LogOddsParams, cells: Vec<f64>) -> Self {
        assert_eq!(cells.len(), meta.len());
        let cells = cells.into_iter().map(|c| c.clamp(params.min, params.max)).collect();
        Self {
            meta,
            cells,
            params,
            revision: 0,
        }
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cells[self.meta.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, log_odds: f64) {
        let k = self.meta.index(i, j);
        self.cells[k] = log_odds.clamp(self.params.min, self.params.max);
        self.revision += 1;
    }

    /// Bumped whenever the set of occupied cells may have changed.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn is_occupied_value(&self, v: f64) -> bool {
        v > self.params.occupied_log_odds()
    }

    pub fn state(&self, i: usize, j: usize) -> CellState {
        let v = self.get(i, j);
        if self.is_occupied_value(v) {
            CellState::Occupied
        } else if v < self.params.free_log_odds() {
            CellState::Free
        } else {
            CellState::Unknown
        }
    }

    pub fn occupancy_mask(&self) -> Vec<bool> {
        self.cells.iter().map(|&v| self.is_occupied_value(v)).collect()
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&v| self.is_occupied_value(v)).count()
    }

    /// Integrate one filtered scan taken at `pose`. Every beam contributes
    /// its own increments: a free step for each traversed cell short of the
    /// endpoint, a hit step for the endpoint. A cell's summed change is
    /// applied once and clamped.
    pub fn update(&mut self, pose: &Pose2D, scan: &FilteredScan2D) -> Result<()> {
        let start = [pose.x, pose.y];
        if !pose.is_finite() || self.meta.world_to_cell(start).is_none() {
            return Err(SlamError::PoseOutsideGrid { x: pose.x, y: pose.y });
        }
        let p = self.params;
        let mut deltas: Vec<(usize, f64)> = Vec::new();
        for (a, r) in scan.valid_bins() {
            let (s, c) = (a + pose.theta).sin_cos();
            let end = [pose.x + r * c, pose.y + r * s];
            let end_cell = self.meta.world_to_cell(end);
            traverse(&self.meta, start, end, |i, j| {
                if Some((i, j)) != end_cell {
                    deltas.push((self.meta.index(i, j), p.free));
                }
            });
            if let Some((i, j)) = end_cell {
                deltas.push((self.meta.index(i, j), p.hit));
            }
        }
        // sort by cell so the per-cell sums are order independent
        deltas.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut changed = false;
        for group in deltas.chunk_by(|a, b| a.0 == b.0) {
            let k = group[0].0;
            let sum: f64 = group.iter().map(|d| d.1).sum();
            let old = self.cells[k];
            self.cells[k] = (old + sum).clamp(p.min, p.max);
            changed |= self.is_occupied_value(old) != self.is_occupied_value(self.cells[k]);
        }
        if changed {
            self.revision += 1;
        }
        Ok(())
    }

    /// Cell centers of every occupied cell, world frame.
    pub fn occupied_cells(&self) -> PointSet2D {
        let mut pts = Vec::new();
        for j in 0..self.meta.height {
            for i in 0..self.meta.width {
                if self.is_occupied_value(self.get(i, j)) {
                    pts.push(self.meta.cell_center(i, j));
                }
            }
        }
        PointSet2D::new(pts, Frame::World)
    }

    pub fn is_blank(&self) -> bool {
        self.cells.iter().all(|&v| v == 0.0)
    }

    /// Grow the grid so the box `[min, max]` fits. Existing cells keep their
    /// world coordinates; new cells start at log-odds 0.
    pub fn ensure_capacity(&mut self, min: [f64; 2], max: [f64; 2]) {
        let m = self.meta;
        if self.is_blank() {
            let lo = [min[0].min(m.origin[0]), min[1].min(m.origin[1])];
            let top = m.max_corner();
            let hi = [max[0].max(top[0]), max[1].max(top[1])];
            let fits = lo == m.origin && hi == top;
            if !fits {
                if let Ok(meta) = GridMeta::covering(m.resolution, min, max) {
                    if !meta.is_empty() {
                        self.meta = meta;
                        self.cells = vec![0.0; meta.len()];
                        self.revision += 1;
                    }
                }
            }
            return;
        }
        let res = m.resolution;
        let grow = |d: f64| -> usize {
            if d > 0.0 {
                ((d / res) - 1e-9).ceil() as usize
            } else {
                0
            }
        };
        let top = m.max_corner();
        let left = grow(m.origin[0] - min[0]);
        let bottom = grow(m.origin[1] - min[1]);
        let right = grow(max[0] - top[0]);
        let up = grow(max[1] - top[1]);
        if left + bottom + right + up == 0 {
            return;
        }
        let width = m.width + left + right;
        let height = m.height + bottom + up;
        let mut cells = vec![0.0; width * height];
        for j in 0..m.height {
            let src = &self.cells[j * m.width..(j + 1) * m.width];
            let dst = (j + bottom) * width + left;
            cells[dst..dst + m.width].copy_from_slice(src);
        }
        self.meta = GridMeta {
            resolution: res,
            origin: [m.origin[0] - left as f64 * res, m.origin[1] - bottom as f64 * res],
            width,
            height,
        };
        self.cells = cells;
        self.revision += 1;
    }

    pub fn distance_field(&self) -> Result<DistanceField> {
        DistanceField::from_grid(self)
    }
}

/// Visit every cell the segment `a -> b` crosses, in order, stopping when the
/// segment leaves the grid. Cells before entering the grid are skipped.
pub fn traverse<F: FnMut(usize, usize)>(meta: &GridMeta, a: [f64; 2], b: [f64; 2], mut visit: F) {
    let p0 = meta.continuous(a);
    let p1 = meta.continuous(b);
    let mut cell = [p0[0].floor() as i64, p0[1].floor() as i64];
    let end = [p1[0].floor() as i64, p1[1].floor() as i64];
    let d = [p1[0] - p0[0], p1[1] - p0[1]];
    let mut step = [0i64; 2];
    let mut t_max = [f64::INFINITY; 2];
    let mut t_delta = [f64::INFINITY; 2];
    for ax in 0..2 {
        if d[ax] > 0.0 {
            step[ax] = 1;
            t_max[ax] = ((cell[ax] + 1) as f64 - p0[ax]) / d[ax];
            t_delta[ax] = 1.0 / d[ax];
        } else if d[ax] < 0.0 {
            step[ax] = -1;
            t_max[ax] = (p0[ax] - cell[ax] as f64) / -d[ax];
            t_delta[ax] = -1.0 / d[ax];
        }
    }
    let (w, h) = (meta.width as i64, meta.height as i64);
    let inside = |c: [i64; 2]| c[0] >= 0 && c[1] >= 0 && c[0] < w && c[1] < h;
    let max_steps = (end[0] - cell[0]).abs() + (end[1] - cell[1]).abs();
    let mut entered = false;
    for n in 0..=max_steps {
        if inside(cell) {
            entered = true;
            visit(cell[0] as usize, cell[1] as usize);
        } else if entered {
            return;
        }
        if cell == end || n == max_steps {
            return;
        }
        if t_max[0] < t_max[1] {
            cell[0] += step[0];
            t_max[0] += t_delta[0];
        } else {
            cell[1] += step[1];
            t_max[1] += t_delta[1];
        }
    }
}

/// Euclidean distance (meters) from every cell center to the nearest
/// occupied cell center. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    pub meta: GridMeta,
    values: Vec<f64>,
}

impl DistanceField {
    pub fn from_grid(grid: &OccupancyGrid) -> Result<Self> {
        Self::from_mask(grid.meta, &grid.occupancy_mask())
    }

    pub fn from_mask(meta: GridMeta, occupied: &[bool]) -> Result<Self> {
        let sq = edt::squared_edt(occupied, meta.width, meta.height).ok_or(SlamError::NoOccupiedCells)?;
        let values = sq.into_iter().map(|d| (d as f64).sqrt() * meta.resolution).collect();
        Ok(Self { meta, values })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.meta.index(i, j)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Bilinear interpolation between the four surrounding cell centers.
    /// Points beyond the outermost centers clamp to the border.
    pub fn sample(&self, p: [f64; 2]) -> f64 {
        let m = &self.meta;
        let u = ((p[0] - m.origin[0]) / m.resolution - 0.5).clamp(0.0, (m.width - 1) as f64);
        let v = ((p[1] - m.origin[1]) / m.resolution - 0.5).clamp(0.0, (m.height - 1) as f64);
        let i0 = (u.floor() as usize).min(m.width.saturating_sub(2));
        let j0 = (v.floor() as usize).min(m.height.saturating_sub(2));
        let i1 = (i0 + 1).min(m.width - 1);
        let j1 = (j0 + 1).min(m.height - 1);
        let fx = u - i0 as f64;
        let fy = v - j0 as f64;
        let w = m.width;
        let a = self.values[j0 * w + i0];
        let b = self.values[j0 * w + i1];
        let c = self.values[j1 * w + i0];
        let d = self.values[j1 * w + i1];
        let bottom = a + (b - a) * fx;
        let top = c + (d - c) * fx;
        bottom + (top - bottom) * fy
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan::FilteredScan2D;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn meta(w: usize, h: usize) -> GridMeta {
        GridMeta::new(0.1, [0.0, 0.0], w, h).unwrap()
    }

    #[test]
    fn world_to_cell_cases() {
        let m = meta(10, 10);
        assert_eq!(m.world_to_cell([0.05, 0.05]), Some((0, 0)));
        assert_eq!(m.world_to_cell([0.25, 0.5]), Some((2, 5)));
        assert_eq!(m.world_to_cell([-0.01, 0.0]), None);
        assert_eq!(m.world_to_cell([1.0, 0.5]), None);
        let m = GridMeta::new(0.25, [0.0, 0.0], 8, 8).unwrap();
        assert_eq!(m.world_to_cell([0.5, 0.75]), Some((2, 3)));
    }

    #[test]
    fn invalid_meta_rejected() {
        assert!(GridMeta::new(0.0, [0.0, 0.0], 1, 1).is_err());
        assert!(GridMeta::new(0.1, [0.0, 0.0], 0, 1).is_err());
    }

    fn single_beam_scan(r: f64) -> FilteredScan2D {
        // three bins; the middle one is centered on azimuth 0
        let mut s = FilteredScan2D::empty(3, 0.0);
        s.set_range(1, r);
        s
    }

    #[test]
    fn single_beam_corridor() {
        let mut g = OccupancyGrid::new(meta(20, 5), LogOddsParams::default());
        let pose = Pose2D::new(0.05, 0.25, 0.0);
        g.update(&pose, &single_beam_scan(1.0)).unwrap();
        let p = g.params;
        assert_eq!(g.get(10, 2), p.hit);
        for i in 0..10 {
            assert_eq!(g.get(i, 2), p.free, "cell {i}");
        }
        assert_eq!(g.get(11, 2), 0.0);
        assert_eq!(g.get(5, 1), 0.0);
    }

    #[test]
    fn repeated_scan_doubles_increments() {
        let mut g = OccupancyGrid::new(meta(20, 20), LogOddsParams::default());
        let pose = Pose2D::new(1.03, 0.97, 0.3);
        let mut s = FilteredScan2D::empty(16, 0.0);
        for k in (0..16).step_by(3) {
            s.set_range(k, 0.6 + 0.02 * k as f64);
        }
        let fresh = g.clone();
        g.update(&pose, &s).unwrap();
        let once: Vec<f64> = g.cells().iter().zip(fresh.cells()).map(|(a, b)| a - b).collect();
        g.update(&pose, &s).unwrap();
        for (k, (v, d)) in g.cells().iter().zip(&once).enumerate() {
            let expect = (2.0 * d).clamp(-4.0, 4.0);
            assert!((v - expect).abs() < 1e-12, "cell {k}: {v} vs {expect}");
        }
    }

    #[test]
    fn empty_scan_leaves_grid_unchanged() {
        let mut g = OccupancyGrid::new(meta(10, 10), LogOddsParams::default());
        let before = g.clone();
        g.update(&Pose2D::new(0.5, 0.5, 0.0), &FilteredScan2D::empty(360, 0.0))
            .unwrap();
        assert_eq!(g.cells(), before.cells());
    }

    #[test]
    fn pose_outside_grid_is_error() {
        let mut g = OccupancyGrid::new(meta(10, 10), LogOddsParams::default());
        let r = g.update(&Pose2D::new(-1.0, 0.5, 0.0), &single_beam_scan(1.0));
        assert!(matches!(r, Err(SlamError::PoseOutsideGrid { .. })));
    }

    #[test]
    fn occupied_cells_cases() {
        let mut g = OccupancyGrid::new(meta(10, 10), LogOddsParams::default());
        assert!(g.occupied_cells().is_empty());
        g.set(3, 4, 4.0);
        let occ = g.occupied_cells();
        assert_eq!(occ.len(), 1);
        assert!((occ.points[0][0] - 0.35).abs() < 1e-12 && (occ.points[0][1] - 0.45).abs() < 1e-12);
    }

    #[test]
    fn occupied_cells_equal_rasterized_endpoints() {
        let mut g = OccupancyGrid::new(
            GridMeta::new(0.05, [-3.0, -3.0], 120, 120).unwrap(),
            LogOddsParams::default(),
        );
        let pose = Pose2D::new(0.01, -0.02, 0.4);
        let mut s = FilteredScan2D::empty(360, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in (0..360).step_by(7) {
            s.set_range(k, rng.random_range(1.0..2.5));
        }
        g.update(&pose, &s).unwrap();
        let mut expect: Vec<(usize, usize)> = s
            .valid_bins()
            .map(|(a, r)| {
                let x = pose.x + r * (a + pose.theta).cos();
                let y = pose.y + r * (a + pose.theta).sin();
                (((x + 3.0) / 0.05).floor() as usize, ((y + 3.0) / 0.05).floor() as usize)
            })
            .collect();
        expect.sort();
        expect.dedup();
        let mut got: Vec<(usize, usize)> = g
            .occupied_cells()
            .points
            .iter()
            .map(|p| g.meta.world_to_cell(*p).unwrap())
            .collect();
        got.sort();
        assert_eq!(got, expect);
    }

    #[test]
    fn traverse_visits_each_crossed_cell_once() {
        let m = meta(50, 50);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a = [rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)];
            let b = [rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)];
            let mut cells = Vec::new();
            traverse(&m, a, b, |i, j| cells.push((i, j)));
            assert_eq!(cells.first(), m.world_to_cell(a).as_ref());
            assert_eq!(cells.last(), m.world_to_cell(b).as_ref());
            for w in cells.windows(2) {
                let d = w[0].0.abs_diff(w[1].0) + w[0].1.abs_diff(w[1].1);
                assert_eq!(d, 1);
            }
            let mut sorted = cells.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), cells.len());
            // dense sampling along the segment never lands outside the visited set
            for t in 0..=400 {
                let t = t as f64 / 400.0;
                let p = [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t];
                let c = m.world_to_cell(p).unwrap();
                let near = cells.iter().any(|&(i, j)| i.abs_diff(c.0) + j.abs_diff(c.1) == 0);
                let on_line = |v: f64| ((v / 0.1) - (v / 0.1).round()).abs() < 1e-6;
                assert!(near || on_line(p[0]) || on_line(p[1]));
            }
        }
    }

    #[test]
    fn ensure_capacity_cases() {
        let mut g = OccupancyGrid::new(meta(10, 10), LogOddsParams::default());
        g.set(2, 3, 3.0);
        let before = g.clone();
        g.ensure_capacity([0.1, 0.1], [0.9, 0.9]);
        assert_eq!(g, before);

        g.ensure_capacity([0.1, 0.1], [2.0, 0.9]);
        assert_eq!(g.meta.width, 10 + (1.0f64 / 0.1).round() as usize);
        assert_eq!(g.meta.height, 10);
        for j in 0..10 {
            for i in 0..10 {
                let c = before.meta.cell_center(i, j);
                let (a, b) = g.meta.world_to_cell(c).unwrap();
                assert_eq!(g.get(a, b), before.get(i, j));
            }
        }

        let mut e = OccupancyGrid::new(meta(1, 1), LogOddsParams::default());
        e.ensure_capacity([-2.0, -1.0], [3.0, 1.0]);
        assert_eq!(e.meta.origin, [-2.0, -1.0]);
        assert_eq!((e.meta.width, e.meta.height), (50, 20));
    }

    #[test]
    fn distance_field_basic() {
        let mut g = OccupancyGrid::new(meta(10, 10), LogOddsParams::default());
        assert!(matches!(g.distance_field(), Err(SlamError::NoOccupiedCells)));
        g.set(2, 3, 4.0);
        let f = g.distance_field().unwrap();
        assert!((f.get(5, 3) - 0.3).abs() < 1e-12);
        assert_eq!(f.get(2, 3), 0.0);
        assert_eq!(f.sample(g.meta.cell_center(2, 3)), 0.0);
    }

    proptest! {
        #[test]
        fn clamping_holds(updates in proptest::collection::vec((0.0f64..std::f64::consts::TAU, 0.2f64..1.5, 0.2f64..1.8, 0.2f64..1.8), 1..30)) {
            let mut g = OccupancyGrid::new(meta(20, 20), LogOddsParams::default());
            for (t, r, x, y) in updates {
                let mut s = FilteredScan2D::empty(36, 0.0);
                for k in 0..36 { s.set_range(k, r); }
                g.update(&Pose2D::new(x, y, t), &s).unwrap();
            }
            prop_assert!(g.cells().iter().all(|v| (-4.0..=4.0).contains(v)));
        }

        #[test]
        fn ensure_capacity_keeps_occupied(cells in proptest::collection::vec((0usize..10, 0usize..10), 1..10),
                                          lo in (-2.0f64..0.5, -2.0f64..0.5), hi in (0.5f64..3.0, 0.5f64..3.0)) {
            let mut g = OccupancyGrid::new(meta(10, 10), LogOddsParams::default());
            for (i, j) in cells { g.set(i, j, 4.0); }
            let before = g.occupied_cells();
            g.ensure_capacity([lo.0, lo.1], [hi.0, hi.1]);
            let after = g.occupied_cells();
            for p in before.points {
                prop_assert!(after.points.iter().any(|q| (q[0] - p[0]).abs() < 1e-9 && (q[1] - p[1]).abs() < 1e-9));
            }
        }

        #[test]
        fn distance_field_is_lipschitz(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (w, h) = (rng.random_range(2..40), rng.random_range(2..40));
            let m = GridMeta::new(0.05, [0.0, 0.0], w, h).unwrap();
            let mut mask: Vec<bool> = (0..w * h).map(|_| rng.random_bool(0.05)).collect();
            mask[0] = true;
            let f = DistanceField::from_mask(m, &mask).unwrap();
            let lim = 0.05 * 2f64.sqrt() + 1e-12;
            for j in 0..h { for i in 0..w {
                if i + 1 < w { prop_assert!((f.get(i, j) - f.get(i + 1, j)).abs() <= lim); }
                if j + 1 < h { prop_assert!((f.get(i, j) - f.get(i, j + 1)).abs() <= lim); }
                if i + 1 < w && j + 1 < h { prop_assert!((f.get(i, j) - f.get(i + 1, j + 1)).abs() <= lim); }
                prop_assert_eq!(f.get(i, j) == 0.0, mask[m.index(i, j)]);
            }}
        }
    }
}
