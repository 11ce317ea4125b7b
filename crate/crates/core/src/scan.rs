//! Lidar preprocessing: spherical returns to a horizontal slice, the slice
//! flattened into minimum-range angular bins, and bins placed in the world.

use std::f64::consts::PI;

use crate::error::{Result, SlamError};
use crate::geometry::Pose2D;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beam {
    /// Slant range in meters. Equals the scan's `max_range` for no-returns.
    pub range: f64,
    pub azimuth: f64,
    pub elevation: f64,
    pub no_return: bool,
}

impl Beam {
    pub fn hit(range: f64, azimuth: f64, elevation: f64) -> Self {
        Self {
            range,
            azimuth,
            elevation,
            no_return: false,
        }
    }
}

/// One raw lidar sweep in the sensor frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarScan3D {
    pub beams: Vec<Beam>,
    pub timestamp: f64,
    pub min_range: f64,
    pub max_range: f64,
}

impl PolarScan3D {
    pub fn new(timestamp: f64, min_range: f64, max_range: f64) -> Self {
        Self {
            beams: Vec::new(),
            timestamp,
            min_range,
            max_range,
        }
    }

    pub fn push_return(&mut self, range: f64, azimuth: f64, elevation: f64) {
        self.beams.push(Beam::hit(range, azimuth, elevation));
    }

    pub fn push_no_return(&mut self, azimuth: f64, elevation: f64) {
        self.beams.push(Beam {
            range: self.max_range,
            azimuth,
            elevation,
            no_return: true,
        });
    }

    fn is_usable(&self, b: &Beam) -> bool {
        !b.no_return && b.range >= self.min_range && b.range <= self.max_range && b.range > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud3D {
    pub points: Vec<[f64; 3]>,
    pub timestamp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Sensor,
    World,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSet2D {
    pub points: Vec<[f64; 2]>,
    pub frame: Frame,
}

impl PointSet2D {
    pub fn new(points: Vec<[f64; 2]>, frame: Frame) -> Self {
        Self { points, frame }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Minimum-range scan over a uniform partition of `[-pi, pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredScan2D {
    ranges: Vec<f64>,
    valid: Vec<bool>,
    pub timestamp: f64,
}

impl FilteredScan2D {
    pub fn empty(bin_count: usize, timestamp: f64) -> Self {
        Self {
            ranges: vec![f64::INFINITY; bin_count],
            valid: vec![false; bin_count],
            timestamp,
        }
    }

    pub fn bin_count(&self) -> usize {
        self.ranges.len()
    }

    pub fn bin_width(&self) -> f64 {
        2.0 * PI / self.bin_count() as f64
    }

    pub fn bin_azimuth(&self, k: usize) -> f64 {
        -PI + (k as f64 + 0.5) * self.bin_width()
    }

    /// Index of the bin holding azimuth `a`; boundaries go to the lower bin.
    pub fn bin_of(&self, a: f64) -> usize {
        let n = self.bin_count();
        let k = ((a + PI) / (2.0 * PI) * n as f64).floor();
        (k.max(0.0) as usize).min(n - 1)
    }

    pub fn range(&self, k: usize) -> Option<f64> {
        self.valid[k].then_some(self.ranges[k])
    }

    pub fn set_range(&mut self, k: usize, r: f64) {
        self.ranges[k] = r;
        self.valid[k] = true;
    }

    pub fn clear_bin(&mut self, k: usize) {
        self.ranges[k] = f64::INFINITY;
        self.valid[k] = false;
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// `(azimuth, range)` of every valid bin in bin order.
    pub fn valid_bins(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.bin_count()).filter_map(move |k| self.range(k).map(|r| (self.bin_azimuth(k), r)))
    }

    /// Valid bins as Cartesian points in the sensor frame.
    pub fn sensor_points(&self) -> PointSet2D {
        let pts = self
            .valid_bins()
            .map(|(a, r)| {
                let (s, c) = a.sin_cos();
                [r * c, r * s]
            })
            .collect();
        PointSet2D::new(pts, Frame::Sensor)
    }
}

pub fn spherical_to_cartesian(scan: &PolarScan3D) -> Result<PointCloud3D> {
    let points: Vec<[f64; 3]> = scan
        .beams
        .iter()
        .filter(|b| scan.is_usable(b))
        .map(|b| {
            let (st, ct) = b.azimuth.sin_cos();
            let (sp, cp) = b.elevation.sin_cos();
            [b.range * ct * cp, b.range * st * cp, b.range * sp]
        })
        .collect();
    if points.is_empty() {
        return Err(SlamError::EmptyScan);
    }
    Ok(PointCloud3D {
        points,
        timestamp: scan.timestamp,
    })
}

/// Keep points with `z_min <= z <= z_max`, order preserved.
pub fn slice_horizontal(cloud: &PointCloud3D, z_min: f64, z_max: f64) -> PointCloud3D {
    debug_assert!(z_min < z_max);
    PointCloud3D {
        points: cloud
            .points
            .iter()
            .filter(|p| p[2] >= z_min && p[2] <= z_max)
            .copied()
            .collect(),
        timestamp: cloud.timestamp,
    }
}

pub fn flatten_to_polar(cloud: &PointCloud3D, bin_count: usize) -> FilteredScan2D {
    assert!(bin_count >= 1, "bin_count must be positive");
    let mut scan = FilteredScan2D::empty(bin_count, cloud.timestamp);
    for p in &cloud.points {
        let k = scan.bin_of(p[1].atan2(p[0]));
        let r = p[0].hypot(p[1]);
        if r < scan.ranges[k] {
            scan.set_range(k, r);
        }
    }
    scan
}

pub fn scan_to_world(scan: &FilteredScan2D, pose: &Pose2D) -> PointSet2D {
    let pts = scan
        .valid_bins()
        .map(|(a, r)| {
            let (s, c) = (a + pose.theta).sin_cos();
            [pose.x + r * c, pose.y + r * s]
        })
        .collect();
    PointSet2D::new(pts, Frame::World)
}

/// Slice band and binning applied to every incoming sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanFilter {
    pub z_min: f64,
    pub z_max: f64,
    /// Added to sensor-frame z before slicing.
    pub mount_height: f64,
    pub bin_count: usize,
}

impl Default for ScanFilter {
    fn default() -> Self {
        Self {
            z_min: 0.0,
            z_max: 0.2,
            mount_height: 0.0,
            bin_count: 360,
        }
    }
}

impl ScanFilter {
    pub fn apply(&self, scan: &PolarScan3D) -> Result<FilteredScan2D> {
        let mut cloud = spherical_to_cartesian(scan)?;
        if self.mount_height != 0.0 {
            for p in &mut cloud.points {
                p[2] += self.mount_height;
            }
        }
        let slice = slice_horizontal(&cloud, self.z_min, self.z_max);
        Ok(flatten_to_polar(&slice, self.bin_count))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: [f64; 3], b: [f64; 3]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    fn one_beam(r: f64, az: f64, el: f64) -> PolarScan3D {
        let mut s = PolarScan3D::new(0.0, 0.0, 100.0);
        s.push_return(r, az, el);
        s
    }

    #[test]
    fn spherical_axis_cases() {
        let c = spherical_to_cartesian(&one_beam(1.0, 0.0, 0.0)).unwrap();
        assert!(close(c.points[0], [1.0, 0.0, 0.0]));
        let c = spherical_to_cartesian(&one_beam(2.0, PI / 2.0, 0.0)).unwrap();
        assert!(close(c.points[0], [0.0, 2.0, 0.0]));
        let c = spherical_to_cartesian(&one_beam(1.0, 0.0, PI / 2.0)).unwrap();
        assert!(close(c.points[0], [0.0, 0.0, 1.0]));
    }

    #[test]
    fn all_no_return_is_error() {
        let mut s = PolarScan3D::new(0.0, 0.1, 30.0);
        s.push_no_return(0.0, 0.0);
        s.push_no_return(1.0, 0.0);
        assert!(matches!(spherical_to_cartesian(&s), Err(SlamError::EmptyScan)));
    }

    #[test]
    fn no_returns_are_dropped() {
        let mut s = PolarScan3D::new(0.0, 0.1, 30.0);
        s.push_no_return(0.0, 0.0);
        s.push_return(3.0, 0.5, 0.0);
        assert_eq!(spherical_to_cartesian(&s).unwrap().points.len(), 1);
    }

    #[test]
    fn slice_examples() {
        let cloud = PointCloud3D {
            points: vec![[1.0, 0.0, 0.1], [1.0, 0.0, 0.5]],
            timestamp: 0.0,
        };
        assert_eq!(slice_horizontal(&cloud, 0.0, 0.2).points, vec![[1.0, 0.0, 0.1]]);
        assert_eq!(slice_horizontal(&cloud, -1.0, 1.0), cloud);
        assert!(slice_horizontal(&cloud, 5.0, 6.0).points.is_empty());
    }

    #[test]
    fn flatten_keeps_minimum() {
        let cloud = PointCloud3D {
            points: vec![[3.0, 0.001, 0.0], [2.0, 0.001, 0.0]],
            timestamp: 0.0,
        };
        let s = flatten_to_polar(&cloud, 360);
        assert_eq!(s.valid_count(), 1);
        assert_eq!(s.range(s.bin_of(0.0005)), Some(2.0f64.hypot(0.001)));
    }

    #[test]
    fn flatten_singleton_and_empty() {
        let cloud = PointCloud3D {
            points: vec![[1.0, 0.0, 0.0]],
            timestamp: 0.0,
        };
        let s = flatten_to_polar(&cloud, 360);
        assert_eq!(s.valid_count(), 1);
        assert_eq!(s.valid_bins().next().unwrap().1, 1.0);
        let s = flatten_to_polar(&PointCloud3D::default(), 360);
        assert_eq!(s.valid_count(), 0);
    }

    #[test]
    fn bin_boundary_goes_low() {
        let s = FilteredScan2D::empty(4, 0.0);
        // boundaries at -pi, -pi/2, 0, pi/2
        assert_eq!(s.bin_of(0.0), 2);
        assert_eq!(s.bin_of(-PI / 2.0), 1);
        assert_eq!(s.bin_of(-PI), 0);
        assert_eq!(s.bin_of(PI), 3);
    }

    #[test]
    fn world_transform_examples() {
        let mut s = FilteredScan2D::empty(4, 0.0);
        s.set_range(2, 1.0);
        let a = s.bin_azimuth(2);
        let w = scan_to_world(&s, &Pose2D::identity());
        assert!((w.points[0][0] - a.cos()).abs() < 1e-12);
        assert!((w.points[0][1] - a.sin()).abs() < 1e-12);
        assert_eq!(w.frame, Frame::World);

        // bin center exactly at 0 for an odd partition
        let mut s = FilteredScan2D::empty(3, 0.0);
        s.set_range(1, 1.0);
        assert!(s.bin_azimuth(1).abs() < 1e-15);
        let w = scan_to_world(&s, &Pose2D::new(1.0, 2.0, 0.0));
        assert!((w.points[0][0] - 2.0).abs() < 1e-12 && (w.points[0][1] - 2.0).abs() < 1e-12);

        let pose = Pose2D::new(0.0, 0.0, PI / 2.0);
        let w = scan_to_world(&s, &pose);
        // independent rotation-matrix application
        let (sn, cs) = (PI / 2.0).sin_cos();
        let expected = [cs * 1.0 - sn * 0.0, sn * 1.0 + cs * 0.0];
        assert!((w.points[0][0] - expected[0]).abs() < 1e-12);
        assert!((w.points[0][1] - expected[1]).abs() < 1e-12);
        assert!((w.points[0][1] - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn spherical_round_trip(r in 0.1f64..50.0, az in -3.1f64..3.1, el in -1.5f64..1.5) {
            let c = spherical_to_cartesian(&one_beam(r, az, el)).unwrap().points[0];
            let r2 = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
            let az2 = c[1].atan2(c[0]);
            let el2 = (c[2] / r2).asin();
            prop_assert!((r2 - r).abs() <= 1e-9 * r);
            prop_assert!((az2 - az).abs() <= 1e-9 * az.abs().max(1.0));
            prop_assert!((el2 - el).abs() <= 1e-9 * el.abs().max(1.0));
        }

        #[test]
        fn flatten_is_lower_bound(pts in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 0..200), bins in 1usize..400) {
            let cloud = PointCloud3D { points: pts.iter().map(|&(x, y)| [x, y, 0.0]).collect(), timestamp: 0.0 };
            let s = flatten_to_polar(&cloud, bins);
            // brute force: independent per-bin minimum
            let mut expect = vec![f64::INFINITY; bins];
            for &(x, y) in &pts {
                let k = (((y.atan2(x) + PI) / (2.0 * PI) * bins as f64).floor() as usize).min(bins - 1);
                expect[k] = expect[k].min(x.hypot(y));
            }
            for (k, e) in expect.iter().enumerate() {
                match s.range(k) {
                    Some(r) => prop_assert_eq!(r, *e),
                    None => prop_assert!(e.is_infinite()),
                }
            }
        }

        #[test]
        fn world_then_inverse_recovers_sensor(x in -5.0f64..5.0, y in -5.0f64..5.0, t in -3.1f64..3.1,
                                              ranges in proptest::collection::vec(0.1f64..20.0, 36)) {
            let mut s = FilteredScan2D::empty(36, 0.0);
            for (k, r) in ranges.iter().enumerate() { s.set_range(k, *r); }
            let pose = Pose2D::new(x, y, t);
            let w = scan_to_world(&s, &pose);
            let inv = pose.inverse();
            for (pw, ps) in w.points.iter().zip(s.sensor_points().points) {
                let back = inv.transform_point(*pw);
                prop_assert!((back[0] - ps[0]).abs() < 1e-9 && (back[1] - ps[1]).abs() < 1e-9);
            }
        }

        #[test]
        fn slice_is_idempotent(zs in proptest::collection::vec(-2.0f64..2.0, 0..50), lo in -1.0f64..0.0, hi in 0.0f64..1.0) {
            let cloud = PointCloud3D { points: zs.iter().map(|&z| [1.0, 0.0, z]).collect(), timestamp: 0.0 };
            let once = slice_horizontal(&cloud, lo, hi);
            prop_assert_eq!(slice_horizontal(&once, lo, hi), once);
        }
    }
}
