//! 2D lidar SLAM for orchard and tree-row environments.
//!
//! Raw 3D sweeps are sliced into a horizontal band and flattened to a
//! minimum-range polar scan ([`scan`]). Each scan is aligned against the
//! distance transform of the current occupancy grid by minimizing a trimmed
//! directed Modified Hausdorff Distance ([`matcher`]), fused with a
//! differential-drive motion model in an EKF ([`ekf`]), and integrated into
//! a log-odds grid ([`grid`]). [`pipeline`] runs the online loop, [`sim`]
//! produces synthetic orchard logs with ground truth, and [`eval`] computes
//! pose and map accuracy metrics.

// Validation uses `!(x > 0.0)` so NaN is rejected along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod edt;
pub mod ekf;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod matcher;
pub mod par;
pub mod pipeline;
pub mod scan;
pub mod sim;

pub use ekf::{BeliefState, Control};
pub use error::{Result, SlamError};
pub use geometry::Pose2D;
pub use grid::{DistanceField, GridMeta, LogOddsParams, OccupancyGrid};
pub use matcher::{directed_mhd, match_scan, MatchParams, MatchResult};
pub use pipeline::{FrameRecord, PipelineConfig, SlamPipeline};
pub use scan::{FilteredScan2D, PointCloud3D, PointSet2D, PolarScan3D};
