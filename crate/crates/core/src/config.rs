//! Plain-text `key = value` configuration files. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, SlamError};
use crate::pipeline::{ControlMode, PipelineConfig};
use crate::sim::{rings, Layout, SimConfig};

/// Parsed `key = value` pairs with their source line numbers.
#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, (String, u64)>,
    source: String,
}

impl KeyValues {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(SlamError::Parse {
                    source_name: source.to_string(),
                    line: n as u64 + 1,
                    message: format!("expected `key = value`, got `{line}`"),
                });
            };
            let key = k.trim().to_string();
            if entries
                .insert(key.clone(), (v.trim().to_string(), n as u64 + 1))
                .is_some()
            {
                return Err(SlamError::Parse {
                    source_name: source.to_string(),
                    line: n as u64 + 1,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Self {
            entries,
            source: source.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.0.as_str())
    }

    fn err(&self, key: &str, message: String) -> SlamError {
        SlamError::Parse {
            source_name: self.source.clone(),
            line: self.entries.get(key).map(|e| e.1).unwrap_or(0),
            message,
        }
    }

    fn take<T: std::str::FromStr>(&mut self, key: &str, slot: &mut T) -> Result<()> {
        if let Some((v, line)) = self.entries.remove(key) {
            *slot = v.parse().map_err(|_| SlamError::Parse {
                source_name: self.source.clone(),
                line,
                message: format!("invalid value `{v}` for `{key}`"),
            })?;
        }
        Ok(())
    }

    fn take_deg(&mut self, key: &str, slot: &mut f64) -> Result<()> {
        let mut deg = slot.to_degrees();
        self.take(key, &mut deg)?;
        *slot = deg.to_radians();
        Ok(())
    }

    fn finish(self) -> Result<()> {
        if let Some((k, _)) = self.entries.iter().next() {
            return Err(self.err(k, format!("unknown key `{k}`")));
        }
        Ok(())
    }
}

impl PipelineConfig {
    pub fn from_key_values(mut kv: KeyValues) -> Result<Self> {
        let mut c = PipelineConfig::default();
        kv.take("slice_z_min", &mut c.filter.z_min)?;
        kv.take("slice_z_max", &mut c.filter.z_max)?;
        kv.take("mount_height", &mut c.filter.mount_height)?;
        kv.take("bin_count", &mut c.filter.bin_count)?;
        kv.take("resolution", &mut c.resolution)?;
        kv.take("initial_extent", &mut c.initial_extent)?;
        kv.take("grid_margin", &mut c.grid_margin)?;
        kv.take("log_odds_hit", &mut c.log_odds.hit)?;
        kv.take("log_odds_free", &mut c.log_odds.free)?;
        kv.take("log_odds_min", &mut c.log_odds.min)?;
        kv.take("log_odds_max", &mut c.log_odds.max)?;
        kv.take("occ_threshold", &mut c.log_odds.occ_threshold)?;
        kv.take("k_fraction", &mut c.matcher.k_fraction)?;
        kv.take("search_radius_xy", &mut c.matcher.search_radius_xy)?;
        kv.take_deg("search_radius_theta_deg", &mut c.matcher.search_radius_theta)?;
        kv.take("coarse_step_xy", &mut c.matcher.coarse_step_xy)?;
        kv.take_deg("coarse_step_theta_deg", &mut c.matcher.coarse_step_theta)?;
        kv.take("refine_levels", &mut c.matcher.refine_levels)?;
        kv.take("min_points", &mut c.matcher.min_points)?;
        kv.take("q_sigma_v", &mut c.q_sigma_v)?;
        kv.take("q_sigma_omega", &mut c.q_sigma_omega)?;
        kv.take("r_sigma_xy", &mut c.r_sigma_xy)?;
        kv.take_deg("r_sigma_theta_deg", &mut c.r_sigma_theta)?;
        kv.take("initial_variance", &mut c.initial_variance)?;
        kv.take("min_range", &mut c.min_range)?;
        kv.take("max_range", &mut c.max_range)?;
        let mut gate = String::from("auto");
        kv.take("score_gate", &mut gate)?;
        if gate != "auto" {
            c.score_gate = Some(
                gate.parse()
                    .map_err(|_| kv.err("score_gate", format!("invalid value `{gate}` for `score_gate`")))?,
            );
        }
        let mut mode = String::from("external");
        kv.take("control_mode", &mut mode)?;
        c.control_mode = match mode.as_str() {
            "external" => ControlMode::External,
            "constant_velocity" | "pseudo" => ControlMode::ConstantVelocity,
            other => return Err(kv.err("control_mode", format!("unknown control_mode `{other}`"))),
        };
        kv.finish()?;
        c.validate()?;
        Ok(c)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_key_values(KeyValues::parse(text, "config")?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_key_values(KeyValues::load(path)?)
    }

    /// Serialize to the same format [`PipelineConfig::parse`] reads.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("slice_z_min", self.filter.z_min.to_string());
        put("slice_z_max", self.filter.z_max.to_string());
        put("mount_height", self.filter.mount_height.to_string());
        put("bin_count", self.filter.bin_count.to_string());
        put("resolution", self.resolution.to_string());
        put("initial_extent", self.initial_extent.to_string());
        put("grid_margin", self.grid_margin.to_string());
        put("log_odds_hit", self.log_odds.hit.to_string());
        put("log_odds_free", self.log_odds.free.to_string());
        put("log_odds_min", self.log_odds.min.to_string());
        put("log_odds_max", self.log_odds.max.to_string());
        put("occ_threshold", self.log_odds.occ_threshold.to_string());
        put("k_fraction", self.matcher.k_fraction.to_string());
        put("search_radius_xy", self.matcher.search_radius_xy.to_string());
        put(
            "search_radius_theta_deg",
            self.matcher.search_radius_theta.to_degrees().to_string(),
        );
        put("coarse_step_xy", self.matcher.coarse_step_xy.to_string());
        put(
            "coarse_step_theta_deg",
            self.matcher.coarse_step_theta.to_degrees().to_string(),
        );
        put("refine_levels", self.matcher.refine_levels.to_string());
        put("min_points", self.matcher.min_points.to_string());
        put("q_sigma_v", self.q_sigma_v.to_string());
        put("q_sigma_omega", self.q_sigma_omega.to_string());
        put("r_sigma_xy", self.r_sigma_xy.to_string());
        put("r_sigma_theta_deg", self.r_sigma_theta.to_degrees().to_string());
        put("initial_variance", self.initial_variance.to_string());
        put("min_range", self.min_range.to_string());
        put("max_range", self.max_range.to_string());
        put(
            "score_gate",
            self.score_gate.map_or("auto".to_string(), |g| g.to_string()),
        );
        put(
            "control_mode",
            match self.control_mode {
                ControlMode::External => "external",
                ControlMode::ConstantVelocity => "constant_velocity",
            }
            .to_string(),
        );
        s
    }
}

impl SimConfig {
    pub fn from_key_values(mut kv: KeyValues) -> Result<Self> {
        let mut c = SimConfig::default();
        kv.take("width", &mut c.width)?;
        kv.take("height", &mut c.height)?;
        kv.take("speed", &mut c.speed)?;
        kv.take("sample_dt", &mut c.sample_dt)?;
        kv.take("laps", &mut c.laps)?;
        kv.take("corner_radius", &mut c.corner_radius)?;
        let mut layout = String::from("perimeter");
        kv.take("layout", &mut layout)?;
        c.layout = match layout.as_str() {
            "perimeter" => Layout::Perimeter,
            "orchard" => Layout::Orchard,
            other => return Err(kv.err("layout", format!("unknown layout `{other}`"))),
        };
        kv.take("cone_margin", &mut c.cone_margin)?;
        kv.take("cone_spacing", &mut c.cone_spacing)?;
        kv.take("cone_radius", &mut c.cone_radius)?;
        kv.take("rows", &mut c.rows)?;
        kv.take("trees_per_row", &mut c.trees_per_row)?;
        kv.take("row_spacing", &mut c.row_spacing)?;
        kv.take("tree_spacing", &mut c.tree_spacing)?;
        kv.take("jitter", &mut c.jitter)?;
        kv.take("odom_sigma_v", &mut c.odom_sigma_v)?;
        kv.take("odom_sigma_omega", &mut c.odom_sigma_omega)?;
        kv.take("seed", &mut c.seed)?;
        let s = &mut c.sensor;
        kv.take("azimuth_count", &mut s.azimuth_count)?;
        let mut ring_count = s.elevations.len();
        let mut half_span = s.elevations.iter().fold(0.0f64, |m, e| m.max(e.abs())).to_degrees();
        kv.take("rings", &mut ring_count)?;
        kv.take("ring_half_span_deg", &mut half_span)?;
        s.elevations = rings(ring_count, half_span.to_radians());
        kv.take("min_range", &mut s.min_range)?;
        kv.take("max_range", &mut s.max_range)?;
        kv.take("range_sigma", &mut s.range_sigma)?;
        kv.take("angle_sigma", &mut s.angle_sigma)?;
        kv.take("outlier_rate", &mut s.outlier_rate)?;
        kv.take("dropout_rate", &mut s.dropout_rate)?;
        kv.take("sensor_height", &mut s.mount_height)?;
        kv.take("ground_returns", &mut s.ground_returns)?;
        kv.finish()?;
        c.sensor.validate()?;
        if c.laps == 0 {
            return Err(SlamError::invalid("laps", "must be >= 1"));
        }
        Ok(c)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_key_values(KeyValues::parse(text, "config")?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_key_values(KeyValues::load(path)?)
    }

    /// Serialize to the same format [`SimConfig::parse`] reads. Elevation
    /// rings are written as count and half-span, so only evenly spaced
    /// ring sets round-trip.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("width", self.width.to_string());
        put("height", self.height.to_string());
        put("speed", self.speed.to_string());
        put("sample_dt", self.sample_dt.to_string());
        put("laps", self.laps.to_string());
        put("corner_radius", self.corner_radius.to_string());
        put(
            "layout",
            match self.layout {
                Layout::Perimeter => "perimeter",
                Layout::Orchard => "orchard",
            }
            .to_string(),
        );
        put("cone_margin", self.cone_margin.to_string());
        put("cone_spacing", self.cone_spacing.to_string());
        put("cone_radius", self.cone_radius.to_string());
        put("rows", self.rows.to_string());
        put("trees_per_row", self.trees_per_row.to_string());
        put("row_spacing", self.row_spacing.to_string());
        put("tree_spacing", self.tree_spacing.to_string());
        put("jitter", self.jitter.to_string());
        put("odom_sigma_v", self.odom_sigma_v.to_string());
        put("odom_sigma_omega", self.odom_sigma_omega.to_string());
        put("seed", self.seed.to_string());
        let sn = &self.sensor;
        put("azimuth_count", sn.azimuth_count.to_string());
        put("rings", sn.elevations.len().to_string());
        let half = sn.elevations.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        put("ring_half_span_deg", half.to_degrees().to_string());
        put("min_range", sn.min_range.to_string());
        put("max_range", sn.max_range.to_string());
        put("range_sigma", sn.range_sigma.to_string());
        put("angle_sigma", sn.angle_sigma.to_string());
        put("outlier_rate", sn.outlier_rate.to_string());
        put("dropout_rate", sn.dropout_rate.to_string());
        put("sensor_height", sn.mount_height.to_string());
        put("ground_returns", sn.ground_returns.to_string());
        s
    }
}
