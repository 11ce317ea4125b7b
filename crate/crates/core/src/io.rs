//! File formats: scan/control/trajectory/world CSVs and PGM map export.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::ekf::Control;
use crate::error::{Result, SlamError};
use crate::geometry::Pose2D;
use crate::grid::{GridMeta, LogOddsParams, OccupancyGrid};
use crate::pipeline::FrameRecord;
use crate::scan::PolarScan3D;
use crate::sim::{Circle, WorldModel};

fn parse_err(source: &str, line: u64, message: impl Into<String>) -> SlamError {
    SlamError::Parse {
        source_name: source.to_string(),
        line,
        message: message.into(),
    }
}

fn csv_err(source: &str, e: csv::Error) -> SlamError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.kind() {
        csv::ErrorKind::Io(_) => SlamError::Io(std::io::Error::other(e.to_string())),
        _ => parse_err(source, line, e.to_string()),
    }
}

/// Deserialize every row of a headed CSV, with line numbers on failure.
fn read_rows<T, R>(reader: R, source: &str) -> Result<Vec<T>>
where
    T: for<'de> Deserialize<'de>,
    R: Read,
{
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_err(source, e))?.clone();
    if headers.is_empty() {
        return Err(parse_err(source, 1, "missing header row"));
    }
    let mut out = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map(|p| p.line()).unwrap_or(0);
                let row: T = record
                    .deserialize(Some(&headers))
                    .map_err(|e| parse_err(source, line, e.to_string()))?;
                out.push(row);
            }
            Err(e) => return Err(csv_err(source, e)),
        }
    }
    Ok(out)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

#[derive(Deserialize)]
struct BeamRow {
    t: f64,
    r: f64,
    theta: f64,
    phi: f64,
}

/// Read a `t,r,theta,phi` scan log; a new sweep starts whenever `t` changes.
pub fn read_scan_log<R: Read>(reader: R, source: &str, min_range: f64, max_range: f64) -> Result<Vec<PolarScan3D>> {
    let rows: Vec<BeamRow> = read_rows(reader, source)?;
    let mut scans: Vec<PolarScan3D> = Vec::new();
    for (n, row) in rows.iter().enumerate() {
        if ![row.t, row.r, row.theta, row.phi].iter().all(|v| v.is_finite()) {
            return Err(parse_err(source, n as u64 + 2, "non-finite value"));
        }
        if scans.last().is_none_or(|s| s.timestamp != row.t) {
            scans.push(PolarScan3D::new(row.t, min_range, max_range));
        }
        let scan = scans.last_mut().unwrap();
        let az = crate::geometry::wrap_angle(row.theta);
        if row.r <= 0.0 {
            scan.push_no_return(az, row.phi);
        } else {
            scan.push_return(row.r, az, row.phi);
        }
    }
    if scans.is_empty() {
        return Err(SlamError::EmptyLog);
    }
    Ok(scans)
}

pub fn load_scan_log(path: &Path, min_range: f64, max_range: f64) -> Result<Vec<PolarScan3D>> {
    read_scan_log(open(path)?, &path.display().to_string(), min_range, max_range)
}

pub fn write_scan_log<W: Write>(mut w: W, scans: &[PolarScan3D]) -> Result<()> {
    writeln!(w, "t,r,theta,phi")?;
    for s in scans {
        for b in &s.beams {
            let r = if b.no_return { 0.0 } else { b.range };
            writeln!(w, "{:.6},{:.5},{:.6},{:.6}", s.timestamp, r, b.azimuth, b.elevation)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct ControlRow {
    t: f64,
    v: f64,
    omega: f64,
}

/// Read a `t,v,omega` control log. Each command holds until the next one;
/// the last holds for the preceding interval.
pub fn read_control_log<R: Read>(reader: R, source: &str) -> Result<Vec<(f64, Control)>> {
    let rows: Vec<ControlRow> = read_rows(reader, source)?;
    let mut out = Vec::with_capacity(rows.len());
    for (k, row) in rows.iter().enumerate() {
        let dt = match rows.get(k + 1) {
            Some(next) => next.t - row.t,
            None if k > 0 => row.t - rows[k - 1].t,
            None => 0.1,
        };
        let u = Control::new(row.v, row.omega, dt).map_err(|e| parse_err(source, k as u64 + 2, e.to_string()))?;
        out.push((row.t, u));
    }
    if out.is_empty() {
        return Err(SlamError::EmptyLog);
    }
    Ok(out)
}

pub fn load_control_log(path: &Path) -> Result<Vec<(f64, Control)>> {
    read_control_log(open(path)?, &path.display().to_string())
}

pub fn write_control_log<W: Write>(mut w: W, controls: &[(f64, Control)]) -> Result<()> {
    writeln!(w, "t,v,omega")?;
    for (t, u) in controls {
        writeln!(w, "{:.6},{},{}", t, u.v, u.omega)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory<W: Write>(mut w: W, records: &[FrameRecord]) -> Result<()> {
    writeln!(w, "t,x,y,theta,score,fallback")?;
    for r in records {
        let score = r.matched.map_or(f64::NAN, |m| m.1);
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.timestamp, r.corrected.x, r.corrected.y, r.corrected.theta, score, r.fallback as u8
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_poses<W: Write>(mut w: W, poses: &[(f64, Pose2D)]) -> Result<()> {
    writeln!(w, "t,x,y,theta")?;
    for (t, p) in poses {
        writeln!(w, "{},{},{},{}", t, p.x, p.y, p.theta)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct PoseRow {
    t: f64,
    x: f64,
    y: f64,
    theta: f64,
}

/// Read any CSV with `t,x,y,theta` columns (extra columns ignored).
pub fn read_poses<R: Read>(reader: R, source: &str) -> Result<Vec<(f64, Pose2D)>> {
    let rows: Vec<PoseRow> = read_rows(reader, source)?;
    let mut out: Vec<(f64, Pose2D)> = Vec::with_capacity(rows.len());
    for (k, r) in rows.into_iter().enumerate() {
        if out.last().is_some_and(|(t, _)| *t >= r.t) {
            return Err(parse_err(source, k as u64 + 2, "timestamps must increase strictly"));
        }
        out.push((r.t, Pose2D::new(r.x, r.y, r.theta)));
    }
    if out.is_empty() {
        return Err(SlamError::EmptyLog);
    }
    Ok(out)
}

pub fn load_poses(path: &Path) -> Result<Vec<(f64, Pose2D)>> {
    read_poses(open(path)?, &path.display().to_string())
}

pub fn write_world<W: Write>(mut w: W, world: &WorldModel) -> Result<()> {
    writeln!(w, "x,y,radius")?;
    for c in &world.obstacles {
        writeln!(w, "{},{},{}", c.center[0], c.center[1], c.radius)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct CircleRow {
    x: f64,
    y: f64,
    radius: f64,
}

pub fn read_world<R: Read>(reader: R, source: &str) -> Result<WorldModel> {
    let rows: Vec<CircleRow> = read_rows(reader, source)?;
    let mut obstacles = Vec::with_capacity(rows.len());
    for (k, r) in rows.into_iter().enumerate() {
        if !(r.radius > 0.0) {
            return Err(parse_err(source, k as u64 + 2, "radius must be positive"));
        }
        obstacles.push(Circle {
            center: [r.x, r.y],
            radius: r.radius,
        });
    }
    Ok(WorldModel::from_obstacles(obstacles, 1.0))
}

pub fn load_world(path: &Path) -> Result<WorldModel> {
    read_world(open(path)?, &path.display().to_string())
}

pub fn write_metrics<W: Write>(mut w: W, rows: &[(String, f64)]) -> Result<()> {
    writeln!(w, "name,value")?;
    for (k, v) in rows {
        writeln!(w, "{k},{v}")?;
    }
    w.flush()?;
    Ok(())
}

pub const PGM_OCCUPIED: u8 = 0;
pub const PGM_FREE: u8 = 255;
pub const PGM_UNKNOWN: u8 = 127;

/// Sidecar path next to a PGM map (`map.pgm` -> `map.meta`).
pub fn sidecar_path(pgm: &Path) -> PathBuf {
    pgm.with_extension("meta")
}

/// 8-bit binary PGM, top image row = largest y.
pub fn write_pgm<W: Write>(mut w: W, grid: &OccupancyGrid) -> Result<()> {
    let m = grid.meta;
    write!(w, "P5\n{} {}\n255\n", m.width, m.height)?;
    let mut row = vec![0u8; m.width];
    for j in (0..m.height).rev() {
        for (i, px) in row.iter_mut().enumerate() {
            *px = match grid.state(i, j) {
                crate::grid::CellState::Occupied => PGM_OCCUPIED,
                crate::grid::CellState::Free => PGM_FREE,
                crate::grid::CellState::Unknown => PGM_UNKNOWN,
            };
        }
        w.write_all(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sidecar<W: Write>(mut w: W, meta: &GridMeta) -> Result<()> {
    writeln!(w, "resolution = {}", meta.resolution)?;
    writeln!(w, "origin_x = {}", meta.origin[0])?;
    writeln!(w, "origin_y = {}", meta.origin[1])?;
    w.flush()?;
    Ok(())
}

pub fn save_map(path: &Path, grid: &OccupancyGrid) -> Result<()> {
    write_pgm(create(path)?, grid)?;
    write_sidecar(create(&sidecar_path(path))?, &grid.meta)
}

fn pgm_token<R: BufRead>(r: &mut R, source: &str) -> Result<String> {
    let mut tok = String::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            break;
        }
        let c = byte[0] as char;
        if c == '#' && tok.is_empty() {
            let mut skip = String::new();
            r.read_line(&mut skip)?;
            continue;
        }
        if c.is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(c);
    }
    if tok.is_empty() {
        return Err(parse_err(source, 0, "truncated PGM header"));
    }
    Ok(tok)
}

/// Load a PGM map and its sidecar. Occupied pixels get the maximum
/// log-odds, free pixels the minimum, unknown pixels zero.
pub fn load_map(path: &Path, params: LogOddsParams) -> Result<OccupancyGrid> {
    let source = path.display().to_string();
    let side = crate::config::KeyValues::load(&sidecar_path(path))?;
    let meta_vals = side_values(side, &source)?;
    let mut r = open(path)?;
    if pgm_token(&mut r, &source)? != "P5" {
        return Err(parse_err(&source, 1, "not a binary PGM (P5)"));
    }
    let num = |t: String| -> Result<usize> {
        t.parse()
            .map_err(|_| parse_err(&source, 0, format!("bad PGM header field `{t}`")))
    };
    let width = num(pgm_token(&mut r, &source)?)?;
    let height = num(pgm_token(&mut r, &source)?)?;
    let maxval = num(pgm_token(&mut r, &source)?)?;
    if maxval != 255 {
        return Err(parse_err(&source, 0, "only 8-bit PGM is supported"));
    }
    let mut data = vec![0u8; width * height];
    r.read_exact(&mut data)
        .map_err(|_| parse_err(&source, 0, "truncated PGM pixel data"))?;
    let meta = GridMeta::new(meta_vals.0, [meta_vals.1, meta_vals.2], width, height)?;
    let mut cells = vec![0.0; width * height];
    for j in 0..height {
        let src = &data[(height - 1 - j) * width..(height - j) * width];
        for (i, &px) in src.iter().enumerate() {
            cells[j * width + i] = match px {
                PGM_OCCUPIED => params.max,
                PGM_FREE => params.min,
                _ => 0.0,
            };
        }
    }
    Ok(OccupancyGrid::from_cells(meta, params, cells))
}

fn side_values(kv: crate::config::KeyValues, source: &str) -> Result<(f64, f64, f64)> {
    let get = |k: &str| -> Result<f64> {
        kv.get(k)
            .ok_or_else(|| parse_err(source, 0, format!("sidecar missing `{k}`")))?
            .parse()
            .map_err(|_| parse_err(source, 0, format!("sidecar `{k}` is not a number")))
    };
    Ok((get("resolution")?, get("origin_x")?, get("origin_y")?))
}
