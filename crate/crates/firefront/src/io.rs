//! File formats: detection CSV, ESRI ASCII rasters, and the small CSV
//! reports emitted by the command-line tools.
//!
//! Raster convention: `xllcorner`/`yllcorner` carry the domain's southwest
//! corner in degrees while `cellsize` carries the node spacing in meters
//! (grids are built in the local planar projection). Readers reconstruct
//! the grid from these headers together with the stored extent.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detection::{Detection, DetectionKind};
use crate::error::FireError;
use crate::geo::GeoPoint;
use crate::grid::{build_grid, FireArrivalField, FireDomain, Grid};

pub const NODATA: f64 = -9999.0;

fn parse_err(file: &str, line: usize, message: impl Into<String>) -> FireError {
    FireError::Parse { file: file.to_string(), line, message: message.into() }
}

fn kind_str(kind: DetectionKind) -> &'static str {
    match kind {
        DetectionKind::Fire => "fire",
        DetectionKind::NonfireLand => "nonfire_land",
        DetectionKind::NonfireWater => "nonfire_water",
        DetectionKind::Unknown => "unknown",
    }
}

fn kind_from_str(s: &str) -> Option<DetectionKind> {
    match s {
        "fire" => Some(DetectionKind::Fire),
        "nonfire_land" => Some(DetectionKind::NonfireLand),
        "nonfire_water" => Some(DetectionKind::NonfireWater),
        "unknown" => Some(DetectionKind::Unknown),
        _ => None,
    }
}

/// Write detections as CSV with header `lat,lon,time_days,kind,confidence`.
pub fn write_detection_csv(path: &Path, dets: &[Detection]) -> Result<(), FireError> {
    let mut out = String::from("lat,lon,time_days,kind,confidence\n");
    for d in dets {
        writeln!(
            out,
            "{},{},{},{},{}",
            d.pos.lat,
            d.pos.lon,
            d.time,
            kind_str(d.kind),
            d.confidence
        )
        .expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a detection CSV; errors name the file, line, and column at fault.
pub fn read_detection_csv(path: &Path) -> Result<Vec<Detection>, FireError> {
    let file = path.display().to_string();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(&file, 1, "empty file, expected a header"))?;
    if header.trim() != "lat,lon,time_days,kind,confidence" {
        return Err(parse_err(
            &file,
            1,
            format!("bad header {header:?}, expected lat,lon,time_days,kind,confidence"),
        ));
    }
    let mut dets = Vec::new();
    for (i, raw) in lines {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(parse_err(&file, lineno, format!("expected 5 columns, got {}", fields.len())));
        }
        let num = |col: usize, name: &str| -> Result<f64, FireError> {
            fields[col].parse::<f64>().map_err(|_| {
                parse_err(&file, lineno, format!("column {} ({name}): not a number: {:?}", col + 1, fields[col]))
            })
        };
        let lat = num(0, "lat")?;
        let lon = num(1, "lon")?;
        let time = num(2, "time_days")?;
        let kind = kind_from_str(fields[3]).ok_or_else(|| {
            parse_err(&file, lineno, format!("column 4 (kind): unknown kind {:?}", fields[3]))
        })?;
        let confidence = fields[4].parse::<u8>().map_err(|_| {
            parse_err(&file, lineno, format!("column 5 (confidence): not an integer in [0, 255]: {:?}", fields[4]))
        })?;
        let pos = GeoPoint::new(lat, lon)
            .map_err(|e| parse_err(&file, lineno, e.to_string()))?;
        let det = Detection::new(pos, time, kind, confidence)
            .map_err(|e| parse_err(&file, lineno, e.to_string()))?;
        dets.push(det);
    }
    Ok(dets)
}

/// Write a field as an ESRI ASCII grid, north row first.
pub fn write_ascii_raster(path: &Path, field: &FireArrivalField) -> Result<(), FireError> {
    let g = &field.grid;
    let mut out = String::new();
    writeln!(out, "ncols {}", g.nx).unwrap();
    writeln!(out, "nrows {}", g.ny).unwrap();
    writeln!(out, "xllcorner {}", g.domain.lon_min).unwrap();
    writeln!(out, "yllcorner {}", g.domain.lat_min).unwrap();
    writeln!(out, "cellsize {}", g.spacing).unwrap();
    writeln!(out, "NODATA_value {}", NODATA).unwrap();
    for iy in (0..g.ny).rev() {
        let mut row = String::new();
        for ix in 0..g.nx {
            if ix > 0 {
                row.push(' ');
            }
            let v = field.at(ix, iy);
            if v.is_nan() {
                write!(row, "{NODATA}").unwrap();
            } else {
                write!(row, "{v}").unwrap();
            }
        }
        out.push_str(&row);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Raw contents of an ESRI ASCII grid, values in row-major south-first
/// order (matching [`Grid`] indexing). NODATA cells become NaN.
#[derive(Debug, Clone)]
pub struct AsciiRaster {
    pub ncols: usize,
    pub nrows: usize,
    pub xllcorner: f64,
    pub yllcorner: f64,
    pub cellsize: f64,
    pub values: Vec<f64>,
}

pub fn read_ascii_raster(path: &Path) -> Result<AsciiRaster, FireError> {
    let file = path.display().to_string();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().peekable();
    let mut header = |key: &str| -> Result<f64, FireError> {
        let (i, line) = lines
            .next()
            .ok_or_else(|| parse_err(&file, 0, format!("missing header line {key}")))?;
        let mut parts = line.split_whitespace();
        let name = parts.next().unwrap_or("");
        if !name.eq_ignore_ascii_case(key) {
            return Err(parse_err(&file, i + 1, format!("expected header {key}, found {name:?}")));
        }
        let val = parts
            .next()
            .ok_or_else(|| parse_err(&file, i + 1, format!("header {key} has no value")))?;
        val.parse::<f64>()
            .map_err(|_| parse_err(&file, i + 1, format!("header {key}: not a number: {val:?}")))
    };
    let ncols = header("ncols")? as usize;
    let nrows = header("nrows")? as usize;
    let xllcorner = header("xllcorner")?;
    let yllcorner = header("yllcorner")?;
    let cellsize = header("cellsize")?;
    let nodata = header("NODATA_value")?;
    if ncols < 2 || nrows < 2 {
        return Err(parse_err(&file, 1, format!("raster must be at least 2x2, got {ncols}x{nrows}")));
    }

    let mut values = vec![f64::NAN; ncols * nrows];
    let mut row = 0usize;
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        if row >= nrows {
            return Err(parse_err(&file, i + 1, format!("more than {nrows} data rows")));
        }
        let iy = nrows - 1 - row; // north row first in the file
        let mut col = 0usize;
        for tok in line.split_whitespace() {
            if col >= ncols {
                return Err(parse_err(&file, i + 1, format!("more than {ncols} values in row, column {}", col + 1)));
            }
            let v = tok.parse::<f64>().map_err(|_| {
                parse_err(&file, i + 1, format!("column {}: not a number: {tok:?}", col + 1))
            })?;
            values[iy * ncols + col] = if v == nodata { f64::NAN } else { v };
            col += 1;
        }
        if col != ncols {
            return Err(parse_err(&file, i + 1, format!("expected {ncols} values, got {col}")));
        }
        row += 1;
    }
    if row != nrows {
        return Err(parse_err(&file, 0, format!("expected {nrows} data rows, got {row}")));
    }
    Ok(AsciiRaster { ncols, nrows, xllcorner, yllcorner, cellsize, values })
}

/// Interpret a raster as a fire arrival field on the grid implied by its
/// headers and the given time window. NODATA cells are treated as never
/// burned (t_end).
pub fn raster_to_field(
    raster: &AsciiRaster,
    t_start: f64,
    t_end: f64,
    source: &str,
) -> Result<FireArrivalField, FireError> {
    // Reconstruct the domain: corner in degrees, spacing in meters.
    let sw = GeoPoint::new(raster.yllcorner, raster.xllcorner)
        .map_err(|e| parse_err(source, 1, e.to_string()))?;
    let proj = crate::geo::PlanarProjection::new(sw);
    let extent_x = (raster.ncols - 1) as f64 * raster.cellsize;
    let extent_y = (raster.nrows - 1) as f64 * raster.cellsize;
    let ne = proj.to_geo(extent_x, extent_y);
    let domain = FireDomain::new(sw.lat, ne.lat, sw.lon, ne.lon, t_start, t_end)
        .map_err(|e| parse_err(source, 1, e.to_string()))?;
    let grid = build_grid(domain, raster.cellsize)?;
    if grid.nx != raster.ncols || grid.ny != raster.nrows {
        return Err(parse_err(
            source,
            1,
            format!(
                "grid reconstruction produced {}x{}, raster claims {}x{}",
                grid.nx, grid.ny, raster.ncols, raster.nrows
            ),
        ));
    }
    let values: Vec<f64> = raster
        .values
        .iter()
        .map(|v| if v.is_nan() { t_end } else { v.clamp(t_start, t_end) })
        .collect();
    FireArrivalField::from_values(grid, values)
}

pub fn read_field(path: &Path, t_start: f64, t_end: f64) -> Result<FireArrivalField, FireError> {
    let raster = read_ascii_raster(path)?;
    raster_to_field(&raster, t_start, t_end, &path.display().to_string())
}

/// RD convergence history: one row per iteration across all grid levels.
pub fn write_rd_history(path: &Path, rows: &[(usize, f64, f64)]) -> Result<(), FireError> {
    let mut out = String::from("iter,spacing_m,rd\n");
    for (iter, spacing, rd) in rows {
        writeln!(out, "{iter},{spacing},{rd}").unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// Generic CSV writer: header line plus preformatted rows.
pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<(), FireError> {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(r);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Scenario manifest recording how a synthetic dataset was produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub description: String,
    pub domain: FireDomain,
    pub spacing_m: f64,
    pub granule_times: Vec<f64>,
    pub detection_density: f64,
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<(), FireError> {
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|e| FireError::InvalidInput(format!("manifest serialization: {e}")))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Manifest, FireError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| parse_err(&path.display().to_string(), e.line(), e.to_string()))
}

#[allow(dead_code)]
fn grid_of(field: &FireArrivalField) -> &Grid {
    &field.grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, domain_from_meters};
    use approx::assert_relative_eq;
    use tempfile::tempdir;

    fn grid() -> Grid {
        let d = domain_from_meters(GeoPoint::new(40.0, -112.0).unwrap(), 5_000.0, 5_000.0, 0.0, 10.0)
            .unwrap();
        build_grid(d, 500.0).unwrap()
    }

    #[test]
    fn detection_csv_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("dets.csv");
        let dets = vec![
            Detection::new(GeoPoint::new(40.0, -112.0).unwrap(), 1.25, DetectionKind::Fire, 85).unwrap(),
            Detection::new(GeoPoint::new(40.01, -112.02).unwrap(), 2.5, DetectionKind::NonfireLand, 0).unwrap(),
            Detection::new(GeoPoint::new(39.99, -111.98).unwrap(), 3.75, DetectionKind::NonfireWater, 0).unwrap(),
        ];
        write_detection_csv(&path, &dets).unwrap();
        let back = read_detection_csv(&path).unwrap();
        assert_eq!(back, dets);
    }

    #[test]
    fn detection_csv_errors_name_location() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "lat,lon,time_days,kind,confidence\n40.0,-112.0,1.0,fire,80\n40.0,oops,1.0,fire,80\n")
            .unwrap();
        let err = read_detection_csv(&path).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(err.contains("column 2"), "{err}");
        assert!(err.contains("bad.csv"), "{err}");

        fs::write(&path, "lat,lon,time_days,kind,confidence\n40.0,-112.0,1.0,lava,80\n").unwrap();
        let err = read_detection_csv(&path).unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("kind"), "{err}");

        fs::write(&path, "wrong,header\n").unwrap();
        assert!(read_detection_csv(&path).is_err());
    }

    #[test]
    fn raster_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("field.asc");
        let g = grid();
        let values: Vec<f64> = (0..g.len()).map(|i| (i % 13) as f64 * 0.5).collect();
        let field = FireArrivalField::from_values(g.clone(), values).unwrap();
        write_ascii_raster(&path, &field).unwrap();
        let back = read_field(&path, 0.0, 10.0).unwrap();
        assert_eq!((back.grid.nx, back.grid.ny), (g.nx, g.ny));
        assert_relative_eq!(back.grid.spacing, g.spacing, epsilon = 1e-12);
        for (a, b) in field.values.iter().zip(&back.values) {
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn raster_nodata_becomes_t_end() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("field.asc");
        let g = grid();
        let mut field = FireArrivalField::constant(g, 3.0);
        field.values[0] = f64::NAN;
        write_ascii_raster(&path, &field).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("-9999"));
        let back = read_field(&path, 0.0, 10.0).unwrap();
        assert_eq!(back.values[0], 10.0);
        assert_eq!(back.values[1], 3.0);
    }

    #[test]
    fn raster_rejects_ragged_rows() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.asc");
        fs::write(
            &path,
            "ncols 2\nnrows 2\nxllcorner -112.0\nyllcorner 40.0\ncellsize 500\nNODATA_value -9999\n1 2\n3\n",
        )
        .unwrap();
        let err = read_ascii_raster(&path).unwrap_err().to_string();
        assert!(err.contains("line 8"), "{err}");
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let g = grid();
        let m = Manifest {
            seed: 42,
            description: "cone".into(),
            domain: g.domain,
            spacing_m: 500.0,
            granule_times: vec![0.25, 0.5, 0.75],
            detection_density: 0.05,
        };
        write_manifest(&path, &m).unwrap();
        let back = read_manifest(&path).unwrap();
        assert_eq!(back.seed, 42);
        assert_eq!(back.granule_times, m.granule_times);
    }
}
