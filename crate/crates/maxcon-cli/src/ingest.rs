//! File ingestion: correspondence CSV and triangulation-track JSON, with
//! line-accurate error reporting.

use anyhow::{bail, Context, Result};
use nalgebra::{Matrix3x4, Point2};
use serde::Deserialize;

use maxcon::models::{Correspondence, ViewObservation};

use crate::schema::{ViewRecord, SCHEMA_VERSION};

/// Parses a 4-column CSV of `u_x,u_y,v_x,v_y` rows. A non-numeric first
/// line is treated as a header; any other malformed row is an error naming
/// its 1-based line number.
pub fn ingest_correspondences(path: &std::path::Path) -> Result<Vec<Correspondence>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading correspondences from {}", path.display()))?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            bail!(
                "{}:{line_no}: expected 4 comma-separated values, got {}",
                path.display(),
                fields.len()
            );
        }
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(vals) => out.push(Correspondence {
                u: Point2::new(vals[0], vals[1]),
                v: Point2::new(vals[2], vals[3]),
            }),
            Err(_) if line_no == 1 => continue, // header row
            Err(e) => bail!("{}:{line_no}: {e}", path.display()),
        }
    }
    if out.is_empty() {
        bail!("{}: no correspondences found", path.display());
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct TrackFile {
    schema_version: u32,
    views: Vec<ViewRecord>,
}

/// Parses a triangulation track: cameras with their 2-D observations.
pub fn ingest_tracks(path: &std::path::Path) -> Result<Vec<ViewObservation>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading track file {}", path.display()))?;
    let file: TrackFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing track file {}", path.display()))?;
    if file.schema_version != SCHEMA_VERSION {
        bail!(
            "unsupported track schema version {} (expected {SCHEMA_VERSION})",
            file.schema_version
        );
    }
    if file.views.is_empty() {
        bail!("{}: track contains no views", path.display());
    }
    Ok(file
        .views
        .iter()
        .map(|v| ViewObservation {
            camera: Matrix3x4::from_fn(|r, c| v.camera[r][c]),
            point2d: Point2::new(v.point2d[0], v.point2d[1]),
        })
        .collect())
}
