//! On-disk JSON contracts: instance files, ground-truth sidecars, run
//! records and experiment configs. JSON Schema documents for these types
//! ship in the repository's `schemas/` directory.

use anyhow::{bail, Context, Result};
use nalgebra::{DVector, Matrix3x4, Point2};
use serde::{Deserialize, Serialize};

use maxcon::models::{Correspondence, RegressionDatum, ViewObservation};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyTag {
    Regression,
    Homography,
    Triangulation,
    Fundamental,
}

impl FamilyTag {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyTag::Regression => "regression",
            FamilyTag::Homography => "homography",
            FamilyTag::Triangulation => "triangulation",
            FamilyTag::Fundamental => "fundamental",
        }
    }
}

/// Family-specific raw data as stored on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceData {
    Regression {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
    /// Rows of `u_x, u_y, v_x, v_y`.
    Correspondences(Vec<[f64; 4]>),
    Views(Vec<ViewRecord>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViewRecord {
    pub camera: [[f64; 4]; 3],
    pub point2d: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub schema_version: u32,
    pub family: FamilyTag,
    pub epsilon: f64,
    pub data: InstanceData,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub schema_version: u32,
    pub x_true: Vec<f64>,
    pub inlier_mask_true: Vec<bool>,
}

/// Per-stage consensus values of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageConsensus {
    pub initial: usize,
    #[serde(rename = "final")]
    pub final_consensus: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RansacSummary {
    pub iterations: usize,
    pub unpolished_consensus: usize,
    pub polished_adopted: bool,
    pub all_degenerate: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BisectionStepRecord {
    pub delta_low: usize,
    pub delta_high: usize,
    pub delta: usize,
    pub achieved: usize,
    pub cycles: usize,
    pub converged_to_zero: bool,
    pub objective: f64,
    /// Per-cycle `(iteration, objective, consensus)` trace of the inner
    /// alternation.
    pub trace: Vec<BcoCycleRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BcoCycleRecord {
    pub cycle: usize,
    pub objective_after_assignment: f64,
    pub objective_after_conic: f64,
    pub consensus: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BisectionRecord {
    pub steps: Vec<BisectionStepRecord>,
    pub final_delta_low: usize,
    pub final_delta_high: usize,
}

/// Result record of one method execution, emitted by `fit` and collected
/// by `sweep`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub family: String,
    pub method: String,
    pub seed: u64,
    pub n: usize,
    pub epsilon: f64,
    pub consensus: StageConsensus,
    /// Wall-clock seconds around the method call only, excluding I/O.
    pub runtime_seconds: f64,
    /// Mean ground-truth-inlier residual of the least-squares fit on the
    /// final consensus set; absent without a ground-truth sidecar.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_ls: Option<f64>,
    pub solver_failure: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ransac: Option<RansacSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bisection: Option<BisectionRecord>,
    pub x: Vec<f64>,
}

/// Config for `generate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub family: FamilyTag,
    #[serde(default = "default_n")]
    pub n: usize,
    /// Regression parameter dimension.
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub seed: u64,
    /// Inlier threshold; family default when omitted.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Output path of the instance file; the ground-truth sidecar lands
    /// next to it with a `.gt.json` suffix.
    pub out: String,
}

fn default_n() -> usize {
    200
}

fn default_d() -> usize {
    8
}

/// Config for `sweep`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: FamilyTag,
    pub methods: Vec<String>,
    pub etas: Vec<f64>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Conic subsolver tolerance.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// RANSAC iteration cap.
    #[serde(default = "default_max_iters")]
    pub max_iterations: usize,
    pub out_dir: String,
}

fn default_runs() -> usize {
    10
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iters() -> usize {
    100_000
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            bail!("runs must be at least 1");
        }
        if self.methods.is_empty() {
            bail!("methods list is empty");
        }
        for m in &self.methods {
            parse_method(m)?;
        }
        for &eta in &self.etas {
            if !(0.0..=100.0).contains(&eta) {
                bail!("eta {eta} outside [0, 100]");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Ransac,
    Ibco,
    RansacIbco,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Ransac => "ransac",
            Method::Ibco => "ibco",
            Method::RansacIbco => "ransac+ibco",
        }
    }
}

pub fn parse_method(s: &str) -> Result<Method> {
    match s {
        "ransac" => Ok(Method::Ransac),
        "ibco" => Ok(Method::Ibco),
        "ransac+ibco" => Ok(Method::RansacIbco),
        other => bail!("unknown method '{other}' (expected ransac | ibco | ransac+ibco)"),
    }
}

// ---------------------------------------------------------------------------
// Conversions between disk records and core types
// ---------------------------------------------------------------------------

pub fn data_to_core(data: &InstanceData) -> Result<maxcon::models::ModelData> {
    Ok(match data {
        InstanceData::Regression { a, b } => {
            if a.len() != b.len() {
                bail!("regression data: {} rows of a but {} of b", a.len(), b.len());
            }
            let rows = a
                .iter()
                .zip(b)
                .map(|(ai, &bi)| RegressionDatum {
                    a: DVector::from_vec(ai.clone()),
                    b: bi,
                })
                .collect();
            maxcon::models::ModelData::Regression(rows)
        }
        InstanceData::Correspondences(rows) => {
            let corrs = rows
                .iter()
                .map(|r| Correspondence {
                    u: Point2::new(r[0], r[1]),
                    v: Point2::new(r[2], r[3]),
                })
                .collect();
            maxcon::models::ModelData::Correspondences(corrs)
        }
        InstanceData::Views(views) => {
            let views = views
                .iter()
                .map(|v| ViewObservation {
                    camera: Matrix3x4::from_fn(|r, c| v.camera[r][c]),
                    point2d: Point2::new(v.point2d[0], v.point2d[1]),
                })
                .collect();
            maxcon::models::ModelData::Views(views)
        }
    })
}

pub fn corrs_to_records(corrs: &[Correspondence]) -> Vec<[f64; 4]> {
    corrs
        .iter()
        .map(|c| [c.u.x, c.u.y, c.v.x, c.v.y])
        .collect()
}

pub fn views_to_records(views: &[ViewObservation]) -> Vec<ViewRecord> {
    views
        .iter()
        .map(|v| ViewRecord {
            camera: [
                [v.camera[(0, 0)], v.camera[(0, 1)], v.camera[(0, 2)], v.camera[(0, 3)]],
                [v.camera[(1, 0)], v.camera[(1, 1)], v.camera[(1, 2)], v.camera[(1, 3)]],
                [v.camera[(2, 0)], v.camera[(2, 1)], v.camera[(2, 2)], v.camera[(2, 3)]],
            ],
            point2d: [v.point2d.x, v.point2d.y],
        })
        .collect()
}

pub fn load_instance(path: &std::path::Path) -> Result<InstanceFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading instance file {}", path.display()))?;
    let file: InstanceFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing instance file {}", path.display()))?;
    if file.schema_version != SCHEMA_VERSION {
        bail!(
            "unsupported instance schema version {} (expected {SCHEMA_VERSION})",
            file.schema_version
        );
    }
    Ok(file)
}

pub fn load_ground_truth(path: &std::path::Path) -> Result<GroundTruthFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading ground-truth file {}", path.display()))?;
    let file: GroundTruthFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing ground-truth file {}", path.display()))?;
    if file.schema_version != SCHEMA_VERSION {
        bail!(
            "unsupported ground-truth schema version {} (expected {SCHEMA_VERSION})",
            file.schema_version
        );
    }
    Ok(file)
}

/// Sidecar path of an instance file: `foo.json -> foo.gt.json`.
pub fn sidecar_path(instance: &std::path::Path) -> std::path::PathBuf {
    let stem = instance
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into());
    instance.with_file_name(format!("{stem}.gt.json"))
}
