//! Instance synthesis behind the `generate` subcommand.

use anyhow::Result;
use serde_json::json;

use maxcon::datagen::{
    generate_fundamental, generate_homography, generate_regression, generate_triangulation,
    FundamentalGenConfig, HomographyGenConfig, RegressionGenConfig, TriangulationGenConfig,
};

use crate::schema::{
    corrs_to_records, views_to_records, FamilyTag, GenerateConfig, GroundTruthFile, InstanceData,
    InstanceFile, SCHEMA_VERSION,
};

/// Builds the instance and ground-truth records for a generator config.
///
/// Fundamental-matrix instances are built on Hartley-normalized
/// coordinates; the stored correspondences are raw pixels, while the
/// sidecar's `x_true` lives in the instance (normalized, fixed-scale)
/// frame, as recorded in the metadata.
pub fn synthesize(cfg: &GenerateConfig) -> Result<(InstanceFile, GroundTruthFile)> {
    let (epsilon, data, gt, metadata) = match cfg.family {
        FamilyTag::Regression => {
            let epsilon = cfg.epsilon.unwrap_or(0.3);
            let gen = RegressionGenConfig {
                n: cfg.n,
                d: cfg.d,
                eta: cfg.eta,
                inlier_noise_bound: epsilon,
                seed: cfg.seed,
                ..RegressionGenConfig::default()
            };
            let (_, gt, rows) = generate_regression(&gen)?;
            let data = InstanceData::Regression {
                a: rows.iter().map(|r| r.a.iter().copied().collect()).collect(),
                b: rows.iter().map(|r| r.b).collect(),
            };
            let meta = json!({
                "generator": "synthetic-regression",
                "n": cfg.n, "d": cfg.d, "eta": cfg.eta, "seed": cfg.seed,
                "inlier_noise": "uniform", "outlier_sigma": gen.outlier_sigma,
                "epsilon_frame": "response units",
            });
            (epsilon, data, gt, meta)
        }
        FamilyTag::Homography => {
            let epsilon = cfg.epsilon.unwrap_or(4.0);
            let gen = HomographyGenConfig {
                n: cfg.n,
                eta: cfg.eta,
                epsilon,
                seed: cfg.seed,
                ..HomographyGenConfig::default()
            };
            let (_, gt, corrs) = generate_homography(&gen)?;
            let meta = json!({
                "generator": "synthetic-homography",
                "n": cfg.n, "eta": cfg.eta, "seed": cfg.seed,
                "image": [gen.image_width, gen.image_height],
                "epsilon_frame": "pixels",
            });
            (
                epsilon,
                InstanceData::Correspondences(corrs_to_records(&corrs)),
                gt,
                meta,
            )
        }
        FamilyTag::Triangulation => {
            let epsilon = cfg.epsilon.unwrap_or(1.0);
            let gen = TriangulationGenConfig {
                views: cfg.n,
                eta: cfg.eta,
                epsilon,
                seed: cfg.seed,
            };
            let (_, gt, views) = generate_triangulation(&gen)?;
            let meta = json!({
                "generator": "synthetic-triangulation",
                "views": cfg.n, "eta": cfg.eta, "seed": cfg.seed,
                "epsilon_frame": "pixels",
            });
            (
                epsilon,
                InstanceData::Views(views_to_records(&views)),
                gt,
                meta,
            )
        }
        FamilyTag::Fundamental => {
            let epsilon = cfg.epsilon.unwrap_or(0.006);
            let gen = FundamentalGenConfig {
                n: cfg.n,
                eta: cfg.eta,
                epsilon,
                seed: cfg.seed,
                ..FundamentalGenConfig::default()
            };
            let (_, gt, corrs, _) = generate_fundamental(&gen)?;
            let meta = json!({
                "generator": "synthetic-fundamental",
                "n": cfg.n, "eta": cfg.eta, "seed": cfg.seed,
                "image": [gen.image_width, gen.image_height],
                "epsilon_frame": "hartley-normalized algebraic error",
                "x_true_frame": "instance (normalized, f33 = 1)",
            });
            (
                epsilon,
                InstanceData::Correspondences(corrs_to_records(&corrs)),
                gt,
                meta,
            )
        }
    };

    let instance = InstanceFile {
        schema_version: SCHEMA_VERSION,
        family: cfg.family.clone(),
        epsilon,
        data,
        metadata,
    };
    let gt_file = GroundTruthFile {
        schema_version: SCHEMA_VERSION,
        x_true: gt.x_true.iter().copied().collect(),
        inlier_mask_true: gt.inlier_mask_true,
    };
    Ok((instance, gt_file))
}
