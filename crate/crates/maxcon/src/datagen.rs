//! Synthetic data generators with planted inlier masks, plus the
//! ground-truth model-accuracy metric.
//!
//! Every generator is a pure function of its config and seed. Planted
//! inliers satisfy `r_i(x_true) ≤ ε` and planted outliers violate it, by
//! bounded-noise construction for the pixel-space families and by rejection
//! resampling where the residual is not a pixel distance.

use nalgebra::{DVector, Matrix3, Matrix3x4, Point2, Vector2, Vector3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use thiserror::Error;

use crate::models::{
    build_fundamental_instance, build_homography_instance, build_regression_instance,
    build_triangulation_instance, fixed_scale_params, project_point, Correspondence,
    FundamentalFrame, ModelError, RegressionDatum, ViewObservation,
};
use crate::problem::ConsensusInstance;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("ground-truth inlier set is empty or entirely out of domain")]
    EmptyGroundTruth,
    #[error("failed to construct a consistent instance within the retry budget")]
    ConstructionFailed,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// True model and planted inlier mask of a generated instance.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub x_true: DVector<f64>,
    pub inlier_mask_true: Vec<bool>,
}

fn planted_outlier_count(n: usize, eta: f64) -> usize {
    let inliers = (n as f64 * (1.0 - eta / 100.0)).ceil() as usize;
    n - inliers.min(n)
}

fn validate_eta(eta: f64) -> Result<(), DatagenError> {
    if !(0.0..=100.0).contains(&eta) {
        return Err(DatagenError::InvalidConfig(format!(
            "eta must lie in [0, 100], got {eta}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Linear regression
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct RegressionGenConfig {
    pub n: usize,
    pub d: usize,
    /// Outlier percentage η in [0, 100].
    pub eta: f64,
    /// Uniform inlier noise bound; also the instance threshold ε.
    pub inlier_noise_bound: f64,
    /// Standard deviation of the Gaussian outlier noise.
    pub outlier_sigma: f64,
    pub seed: u64,
}

impl Default for RegressionGenConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            d: 8,
            eta: 0.0,
            inlier_noise_bound: 0.3,
            outlier_sigma: 1.5,
            seed: 0,
        }
    }
}

/// Regression data: `a_i` and `x_true` uniform in `[−1,1]`, inlier noise
/// uniform in `[−bound, bound]`, outliers re-noised with Gaussian σ
/// rejection-resampled until the noise magnitude exceeds the bound.
pub fn generate_regression(
    cfg: &RegressionGenConfig,
) -> Result<(ConsensusInstance, GroundTruth, Vec<RegressionDatum>), DatagenError> {
    validate_eta(cfg.eta)?;
    if cfg.n == 0 || cfg.d == 0 {
        return Err(DatagenError::InvalidConfig("n and d must be positive".into()));
    }
    if !(cfg.inlier_noise_bound > 0.0 && cfg.outlier_sigma > 0.0) {
        return Err(DatagenError::InvalidConfig("noise bounds must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x_true = DVector::from_fn(cfg.d, |_, _| rng.gen_range(-1.0..=1.0));
    let bound = cfg.inlier_noise_bound;
    let mut data: Vec<RegressionDatum> = (0..cfg.n)
        .map(|_| {
            let a = DVector::from_fn(cfg.d, |_, _| rng.gen_range(-1.0..=1.0));
            let b = a.dot(&x_true) + rng.gen_range(-bound..=bound);
            RegressionDatum { a, b }
        })
        .collect();

    let n_out = planted_outlier_count(cfg.n, cfg.eta);
    let outliers = rand::seq::index::sample(&mut rng, cfg.n, n_out).into_vec();
    let mut mask = vec![true; cfg.n];
    let gauss = Normal::new(0.0, cfg.outlier_sigma)
        .map_err(|e| DatagenError::InvalidConfig(e.to_string()))?;
    for &i in &outliers {
        let noise = loop {
            let g: f64 = rng.sample(gauss);
            if g.abs() > bound {
                break g;
            }
        };
        data[i].b = data[i].a.dot(&x_true) + noise;
        mask[i] = false;
    }

    let inst = build_regression_instance(&data, bound)?;
    Ok((
        inst,
        GroundTruth {
            x_true,
            inlier_mask_true: mask,
        },
        data,
    ))
}

// ---------------------------------------------------------------------------
// Homography
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct HomographyGenConfig {
    pub n: usize,
    pub eta: f64,
    /// Inlier threshold in pixels.
    pub epsilon: f64,
    pub image_width: f64,
    pub image_height: f64,
    pub seed: u64,
}

impl Default for HomographyGenConfig {
    fn default() -> Self {
        Self {
            n: 300,
            eta: 0.0,
            epsilon: 4.0,
            image_width: 640.0,
            image_height: 480.0,
            seed: 0,
        }
    }
}

fn sample_homography(rng: &mut ChaCha8Rng, w: f64, h: f64) -> Matrix3<f64> {
    let angle: f64 = rng.gen_range(-0.25..0.25);
    let scale: f64 = rng.gen_range(0.85..1.2);
    let (s, c) = (angle.sin() * scale, angle.cos() * scale);
    let (cx, cy) = (w / 2.0, h / 2.0);
    let tx = rng.gen_range(-40.0..40.0);
    let ty = rng.gen_range(-40.0..40.0);
    // Affine part rotates and scales about the image center, then a small
    // projective row is added.
    let a = Matrix3::new(c, -s, cx - (c * cx - s * cy) + tx, s, c, cy - (s * cx + c * cy) + ty, 0.0, 0.0, 1.0);
    let mut hm = a;
    hm[(2, 0)] = rng.gen_range(-1.5e-4..1.5e-4);
    hm[(2, 1)] = rng.gen_range(-1.5e-4..1.5e-4);
    hm
}

fn disk_noise(rng: &mut ChaCha8Rng, radius: f64) -> Vector2<f64> {
    let r = radius * rng.gen_range(0.0..1.0f64).sqrt();
    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
    Vector2::new(r * theta.cos(), r * theta.sin())
}

/// Homography correspondences: inliers carry pixel noise bounded by
/// `0.95·ε`, outliers are uniform points in the image rectangle rejected
/// until their transfer error exceeds ε.
pub fn generate_homography(
    cfg: &HomographyGenConfig,
) -> Result<(ConsensusInstance, GroundTruth, Vec<Correspondence>), DatagenError> {
    validate_eta(cfg.eta)?;
    if cfg.n < 4 {
        return Err(DatagenError::InvalidConfig("need at least 4 correspondences".into()));
    }
    if cfg.epsilon.is_nan() || cfg.epsilon <= 0.0 {
        return Err(DatagenError::InvalidConfig("epsilon must be positive".into()));
    }
    let (w, h) = (cfg.image_width, cfg.image_height);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let h_true = sample_homography(&mut rng, w, h);
    let x_true = fixed_scale_params(&h_true).expect("sampled homography has unit h33");

    let n_out = planted_outlier_count(cfg.n, cfg.eta);
    let outliers = rand::seq::index::sample(&mut rng, cfg.n, n_out).into_vec();
    let mut is_outlier = vec![false; cfg.n];
    for &i in &outliers {
        is_outlier[i] = true;
    }

    let mut corrs = Vec::with_capacity(cfg.n);
    let mut mask = vec![true; cfg.n];
    for i in 0..cfg.n {
        // Keep the clean transfer target near the image so the geometry is
        // realistic; accept stragglers after a bounded number of tries.
        let mut u = Point2::new(rng.gen_range(0.0..w), rng.gen_range(0.0..h));
        let mut clean = crate::models::apply_homography(&h_true, &u).unwrap();
        for _ in 0..50 {
            if clean.x >= -30.0 && clean.x <= w + 30.0 && clean.y >= -30.0 && clean.y <= h + 30.0 {
                break;
            }
            u = Point2::new(rng.gen_range(0.0..w), rng.gen_range(0.0..h));
            clean = crate::models::apply_homography(&h_true, &u).unwrap();
        }
        let v = if is_outlier[i] {
            mask[i] = false;
            loop {
                let cand = Point2::new(rng.gen_range(0.0..w), rng.gen_range(0.0..h));
                if (cand - clean).norm() > cfg.epsilon {
                    break cand;
                }
            }
        } else {
            clean + disk_noise(&mut rng, 0.95 * cfg.epsilon)
        };
        corrs.push(Correspondence { u, v });
    }

    let inst = build_homography_instance(&corrs, cfg.epsilon)?;
    Ok((
        inst,
        GroundTruth {
            x_true,
            inlier_mask_true: mask,
        },
        corrs,
    ))
}

// ---------------------------------------------------------------------------
// Triangulation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct TriangulationGenConfig {
    /// Number of observing cameras; each view is one datum.
    pub views: usize,
    pub eta: f64,
    /// Inlier threshold in pixels.
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TriangulationGenConfig {
    fn default() -> Self {
        Self {
            views: 12,
            eta: 0.0,
            epsilon: 1.0,
            seed: 0,
        }
    }
}

fn look_at_camera(center: Vector3<f64>, k: &Matrix3<f64>) -> Matrix3x4<f64> {
    // Optical axis toward the origin, up vector near +y.
    let z = (-center).normalize();
    let up = Vector3::new(0.0, 1.0, 0.0);
    let x = up.cross(&z).normalize();
    let y = z.cross(&x);
    let r = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
    let t = -r * center;
    let mut rt = Matrix3x4::zeros();
    rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    rt.set_column(3, &t);
    k * rt
}

/// Feature-track stand-in: cameras on an arc of radius 10 looking at the
/// origin, a 3-D point near the origin, bounded pixel noise for inlier
/// views and displaced pixels for outlier views.
pub fn generate_triangulation(
    cfg: &TriangulationGenConfig,
) -> Result<(ConsensusInstance, GroundTruth, Vec<ViewObservation>), DatagenError> {
    validate_eta(cfg.eta)?;
    if cfg.views < 2 {
        return Err(DatagenError::InvalidConfig("need at least 2 views".into()));
    }
    if cfg.epsilon.is_nan() || cfg.epsilon <= 0.0 {
        return Err(DatagenError::InvalidConfig("epsilon must be positive".into()));
    }
    let (w, h) = (640.0, 480.0);
    let k = Matrix3::new(500.0, 0.0, w / 2.0, 0.0, 500.0, h / 2.0, 0.0, 0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let cameras: Vec<Matrix3x4<f64>> = (0..cfg.views)
        .map(|i| {
            let frac = if cfg.views == 1 {
                0.0
            } else {
                i as f64 / (cfg.views - 1) as f64
            };
            let theta = -0.5 + frac;
            let center = Vector3::new(
                10.0 * theta.sin(),
                1.5 * (2.0 * theta).sin(),
                -10.0 * theta.cos(),
            );
            look_at_camera(center, &k)
        })
        .collect();

    // A point whose clean projections land inside every image.
    let mut point = Vector3::zeros();
    let mut clean: Vec<Point2<f64>> = Vec::new();
    let mut ok = false;
    for _ in 0..200 {
        point = Vector3::new(
            rng.gen_range(-0.8..0.8),
            rng.gen_range(-0.8..0.8),
            rng.gen_range(-0.8..0.8),
        );
        let proj: Option<Vec<Point2<f64>>> = cameras
            .iter()
            .map(|c| {
                project_point(c, &point).filter(|p| {
                    p.x >= 5.0 && p.x <= w - 5.0 && p.y >= 5.0 && p.y <= h - 5.0
                })
            })
            .collect();
        if let Some(p) = proj {
            clean = p;
            ok = true;
            break;
        }
    }
    if !ok {
        return Err(DatagenError::ConstructionFailed);
    }

    let n_out = planted_outlier_count(cfg.views, cfg.eta);
    let outliers = rand::seq::index::sample(&mut rng, cfg.views, n_out).into_vec();
    let mut mask = vec![true; cfg.views];
    let mut views = Vec::with_capacity(cfg.views);
    for (i, camera) in cameras.iter().enumerate() {
        let obs = if outliers.contains(&i) {
            mask[i] = false;
            loop {
                let cand = Point2::new(rng.gen_range(0.0..w), rng.gen_range(0.0..h));
                if (cand - clean[i]).norm() > cfg.epsilon {
                    break cand;
                }
            }
        } else {
            clean[i] + disk_noise(&mut rng, 0.95 * cfg.epsilon)
        };
        views.push(ViewObservation {
            camera: *camera,
            point2d: obs,
        });
    }

    let inst = build_triangulation_instance(&views, cfg.epsilon)?;
    Ok((
        inst,
        GroundTruth {
            x_true: DVector::from_vec(vec![point.x, point.y, point.z]),
            inlier_mask_true: mask,
        },
        views,
    ))
}

// ---------------------------------------------------------------------------
// Fundamental matrix
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct FundamentalGenConfig {
    pub n: usize,
    pub eta: f64,
    /// Inlier threshold on the algebraic error in normalized coordinates.
    pub epsilon: f64,
    pub image_width: f64,
    pub image_height: f64,
    pub seed: u64,
}

impl Default for FundamentalGenConfig {
    fn default() -> Self {
        Self {
            n: 200,
            eta: 0.0,
            epsilon: 0.006,
            image_width: 640.0,
            image_height: 480.0,
            seed: 0,
        }
    }
}

fn stereo_rig(w: f64, h: f64) -> (Matrix3<f64>, Matrix3x4<f64>, Matrix3x4<f64>) {
    let k = Matrix3::new(520.0, 0.0, w / 2.0, 0.0, 520.0, h / 2.0, 0.0, 0.0, 1.0);
    let angle: f64 = 0.12;
    let (s, c) = angle.sin_cos();
    let r = Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c);
    let t = Vector3::new(0.6, 0.05, 0.1);
    let tx = Matrix3::new(0.0, -t.z, t.y, t.z, 0.0, -t.x, -t.y, t.x, 0.0);
    let k_inv = k.try_inverse().unwrap();
    let f = k_inv.transpose() * tx * r * k_inv;
    let p1 = k * Matrix3x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0);
    let mut rt = Matrix3x4::zeros();
    rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    rt.set_column(3, &t);
    let p2 = k * rt;
    (f, p1, p2)
}

/// Epipolar correspondences from a fixed stereo rig. The planted masks are
/// enforced against the normalized algebraic residual at the true model by
/// a resampling fixpoint: marginal inliers get their pixel noise halved and
/// failed outliers are redrawn, then the instance (whose Hartley frame
/// depends on the data) is rebuilt until the masks are exact.
pub fn generate_fundamental(
    cfg: &FundamentalGenConfig,
) -> Result<
    (
        ConsensusInstance,
        GroundTruth,
        Vec<Correspondence>,
        FundamentalFrame,
    ),
    DatagenError,
> {
    validate_eta(cfg.eta)?;
    if cfg.n < 8 {
        return Err(DatagenError::InvalidConfig("need at least 8 correspondences".into()));
    }
    if cfg.epsilon.is_nan() || cfg.epsilon <= 0.0 {
        return Err(DatagenError::InvalidConfig("epsilon must be positive".into()));
    }
    let (w, h) = (cfg.image_width, cfg.image_height);
    let (f_true, p1, p2) = stereo_rig(w, h);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let clean: Vec<(Point2<f64>, Point2<f64>)> = {
        let mut out = Vec::with_capacity(cfg.n);
        while out.len() < cfg.n {
            let x = Vector3::new(
                rng.gen_range(-2.5..2.5),
                rng.gen_range(-1.8..1.8),
                rng.gen_range(4.0..9.0),
            );
            let (Some(u), Some(v)) = (project_point(&p1, &x), project_point(&p2, &x)) else {
                continue;
            };
            let inside = |p: &Point2<f64>| p.x >= 0.0 && p.x <= w && p.y >= 0.0 && p.y <= h;
            if inside(&u) && inside(&v) {
                out.push((u, v));
            }
        }
        out
    };

    let n_out = planted_outlier_count(cfg.n, cfg.eta);
    let outliers = rand::seq::index::sample(&mut rng, cfg.n, n_out).into_vec();
    let mut mask = vec![true; cfg.n];
    for &i in &outliers {
        mask[i] = false;
    }

    let mut noise_scale = vec![1.0f64; cfg.n];
    let mut corrs: Vec<Correspondence> = (0..cfg.n)
        .map(|i| {
            let (u, cv) = clean[i];
            let v = if mask[i] {
                cv + disk_noise(&mut rng, 0.5)
            } else {
                Point2::new(rng.gen_range(0.0..w), rng.gen_range(0.0..h))
            };
            Correspondence { u, v }
        })
        .collect();

    // Fixpoint over the data-dependent normalization.
    for _pass in 0..60 {
        let (inst, frame) = build_fundamental_instance(&corrs, cfg.epsilon)?;
        let x_true = frame
            .instance_params(&f_true)
            .ok_or(DatagenError::ConstructionFailed)?;
        let mut violations = 0;
        for i in 0..cfg.n {
            let r = inst.shifted_residual(i, &x_true);
            if mask[i] && r > 0.0 {
                violations += 1;
                noise_scale[i] *= 0.5;
                corrs[i].v = clean[i].1 + disk_noise(&mut rng, 0.5 * noise_scale[i]);
            } else if !mask[i] && r <= 0.0 {
                violations += 1;
                corrs[i].v = Point2::new(rng.gen_range(0.0..w), rng.gen_range(0.0..h));
            }
        }
        if violations == 0 {
            return Ok((
                inst,
                GroundTruth {
                    x_true,
                    inlier_mask_true: mask,
                },
                corrs,
                frame,
            ));
        }
    }
    Err(DatagenError::ConstructionFailed)
}

// ---------------------------------------------------------------------------
// Model-accuracy metric
// ---------------------------------------------------------------------------

/// Average residual of `x` over the ground-truth inliers. Inliers that fall
/// outside the domain of `x` have no finite residual and are skipped; an
/// empty contribution set is an error.
pub fn e_ls(
    x: &DVector<f64>,
    gt: &GroundTruth,
    inst: &ConsensusInstance,
) -> Result<f64, DatagenError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, &is_inlier) in gt.inlier_mask_true.iter().enumerate() {
        if !is_inlier {
            continue;
        }
        if let Ok(r) = inst.residual(i, x) {
            sum += r;
            count += 1;
        }
    }
    if count == 0 {
        return Err(DatagenError::EmptyGroundTruth);
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{least_squares_fit, minimal_solve, ModelData, ModelFamily};
    use approx::assert_relative_eq;

    #[test]
    fn regression_eta_zero_has_full_consensus_at_truth() {
        let cfg = RegressionGenConfig {
            n: 60,
            d: 3,
            eta: 0.0,
            seed: 1,
            ..RegressionGenConfig::default()
        };
        let (inst, gt, _) = generate_regression(&cfg).unwrap();
        assert_eq!(inst.consensus(&gt.x_true).consensus, 60);
    }

    #[test]
    fn regression_masks_are_exact_by_construction() {
        let cfg = RegressionGenConfig {
            n: 80,
            d: 4,
            eta: 45.0,
            seed: 2,
            ..RegressionGenConfig::default()
        };
        let (inst, gt, _) = generate_regression(&cfg).unwrap();
        let expected_inliers = (80.0f64 * 0.55).ceil() as usize;
        assert_eq!(gt.inlier_mask_true.iter().filter(|&&m| m).count(), expected_inliers);
        for (i, &inlier) in gt.inlier_mask_true.iter().enumerate() {
            let r = inst.residual(i, &gt.x_true).unwrap();
            if inlier {
                assert!(r <= inst.epsilon());
            } else {
                assert!(r > inst.epsilon());
            }
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let cfg = RegressionGenConfig {
            n: 30,
            d: 2,
            eta: 30.0,
            seed: 7,
            ..RegressionGenConfig::default()
        };
        let (_, gt1, data1) = generate_regression(&cfg).unwrap();
        let (_, gt2, data2) = generate_regression(&cfg).unwrap();
        assert_eq!(gt1.x_true, gt2.x_true);
        assert_eq!(gt1.inlier_mask_true, gt2.inlier_mask_true);
        for (a, b) in data1.iter().zip(&data2) {
            assert_eq!(a.a, b.a);
            assert_eq!(a.b, b.b);
        }

        let hcfg = HomographyGenConfig {
            n: 50,
            eta: 40.0,
            seed: 7,
            ..HomographyGenConfig::default()
        };
        let (_, g1, c1) = generate_homography(&hcfg).unwrap();
        let (_, g2, c2) = generate_homography(&hcfg).unwrap();
        assert_eq!(g1.x_true, g2.x_true);
        for (a, b) in c1.iter().zip(&c2) {
            assert_eq!(a.u, b.u);
            assert_eq!(a.v, b.v);
        }
    }

    #[test]
    fn homography_masks_are_exact() {
        let cfg = HomographyGenConfig {
            n: 120,
            eta: 35.0,
            seed: 3,
            ..HomographyGenConfig::default()
        };
        let (inst, gt, _) = generate_homography(&cfg).unwrap();
        let planted = (120.0f64 * 0.65).ceil() as usize;
        let est = inst.consensus(&gt.x_true);
        assert_eq!(gt.inlier_mask_true.iter().filter(|&&m| m).count(), planted);
        for (got, want) in est.inlier_mask.iter().zip(&gt.inlier_mask_true) {
            assert_eq!(got, want);
        }
    }

    #[test]
    fn triangulation_masks_are_exact() {
        let cfg = TriangulationGenConfig {
            views: 14,
            eta: 30.0,
            seed: 4,
            ..TriangulationGenConfig::default()
        };
        let (inst, gt, views) = generate_triangulation(&cfg).unwrap();
        assert_eq!(views.len(), 14);
        let est = inst.consensus(&gt.x_true);
        for (got, want) in est.inlier_mask.iter().zip(&gt.inlier_mask_true) {
            assert_eq!(got, want);
        }
    }

    #[test]
    fn fundamental_masks_are_exact_and_frame_consistent() {
        let cfg = FundamentalGenConfig {
            n: 60,
            eta: 40.0,
            seed: 5,
            ..FundamentalGenConfig::default()
        };
        let (inst, gt, corrs, frame) = generate_fundamental(&cfg).unwrap();
        assert_eq!(corrs.len(), 60);
        assert_eq!(frame.normalized.len(), 60);
        let est = inst.consensus(&gt.x_true);
        for (got, want) in est.inlier_mask.iter().zip(&gt.inlier_mask_true) {
            assert_eq!(got, want);
        }
        // Downstream solvers sample the normalized correspondences; an
        // 8-point fit on true inliers must agree with the instance frame.
        let inlier_idx: Vec<usize> = gt
            .inlier_mask_true
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| i)
            .collect();
        let fit = least_squares_fit(
            &ModelFamily::Fundamental,
            &ModelData::Correspondences(frame.normalized.clone()),
            &inlier_idx,
        )
        .unwrap();
        let fitted = inst.consensus(&fit);
        assert!(
            fitted.consensus >= inlier_idx.len() * 7 / 10,
            "fit consensus {} of {}",
            fitted.consensus,
            inlier_idx.len()
        );
    }

    #[test]
    fn e_ls_basics() {
        let cfg = RegressionGenConfig {
            n: 20,
            d: 2,
            eta: 0.0,
            seed: 8,
            ..RegressionGenConfig::default()
        };
        let (inst, gt, _) = generate_regression(&cfg).unwrap();
        // Not zero (noise), but bounded by the noise level at truth.
        let at_truth = e_ls(&gt.x_true, &gt, &inst).unwrap();
        assert!(at_truth <= 0.3);

        // Single inlier with residual 0.2 exactly.
        let single = build_regression_instance(
            &[RegressionDatum {
                a: DVector::from_vec(vec![1.0]),
                b: 0.2,
            }],
            0.3,
        )
        .unwrap();
        let single_gt = GroundTruth {
            x_true: DVector::from_vec(vec![0.0]),
            inlier_mask_true: vec![true],
        };
        let v = e_ls(&DVector::from_vec(vec![0.0]), &single_gt, &single).unwrap();
        assert_relative_eq!(v, 0.2, epsilon = 1e-12);

        // Noise-free inliers at the true model give exactly zero.
        let exact = build_regression_instance(
            &[RegressionDatum {
                a: DVector::from_vec(vec![1.0]),
                b: 1.0,
            }],
            0.3,
        )
        .unwrap();
        let exact_gt = GroundTruth {
            x_true: DVector::from_vec(vec![1.0]),
            inlier_mask_true: vec![true],
        };
        assert_relative_eq!(
            e_ls(&DVector::from_vec(vec![1.0]), &exact_gt, &exact).unwrap(),
            0.0
        );

        let empty_gt = GroundTruth {
            x_true: DVector::from_vec(vec![0.0]),
            inlier_mask_true: vec![false],
        };
        assert!(matches!(
            e_ls(&DVector::from_vec(vec![0.0]), &empty_gt, &single),
            Err(DatagenError::EmptyGroundTruth)
        ));
    }

    #[test]
    fn least_squares_beats_minimal_fits_on_average() {
        // Symmetric inlier noise: the LS fit on all true inliers lands
        // closer to the truth than even the best minimal-subset fit, on
        // average over seeds.
        let mut ls_total = 0.0;
        let mut best_minimal_total = 0.0;
        for seed in 0..20 {
            let cfg = RegressionGenConfig {
                n: 40,
                d: 3,
                eta: 0.0,
                seed,
                ..RegressionGenConfig::default()
            };
            let (inst, gt, data) = generate_regression(&cfg).unwrap();
            let all: Vec<usize> = (0..data.len()).collect();
            let family = ModelFamily::Regression { dimension: 3 };
            let md = ModelData::Regression(data);
            let fit = least_squares_fit(&family, &md, &all).unwrap();
            ls_total += e_ls(&fit, &gt, &inst).unwrap();

            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let mut best = f64::INFINITY;
            for _ in 0..200 {
                let subset = rand::seq::index::sample(&mut rng, 40, 3).into_vec();
                for cand in minimal_solve(&family, &md, &subset) {
                    best = best.min(e_ls(&cand, &gt, &inst).unwrap());
                }
            }
            best_minimal_total += best;
        }
        assert!(
            ls_total < best_minimal_total,
            "LS mean {} vs best-minimal mean {}",
            ls_total / 20.0,
            best_minimal_total / 20.0
        );
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = RegressionGenConfig::default();
        cfg.eta = 120.0;
        assert!(matches!(
            generate_regression(&cfg),
            Err(DatagenError::InvalidConfig(_))
        ));
        let hcfg = HomographyGenConfig {
            n: 3,
            ..HomographyGenConfig::default()
        };
        assert!(matches!(
            generate_homography(&hcfg),
            Err(DatagenError::InvalidConfig(_))
        ));
    }
}
