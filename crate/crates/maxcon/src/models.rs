//! Problem-family plug-ins: residual construction, minimal solvers,
//! least-squares fitting and model-specific projections for linear
//! regression, homography, triangulation and fundamental-matrix estimation.
//!
//! Homography and fundamental parameterizations fix the last matrix entry
//! to 1 so residuals are affine in the parameters; data whose true model has
//! a vanishing last entry sit outside the supported regime. Fundamental
//! correspondences are Hartley-normalized at instance build time and the
//! inlier threshold is interpreted in normalized coordinates.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3x4, Point2, RowDVector, Vector3};
use thiserror::Error;

use crate::problem::{ConsensusInstance, ProblemError, ResidualFunctional, DEFAULT_DOMAIN_MARGIN};

/// Design matrices with a singular-value spread beyond this are treated as
/// degenerate.
const DEGENERACY_CONDITION: f64 = 1e10;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("need at least {needed} data, got {got}")]
    NotEnoughData { needed: usize, got: usize },
    #[error("datum {index} has inconsistent dimension")]
    DimensionMismatch { index: usize },
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("camera {index} is not full row rank")]
    InvalidCamera { index: usize },
    #[error("fixed-scale entry vanishes; model outside the supported regime")]
    ScaleFixingFailed,
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Supported model families with their parameter dimension and minimal
/// subset size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFamily {
    Regression { dimension: usize },
    Homography,
    Triangulation,
    Fundamental,
}

impl ModelFamily {
    pub fn dimension(&self) -> usize {
        match self {
            ModelFamily::Regression { dimension } => *dimension,
            ModelFamily::Homography | ModelFamily::Fundamental => 8,
            ModelFamily::Triangulation => 3,
        }
    }

    pub fn minimal_subset_size(&self) -> usize {
        match self {
            ModelFamily::Regression { dimension } => *dimension,
            ModelFamily::Homography => 4,
            ModelFamily::Triangulation => 2,
            ModelFamily::Fundamental => 8,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelFamily::Regression { .. } => "regression",
            ModelFamily::Homography => "homography",
            ModelFamily::Triangulation => "triangulation",
            ModelFamily::Fundamental => "fundamental",
        }
    }
}

/// One linear-regression datum `(a, b)` with residual `|aᵀx − b|`.
#[derive(Debug, Clone)]
pub struct RegressionDatum {
    pub a: DVector<f64>,
    pub b: f64,
}

/// A point match between two images.
#[derive(Debug, Clone, Copy)]
pub struct Correspondence {
    pub u: Point2<f64>,
    pub v: Point2<f64>,
}

/// One camera with its 2-D observation of the point being triangulated.
#[derive(Debug, Clone)]
pub struct ViewObservation {
    pub camera: Matrix3x4<f64>,
    pub point2d: Point2<f64>,
}

/// Family-specific raw data, the sampling source for minimal and
/// least-squares solvers.
#[derive(Debug, Clone)]
pub enum ModelData {
    Regression(Vec<RegressionDatum>),
    Correspondences(Vec<Correspondence>),
    Views(Vec<ViewObservation>),
}

impl ModelData {
    pub fn len(&self) -> usize {
        match self {
            ModelData::Regression(d) => d.len(),
            ModelData::Correspondences(d) => d.len(),
            ModelData::Views(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

// ---------------------------------------------------------------------------
// Instance builders
// ---------------------------------------------------------------------------

/// Regression instance: numerator row `[aᵀ, −b]`, constant-one denominator.
pub fn build_regression_instance(
    data: &[RegressionDatum],
    epsilon: f64,
) -> Result<ConsensusInstance, ModelError> {
    if data.is_empty() {
        return Err(ModelError::NotEnoughData { needed: 1, got: 0 });
    }
    let d = data[0].a.len();
    let mut functionals = Vec::with_capacity(data.len());
    for (index, datum) in data.iter().enumerate() {
        if datum.a.len() != d {
            return Err(ModelError::DimensionMismatch { index });
        }
        let mut num = DMatrix::zeros(1, d + 1);
        for j in 0..d {
            num[(0, j)] = datum.a[j];
        }
        num[(0, d)] = -datum.b;
        let mut den = RowDVector::zeros(d + 1);
        den[d] = 1.0;
        functionals.push(ResidualFunctional::new(num, den));
    }
    Ok(ConsensusInstance::new(
        functionals,
        epsilon,
        d,
        DEFAULT_DOMAIN_MARGIN,
    )?)
}

/// Homography instance with `h₃₃` fixed to 1: the residual is the transfer
/// error in the second image, in pixels. Parameter order is row-major
/// `[h₁₁ h₁₂ h₁₃ h₂₁ h₂₂ h₂₃ h₃₁ h₃₂]`.
pub fn build_homography_instance(
    corrs: &[Correspondence],
    epsilon: f64,
) -> Result<ConsensusInstance, ModelError> {
    if corrs.len() < 4 {
        return Err(ModelError::NotEnoughData {
            needed: 4,
            got: corrs.len(),
        });
    }
    let functionals = corrs
        .iter()
        .map(|c| {
            let (ux, uy) = (c.u.x, c.u.y);
            let (vx, vy) = (c.v.x, c.v.y);
            let mut num = DMatrix::zeros(2, 9);
            num[(0, 0)] = ux;
            num[(0, 1)] = uy;
            num[(0, 2)] = 1.0;
            num[(0, 6)] = -vx * ux;
            num[(0, 7)] = -vx * uy;
            num[(0, 8)] = -vx;
            num[(1, 3)] = ux;
            num[(1, 4)] = uy;
            num[(1, 5)] = 1.0;
            num[(1, 6)] = -vy * ux;
            num[(1, 7)] = -vy * uy;
            num[(1, 8)] = -vy;
            let mut den = RowDVector::zeros(9);
            den[6] = ux;
            den[7] = uy;
            den[8] = 1.0;
            ResidualFunctional::new(num, den)
        })
        .collect();
    Ok(ConsensusInstance::new(
        functionals,
        epsilon,
        8,
        DEFAULT_DOMAIN_MARGIN,
    )?)
}

/// Triangulation instance: reprojection error per camera, with the domain
/// constraints `P⁽³⁾·[x;1] ≥ μ` keeping the point in front of every camera.
pub fn build_triangulation_instance(
    views: &[ViewObservation],
    epsilon: f64,
) -> Result<ConsensusInstance, ModelError> {
    if views.len() < 2 {
        return Err(ModelError::NotEnoughData {
            needed: 2,
            got: views.len(),
        });
    }
    let mut functionals = Vec::with_capacity(views.len());
    for (index, view) in views.iter().enumerate() {
        let sv = view.camera.svd(false, false).singular_values;
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        let smax = sv.iter().cloned().fold(0.0f64, f64::max);
        if smin.is_nan() || smin <= 1e-10 * smax {
            return Err(ModelError::InvalidCamera { index });
        }
        let p = &view.camera;
        let u = view.point2d;
        let mut num = DMatrix::zeros(2, 4);
        for r in 0..2 {
            let obs = if r == 0 { u.x } else { u.y };
            for c in 0..4 {
                num[(r, c)] = p[(r, c)] - obs * p[(2, c)];
            }
        }
        let mut den = RowDVector::zeros(4);
        for c in 0..4 {
            den[c] = p[(2, c)];
        }
        functionals.push(ResidualFunctional::new(num, den));
    }
    Ok(ConsensusInstance::new(
        functionals,
        epsilon,
        3,
        DEFAULT_DOMAIN_MARGIN,
    )?)
}

/// Normalizing transforms of a fundamental-matrix instance, together with
/// the normalized correspondences that downstream solvers must sample from.
#[derive(Debug, Clone)]
pub struct FundamentalFrame {
    pub t1: Matrix3<f64>,
    pub t2: Matrix3<f64>,
    pub normalized: Vec<Correspondence>,
}

impl FundamentalFrame {
    /// Maps a raw-frame fundamental matrix into the instance's parameter
    /// vector (normalized frame, `f₃₃ = 1`).
    pub fn instance_params(&self, f_raw: &Matrix3<f64>) -> Option<DVector<f64>> {
        let t1_inv = self.t1.try_inverse()?;
        let t2_inv = self.t2.try_inverse()?;
        let f_n = t2_inv.transpose() * f_raw * t1_inv;
        fixed_scale_params(&f_n)
    }
}

/// Fundamental-matrix instance on Hartley-normalized coordinates with
/// `f₃₃` fixed to 1: the residual is the algebraic epipolar error
/// `|v̄ᵀF ū|` and epsilon is interpreted in the normalized frame. Returns
/// the instance together with the normalization frame.
pub fn build_fundamental_instance(
    corrs: &[Correspondence],
    epsilon: f64,
) -> Result<(ConsensusInstance, FundamentalFrame), ModelError> {
    if corrs.len() < 8 {
        return Err(ModelError::NotEnoughData {
            needed: 8,
            got: corrs.len(),
        });
    }
    let (us, t1) = normalize_points(&corrs.iter().map(|c| c.u).collect::<Vec<_>>());
    let (vs, t2) = normalize_points(&corrs.iter().map(|c| c.v).collect::<Vec<_>>());
    let normalized: Vec<Correspondence> = us
        .iter()
        .zip(&vs)
        .map(|(&u, &v)| Correspondence { u, v })
        .collect();
    let functionals = normalized
        .iter()
        .map(|c| {
            let mut num = DMatrix::zeros(1, 9);
            num[(0, 0)] = c.v.x * c.u.x;
            num[(0, 1)] = c.v.x * c.u.y;
            num[(0, 2)] = c.v.x;
            num[(0, 3)] = c.v.y * c.u.x;
            num[(0, 4)] = c.v.y * c.u.y;
            num[(0, 5)] = c.v.y;
            num[(0, 6)] = c.u.x;
            num[(0, 7)] = c.u.y;
            num[(0, 8)] = 1.0;
            let mut den = RowDVector::zeros(9);
            den[8] = 1.0;
            ResidualFunctional::new(num, den)
        })
        .collect();
    let inst = ConsensusInstance::new(functionals, epsilon, 8, DEFAULT_DOMAIN_MARGIN)?;
    Ok((
        inst,
        FundamentalFrame {
            t1,
            t2,
            normalized,
        },
    ))
}

// ---------------------------------------------------------------------------
// Shared linear-algebra helpers
// ---------------------------------------------------------------------------

/// Isotropic Hartley normalization: centroid to the origin, mean distance
/// to √2. Returns the transformed points and the transform `T`.
pub fn normalize_points(points: &[Point2<f64>]) -> (Vec<Point2<f64>>, Matrix3<f64>) {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let mean_dist = points
        .iter()
        .map(|p| ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    let scale = if mean_dist > 1e-12 {
        2.0f64.sqrt() / mean_dist
    } else {
        1.0
    };
    let t = Matrix3::new(
        scale,
        0.0,
        -scale * cx,
        0.0,
        scale,
        -scale * cy,
        0.0,
        0.0,
        1.0,
    );
    let out = points
        .iter()
        .map(|p| Point2::new(scale * (p.x - cx), scale * (p.y - cy)))
        .collect();
    (out, t)
}

/// Smallest-right-singular-vector solve of the homogeneous system
/// `A·h = 0`, with a spread-based degeneracy check that ignores the
/// structural null direction. Under-determined systems are padded with
/// zero rows so the full right factor is available.
fn nullspace_solve(a: &DMatrix<f64>) -> Option<DVector<f64>> {
    let cols = a.ncols();
    let padded;
    let work = if a.nrows() < cols {
        padded = {
            let mut p = DMatrix::zeros(cols, cols);
            p.rows_mut(0, a.nrows()).copy_from(a);
            p
        };
        &padded
    } else {
        a
    };
    let svd = work.clone().svd(false, true);
    let vt = svd.v_t?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| sv[i].total_cmp(&sv[j]));
    let largest = sv[order[cols - 1]];
    let second_smallest = sv[order[1]];
    if second_smallest * DEGENERACY_CONDITION <= largest {
        return None;
    }
    Some(vt.row(order[0]).transpose())
}

/// Divides a 3×3 matrix by its last entry and flattens the remaining eight
/// into a parameter vector; `None` when the entry is (numerically) zero.
pub fn fixed_scale_params(m: &Matrix3<f64>) -> Option<DVector<f64>> {
    let scale = m[(2, 2)];
    let magnitude = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale.abs() <= 1e-12 * magnitude.max(1.0) {
        return None;
    }
    let mut x = DVector::zeros(8);
    for r in 0..3 {
        for c in 0..3 {
            if r == 2 && c == 2 {
                continue;
            }
            x[r * 3 + c] = m[(r, c)] / scale;
        }
    }
    Some(x)
}

/// Inverse of [`fixed_scale_params`]: rebuilds the 3×3 matrix with the last
/// entry set to 1.
pub fn matrix_from_params(x: &DVector<f64>) -> Matrix3<f64> {
    Matrix3::new(x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7], 1.0)
}

/// Applies a homography; `None` when the point maps to infinity.
pub fn apply_homography(h: &Matrix3<f64>, p: &Point2<f64>) -> Option<Point2<f64>> {
    let q = h * Vector3::new(p.x, p.y, 1.0);
    if q.z.abs() <= 1e-12 {
        return None;
    }
    Some(Point2::new(q.x / q.z, q.y / q.z))
}

/// Projects a 3-D point; `None` when it lies on or behind the principal
/// plane.
pub fn project_point(camera: &Matrix3x4<f64>, x: &Vector3<f64>) -> Option<Point2<f64>> {
    let h = camera * nalgebra::Vector4::new(x.x, x.y, x.z, 1.0);
    if h.z <= 1e-12 {
        return None;
    }
    Some(Point2::new(h.x / h.z, h.y / h.z))
}

// ---------------------------------------------------------------------------
// Minimal and least-squares solvers
// ---------------------------------------------------------------------------

fn homography_dlt(corrs: &[Correspondence]) -> Option<Matrix3<f64>> {
    let (us, t1) = normalize_points(&corrs.iter().map(|c| c.u).collect::<Vec<_>>());
    let (vs, t2) = normalize_points(&corrs.iter().map(|c| c.v).collect::<Vec<_>>());
    let mut a = DMatrix::zeros(2 * corrs.len(), 9);
    for (i, (u, v)) in us.iter().zip(&vs).enumerate() {
        let r = 2 * i;
        a[(r, 0)] = u.x;
        a[(r, 1)] = u.y;
        a[(r, 2)] = 1.0;
        a[(r, 6)] = -v.x * u.x;
        a[(r, 7)] = -v.x * u.y;
        a[(r, 8)] = -v.x;
        a[(r + 1, 3)] = u.x;
        a[(r + 1, 4)] = u.y;
        a[(r + 1, 5)] = 1.0;
        a[(r + 1, 6)] = -v.y * u.x;
        a[(r + 1, 7)] = -v.y * u.y;
        a[(r + 1, 8)] = -v.y;
    }
    let h = nullspace_solve(&a)?;
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t2_inv = t2.try_inverse()?;
    Some(t2_inv * hn * t1)
}

fn fundamental_eight_point(corrs: &[Correspondence]) -> Option<Matrix3<f64>> {
    let (us, t1) = normalize_points(&corrs.iter().map(|c| c.u).collect::<Vec<_>>());
    let (vs, t2) = normalize_points(&corrs.iter().map(|c| c.v).collect::<Vec<_>>());
    let mut a = DMatrix::zeros(corrs.len(), 9);
    for (i, (u, v)) in us.iter().zip(&vs).enumerate() {
        a[(i, 0)] = v.x * u.x;
        a[(i, 1)] = v.x * u.y;
        a[(i, 2)] = v.x;
        a[(i, 3)] = v.y * u.x;
        a[(i, 4)] = v.y * u.y;
        a[(i, 5)] = v.y;
        a[(i, 6)] = u.x;
        a[(i, 7)] = u.y;
        a[(i, 8)] = 1.0;
    }
    let f = nullspace_solve(&a)?;
    let fn_mat = Matrix3::new(f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[7], f[8]);
    let projected = rank2_project(&fn_mat).matrix;
    Some(t2.transpose() * projected * t1)
}

fn triangulation_dlt(views: &[ViewObservation]) -> Option<Vector3<f64>> {
    let mut a = DMatrix::zeros(2 * views.len(), 4);
    for (i, view) in views.iter().enumerate() {
        let p = &view.camera;
        for r in 0..2 {
            let obs = if r == 0 { view.point2d.x } else { view.point2d.y };
            let mut row = [0.0; 4];
            for c in 0..4 {
                row[c] = p[(r, c)] - obs * p[(2, c)];
            }
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm <= 1e-300 {
                return None;
            }
            for c in 0..4 {
                a[(2 * i + r, c)] = row[c] / norm;
            }
        }
    }
    let h = nullspace_solve(&a)?;
    if h[3].abs() <= 1e-12 * h.norm() {
        return None;
    }
    Some(Vector3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3]))
}

fn regression_exact(data: &[&RegressionDatum]) -> Option<DVector<f64>> {
    let d = data[0].a.len();
    let mut a = DMatrix::zeros(data.len(), d);
    let mut b = DVector::zeros(data.len());
    for (i, datum) in data.iter().enumerate() {
        for j in 0..d {
            a[(i, j)] = datum.a[j];
        }
        b[i] = datum.b;
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let smin = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if smin.is_nan() || smin * DEGENERACY_CONDITION <= smax {
        return None;
    }
    svd.solve(&b, 0.0).ok()
}

fn gather<'a, T>(items: &'a [T], subset: &[usize]) -> Vec<&'a T> {
    subset.iter().map(|&i| &items[i]).collect()
}

/// Fits candidate models to a minimal subset. Degenerate subsets yield an
/// empty candidate list.
pub fn minimal_solve(family: &ModelFamily, data: &ModelData, subset: &[usize]) -> Vec<DVector<f64>> {
    assert_eq!(
        subset.len(),
        family.minimal_subset_size(),
        "minimal_solve requires exactly the minimal subset size"
    );
    match (family, data) {
        (ModelFamily::Regression { .. }, ModelData::Regression(all)) => {
            regression_exact(&gather(all, subset)).into_iter().collect()
        }
        (ModelFamily::Homography, ModelData::Correspondences(all)) => {
            let picked: Vec<Correspondence> = subset.iter().map(|&i| all[i]).collect();
            homography_dlt(&picked)
                .and_then(|h| fixed_scale_params(&h))
                .into_iter()
                .collect()
        }
        (ModelFamily::Fundamental, ModelData::Correspondences(all)) => {
            let picked: Vec<Correspondence> = subset.iter().map(|&i| all[i]).collect();
            fundamental_eight_point(&picked)
                .and_then(|f| fixed_scale_params(&f))
                .into_iter()
                .collect()
        }
        (ModelFamily::Triangulation, ModelData::Views(all)) => {
            let picked: Vec<ViewObservation> = subset.iter().map(|&i| all[i].clone()).collect();
            triangulation_dlt(&picked)
                .map(|x| DVector::from_vec(vec![x.x, x.y, x.z]))
                .into_iter()
                .collect()
        }
        _ => panic!("model data does not match family {:?}", family),
    }
}

/// Algebraic least-squares fit over an inlier subset (normal equations for
/// regression, DLT over all subset data for the geometric families).
pub fn least_squares_fit(
    family: &ModelFamily,
    data: &ModelData,
    subset: &[usize],
) -> Result<DVector<f64>, ModelError> {
    let k = family.minimal_subset_size();
    if subset.len() < k {
        return Err(ModelError::NotEnoughData {
            needed: k,
            got: subset.len(),
        });
    }
    match (family, data) {
        (ModelFamily::Regression { .. }, ModelData::Regression(all)) => {
            regression_exact(&gather(all, subset)).ok_or(ModelError::RankDeficient)
        }
        (ModelFamily::Homography, ModelData::Correspondences(all)) => {
            let picked: Vec<Correspondence> = subset.iter().map(|&i| all[i]).collect();
            let h = homography_dlt(&picked).ok_or(ModelError::RankDeficient)?;
            fixed_scale_params(&h).ok_or(ModelError::ScaleFixingFailed)
        }
        (ModelFamily::Fundamental, ModelData::Correspondences(all)) => {
            let picked: Vec<Correspondence> = subset.iter().map(|&i| all[i]).collect();
            let f = fundamental_eight_point(&picked).ok_or(ModelError::RankDeficient)?;
            fixed_scale_params(&f).ok_or(ModelError::ScaleFixingFailed)
        }
        (ModelFamily::Triangulation, ModelData::Views(all)) => {
            let picked: Vec<ViewObservation> = subset.iter().map(|&i| all[i].clone()).collect();
            let x = triangulation_dlt(&picked).ok_or(ModelError::RankDeficient)?;
            Ok(DVector::from_vec(vec![x.x, x.y, x.z]))
        }
        _ => panic!("model data does not match family {:?}", family),
    }
}

// ---------------------------------------------------------------------------
// Rank-2 projection
// ---------------------------------------------------------------------------

/// Result of [`rank2_project`].
#[derive(Debug, Clone)]
pub struct Rank2Projection {
    pub matrix: Matrix3<f64>,
    /// Whether the matrix was rescaled to a unit fixed-scale entry.
    pub rescaled: bool,
}

/// Nearest (Frobenius) rank-≤2 matrix: zeroes the smallest singular value,
/// then rescales so the fixed-scale entry is 1 when that entry is nonzero.
pub fn rank2_project(f: &Matrix3<f64>) -> Rank2Projection {
    let svd = f.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut sv = svd.singular_values;
    let mut min_idx = 0;
    for i in 1..3 {
        if sv[i] < sv[min_idx] {
            min_idx = i;
        }
    }
    sv[min_idx] = 0.0;
    let truncated = u * Matrix3::from_diagonal(&sv) * vt;
    let magnitude = truncated.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let scale = truncated[(2, 2)];
    if scale.abs() > 1e-12 * magnitude.max(1.0) {
        Rank2Projection {
            matrix: truncated / scale,
            rescaled: true,
        }
    } else {
        Rank2Projection {
            matrix: truncated,
            rescaled: false,
        }
    }
}

/// Parameter-space rank-2 projection hook for the bisection driver: maps the
/// 8-vector to its matrix, projects, and re-fixes the scale. Falls back to
/// the input when the projected matrix cannot be rescaled.
pub fn fundamental_post_step(x: &DVector<f64>) -> DVector<f64> {
    let f = matrix_from_params(x);
    let proj = rank2_project(&f);
    if proj.rescaled {
        fixed_scale_params(&proj.matrix).unwrap_or_else(|| x.clone())
    } else {
        x.clone()
    }
}
