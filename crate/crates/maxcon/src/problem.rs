//! Problem core: quasiconvex residual functionals, fitting instances and
//! inlier counting.
//!
//! A residual has the form `r_i(x) = ‖M_i·[x;1]‖₂ / (c_i·[x;1])` with a
//! positive denominator. The inlier test `r_i(x) ≤ ε` is evaluated through
//! the shifted residual `r_i'(x) = ‖M_i·[x;1]‖₂ − ε·(c_i·[x;1])`, which is
//! well defined everywhere and nonpositive exactly on the inlier region.

use nalgebra::{DMatrix, DVector, RowDVector};
use thiserror::Error;

/// Errors raised while building instances or evaluating residuals.
#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("instance needs at least one residual functional")]
    Empty,
    #[error("functional {index}: expected {expected} homogeneous columns, got {got}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("functional {index} contains a non-finite entry")]
    NonFinite { index: usize },
    #[error("inlier threshold must be nonnegative, got {0}")]
    NegativeEpsilon(f64),
    #[error("domain margin must be positive, got {0}")]
    NonPositiveMargin(f64),
    #[error("datum {index}: denominator {value:.3e} is below the domain margin")]
    OutOfDomain { index: usize, value: f64 },
    #[error("datum index {index} out of range for instance of size {len}")]
    IndexOutOfRange { index: usize, len: usize },
}

/// One datum's residual `‖M·[x;1]‖₂ / (c·[x;1])`.
///
/// The numerator matrix has shape `m × (d+1)` and acts on the homogenized
/// parameter vector; the denominator is a single affine functional. Pure
/// linear regression uses the constant-one denominator `c = [0,…,0,1]`.
#[derive(Debug, Clone)]
pub struct ResidualFunctional {
    numerator: DMatrix<f64>,
    denominator: RowDVector<f64>,
}

impl ResidualFunctional {
    pub fn new(numerator: DMatrix<f64>, denominator: RowDVector<f64>) -> Self {
        Self {
            numerator,
            denominator,
        }
    }

    /// Numerator matrix `M` of shape `m × (d+1)`.
    pub fn numerator(&self) -> &DMatrix<f64> {
        &self.numerator
    }

    /// Denominator row `c` of length `d+1`.
    pub fn denominator(&self) -> &RowDVector<f64> {
        &self.denominator
    }

    /// Parameter dimension `d` implied by the homogeneous column count.
    pub fn dimension(&self) -> usize {
        self.numerator.ncols() - 1
    }

    /// `‖M·[x;1]‖₂` evaluated without materializing `[x;1]`.
    pub fn numerator_norm(&self, x: &DVector<f64>) -> f64 {
        let d = x.len();
        let mut sq = 0.0;
        for r in 0..self.numerator.nrows() {
            let mut v = self.numerator[(r, d)];
            for j in 0..d {
                v += self.numerator[(r, j)] * x[j];
            }
            sq += v * v;
        }
        sq.sqrt()
    }

    /// `c·[x;1]`.
    pub fn denominator_value(&self, x: &DVector<f64>) -> f64 {
        let d = x.len();
        let mut v = self.denominator[d];
        for j in 0..d {
            v += self.denominator[j] * x[j];
        }
        v
    }

    /// Shifted residual `‖M·[x;1]‖₂ − ε·(c·[x;1])`.
    pub fn shifted(&self, x: &DVector<f64>, epsilon: f64) -> f64 {
        self.numerator_norm(x) - epsilon * self.denominator_value(x)
    }

    /// True when the denominator has no dependence on the parameters, as in
    /// regression and the linearized epipolar residual.
    pub fn has_constant_denominator(&self) -> bool {
        let d = self.dimension();
        (0..d).all(|j| self.denominator[j] == 0.0)
    }
}

/// A consensus-maximization problem: `N` residual functionals, an inlier
/// threshold and the closed domain approximation `p_i(x) ≥ μ`.
#[derive(Debug, Clone)]
pub struct ConsensusInstance {
    functionals: Vec<ResidualFunctional>,
    epsilon: f64,
    dimension: usize,
    domain_margin: f64,
}

/// Default closed-domain margin; matched to unit-scale denominators.
pub const DEFAULT_DOMAIN_MARGIN: f64 = 1e-6;

impl ConsensusInstance {
    pub fn new(
        functionals: Vec<ResidualFunctional>,
        epsilon: f64,
        dimension: usize,
        domain_margin: f64,
    ) -> Result<Self, ProblemError> {
        if functionals.is_empty() {
            return Err(ProblemError::Empty);
        }
        if epsilon.is_nan() || epsilon < 0.0 {
            return Err(ProblemError::NegativeEpsilon(epsilon));
        }
        if domain_margin.is_nan() || domain_margin <= 0.0 {
            return Err(ProblemError::NonPositiveMargin(domain_margin));
        }
        for (index, f) in functionals.iter().enumerate() {
            if f.numerator.ncols() != dimension + 1 || f.numerator.nrows() == 0 {
                return Err(ProblemError::DimensionMismatch {
                    index,
                    expected: dimension + 1,
                    got: f.numerator.ncols(),
                });
            }
            if f.denominator.len() != dimension + 1 {
                return Err(ProblemError::DimensionMismatch {
                    index,
                    expected: dimension + 1,
                    got: f.denominator.len(),
                });
            }
            let finite = f.numerator.iter().all(|v| v.is_finite())
                && f.denominator.iter().all(|v| v.is_finite());
            if !finite {
                return Err(ProblemError::NonFinite { index });
            }
        }
        Ok(Self {
            functionals,
            epsilon,
            dimension,
            domain_margin,
        })
    }

    pub fn len(&self) -> usize {
        self.functionals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functionals.is_empty()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn domain_margin(&self) -> f64 {
        self.domain_margin
    }

    pub fn functional(&self, i: usize) -> &ResidualFunctional {
        &self.functionals[i]
    }

    pub fn functionals(&self) -> &[ResidualFunctional] {
        &self.functionals
    }

    /// Replaces the domain margin, e.g. with [`Self::calibrated_margin`].
    pub fn with_domain_margin(mut self, margin: f64) -> Result<Self, ProblemError> {
        if margin.is_nan() || margin <= 0.0 {
            return Err(ProblemError::NonPositiveMargin(margin));
        }
        self.domain_margin = margin;
        Ok(self)
    }

    /// Margin `1e-6 × median |p_j(x)|`, evaluated at an initial estimate.
    ///
    /// Interior-point subproblems need a closed domain; tying the margin to
    /// the denominator scale of the starting point keeps it negligible
    /// relative to actual depths or projective denominators. Falls back to
    /// [`DEFAULT_DOMAIN_MARGIN`] when the median vanishes.
    pub fn calibrated_margin(&self, x: &DVector<f64>) -> f64 {
        let mut mags: Vec<f64> = self
            .functionals
            .iter()
            .map(|f| f.denominator_value(x).abs())
            .collect();
        mags.sort_by(|a, b| a.total_cmp(b));
        let n = mags.len();
        let median = if n % 2 == 1 {
            mags[n / 2]
        } else {
            0.5 * (mags[n / 2 - 1] + mags[n / 2])
        };
        let margin = 1e-6 * median;
        if margin > 0.0 {
            margin
        } else {
            DEFAULT_DOMAIN_MARGIN
        }
    }

    /// Residual `r_i(x)`; errors when the queried datum's denominator is
    /// below the domain margin.
    pub fn residual(&self, i: usize, x: &DVector<f64>) -> Result<f64, ProblemError> {
        let f = self
            .functionals
            .get(i)
            .ok_or(ProblemError::IndexOutOfRange {
                index: i,
                len: self.functionals.len(),
            })?;
        let den = f.denominator_value(x);
        if den < self.domain_margin {
            return Err(ProblemError::OutOfDomain {
                index: i,
                value: den,
            });
        }
        Ok(f.numerator_norm(x) / den)
    }

    /// Shifted residual `r_i'(x) = ‖M_i·[x;1]‖₂ − ε·(c_i·[x;1])`; well
    /// defined for any `x`.
    pub fn shifted_residual(&self, i: usize, x: &DVector<f64>) -> f64 {
        self.functionals[i].shifted(x, self.epsilon)
    }

    /// True when every denominator satisfies `p_j(x) ≥ μ`.
    pub fn in_domain(&self, x: &DVector<f64>) -> bool {
        self.functionals
            .iter()
            .all(|f| f.denominator_value(x) >= self.domain_margin)
    }

    /// Counts inliers of `x`. A datum is an inlier when its shifted residual
    /// is nonpositive and its denominator clears the domain margin; domain
    /// violations are counted as outliers, never as errors.
    pub fn consensus(&self, x: &DVector<f64>) -> Estimate {
        let mut mask = Vec::with_capacity(self.functionals.len());
        let mut count = 0usize;
        for f in &self.functionals {
            let inlier = f.denominator_value(x) >= self.domain_margin
                && f.shifted(x, self.epsilon) <= 0.0;
            if inlier {
                count += 1;
            }
            mask.push(inlier);
        }
        Estimate {
            x: x.clone(),
            consensus: count,
            inlier_mask: mask,
        }
    }
}

/// A parameter vector with its consensus value and inlier mask.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub x: DVector<f64>,
    pub consensus: usize,
    pub inlier_mask: Vec<bool>,
}
