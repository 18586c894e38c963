//! Dense primal-dual interior-point method with Nesterov-Todd scaling and a
//! Mehrotra predictor-corrector step, over the nonnegative orthant and
//! second-order cones.
//!
//! Problems are posed as
//!
//! ```text
//! minimize    fₓ·x + fₛ·s
//! subject to  C(x, s) ∈ K
//! ```
//!
//! where every cone coordinate is affine in the variables and each slack
//! variable `sₖ` enters only its own constraint block. That separability
//! makes the slack-slack block of the Newton system diagonal, so each KKT
//! solve reduces to a Cholesky factorization of the small parameter block.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::cones::{ConeLayout, Scaling};
use super::SocpStatus;

/// One orthant row: `coeff_x·x + coef·s_k + constant ≥ 0`.
#[derive(Debug, Clone)]
pub(crate) struct LinRow {
    pub coeff_x: DVector<f64>,
    pub slack: Option<(usize, f64)>,
    pub constant: f64,
}

/// One SOC block: `coeff_x·x + coef·s_k·e₀ + constant ∈ Q^{m+1}`, with the
/// slack entering the head coordinate only.
#[derive(Debug, Clone)]
pub(crate) struct SocBlock {
    pub coeff_x: DMatrix<f64>,
    pub slack: Option<(usize, f64)>,
    pub constant: DVector<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct ConeProblem {
    pub num_x: usize,
    pub num_slack: usize,
    pub cost_x: DVector<f64>,
    pub cost_slack: DVector<f64>,
    pub lin: Vec<LinRow>,
    pub soc: Vec<SocBlock>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct IpmSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct IpmSolution {
    pub u: DVector<f64>,
    pub status: SocpStatus,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub rel_gap: f64,
}

impl ConeProblem {
    pub fn num_vars(&self) -> usize {
        self.num_x + self.num_slack
    }

    pub fn layout(&self) -> ConeLayout {
        ConeLayout {
            lin: self.lin.len(),
            soc: self.soc.iter().map(|b| b.coeff_x.nrows()).collect(),
        }
    }

    pub fn cost(&self) -> DVector<f64> {
        let mut f = DVector::zeros(self.num_vars());
        f.rows_mut(0, self.num_x).copy_from(&self.cost_x);
        f.rows_mut(self.num_x, self.num_slack)
            .copy_from(&self.cost_slack);
        f
    }

    /// Constant part of the cone map, `C(0)`.
    fn constants(&self) -> DVector<f64> {
        let layout = self.layout();
        let mut c = DVector::zeros(layout.total());
        for (r, row) in self.lin.iter().enumerate() {
            c[r] = row.constant;
        }
        let mut off = self.lin.len();
        for b in &self.soc {
            c.rows_mut(off, b.constant.len()).copy_from(&b.constant);
            off += b.constant.len();
        }
        c
    }

    /// Evaluates the affine cone map `C(u)`.
    fn cone_eval(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut out = self.constants();
        let jac = self.jac_apply(u);
        out += jac;
        out
    }

    /// `J·du`, the linear part of the cone map.
    fn jac_apply(&self, du: &DVector<f64>) -> DVector<f64> {
        let layout = self.layout();
        let x = du.rows(0, self.num_x);
        let mut out = DVector::zeros(layout.total());
        for (r, row) in self.lin.iter().enumerate() {
            let mut v = row.coeff_x.dot(&x);
            if let Some((k, c)) = row.slack {
                v += c * du[self.num_x + k];
            }
            out[r] = v;
        }
        let mut off = self.lin.len();
        for b in &self.soc {
            let m = b.coeff_x.nrows();
            let block = &b.coeff_x * x;
            out.rows_mut(off, m).copy_from(&block);
            if let Some((k, c)) = b.slack {
                out[off] += c * du[self.num_x + k];
            }
            off += m;
        }
        out
    }

    /// `Jᵀ·v`.
    fn jac_t_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.num_vars());
        for (r, row) in self.lin.iter().enumerate() {
            let w = v[r];
            if w != 0.0 {
                for j in 0..self.num_x {
                    out[j] += row.coeff_x[j] * w;
                }
                if let Some((k, c)) = row.slack {
                    out[self.num_x + k] += c * w;
                }
            }
        }
        let mut off = self.lin.len();
        for b in &self.soc {
            let m = b.coeff_x.nrows();
            let vb = v.rows(off, m);
            let contrib = b.coeff_x.tr_mul(&vb);
            for j in 0..self.num_x {
                out[j] += contrib[j];
            }
            if let Some((k, c)) = b.slack {
                out[self.num_x + k] += c * vb[0];
            }
            off += m;
        }
        out
    }
}

/// Factorized Newton matrix `M = Jᵀ·W⁻²·J` in Schur form over the
/// parameter block. The Cholesky factor carries a small regularization;
/// solves are corrected back to the unregularized system by iterative
/// refinement against the stored exact blocks.
struct KktFactor {
    chol: Cholesky<f64, Dyn>,
    mxs: DMatrix<f64>,
    dss_inv: DVector<f64>,
    mxx_exact: DMatrix<f64>,
    dss_exact: DVector<f64>,
    num_x: usize,
}

impl KktFactor {
    fn solve_regularized(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let nx = self.num_x;
        let ns = rhs.len() - nx;
        let rx = rhs.rows(0, nx).into_owned();
        let rs = rhs.rows(nx, ns).into_owned();
        let rs_scaled = rs.component_mul(&self.dss_inv);
        let reduced = rx - &self.mxs * &rs_scaled;
        let dx = self.chol.solve(&reduced);
        let ds_raw = rs - self.mxs.tr_mul(&dx);
        let ds = ds_raw.component_mul(&self.dss_inv);
        let mut out = DVector::zeros(rhs.len());
        out.rows_mut(0, nx).copy_from(&dx);
        out.rows_mut(nx, ns).copy_from(&ds);
        out
    }

    /// `M·v` with the exact (unregularized) blocks.
    fn apply_exact(&self, v: &DVector<f64>) -> DVector<f64> {
        let nx = self.num_x;
        let ns = v.len() - nx;
        let vx = v.rows(0, nx).into_owned();
        let vs = v.rows(nx, ns).into_owned();
        let top = &self.mxx_exact * &vx + &self.mxs * &vs;
        let bottom = self.mxs.tr_mul(&vx) + vs.component_mul(&self.dss_exact);
        let mut out = DVector::zeros(v.len());
        out.rows_mut(0, nx).copy_from(&top);
        out.rows_mut(nx, ns).copy_from(&bottom);
        out
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut sol = self.solve_regularized(rhs);
        for _ in 0..2 {
            let residual = rhs - self.apply_exact(&sol);
            sol += self.solve_regularized(&residual);
        }
        sol
    }
}

fn assemble(
    prob: &ConeProblem,
    scaling: Option<&Scaling>,
    reg: f64,
) -> Option<KktFactor> {
    let nx = prob.num_x;
    let ns = prob.num_slack;
    let mut mxx = DMatrix::<f64>::zeros(nx, nx);
    let mut mxs = DMatrix::<f64>::zeros(nx, ns);
    let mut dss = DVector::<f64>::zeros(ns);

    for (r, row) in prob.lin.iter().enumerate() {
        let w2 = match scaling {
            Some(s) => 1.0 / (s.lin_w[r] * s.lin_w[r]),
            None => 1.0,
        };
        // Rank-one update w2 · g gᵀ restricted to nonzero coefficients.
        for i in 0..nx {
            let gi = row.coeff_x[i];
            if gi == 0.0 {
                continue;
            }
            for j in 0..nx {
                mxx[(i, j)] += w2 * gi * row.coeff_x[j];
            }
        }
        if let Some((k, c)) = row.slack {
            for i in 0..nx {
                mxs[(i, k)] += w2 * c * row.coeff_x[i];
            }
            dss[k] += w2 * c * c;
        }
    }

    for (kblk, b) in prob.soc.iter().enumerate() {
        let m = b.coeff_x.nrows();
        let w2 = match scaling {
            Some(s) => s.soc_w2_inv_matrix(kblk, m),
            None => DMatrix::identity(m, m),
        };
        let t = &w2 * &b.coeff_x; // m × nx
        mxx += b.coeff_x.tr_mul(&t);
        if let Some((k, c)) = b.slack {
            let w2col = w2.column(0).into_owned() * c;
            let xs = b.coeff_x.tr_mul(&w2col);
            for i in 0..nx {
                mxs[(i, k)] += xs[i];
            }
            dss[k] += c * c * w2[(0, 0)];
        }
    }

    let mxx_exact = mxx.clone();
    let dss_exact = dss.clone();
    let scale = mxx.diagonal().amax().max(1.0);
    for i in 0..nx {
        mxx[(i, i)] += reg * scale;
    }
    for k in 0..ns {
        dss[k] += reg * scale;
        if dss[k] <= 0.0 {
            return None;
        }
    }
    let dss_inv = dss.map(|v| 1.0 / v);

    // Schur complement over the parameter block.
    let mut schur = mxx;
    if ns > 0 {
        let mut scaled = mxs.clone();
        for k in 0..ns {
            let f = dss_inv[k];
            for i in 0..nx {
                scaled[(i, k)] *= f;
            }
        }
        schur -= &mxs * scaled.transpose();
    }
    // Guard against asymmetry from accumulation order.
    let schur = (&schur + schur.transpose()) * 0.5;
    let chol = Cholesky::new(schur)?;
    Some(KktFactor {
        chol,
        mxs,
        dss_inv,
        mxx_exact,
        dss_exact,
        num_x: nx,
    })
}

fn factor_with_retries(prob: &ConeProblem, scaling: Option<&Scaling>) -> Option<KktFactor> {
    let mut reg = 1e-13;
    for _ in 0..5 {
        if let Some(f) = assemble(prob, scaling, reg) {
            return Some(f);
        }
        reg *= 1e3;
    }
    None
}

/// Solves the cone program, optionally warm-starting the variables.
///
/// The parameter block is column-equilibrated first: geometric residual
/// coefficients mix pixel-squared and unit scales, and without balancing
/// the Schur factorization loses the dual residual to cancellation.
pub(crate) fn solve(
    prob: &ConeProblem,
    warm: Option<&DVector<f64>>,
    settings: &IpmSettings,
) -> IpmSolution {
    let mut scale = DVector::from_element(prob.num_x, 1.0f64);
    for row in &prob.lin {
        for j in 0..prob.num_x {
            scale[j] = scale[j].max(row.coeff_x[j].abs());
        }
    }
    for block in &prob.soc {
        for j in 0..prob.num_x {
            for r in 0..block.coeff_x.nrows() {
                scale[j] = scale[j].max(block.coeff_x[(r, j)].abs());
            }
        }
    }
    let scaled = ConeProblem {
        num_x: prob.num_x,
        num_slack: prob.num_slack,
        cost_x: DVector::from_fn(prob.num_x, |j, _| prob.cost_x[j] / scale[j]),
        cost_slack: prob.cost_slack.clone(),
        lin: prob
            .lin
            .iter()
            .map(|row| LinRow {
                coeff_x: DVector::from_fn(prob.num_x, |j, _| row.coeff_x[j] / scale[j]),
                slack: row.slack,
                constant: row.constant,
            })
            .collect(),
        soc: prob
            .soc
            .iter()
            .map(|block| {
                let mut coeff = block.coeff_x.clone();
                for j in 0..prob.num_x {
                    for r in 0..coeff.nrows() {
                        coeff[(r, j)] /= scale[j];
                    }
                }
                SocBlock {
                    coeff_x: coeff,
                    slack: block.slack,
                    constant: block.constant.clone(),
                }
            })
            .collect(),
    };
    let scaled_warm = warm.map(|w| {
        let mut out = w.clone();
        for j in 0..prob.num_x {
            out[j] *= scale[j];
        }
        out
    });
    let mut out = solve_equilibrated(&scaled, scaled_warm.as_ref(), settings);
    for j in 0..prob.num_x {
        out.u[j] /= scale[j];
    }
    out
}

fn solve_equilibrated(
    prob: &ConeProblem,
    warm: Option<&DVector<f64>>,
    settings: &IpmSettings,
) -> IpmSolution {
    let layout = prob.layout();
    let degree = layout.degree().max(1);
    let f = prob.cost();
    let c0 = prob.constants();
    let norm_c0 = c0.norm().max(1.0);
    let norm_f = f.norm().max(1.0);
    let e = layout.identity();

    let mut u = match warm {
        Some(w) => w.clone(),
        None => DVector::zeros(prob.num_vars()),
    };
    let mut zeta = prob.cone_eval(&u);
    layout.shift_interior(&mut zeta);
    // Min-norm dual start: λ = J·(JᵀJ)⁻¹·f, shifted into the interior.
    let mut lambda = match factor_with_retries(prob, None) {
        Some(fact) => prob.jac_apply(&fact.solve(&f)),
        None => e.clone(),
    };
    layout.shift_interior(&mut lambda);

    let mut best: Option<IpmSolution> = None;
    let mut stall = 0usize;

    for iter in 0..settings.max_iter {
        let cval = prob.cone_eval(&u);
        let rp = &zeta - &cval;
        let rd = &f - prob.jac_t_apply(&lambda);
        let gap = zeta.dot(&lambda);
        let pcost = f.dot(&u);
        let pres = rp.norm() / norm_c0;
        let dres = rd.norm() / norm_f;
        let relgap = gap.abs() / pcost.abs().max(1.0);
        let kkt = pres.max(dres).max(relgap);

        let snapshot = |status: SocpStatus| IpmSolution {
            u: u.clone(),
            status,
            iterations: iter,
            kkt_residual: kkt,
            primal_residual: pres,
            dual_residual: dres,
            rel_gap: relgap,
        };

        if !kkt.is_finite() {
            return best.unwrap_or_else(|| snapshot(SocpStatus::NumericalFailure));
        }
        if best.as_ref().is_none_or(|b| kkt < b.kkt_residual) {
            best = Some(snapshot(SocpStatus::MaxIterations));
        }
        if kkt <= settings.tol {
            return snapshot(SocpStatus::Optimal);
        }

        let scaling = match Scaling::compute(&layout, &zeta, &lambda) {
            Some(s) => s,
            None => {
                let mut out = best.unwrap_or_else(|| snapshot(SocpStatus::NumericalFailure));
                out.status = SocpStatus::NumericalFailure;
                return out;
            }
        };
        let fact = match factor_with_retries(prob, Some(&scaling)) {
            Some(fa) => fa,
            None => {
                let mut out = best.unwrap_or_else(|| snapshot(SocpStatus::NumericalFailure));
                out.status = SocpStatus::NumericalFailure;
                return out;
            }
        };

        let mu = gap / degree as f64;
        let lam_sq = layout.jordan_mul(&scaling.lambda, &scaling.lambda);

        // Affine (predictor) direction.
        let ds_aff = -&lam_sq;
        let (_du_a, dz_a, dl_a) = kkt_solve(prob, &layout, &scaling, &fact, &rp, &rd, &ds_aff);
        let step_a = layout
            .max_step(&zeta, &dz_a)
            .min(layout.max_step(&lambda, &dl_a))
            .min(1.0);
        let gap_aff = (&zeta + &dz_a * step_a).dot(&(&lambda + &dl_a * step_a));
        let sigma = (gap_aff / gap).clamp(0.0, 1.0).powi(3);

        // Combined (corrector) direction.
        let corr = layout.jordan_mul(
            &scaling.apply_w_inv(&layout, &dz_a),
            &scaling.apply_w(&layout, &dl_a),
        );
        let ds_comb = -&lam_sq - corr + &e * (sigma * mu);
        let (du, dz, dl) = kkt_solve(prob, &layout, &scaling, &fact, &rp, &rd, &ds_comb);

        let step = layout
            .max_step(&zeta, &dz)
            .min(layout.max_step(&lambda, &dl));
        let alpha = (0.99 * step).min(1.0);
        if std::env::var("MAXCON_IPM_TRACE").is_ok() {
            eprintln!(
                "it {iter}: pres {pres:.3e} dres {dres:.3e} relgap {relgap:.3e} sigma {sigma:.3e} alpha {alpha:.3e}"
            );
        }
        if !alpha.is_finite() || alpha <= 1e-10 {
            stall += 1;
            if stall >= 3 {
                let mut out = best.unwrap_or_else(|| snapshot(SocpStatus::NumericalFailure));
                out.status = SocpStatus::NumericalFailure;
                return out;
            }
        } else {
            stall = 0;
        }

        u += &du * alpha;
        zeta += &dz * alpha;
        lambda += &dl * alpha;
    }

    let mut out = best.expect("at least one iterate recorded");
    out.status = if out.kkt_residual <= settings.tol {
        SocpStatus::Optimal
    } else {
        SocpStatus::MaxIterations
    };
    out
}

/// Solves one Newton system
///
/// ```text
/// Δζ − J·Δu = b_p
/// Jᵀ·Δλ     = b_d
/// λ̃ ∘ (W⁻¹·Δζ + W·Δλ) = b_s
/// ```
///
/// by eliminating `Δζ` and `Δλ` and solving the Schur system for `Δu`.
fn kkt_solve_once(
    prob: &ConeProblem,
    layout: &ConeLayout,
    scaling: &Scaling,
    fact: &KktFactor,
    b_p: &DVector<f64>,
    b_d: &DVector<f64>,
    b_s: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    let v = layout.jordan_div(b_s, &scaling.lambda);
    let wv = scaling.apply_w(layout, &v);
    let rhs = prob.jac_t_apply(&scaling.apply_w2_inv(layout, &(&wv - b_p))) - b_d;
    let du = fact.solve(&rhs);
    let jdu = prob.jac_apply(&du);
    let dl = scaling.apply_w2_inv(layout, &(&wv - b_p - &jdu));
    let dz = jdu + b_p;
    (du, dz, dl)
}

/// Newton solve with iterative refinement at the full KKT level: near the
/// central-path limit the scaled blocks are extremely ill-conditioned and
/// the recovered `Δλ` loses dual feasibility, which one or two correction
/// rounds restore.
fn kkt_solve(
    prob: &ConeProblem,
    layout: &ConeLayout,
    scaling: &Scaling,
    fact: &KktFactor,
    rp: &DVector<f64>,
    rd: &DVector<f64>,
    ds_target: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    let b_p = -rp;
    let (mut du, mut dz, mut dl) = kkt_solve_once(prob, layout, scaling, fact, &b_p, rd, ds_target);
    for _ in 0..2 {
        let e_p = &b_p - (&dz - prob.jac_apply(&du));
        let e_d = rd - prob.jac_t_apply(&dl);
        let compl = layout.jordan_mul(
            &scaling.lambda,
            &(scaling.apply_w_inv(layout, &dz) + scaling.apply_w(layout, &dl)),
        );
        let e_s = ds_target - compl;
        let (cu, cz, cl) = kkt_solve_once(prob, layout, scaling, fact, &e_p, &e_d, &e_s);
        du += cu;
        dz += cz;
        dl += cl;
    }
    (du, dz, dl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn settings() -> IpmSettings {
        IpmSettings::default()
    }

    #[test]
    fn lp_box_minimum() {
        // minimize x subject to 1 ≤ x ≤ 3.
        let prob = ConeProblem {
            num_x: 1,
            num_slack: 0,
            cost_x: DVector::from_vec(vec![1.0]),
            cost_slack: DVector::zeros(0),
            lin: vec![
                LinRow {
                    coeff_x: DVector::from_vec(vec![1.0]),
                    slack: None,
                    constant: -1.0,
                },
                LinRow {
                    coeff_x: DVector::from_vec(vec![-1.0]),
                    slack: None,
                    constant: 3.0,
                },
            ],
            soc: vec![],
        };
        let sol = solve(&prob, None, &settings());
        assert_eq!(sol.status, SocpStatus::Optimal);
        assert_relative_eq!(sol.u[0], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn lp_chebyshev_midpoint() {
        // minimize t subject to |x − b| ≤ t for b ∈ {0, 10}: optimum t = 5.
        let mut lin = Vec::new();
        for b in [0.0, 10.0] {
            for sign in [1.0, -1.0] {
                lin.push(LinRow {
                    coeff_x: DVector::from_vec(vec![-sign, 1.0]),
                    slack: None,
                    constant: sign * b,
                });
            }
        }
        let prob = ConeProblem {
            num_x: 2,
            num_slack: 0,
            cost_x: DVector::from_vec(vec![0.0, 1.0]),
            cost_slack: DVector::zeros(0),
            lin,
            soc: vec![],
        };
        let sol = solve(&prob, None, &settings());
        assert_eq!(sol.status, SocpStatus::Optimal);
        assert_relative_eq!(sol.u[1], 5.0, epsilon = 1e-6);
        assert_relative_eq!(sol.u[0], 5.0, epsilon = 1e-5);
    }

    #[test]
    fn soc_distance_to_point() {
        // minimize t subject to ‖(x₀ − 3, x₁ − 4)‖ ≤ t, t ≤ 10.
        let mut coeff = DMatrix::zeros(3, 3);
        coeff[(0, 2)] = 1.0;
        coeff[(1, 0)] = 1.0;
        coeff[(2, 1)] = 1.0;
        let prob = ConeProblem {
            num_x: 3,
            num_slack: 0,
            cost_x: DVector::from_vec(vec![0.0, 0.0, 1.0]),
            cost_slack: DVector::zeros(0),
            lin: vec![LinRow {
                coeff_x: DVector::from_vec(vec![0.0, 0.0, -1.0]),
                slack: None,
                constant: 10.0,
            }],
            soc: vec![SocBlock {
                coeff_x: coeff,
                slack: None,
                constant: DVector::from_vec(vec![0.0, -3.0, -4.0]),
            }],
        };
        let sol = solve(&prob, None, &settings());
        assert_eq!(sol.status, SocpStatus::Optimal);
        assert!(sol.u[2].abs() < 1e-5);
        assert_relative_eq!(sol.u[0], 3.0, epsilon = 1e-4);
        assert_relative_eq!(sol.u[1], 4.0, epsilon = 1e-4);
    }

    #[test]
    fn soc_with_slack_objective() {
        // minimize s subject to ‖x − 5‖ ≤ 1 + s (1-D cone written as SOC),
        // s ≥ 0, x ≤ 3: optimum x = 3, s = 1.
        let mut coeff = DMatrix::zeros(2, 1);
        coeff[(1, 0)] = 1.0;
        let prob = ConeProblem {
            num_x: 1,
            num_slack: 1,
            cost_x: DVector::zeros(1),
            cost_slack: DVector::from_vec(vec![1.0]),
            lin: vec![
                LinRow {
                    coeff_x: DVector::zeros(1),
                    slack: Some((0, 1.0)),
                    constant: 0.0,
                },
                LinRow {
                    coeff_x: DVector::from_vec(vec![-1.0]),
                    slack: None,
                    constant: 3.0,
                },
            ],
            soc: vec![SocBlock {
                coeff_x: coeff,
                slack: Some((0, 1.0)),
                constant: DVector::from_vec(vec![1.0, -5.0]),
            }],
        };
        let sol = solve(&prob, None, &settings());
        assert_eq!(sol.status, SocpStatus::Optimal);
        assert_relative_eq!(sol.u[0], 3.0, epsilon = 1e-5);
        assert_relative_eq!(sol.u[1], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn warm_start_agrees_with_cold_start() {
        let prob = ConeProblem {
            num_x: 1,
            num_slack: 0,
            cost_x: DVector::from_vec(vec![1.0]),
            cost_slack: DVector::zeros(0),
            lin: vec![LinRow {
                coeff_x: DVector::from_vec(vec![1.0]),
                slack: None,
                constant: -2.0,
            }],
            soc: vec![],
        };
        let cold = solve(&prob, None, &settings());
        let warm = solve(&prob, Some(&DVector::from_vec(vec![2.1])), &settings());
        assert_eq!(cold.status, SocpStatus::Optimal);
        assert_eq!(warm.status, SocpStatus::Optimal);
        assert_relative_eq!(cold.u[0], warm.u[0], epsilon = 1e-6);
    }

    #[test]
    fn flat_directions_are_regularized() {
        // Single constraint in 2 variables: x₀ + x₁ ≥ 1, minimize x₀ + x₁.
        // The optimum is a whole face; the solve must still converge.
        let prob = ConeProblem {
            num_x: 2,
            num_slack: 0,
            cost_x: DVector::from_vec(vec![1.0, 1.0]),
            cost_slack: DVector::zeros(0),
            lin: vec![LinRow {
                coeff_x: DVector::from_vec(vec![1.0, 1.0]),
                slack: None,
                constant: -1.0,
            }],
            soc: vec![],
        };
        let sol = solve(&prob, None, &settings());
        assert_eq!(sol.status, SocpStatus::Optimal);
        assert_relative_eq!(sol.u[0] + sol.u[1], 1.0, epsilon = 1e-6);
    }
}
