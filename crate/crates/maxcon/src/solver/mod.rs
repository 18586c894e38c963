//! Conic subsolver for the biconvex alternation: the closed-form assignment
//! step, the second-order-cone parameter/slack step, slack initialization
//! and a max-margin feasibility polish.

mod cones;
mod ipm;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::problem::ConsensusInstance;
use ipm::{ConeProblem, IpmSettings, LinRow, SocBlock};

/// Default convergence tolerance of the interior-point subsolver.
pub const DEFAULT_SOCP_TOL: f64 = 1e-8;
/// Iteration cap of the interior-point subsolver.
pub const SOCP_MAX_ITER: usize = 100;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("target consensus {delta} invalid for instance of size {len}")]
    InvalidTarget { delta: usize, len: usize },
    #[error("assignment length {got} does not match instance size {expected}")]
    AssignmentMismatch { got: usize, expected: usize },
}

/// Current `(x, s, y)` triple of the biconvex alternation together with the
/// objective `Σ yᵢ·sᵢ`.
#[derive(Debug, Clone)]
pub struct BiconvexState {
    pub x: DVector<f64>,
    pub slacks: Vec<f64>,
    pub assignment: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SocpStatus {
    Optimal,
    MaxIterations,
    NumericalFailure,
}

/// Result of one parameter/slack step.
///
/// `slacks` holds `max(0, rᵢ'(x))` for every datum: for the active data this
/// is the conic optimum at the returned `x`, and inactive slacks are
/// back-filled by the same rule.
#[derive(Debug, Clone)]
pub struct SocpSolution {
    pub x: DVector<f64>,
    pub slacks: Vec<f64>,
    pub status: SocpStatus,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub objective: f64,
}

/// Slack initialization `sᵢ = max(0, rᵢ'(x₀))`.
pub fn init_slacks(inst: &ConsensusInstance, x0: &DVector<f64>) -> Vec<f64> {
    (0..inst.len())
        .map(|i| inst.shifted_residual(i, x0).max(0.0))
        .collect()
}

/// Closed-form assignment step: puts weight 1 on the `delta` smallest
/// slacks, ties broken by lowest index, and 0 elsewhere. This is the exact
/// minimizer of `Σ yᵢ·sᵢ` over `y ∈ [0,1]^N`, `Σ yᵢ ≥ delta`.
pub fn y_step(slacks: &[f64], delta: usize) -> Result<Vec<f64>, SolverError> {
    if delta == 0 || delta > slacks.len() {
        return Err(SolverError::InvalidTarget {
            delta,
            len: slacks.len(),
        });
    }
    let mut order: Vec<usize> = (0..slacks.len()).collect();
    order.sort_by(|&a, &b| slacks[a].total_cmp(&slacks[b]).then(a.cmp(&b)));
    let mut y = vec![0.0; slacks.len()];
    for &i in order.iter().take(delta) {
        y[i] = 1.0;
    }
    Ok(y)
}

fn active_indices(assignment: &[f64]) -> Vec<usize> {
    assignment
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.5)
        .map(|(i, _)| i)
        .collect()
}

fn active_objective(inst: &ConsensusInstance, active: &[usize], x: &DVector<f64>) -> f64 {
    active
        .iter()
        .map(|&i| inst.shifted_residual(i, x).max(0.0))
        .sum()
}

/// Appends the cone rows of one datum's constraint
/// `‖Mᵢ·[x;1]‖ ≤ ε·cᵢ·[x;1] + t`, where `t` is either a per-datum slack
/// variable or an extra parameter column. Scalar numerators become two
/// orthant rows, so pure linear problems stay linear programs inside the
/// same interior-point framework.
fn push_datum_cone(
    prob: &mut ConeProblem,
    inst: &ConsensusInstance,
    i: usize,
    d: usize,
    nx: usize,
    t_term: TSlot,
) {
    let f = inst.functional(i);
    let eps = inst.epsilon();
    let m = f.numerator().nrows();
    let den = f.denominator();
    let mut head = DVector::zeros(nx);
    for j in 0..d {
        head[j] = eps * den[j];
    }
    let head_const = eps * den[d];
    let mut slack = None;
    match t_term {
        TSlot::Slack(k) => slack = Some((k, 1.0)),
        TSlot::Column(c) => head[c] = 1.0,
    }
    if m == 1 {
        for sign in [1.0f64, -1.0] {
            let mut coeff = head.clone();
            let num = f.numerator();
            for j in 0..d {
                coeff[j] += sign * num[(0, j)];
            }
            prob.lin.push(LinRow {
                coeff_x: coeff,
                slack,
                constant: head_const + sign * num[(0, d)],
            });
        }
    } else {
        let mut coeff = DMatrix::zeros(m + 1, nx);
        let mut constant = DVector::zeros(m + 1);
        coeff.row_mut(0).copy_from(&head.transpose());
        constant[0] = head_const;
        let num = f.numerator();
        for r in 0..m {
            for j in 0..d {
                coeff[(r + 1, j)] = num[(r, j)];
            }
            constant[r + 1] = num[(r, d)];
        }
        prob.soc.push(SocBlock {
            coeff_x: coeff,
            slack,
            constant,
        });
    }
}

enum TSlot {
    Slack(usize),
    Column(usize),
}

/// Adds the closed-domain rows `p_j(x) ≥ μ`; rows with a constant
/// denominator are trivially satisfied and skipped.
fn push_domain_rows(prob: &mut ConeProblem, inst: &ConsensusInstance, d: usize, nx: usize) {
    for f in inst.functionals() {
        if f.has_constant_denominator() {
            continue;
        }
        let den = f.denominator();
        let mut coeff = DVector::zeros(nx);
        for j in 0..d {
            coeff[j] = den[j];
        }
        prob.lin.push(LinRow {
            coeff_x: coeff,
            slack: None,
            constant: den[d] - inst.domain_margin(),
        });
    }
}

/// Builds the slack program `min Σ wₖ·sₖ` over the given weighted data,
/// with all domain rows, and solves it from the warm start.
fn solve_slack_program(
    inst: &ConsensusInstance,
    weighted: &[(usize, f64)],
    x_warm: &DVector<f64>,
    tol: f64,
) -> ipm::IpmSolution {
    let d = inst.dimension();
    let ns = weighted.len();
    let mut prob = ConeProblem {
        num_x: d,
        num_slack: ns,
        cost_x: DVector::zeros(d),
        cost_slack: DVector::from_iterator(ns, weighted.iter().map(|&(_, w)| w)),
        lin: Vec::with_capacity(3 * ns + inst.len()),
        soc: Vec::new(),
    };
    for (k, &(i, _)) in weighted.iter().enumerate() {
        push_datum_cone(&mut prob, inst, i, d, d, TSlot::Slack(k));
        prob.lin.push(LinRow {
            coeff_x: DVector::zeros(d),
            slack: Some((k, 1.0)),
            constant: 0.0,
        });
    }
    push_domain_rows(&mut prob, inst, d, d);

    let mut warm = DVector::zeros(d + ns);
    warm.rows_mut(0, d).copy_from(x_warm);
    for (k, &(i, _)) in weighted.iter().enumerate() {
        warm[d + k] = inst.shifted_residual(i, x_warm).max(0.0);
    }
    let settings = IpmSettings {
        tol,
        max_iter: SOCP_MAX_ITER,
    };
    ipm::solve(&prob, Some(&warm), &settings)
}

/// Parameter/slack step: minimizes `Σ_{yᵢ=1} sᵢ` subject to
/// `sᵢ ≥ rᵢ'(x)`, `sᵢ ≥ 0` and the domain constraints, warm-started at
/// `x_warm`. Slacks of inactive data do not enter the program and are
/// recovered afterwards as `max(0, rᵢ'(x̂))`.
///
/// If the subsolver fails to reach the warm start's objective the warm
/// start is returned instead, so the step never increases the objective.
pub fn x_s_step(
    inst: &ConsensusInstance,
    assignment: &[f64],
    x_warm: &DVector<f64>,
    tol: f64,
) -> Result<SocpSolution, SolverError> {
    if assignment.len() != inst.len() {
        return Err(SolverError::AssignmentMismatch {
            got: assignment.len(),
            expected: inst.len(),
        });
    }
    let active = active_indices(assignment);
    if active.is_empty() {
        return Err(SolverError::InvalidTarget {
            delta: 0,
            len: inst.len(),
        });
    }
    let d = inst.dimension();
    let weighted: Vec<(usize, f64)> = active.iter().map(|&i| (i, 1.0)).collect();
    let out = solve_slack_program(inst, &weighted, x_warm, tol);

    let mut x_hat = out.u.rows(0, d).into_owned();
    let warm_obj = active_objective(inst, &active, x_warm);
    let new_obj = active_objective(inst, &active, &x_hat);
    if !new_obj.is_finite() || new_obj > warm_obj {
        x_hat = x_warm.clone();
    }

    let slacks: Vec<f64> = (0..inst.len())
        .map(|i| inst.shifted_residual(i, &x_hat).max(0.0))
        .collect();
    let objective = active.iter().map(|&i| slacks[i]).sum();
    Ok(SocpSolution {
        x: x_hat,
        slacks,
        status: out.status,
        kkt_residual: out.kkt_residual,
        iterations: out.iterations,
        primal_residual: out.primal_residual,
        dual_residual: out.dual_residual,
        duality_gap: out.rel_gap,
        objective,
    })
}

/// Weight placed on inactive slacks during [`face_refinement`].
const FACE_TIE_WEIGHT: f64 = 1e-6;
/// Largest active-objective increase a face refinement may introduce; kept
/// well under the 1e-7 per-half-step monotonicity budget.
const FACE_ADOPT_TOL: f64 = 5e-8;

/// Tie-breaks the optimal face of the active-set program.
///
/// The active-set objective often has a flat optimal face (an interval of
/// equally good parameter vectors), and which point a conic solver returns
/// is arbitrary. This re-solve keeps the active slacks at unit weight and
/// adds a vanishing weight on the inactive slacks, so among (near-)optimal
/// points it prefers the one that most reduces the remaining residuals,
/// which is the point from which the next assignment step can swap data
/// in. Returns
/// a candidate only when the active objective stays within [`FACE_ADOPT_TOL`].
pub fn face_refinement(
    inst: &ConsensusInstance,
    assignment: &[f64],
    x_hat: &DVector<f64>,
    tol: f64,
) -> Option<DVector<f64>> {
    let active = active_indices(assignment);
    if active.len() == inst.len() || active.is_empty() {
        return None;
    }
    let weighted: Vec<(usize, f64)> = (0..inst.len())
        .map(|i| {
            let w = if assignment[i] > 0.5 {
                1.0
            } else {
                FACE_TIE_WEIGHT
            };
            (i, w)
        })
        .collect();
    // Tighter tolerance than the main step: the tie-break signal is of
    // order FACE_TIE_WEIGHT and must not drown in solver noise.
    let out = solve_slack_program(inst, &weighted, x_hat, (tol * 1e-2).max(1e-12));
    let d = inst.dimension();
    let candidate = out.u.rows(0, d).into_owned();
    let current = active_objective(inst, &active, x_hat);
    let refined = active_objective(inst, &active, &candidate);
    if refined.is_finite() && refined <= current + FACE_ADOPT_TOL {
        Some(candidate)
    } else {
        None
    }
}

/// Result of [`margin_polish`].
#[derive(Debug, Clone)]
pub struct MarginFit {
    pub x: DVector<f64>,
    /// Optimized value of `max_{i ∈ active} rᵢ'(x)`, clipped below at `−ε`.
    pub margin: f64,
    pub status: SocpStatus,
}

/// Minimizes the worst shifted residual over a subset of data: finds `x`
/// with `rᵢ'(x) ≤ t` for all active `i` and the smallest achievable `t`.
/// A strictly negative margin certifies that every active datum is a strict
/// inlier, which pins down consensus counts that a near-zero sum of slacks
/// leaves ambiguous in finite arithmetic.
pub fn margin_polish(
    inst: &ConsensusInstance,
    active: &[usize],
    x_start: &DVector<f64>,
    tol: f64,
) -> MarginFit {
    let d = inst.dimension();
    let nx = d + 1;
    let mut prob = ConeProblem {
        num_x: nx,
        num_slack: 0,
        cost_x: DVector::zeros(nx),
        cost_slack: DVector::zeros(0),
        lin: Vec::new(),
        soc: Vec::new(),
    };
    prob.cost_x[d] = 1.0;
    for &i in active {
        push_datum_cone(&mut prob, inst, i, d, nx, TSlot::Column(d));
    }
    push_domain_rows(&mut prob, inst, d, nx);
    // Margins below −ε carry no extra information; bounding t keeps the
    // program from being unbounded along back-projection rays.
    let mut bound = DVector::zeros(nx);
    bound[d] = 1.0;
    prob.lin.push(LinRow {
        coeff_x: bound,
        slack: None,
        constant: inst.epsilon(),
    });

    let mut warm = DVector::zeros(nx);
    warm.rows_mut(0, d).copy_from(x_start);
    warm[d] = active
        .iter()
        .map(|&i| inst.shifted_residual(i, x_start))
        .fold(0.0f64, f64::max)
        + 1e-3;

    let settings = IpmSettings {
        tol,
        max_iter: SOCP_MAX_ITER,
    };
    let out = ipm::solve(&prob, Some(&warm), &settings);
    MarginFit {
        x: out.u.rows(0, d).into_owned(),
        margin: out.u[d],
        status: out.status,
    }
}
