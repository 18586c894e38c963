//! Biconvex optimization for the continuous consensus-update problem:
//! alternate the closed-form assignment step with the second-order-cone
//! parameter/slack step until the objective `Σ yᵢ·sᵢ` stops decreasing.
//!
//! The objective is bounded below by zero and each half-step cannot increase
//! it, so the alternation always converges to a local optimum. A terminal
//! objective of (numerical) zero certifies that the target consensus was
//! reached.

use nalgebra::DVector;

use crate::problem::ConsensusInstance;
use crate::solver::{
    face_refinement, init_slacks, margin_polish, x_s_step, y_step, BiconvexState, SocpStatus,
    SolverError, DEFAULT_SOCP_TOL,
};

/// Iteration and tolerance configuration for the alternation.
#[derive(Debug, Clone, Copy)]
pub struct BcoLimits {
    /// Cap on full (assignment, conic) cycles.
    pub max_cycles: usize,
    /// Stop when the objective decrease over one full cycle falls below
    /// `decrease_tol · max(1, objective)`.
    pub decrease_tol: f64,
    /// Objective values at or below this count as exactly zero.
    pub zero_tol: f64,
    /// Convergence tolerance handed to the conic subsolver.
    pub socp_tol: f64,
}

impl Default for BcoLimits {
    fn default() -> Self {
        Self {
            max_cycles: 200,
            decrease_tol: 1e-9,
            zero_tol: 1e-9,
            socp_tol: DEFAULT_SOCP_TOL,
        }
    }
}

/// Objective level below which a near-zero solve is worth certifying with a
/// max-margin polish before trusting strict inlier counts.
const POLISH_TRIGGER: f64 = 1e-6;

/// One record per cycle, for convergence traces.
#[derive(Debug, Clone, Copy)]
pub struct BcoCycle {
    pub cycle: usize,
    pub objective_after_assignment: f64,
    pub objective_after_conic: f64,
    pub consensus: usize,
}

#[derive(Debug, Clone)]
pub struct BcoResult {
    pub state: BiconvexState,
    /// Target consensus the run was asked to reach.
    pub delta: usize,
    /// Number of full cycles executed.
    pub iterations: usize,
    /// Terminal objective at or below the zero tolerance.
    pub converged_to_zero: bool,
    /// Set when a conic subsolve reported numerical failure; the best state
    /// seen is still returned.
    pub solver_failure: bool,
    pub trace: Vec<BcoCycle>,
}

/// Runs the biconvex alternation from `x0` toward target consensus `delta`.
pub fn run_bco(
    inst: &ConsensusInstance,
    x0: &DVector<f64>,
    delta: usize,
    limits: &BcoLimits,
) -> Result<BcoResult, SolverError> {
    if delta == 0 || delta > inst.len() {
        return Err(SolverError::InvalidTarget {
            delta,
            len: inst.len(),
        });
    }

    let mut x = x0.clone();
    let mut slacks = init_slacks(inst, &x);
    let mut assignment = vec![0.0; inst.len()];
    let mut objective = f64::INFINITY;
    let mut prev_cycle_obj = f64::INFINITY;
    let mut solver_failure = false;
    let mut refined_since_progress = false;
    let mut trace = Vec::new();
    let mut cycles = 0;

    for cycle in 0..limits.max_cycles {
        cycles = cycle + 1;
        let y = y_step(&slacks, delta)?;
        let obj_assign: f64 = y.iter().zip(&slacks).map(|(a, b)| a * b).sum();
        debug_assert!(
            obj_assign <= prev_cycle_obj + 1e-7 * prev_cycle_obj.max(1.0),
            "assignment step increased the objective: {obj_assign} > {prev_cycle_obj}"
        );

        let mut obj_conic = obj_assign;
        if obj_assign > limits.zero_tol {
            let sol = x_s_step(inst, &y, &x, limits.socp_tol)?;
            if sol.status == SocpStatus::NumericalFailure {
                solver_failure = true;
            }
            x = sol.x;
            slacks = sol.slacks;
            obj_conic = sol.objective;
            debug_assert!(
                obj_conic <= obj_assign + 1e-7 * obj_assign.max(1.0),
                "conic step increased the objective: {obj_conic} > {obj_assign}"
            );
        }

        // Near-zero objectives leave the strict inlier count ambiguous:
        // shifted residuals of order the solver tolerance may sit on either
        // side of zero. Re-centering the active set by maximizing its margin
        // resolves the count whenever a strict interior exists.
        if obj_conic <= POLISH_TRIGGER && inst.consensus(&x).consensus < delta {
            let active: Vec<usize> = y
                .iter()
                .enumerate()
                .filter(|(_, &v)| v > 0.5)
                .map(|(i, _)| i)
                .collect();
            let fit = margin_polish(inst, &active, &x, limits.socp_tol);
            let polished_obj: f64 = active
                .iter()
                .map(|&i| inst.shifted_residual(i, &fit.x).max(0.0))
                .sum();
            if polished_obj <= obj_conic && inst.consensus(&fit.x).consensus >= delta {
                x = fit.x;
                slacks = init_slacks(inst, &x);
                obj_conic = polished_obj;
            }
        }

        assignment = y;
        objective = obj_conic;
        trace.push(BcoCycle {
            cycle,
            objective_after_assignment: obj_assign,
            objective_after_conic: obj_conic,
            consensus: inst.consensus(&x).consensus,
        });

        if obj_conic <= limits.zero_tol {
            break;
        }
        let stalled = prev_cycle_obj.is_finite()
            && prev_cycle_obj - obj_conic < limits.decrease_tol * prev_cycle_obj.max(1.0);
        if stalled {
            // The alternation has converged for the current assignment. The
            // conic optimum usually sits on a flat face; tie-breaking it
            // toward the inactive data can enable an assignment swap. One
            // attempt per plateau, otherwise this is a local optimum.
            if refined_since_progress {
                break;
            }
            refined_since_progress = true;
            match face_refinement(inst, &assignment, &x, limits.socp_tol) {
                Some(refined) => {
                    x = refined;
                    slacks = init_slacks(inst, &x);
                    objective = assignment
                        .iter()
                        .zip(&slacks)
                        .map(|(a, b)| a * b)
                        .sum();
                }
                None => break,
            }
        } else {
            refined_since_progress = false;
        }
        prev_cycle_obj = obj_conic;
    }

    let converged_to_zero = objective <= limits.zero_tol;
    Ok(BcoResult {
        state: BiconvexState {
            x,
            slacks,
            assignment,
            objective,
        },
        delta,
        iterations: cycles,
        converged_to_zero,
        solver_failure,
        trace,
    })
}
