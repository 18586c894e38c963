//! Deterministic consensus maximization: bisection over the target
//! consensus value with the biconvex alternation as the feasibility probe.
//!
//! The incumbent is only ever replaced by a strictly better solution, so the
//! returned consensus can never fall below that of the starting point. The
//! search is deterministic but, like the probe it builds on, makes no claim
//! of global optimality.

use nalgebra::DVector;

use crate::bco::{run_bco, BcoLimits, BcoResult};
use crate::problem::{ConsensusInstance, Estimate};

/// Model-specific projection applied to each probe result before its
/// consensus is evaluated (rank-2 projection for fundamental matrices;
/// identity elsewhere).
pub type PostStep<'a> = &'a dyn Fn(&DVector<f64>) -> DVector<f64>;

/// One bisection step: bounds at the start of the iteration, the probed
/// target and the consensus the probe achieved.
#[derive(Debug, Clone)]
pub struct BisectionStep {
    pub delta_low: usize,
    pub delta_high: usize,
    pub delta: usize,
    pub achieved: usize,
    pub bco: BcoResult,
}

#[derive(Debug, Clone)]
pub struct BisectionTrace {
    pub steps: Vec<BisectionStep>,
    pub best: Estimate,
    /// Bounds at loop exit; termination leaves `delta_high = delta_low + 1`.
    pub final_delta_low: usize,
    pub final_delta_high: usize,
}

/// Bisection search for a higher-consensus solution, starting from `x0`.
///
/// Maintains bounds `δ_l = I(x̃) ≤ optimum` and `δ_h`, probes the midpoint
/// with the biconvex alternation from the incumbent, raises `δ_l` whenever
/// the probe strictly improves the incumbent and lowers `δ_h` whenever the
/// probe misses its target. Terminates at `δ_h = δ_l + 1`.
pub fn run_ibco(
    inst: &ConsensusInstance,
    x0: &DVector<f64>,
    post_step: Option<PostStep<'_>>,
    limits: &BcoLimits,
) -> (Estimate, BisectionTrace) {
    let n = inst.len();
    let mut incumbent = inst.consensus(x0);
    let mut delta_low = incumbent.consensus;
    // The bracket is kept at delta_high >= delta_low + 1 so termination
    // uniformly lands at delta_high = delta_low + 1, including the edge
    // where the start already has full consensus.
    let mut delta_high = n.max(delta_low + 1);
    let mut steps = Vec::new();

    while delta_high > delta_low + 1 {
        let delta = (delta_low + delta_high) / 2;
        let bco = run_bco(inst, &incumbent.x, delta, limits)
            .expect("midpoint target is always within 1..=N");
        let candidate = match post_step {
            Some(project) => project(&bco.state.x),
            None => bco.state.x.clone(),
        };
        let achieved = inst.consensus(&candidate);

        steps.push(BisectionStep {
            delta_low,
            delta_high,
            delta,
            achieved: achieved.consensus,
            bco,
        });

        if achieved.consensus > incumbent.consensus {
            delta_low = achieved.consensus;
            incumbent = achieved.clone();
            // A probe can overshoot an upper bound that an earlier, worse
            // incumbent failed to reach; renormalize the exhausted bracket
            // so termination always lands at delta_high = delta_low + 1.
            delta_high = delta_high.max(delta_low + 1);
        }
        if achieved.consensus < delta {
            delta_high = delta;
        }
    }

    let trace = BisectionTrace {
        steps,
        best: incumbent.clone(),
        final_delta_low: delta_low,
        final_delta_high: delta_high,
    };
    (incumbent, trace)
}
