//! Deterministic consensus maximization for robust model fitting.
//!
//! Starting from a RANSAC or user-supplied estimate, the toolkit searches
//! for parameters with a larger consensus set by bisecting over the target
//! consensus value; each feasibility probe is solved as a biconvex program
//! alternating a closed-form assignment step with a second-order-cone
//! subproblem. Problem families (linear regression, homography,
//! triangulation, fundamental matrix) plug in through quasiconvex residual
//! functionals plus minimal and least-squares solvers.

pub mod bco;
pub mod datagen;
pub mod ibco;
pub mod models;
pub mod problem;
pub mod ransac;
pub mod solver;

pub use bco::{run_bco, BcoLimits, BcoResult};
pub use ibco::{run_ibco, BisectionTrace};
pub use problem::{ConsensusInstance, Estimate, ProblemError, ResidualFunctional};
pub use solver::{init_slacks, x_s_step, y_step, BiconvexState, SocpSolution, SocpStatus};
