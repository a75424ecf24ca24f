//! Proximal operators and completion solvers.

mod factored;
mod irls;
mod problem;
mod prox;

pub use factored::{factored_complete, factored_complete_with, SolverOptions};
pub use irls::{irls_baseline, irls_baseline_with, Irls, EPS_DECAY, EPS_FLOOR};
pub use problem::{objective_eval, CompletionProblem, Mask, PenaltySpec, SolveReport};
pub use prox::{lp_prox_scalar, schatten_prox};
