//! Learners: replay Q-learning, the world-model planner, the sampling
//! formulas, SimuDICE and offline Dyna-Q, and policy evaluation.

mod evaluate;
mod planner;
mod q_learning;
mod sampling;
mod simudice;

pub use evaluate::evaluate_policy;
pub use planner::plan;
pub use q_learning::{offline_q_learning, q_update};
pub use sampling::{sampling_probabilities, Formula, SamplingDistribution};
pub use simudice::{
    offline_dyna_q, offline_q_baseline, run_simudice, simudice_round_inputs, Hyperparams, IterationDiagnostics,
    LearnerOutput, RoundInputs,
};
