//! Offline policy optimisation for tabular MDPs by reweighting a learned
//! world model's sampling distribution with DualDICE correction weights and
//! model confidence, together with the baselines (replay Q-learning,
//! offline Dyna-Q), the Taxi / FrozenLake / CliffWalking environments, the
//! dataset pipeline, and exact oracles used for verification.

pub mod algos;
pub mod dataset;
pub mod dice;
pub mod envs;
pub mod error;
pub mod mdp;
pub mod rng;
pub mod world_model;

pub use error::{Error, Result};
