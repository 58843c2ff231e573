//! Asymptotically Independent Markov Sampling.
//!
//! Posterior simulation through a sequence of tempered distributions
//! `pi_j ~ pi_0 L^beta_j`, with the annealing schedule chosen adaptively from
//! the effective sample size of importance weights, and each level sampled by
//! a Markov chain whose independent-MH proposal is built from the previous
//! level's weighted sample.

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod kernel;
pub mod model;
pub mod output;
pub mod plot;
pub mod rwmh;
pub mod schedule;

pub use error::{AimsError, Result};
pub use kernel::{run_level, LevelInput, LevelRunRecord};
pub use model::{Model, ModelSpec, ParamVector, Support, TargetModel};
pub use schedule::{AnnealingSchedule, WeightedSampleSet};
