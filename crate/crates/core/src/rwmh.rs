//! Random-walk Metropolis-Hastings on the posterior, started at the best of a
//! batch of prior draws.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AimsError, Result};
use crate::kernel::{draw_local_candidate, local_accept};
use crate::model::{log_posterior_unnormalized, ParamVector, TargetModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RwmhConfig {
    /// Prior draws screened for the starting point.
    pub n0: usize,
    /// Chain length, including the starting state.
    pub n: usize,
    pub scale: f64,
    /// Leading states dropped from `states`. Zero keeps everything.
    #[serde(default)]
    pub burn_in: usize,
}

impl RwmhConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n0 < 1 {
            return Err(AimsError::InvalidConfig("rwmh n0 must be at least 1".into()));
        }
        if self.n < 2 {
            return Err(AimsError::InvalidConfig("rwmh n must be at least 2".into()));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(AimsError::InvalidConfig(format!(
                "rwmh scale must be positive, got {}",
                self.scale
            )));
        }
        if self.burn_in >= self.n {
            return Err(AimsError::InvalidConfig("rwmh burn_in must be below n".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RwmhRun {
    pub states: Vec<ParamVector>,
    pub log_target_values: Vec<f64>,
    /// Accepted moves over all `n - 1` transitions, burn-in included.
    pub accept_count: usize,
    pub transitions: usize,
}

impl RwmhRun {
    pub fn acceptance_rate(&self) -> f64 {
        self.accept_count as f64 / self.transitions as f64
    }
}

pub fn run_rwmh<R: Rng>(
    rng: &mut R,
    model: &dyn TargetModel,
    config: &RwmhConfig,
) -> Result<RwmhRun> {
    config.validate()?;
    let mut best: Option<(ParamVector, f64)> = None;
    for _ in 0..config.n0 {
        let p = model.sample_prior(rng);
        let ll = model.log_likelihood(&p);
        if ll == f64::NEG_INFINITY || ll.is_nan() {
            continue;
        }
        if best.as_ref().is_none_or(|(_, b)| ll > *b) {
            best = Some((p, ll));
        }
    }
    let (mut current, _) = best.ok_or(AimsError::ScreeningFailed(config.n0))?;
    let mut cur_lt = log_posterior_unnormalized(model, &current, 1.0);

    let mut states = Vec::with_capacity(config.n);
    let mut lts = Vec::with_capacity(config.n);
    states.push(current.clone());
    lts.push(cur_lt);
    let mut accept_count = 0;
    for _ in 1..config.n {
        let cand = draw_local_candidate(rng, &current, config.scale);
        let cand_lt = log_posterior_unnormalized(model, &cand, 1.0);
        if local_accept(rng, cand_lt, cur_lt) {
            current = cand;
            cur_lt = cand_lt;
            accept_count += 1;
        }
        states.push(current.clone());
        lts.push(cur_lt);
    }
    states.drain(..config.burn_in);
    lts.drain(..config.burn_in);
    Ok(RwmhRun {
        states,
        log_target_values: lts,
        accept_count,
        transitions: config.n - 1,
    })
}
