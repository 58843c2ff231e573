//! The AIMS Markov chain at one annealing level.
//!
//! The previous level's weighted sample defines a global proposal: pick a seed
//! point by weight, take one random-walk Metropolis step from it toward
//! `pi_j`, and offer the result to an independent Metropolis-Hastings
//! accept/reject whose proposal density is the weighted mixture
//!
//! ```text
//! pihat(theta) = sum_i wbar_i q(theta | theta_i) min(1, pi_j(theta) / pi_j(theta_i))
//! ```
//!
//! evaluated off the previous sample points. The chain is started off that
//! set and a rejected local step always repeats the current state, so it never
//! enters it.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{AimsError, Result};
use crate::model::{log_posterior_unnormalized, ParamVector, TargetModel};
use crate::schedule::WeightedSampleSet;

/// Attempts allowed when drawing the chain's first state.
pub const MAX_INIT_ATTEMPTS: usize = 100;

/// Everything needed to run one level.
#[derive(Clone, Copy)]
pub struct LevelInput<'a> {
    pub prev: &'a WeightedSampleSet,
    pub beta: f64,
    /// Standard deviation of the isotropic Gaussian local proposal.
    pub scale: f64,
    pub chain_len: usize,
    pub model: &'a dyn TargetModel,
}

impl LevelInput<'_> {
    pub fn validate(&self) -> Result<()> {
        if self.prev.is_empty() {
            return Err(AimsError::InvalidConfig("previous level is empty".into()));
        }
        if self.chain_len < 2 {
            return Err(AimsError::InvalidConfig(format!(
                "chain length must be at least 2, got {}",
                self.chain_len
            )));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(AimsError::InvalidConfig(format!(
                "proposal scale must be positive, got {}",
                self.scale
            )));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(AimsError::InvalidConfig(format!(
                "beta must lie in [0,1], got {}",
                self.beta
            )));
        }
        let d = self.model.dim();
        if let Some(p) = self.prev.points.iter().find(|p| p.dim() != d) {
            return Err(AimsError::Dimension {
                expected: d,
                got: p.dim(),
            });
        }
        Ok(())
    }
}

/// Output of one level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelRunRecord {
    pub states: Vec<ParamVector>,
    /// `log pi_j` at each state.
    pub log_target_values: Vec<f64>,
    /// `log L` at each state.
    pub log_likelihoods: Vec<f64>,
    pub local_accept_count: usize,
    pub global_accept_count: usize,
    /// Transitions that left the state unchanged.
    pub repeat_count: usize,
    /// Previous-level index drawn at each transition.
    pub seed_indices: Vec<usize>,
}

impl LevelRunRecord {
    pub fn transitions(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn local_rejections(&self) -> usize {
        self.transitions() - self.local_accept_count
    }

    pub fn local_acceptance_rate(&self) -> f64 {
        self.local_accept_count as f64 / self.transitions() as f64
    }

    pub fn global_acceptance_rate(&self) -> f64 {
        self.global_accept_count as f64 / self.transitions() as f64
    }
}

/// Categorical draw over normalized weights.
pub fn select_seed_index<R: Rng + ?Sized>(rng: &mut R, norm_weights: &[f64]) -> usize {
    SeedSelector::new(norm_weights).sample(rng)
}

/// Reusable categorical sampler over a level's normalized weights.
pub struct SeedSelector {
    dist: WeightedIndex<f64>,
}

impl SeedSelector {
    pub fn new(norm_weights: &[f64]) -> Self {
        SeedSelector {
            dist: WeightedIndex::new(norm_weights).expect("normalized weights with positive mass"),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.dist.sample(rng)
    }
}

/// `center + scale * z`, `z ~ N(0, I)`.
pub fn draw_local_candidate<R: Rng + ?Sized>(rng: &mut R, center: &[f64], scale: f64) -> ParamVector {
    center
        .iter()
        .map(|c| c + scale * rng.sample::<f64, _>(StandardNormal))
        .collect::<Vec<_>>()
        .into()
}

/// Metropolis test `u < min(1, exp(log_target_candidate - log_target_seed))`.
/// An off-support candidate (`-inf`) is always rejected.
pub fn local_accept<R: Rng + ?Sized>(
    rng: &mut R,
    log_target_candidate: f64,
    log_target_seed: f64,
) -> bool {
    if log_target_candidate == f64::NEG_INFINITY {
        return false;
    }
    let log_ratio = log_target_candidate - log_target_seed;
    log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp()
}

/// Independent-MH test with ratio
/// `pi_j(cand) pihat(cur) / (pi_j(cur) pihat(cand))`.
pub fn global_accept<R: Rng + ?Sized>(
    rng: &mut R,
    log_target_current: f64,
    log_pihat_current: f64,
    log_target_candidate: f64,
    log_pihat_candidate: f64,
) -> bool {
    let log_ratio =
        (log_target_candidate + log_pihat_current) - (log_target_current + log_pihat_candidate);
    log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp()
}

/// Per-level cache of the previous sample, laid out for the mixture sum.
pub struct GlobalProposal<'a> {
    dim: usize,
    scale: f64,
    /// Row-major coordinates of previous points with non-zero weight.
    coords: Vec<f64>,
    /// Index into the previous sample for each active row.
    index: Vec<usize>,
    log_weight: Vec<f64>,
    /// `log pi_j` at every previous point (all of them, not just active rows).
    log_target_prev: Vec<f64>,
    log_q_norm: f64,
    inv_two_var: f64,
    prev: &'a WeightedSampleSet,
}

impl<'a> GlobalProposal<'a> {
    pub fn new(level: &LevelInput<'a>) -> Self {
        let prev = level.prev;
        let dim = level.model.dim();
        let log_target_prev: Vec<f64> = prev
            .points
            .iter()
            .zip(&prev.log_likelihoods)
            .map(|(p, ll)| {
                let lp = level.model.log_prior(p);
                if lp == f64::NEG_INFINITY || level.beta == 0.0 {
                    lp
                } else {
                    lp + level.beta * ll
                }
            })
            .collect();
        let mut coords = Vec::with_capacity(prev.len() * dim);
        let mut index = Vec::new();
        let mut log_weight = Vec::new();
        for (i, (p, w)) in prev.points.iter().zip(&prev.norm_weights).enumerate() {
            if *w > 0.0 {
                coords.extend_from_slice(p);
                index.push(i);
                log_weight.push(w.ln());
            }
        }
        let var = level.scale * level.scale;
        GlobalProposal {
            dim,
            scale: level.scale,
            coords,
            index,
            log_weight,
            log_target_prev,
            log_q_norm: -0.5 * dim as f64 * (2.0 * PI * var).ln(),
            inv_two_var: 1.0 / (2.0 * var),
            prev,
        }
    }

    pub fn log_target_prev(&self) -> &[f64] {
        &self.log_target_prev
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `log pihat(theta)` given `log pi_j(theta)`. Fails if `theta` is bitwise
    /// equal to a previous-level point, where the density is not defined.
    pub fn log_density(&self, theta: &[f64], log_target_theta: f64) -> Result<f64> {
        // Two-pass log-sum-exp in fixed order: terms first, then the max-shifted sum.
        let mut max = f64::NEG_INFINITY;
        let mut terms = Vec::with_capacity(self.index.len());
        for (row, (&i, &lw)) in self.index.iter().zip(&self.log_weight).enumerate() {
            let p = &self.coords[row * self.dim..(row + 1) * self.dim];
            let d2: f64 = p.iter().zip(theta).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 == 0.0 && self.prev.points[i].bitwise_eq(theta) {
                return Err(AimsError::ExcludedSet(i));
            }
            let t = lw - d2 * self.inv_two_var + (log_target_theta - self.log_target_prev[i]).min(0.0);
            if t > max {
                max = t;
            }
            terms.push(t);
        }
        // Zero-weight rows still define the excluded set.
        if self.index.len() < self.prev.len() {
            if let Some(i) = self
                .prev
                .points
                .iter()
                .position(|p| p.bitwise_eq(theta))
            {
                return Err(AimsError::ExcludedSet(i));
            }
        }
        if max == f64::NEG_INFINITY {
            return Ok(max);
        }
        let s: f64 = terms.iter().map(|t| (t - max).exp()).sum();
        Ok(max + s.ln() + self.log_q_norm)
    }
}

/// `log pihat(theta)` for a one-off evaluation. Builds the level cache; inside
/// a chain use [`GlobalProposal`] directly.
pub fn global_proposal_log_density(
    theta: &[f64],
    level: &LevelInput<'_>,
    log_target_theta: f64,
) -> Result<f64> {
    GlobalProposal::new(level).log_density(theta, log_target_theta)
}

/// First chain state: a local draw around the highest-weight previous point
/// (lowest index on ties), redrawn while off-support or on a previous point.
pub fn initial_state<R: Rng + ?Sized>(rng: &mut R, level: &LevelInput<'_>) -> Result<ParamVector> {
    let center = &level.prev.points[level.prev.argmax_weight()];
    for _ in 0..MAX_INIT_ATTEMPTS {
        let cand = draw_local_candidate(rng, center, level.scale);
        if !level.model.support().contains(&cand) {
            continue;
        }
        if log_posterior_unnormalized(level.model, &cand, level.beta) == f64::NEG_INFINITY {
            continue;
        }
        if level.prev.points.iter().any(|p| p.bitwise_eq(&cand)) {
            continue;
        }
        return Ok(cand);
    }
    Err(AimsError::InitFailed(MAX_INIT_ATTEMPTS))
}

fn split_log_target(model: &dyn TargetModel, theta: &[f64], beta: f64) -> (f64, f64) {
    let lp = model.log_prior(theta);
    if lp == f64::NEG_INFINITY {
        return (lp, f64::NEG_INFINITY);
    }
    let ll = model.log_likelihood(theta);
    let lt = if beta == 0.0 { lp } else { lp + beta * ll };
    (lt, ll)
}

/// Run the level-`j` chain for `chain_len` states.
pub fn run_level<R: Rng + ?Sized>(rng: &mut R, level: &LevelInput<'_>) -> Result<LevelRunRecord> {
    level.validate()?;
    let model = level.model;
    let beta = level.beta;
    let n = level.chain_len;
    let proposal = GlobalProposal::new(level);
    let selector = SeedSelector::new(&level.prev.norm_weights);

    let mut current = initial_state(rng, level)?;
    let (mut cur_target, mut cur_ll) = split_log_target(model, &current, beta);
    let mut cur_pihat = proposal.log_density(&current, cur_target)?;

    let mut rec = LevelRunRecord {
        states: Vec::with_capacity(n),
        log_target_values: Vec::with_capacity(n),
        log_likelihoods: Vec::with_capacity(n),
        local_accept_count: 0,
        global_accept_count: 0,
        repeat_count: 0,
        seed_indices: Vec::with_capacity(n - 1),
    };
    rec.states.push(current.clone());
    rec.log_target_values.push(cur_target);
    rec.log_likelihoods.push(cur_ll);

    for _ in 1..n {
        // 1a-1c: global candidate via one local RWMH step from a weighted seed.
        let k = selector.sample(rng);
        rec.seed_indices.push(k);
        let seed = &level.prev.points[k];
        let local = draw_local_candidate(rng, seed, level.scale);
        let (cand_target, cand_ll) = split_log_target(model, &local, beta);
        let moved = if local_accept(rng, cand_target, proposal.log_target_prev()[k]) {
            rec.local_accept_count += 1;
            // 2: the candidate is off the previous sample almost surely; a
            // bitwise hit is handled like a rejected local step.
            match proposal.log_density(&local, cand_target) {
                Ok(cand_pihat) => {
                    if global_accept(rng, cur_target, cur_pihat, cand_target, cand_pihat) {
                        rec.global_accept_count += 1;
                        current = local;
                        cur_target = cand_target;
                        cur_ll = cand_ll;
                        cur_pihat = cand_pihat;
                        true
                    } else {
                        false
                    }
                }
                Err(AimsError::ExcludedSet(_)) => false,
                Err(e) => return Err(e),
            }
        } else {
            // Local rejection: the global candidate is the seed itself, which
            // lies in the excluded set and is always refused.
            false
        };
        if !moved {
            rec.repeat_count += 1;
        }
        rec.states.push(current.clone());
        rec.log_target_values.push(cur_target);
        rec.log_likelihoods.push(cur_ll);
    }
    Ok(rec)
}
