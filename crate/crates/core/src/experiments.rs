//! Run configuration, the full annealing procedure, run ensembles and the
//! benchmark runners.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    ergodicity_bound_m, lag1_autocorrelation, mixture_truth, mode_frequencies, modes_visited,
    posterior_moments, RunEnsembleStats,
};
use crate::error::{AimsError, Result};
use crate::kernel::{run_level, LevelInput};
use crate::model::{
    ffnn_predict, quantity_max_component, BimodalGaussian, Model, ModelSpec, ParamVector,
    TargetModel, FFNN_TRUE_WEIGHTS,
};
use crate::rwmh::{run_rwmh, RwmhConfig};
use crate::schedule::{
    posterior_similarity_ess, solve_next_beta, AnnealingSchedule, ScheduleLevel,
    WeightedSampleSet,
};

/// Data set seed used when a config does not name one.
pub const DEFAULT_DATASET_SEED: u64 = 20110;

/// Weights toward the next level with ESS below this are flagged.
pub const UNRELIABLE_ESS: f64 = 10.0;

/// Radius, in mixture-component sds, within which a state counts as visiting
/// a mode.
pub const MODE_VISIT_RADIUS: f64 = 3.0;

/// Points on the predictive grid.
pub const PREDICTIVE_GRID_POINTS: usize = 200;

/// Sub-stream of a run seed used by the RWMH baseline.
pub const RWMH_STREAM: u64 = 1 << 40;
/// Sub-stream of the root seed used by the direct-sampling oracle.
pub const ORACLE_STREAM: u64 = 1 << 41;

/// SplitMix64 output function.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for sub-stream `stream` of `parent`.
///
/// Run `k` of an ensemble uses `split_seed(root, k)`; level `j` of that run
/// draws from `ChaCha8Rng::seed_from_u64(split_seed(run_seed, j))`. The RWMH
/// baseline of a run and the direct-sampling oracle use reserved stream ids
/// above any level index.
pub fn split_seed(parent: u64, stream: u64) -> u64 {
    mix64(parent ^ mix64(stream))
}

pub fn stream_rng(parent: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(split_seed(parent, stream))
}

/// Chain length per level: one constant, or a list whose last entry repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelSizes {
    Constant(usize),
    PerLevel(Vec<usize>),
}

impl LevelSizes {
    pub fn at(&self, level: usize) -> usize {
        match self {
            LevelSizes::Constant(n) => *n,
            LevelSizes::PerLevel(v) => v[level.min(v.len() - 1)],
        }
    }
}

fn default_runs() -> usize {
    1
}

fn default_max_levels() -> usize {
    200
}

fn default_dataset_seed() -> u64 {
    DEFAULT_DATASET_SEED
}

fn default_oracle_draws() -> usize {
    10_000_000
}

/// Everything that defines an experiment. Stored as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    /// Samples per level, level 0 (the prior) included.
    pub n: LevelSizes,
    pub gamma: f64,
    /// Local proposal standard deviation.
    pub scale: f64,
    /// Optional factor on `scale` per level `1, 2, ...`; the last one repeats.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_multipliers: Option<Vec<f64>>,
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    /// Fixed schedule, bypassing the adaptive solve. For testing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_betas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rwmh: Option<RwmhConfig>,
    #[serde(default = "default_max_levels")]
    pub max_levels: usize,
    /// Seed of the synthetic regression data (`ffnn` only).
    #[serde(default = "default_dataset_seed")]
    pub dataset_seed: u64,
    /// Direct draws for the `bimodal` ground truth.
    #[serde(default = "default_oracle_draws")]
    pub oracle_draws: usize,
    /// Compute the uniform-ergodicity constant at the final level
    /// (two-dimensional box models only).
    #[serde(default)]
    pub ergodicity_bound: bool,
}

impl RunConfig {
    pub fn new(model: ModelSpec, n: usize, gamma: f64, scale: f64, seed: u64) -> Self {
        RunConfig {
            model,
            n: LevelSizes::Constant(n),
            gamma,
            scale,
            scale_multipliers: None,
            seed,
            runs: 1,
            output_dir: None,
            fixed_betas: None,
            rwmh: None,
            max_levels: default_max_levels(),
            dataset_seed: DEFAULT_DATASET_SEED,
            oracle_draws: default_oracle_draws(),
            ergodicity_bound: false,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| AimsError::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| AimsError::ConfigParse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| AimsError::io(&path, e))?;
        Self::from_toml(&text)
    }

    pub fn build_model(&self) -> Model {
        self.model.build(self.dataset_seed)
    }

    pub fn scale_at(&self, level: usize) -> f64 {
        match &self.scale_multipliers {
            Some(m) if !m.is_empty() && level > 0 => self.scale * m[(level - 1).min(m.len() - 1)],
            _ => self.scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(AimsError::InvalidConfig(m));
        match &self.n {
            LevelSizes::Constant(n) if *n < 2 => return bad(format!("n must be at least 2, got {n}")),
            LevelSizes::PerLevel(v) if v.is_empty() || v.iter().any(|n| *n < 2) => {
                return bad("every per-level n must be at least 2".into())
            }
            _ => {}
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0,1), got {}", self.gamma));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return bad(format!("scale must be positive, got {}", self.scale));
        }
        if let Some(m) = &self.scale_multipliers {
            if m.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return bad("scale multipliers must be positive".into());
            }
        }
        if self.runs < 1 {
            return bad("runs must be at least 1".into());
        }
        if self.max_levels < 1 {
            return bad("max_levels must be at least 1".into());
        }
        if let Some(b) = &self.fixed_betas {
            let ok = b.len() >= 2
                && b[0] == 0.0
                && *b.last().unwrap() == 1.0
                && b.windows(2).all(|w| w[0] < w[1]);
            if !ok {
                return bad("fixed_betas must increase strictly from 0 to 1".into());
            }
        }
        if let Some(r) = &self.rwmh {
            r.validate()?;
        }
        if self.oracle_draws < 1 {
            return bad("oracle_draws must be at least 1".into());
        }
        Ok(())
    }
}

/// Samples of one level with their cached densities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelChain {
    pub level: usize,
    pub beta: f64,
    pub states: Vec<ParamVector>,
    pub log_target_values: Vec<f64>,
    pub log_likelihoods: Vec<f64>,
}

/// Per-level statistics written to the run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: usize,
    pub beta: f64,
    pub scale: f64,
    pub chain_len: usize,
    pub local_acceptance: f64,
    pub global_acceptance: f64,
    pub local_accept_count: usize,
    pub global_accept_count: usize,
    pub repeat_count: usize,
    /// ESS of the weights that produced this level's proposal.
    pub ess_in: f64,
    pub lag1_autocorrelation: Vec<f64>,
}

/// One complete annealing run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AimsRun {
    pub run_index: usize,
    pub seed: u64,
    pub schedule: AnnealingSchedule,
    /// Levels `1..=m`.
    pub levels: Vec<LevelSummary>,
    /// Levels `0..=m`.
    pub chains: Vec<LevelChain>,
    /// Some level was built from weights with ESS below [`UNRELIABLE_ESS`].
    pub unreliable: bool,
}

impl AimsRun {
    pub fn m(&self) -> usize {
        self.schedule.m()
    }

    pub fn final_chain(&self) -> &LevelChain {
        self.chains.last().expect("a run has at least two levels")
    }

    /// The weighted sample the final level's proposal was built from.
    pub fn final_proposal_set(&self) -> Result<WeightedSampleSet> {
        let m = self.m();
        let prev = &self.chains[m - 1];
        WeightedSampleSet::tempered(
            prev.states.clone(),
            prev.log_likelihoods.clone(),
            prev.beta,
            self.chains[m].beta,
        )
    }
}

fn level_zero(model: &dyn TargetModel, n: usize, rng: &mut ChaCha8Rng) -> Result<LevelChain> {
    let mut states = Vec::with_capacity(n);
    let mut lts = Vec::with_capacity(n);
    let mut lls = Vec::with_capacity(n);
    for i in 0..n {
        let p = model.sample_prior(rng);
        let ll = model.log_likelihood(&p);
        if !ll.is_finite() {
            return Err(AimsError::NonFiniteLogLikelihood(i));
        }
        lts.push(model.log_prior(&p));
        lls.push(ll);
        states.push(p);
    }
    Ok(LevelChain {
        level: 0,
        beta: 0.0,
        states,
        log_target_values: lts,
        log_likelihoods: lls,
    })
}

fn lag1_per_coordinate(states: &[ParamVector]) -> Vec<f64> {
    let d = states.first().map_or(0, |s| s.dim());
    (0..d)
        .map(|a| {
            let xs: Vec<f64> = states.iter().map(|s| s[a]).collect();
            lag1_autocorrelation(&xs)
        })
        .collect()
}

/// Prior sample, then levels until the tempered target reaches the posterior.
pub fn run_full_aims(model: &dyn TargetModel, config: &RunConfig, run_index: usize) -> Result<AimsRun> {
    config.validate()?;
    let seed = split_seed(config.seed, run_index as u64);
    let gamma = config.gamma;

    let first = level_zero(model, config.n.at(0), &mut stream_rng(seed, 0))?;
    let mut schedule = AnnealingSchedule {
        levels: vec![ScheduleLevel {
            level: 0,
            beta: 0.0,
            ess_to_next: None,
            ess_to_posterior: posterior_similarity_ess(&first.log_likelihoods, 0.0),
        }],
    };
    let mut chains = vec![first];
    let mut levels = Vec::new();
    let mut unreliable = false;

    loop {
        let j = chains.len() - 1;
        if j >= config.max_levels {
            return Err(AimsError::TooManyLevels(config.max_levels));
        }
        let cur = &chains[j];
        let beta = cur.beta;
        let n_cur = cur.states.len() as f64;
        let beta_next = match &config.fixed_betas {
            Some(b) => b[j + 1],
            None => {
                if schedule.levels[j].ess_to_posterior / n_cur >= gamma {
                    1.0
                } else {
                    solve_next_beta(&cur.log_likelihoods, beta, gamma)?
                }
            }
        };
        let prev = WeightedSampleSet::tempered(
            cur.states.clone(),
            cur.log_likelihoods.clone(),
            beta,
            beta_next,
        )?;
        let ess_in = prev.ess();
        unreliable |= ess_in < UNRELIABLE_ESS;
        schedule.levels[j].ess_to_next = Some(ess_in);

        let scale = config.scale_at(j + 1);
        let input = LevelInput {
            prev: &prev,
            beta: beta_next,
            scale,
            chain_len: config.n.at(j + 1),
            model,
        };
        let rec = run_level(&mut stream_rng(seed, (j + 1) as u64), &input)?;
        levels.push(LevelSummary {
            level: j + 1,
            beta: beta_next,
            scale,
            chain_len: rec.states.len(),
            local_acceptance: rec.local_acceptance_rate(),
            global_acceptance: rec.global_acceptance_rate(),
            local_accept_count: rec.local_accept_count,
            global_accept_count: rec.global_accept_count,
            repeat_count: rec.repeat_count,
            ess_in,
            lag1_autocorrelation: lag1_per_coordinate(&rec.states),
        });
        schedule.levels.push(ScheduleLevel {
            level: j + 1,
            beta: beta_next,
            ess_to_next: None,
            ess_to_posterior: posterior_similarity_ess(&rec.log_likelihoods, beta_next),
        });
        chains.push(LevelChain {
            level: j + 1,
            beta: beta_next,
            states: rec.states,
            log_target_values: rec.log_target_values,
            log_likelihoods: rec.log_likelihoods,
        });
        if beta_next >= 1.0 {
            break;
        }
    }

    Ok(AimsRun {
        run_index,
        seed,
        schedule,
        levels,
        chains,
        unreliable,
    })
}

/// Predictive curve of the regression network over posterior draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictive {
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub p05: Vec<f64>,
    pub p95: Vec<f64>,
    pub truth: Vec<f64>,
}

/// Linear-interpolation percentile of sorted data, `p` in `[0,1]`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `x` grid spanning the observed inputs.
pub fn predictive_grid(data: &[(f64, f64)]) -> Vec<f64> {
    let lo = data.iter().map(|d| d.0).fold(f64::INFINITY, f64::min);
    let hi = data.iter().map(|d| d.0).fold(f64::NEG_INFINITY, f64::max);
    let k = PREDICTIVE_GRID_POINTS;
    (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
}

pub fn predictive(states: &[ParamVector], x: &[f64]) -> Predictive {
    let mut mean = Vec::with_capacity(x.len());
    let mut p05 = Vec::with_capacity(x.len());
    let mut p95 = Vec::with_capacity(x.len());
    let mut ys = vec![0.0; states.len()];
    for &xi in x {
        for (y, s) in ys.iter_mut().zip(states) {
            *y = ffnn_predict(s, xi);
        }
        mean.push(ys.iter().sum::<f64>() / ys.len() as f64);
        ys.sort_by(f64::total_cmp);
        p05.push(percentile(&ys, 0.05));
        p95.push(percentile(&ys, 0.95));
    }
    Predictive {
        x: x.to_vec(),
        truth: x.iter().map(|xi| ffnn_predict(&FFNN_TRUE_WEIGHTS, *xi)).collect(),
        mean,
        p05,
        p95,
    }
}

impl Predictive {
    pub fn rmse(&self) -> f64 {
        let ss: f64 = self.mean.iter().zip(&self.truth).map(|(a, b)| (a - b).powi(2)).sum();
        (ss / self.mean.len() as f64).sqrt()
    }
}

/// Mixture-specific per-run results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureRunStats {
    pub mode_frequencies: Vec<f64>,
    pub modes_visited: usize,
    pub rwmh_modes_visited: Option<usize>,
    /// `log M` at the final level, when requested.
    pub log_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RwmhSummary {
    pub acceptance_rate: f64,
    pub estimates: BTreeMap<String, f64>,
}

/// What the ensemble report keeps of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    pub m: usize,
    pub schedule: AnnealingSchedule,
    pub levels: Vec<LevelSummary>,
    pub unreliable: bool,
    pub estimates: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<MixtureRunStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictive: Option<Predictive>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rwmh: Option<RwmhSummary>,
}

/// Named scalar estimates from a set of posterior draws.
pub fn estimates_for(model: &Model, states: &[ParamVector]) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    match model {
        Model::Mixture2d(_) => {
            let m = posterior_moments(states);
            out.insert("mean_1".into(), m.mean[0]);
            out.insert("mean_2".into(), m.mean[1]);
            out.insert("var_11".into(), m.cov[0][0]);
            out.insert("var_22".into(), m.cov[1][1]);
            out.insert("cov_12".into(), m.cov[0][1]);
        }
        Model::Bimodal(_) => {
            let h = states.iter().map(|s| quantity_max_component(s)).sum::<f64>() / states.len() as f64;
            out.insert("max_component".into(), h);
        }
        Model::Ffnn(f) => {
            let mut t7: Vec<f64> = states.iter().map(|s| s[6]).collect();
            t7.sort_by(f64::total_cmp);
            out.insert("theta7_median".into(), percentile(&t7, 0.5));
            let p = predictive(states, &predictive_grid(&f.data));
            out.insert("predictive_rmse".into(), p.rmse());
        }
        Model::StdNormal(_) => {
            let n = states.len() as f64;
            out.insert("mean_1".into(), states.iter().map(|s| s[0]).sum::<f64>() / n);
            out.insert(
                "second_moment_1".into(),
                states.iter().map(|s| s[0] * s[0]).sum::<f64>() / n,
            );
        }
    }
    out
}

/// One run plus everything derived from it.
pub fn run_once(model: &Model, config: &RunConfig, run_index: usize) -> Result<(AimsRun, RunSummary)> {
    let run = run_full_aims(model, config, run_index)?;
    let states = &run.final_chain().states;
    let estimates = estimates_for(model, states);

    let rwmh = match &config.rwmh {
        Some(rc) => Some(run_rwmh(&mut stream_rng(run.seed, RWMH_STREAM), model, rc)?),
        None => None,
    };

    let mixture = match model {
        Model::Mixture2d(mix) => {
            let log_m = if config.ergodicity_bound {
                let prev = run.final_proposal_set()?;
                let input = LevelInput {
                    prev: &prev,
                    beta: 1.0,
                    scale: config.scale_at(run.m()),
                    chain_len: states.len(),
                    model,
                };
                Some(ergodicity_bound_m(&input)?.log_m)
            } else {
                None
            };
            Some(MixtureRunStats {
                mode_frequencies: mode_frequencies(mix, states),
                modes_visited: modes_visited(mix, states, MODE_VISIT_RADIUS),
                rwmh_modes_visited: rwmh
                    .as_ref()
                    .map(|r| modes_visited(mix, &r.states, MODE_VISIT_RADIUS)),
                log_m,
            })
        }
        _ => None,
    };
    let predictive = match model {
        Model::Ffnn(f) => Some(predictive(states, &predictive_grid(&f.data))),
        _ => None,
    };
    let summary = RunSummary {
        run: run_index,
        seed: run.seed,
        m: run.m(),
        schedule: run.schedule.clone(),
        levels: run.levels.clone(),
        unreliable: run.unreliable,
        estimates,
        mixture,
        predictive,
        rwmh: rwmh.map(|r| RwmhSummary {
            acceptance_rate: r.acceptance_rate(),
            estimates: estimates_for(model, &r.states),
        }),
    };
    Ok((run, summary))
}

/// Ground-truth values for the estimates of [`estimates_for`], where known.
pub fn ground_truth(model: &Model, config: &RunConfig) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    match model {
        Model::Mixture2d(_) => {
            let g = mixture_truth(model, 1.0)?;
            out.insert("mean_1".into(), g.mean[0]);
            out.insert("mean_2".into(), g.mean[1]);
            out.insert("var_11".into(), g.cov[0][0]);
            out.insert("var_22".into(), g.cov[1][1]);
            out.insert("cov_12".into(), g.cov[0][1]);
        }
        Model::Bimodal(b) => {
            let mut rng = stream_rng(config.seed, ORACLE_STREAM);
            let (mean, _) = bimodal_oracle(b, config.oracle_draws, &mut rng);
            out.insert("max_component".into(), mean);
        }
        Model::Ffnn(_) => {}
        Model::StdNormal(_) => {
            out.insert("mean_1".into(), 0.0);
            out.insert("second_moment_1".into(), 1.0);
        }
    }
    Ok(out)
}

/// Mean of `max_i theta_i` under the bimodal posterior from exact draws, with
/// its Monte Carlo standard error.
pub fn bimodal_oracle<R: rand::Rng + ?Sized>(model: &BimodalGaussian, draws: usize, rng: &mut R) -> (f64, f64) {
    let mut buf = vec![0.0; model.dim];
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..draws {
        model.sample_posterior_direct(rng, &mut buf);
        let h = quantity_max_component(&buf);
        s += h;
        s2 += h * h;
    }
    let n = draws as f64;
    let mean = s / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleStats {
    pub m_values: Vec<usize>,
    pub m_mean: f64,
    pub m_min: usize,
    pub m_max: usize,
}

/// Ensemble report. Everything except `created_at` is a deterministic
/// function of the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub model: String,
    pub model_constants: serde_json::Value,
    pub config: RunConfig,
    pub runs: usize,
    pub per_run: Vec<RunSummary>,
    pub truth: BTreeMap<String, f64>,
    pub estimators: BTreeMap<String, RunEnsembleStats>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub rwmh_estimators: BTreeMap<String, RunEnsembleStats>,
    pub schedule_stats: ScheduleStats,
    pub created_at: String,
}

fn collect_stats(
    per_run: &[BTreeMap<String, f64>],
    truth: &BTreeMap<String, f64>,
) -> BTreeMap<String, RunEnsembleStats> {
    let Some(first) = per_run.first() else {
        return BTreeMap::new();
    };
    first
        .keys()
        .map(|k| {
            let est = per_run.iter().map(|e| e[k]).collect();
            (k.clone(), RunEnsembleStats::new(est, truth.get(k).copied()))
        })
        .collect()
}

/// Ensemble report plus the raw runs.
pub struct Ensemble {
    pub report: EnsembleReport,
    pub runs: Vec<AimsRun>,
}

/// `config.runs` independent runs (in parallel), aggregated in run order.
pub fn run_ensemble(config: &RunConfig) -> Result<Ensemble> {
    config.validate()?;
    let model = config.build_model();
    let results: Vec<(AimsRun, RunSummary)> = (0..config.runs)
        .into_par_iter()
        .map(|k| run_once(&model, config, k))
        .collect::<Result<_>>()?;
    let truth = ground_truth(&model, config)?;
    let (runs, per_run): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(Ensemble {
        report: build_report(&model, config, per_run, truth),
        runs,
    })
}

pub fn build_report(
    model: &Model,
    config: &RunConfig,
    per_run: Vec<RunSummary>,
    truth: BTreeMap<String, f64>,
) -> EnsembleReport {
    let est: Vec<_> = per_run.iter().map(|r| r.estimates.clone()).collect();
    let estimators = collect_stats(&est, &truth);
    let rwmh_est: Vec<_> = per_run
        .iter()
        .filter_map(|r| r.rwmh.as_ref().map(|w| w.estimates.clone()))
        .collect();
    let rwmh_estimators = collect_stats(&rwmh_est, &truth);
    let m_values: Vec<usize> = per_run.iter().map(|r| r.m).collect();
    let schedule_stats = ScheduleStats {
        m_mean: m_values.iter().sum::<usize>() as f64 / m_values.len() as f64,
        m_min: *m_values.iter().min().unwrap(),
        m_max: *m_values.iter().max().unwrap(),
        m_values,
    };
    EnsembleReport {
        model: config.model.to_string(),
        model_constants: model.describe(),
        config: config.clone(),
        runs: per_run.len(),
        per_run,
        truth,
        estimators,
        rwmh_estimators,
        schedule_stats,
        created_at: chrono::Utc::now().to_rfc3339(),
    }
}

/// One row of the published bimodal benchmark table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCase {
    pub dim: usize,
    pub n: usize,
    pub scale: f64,
    /// Reference value of `E[max_i theta_i]`.
    pub h_bar: f64,
    /// Reference COV of the 50-run ensemble.
    pub cov: f64,
    pub m_bar: f64,
}

/// Published settings and results for the bimodal benchmark, `gamma = 1/2`.
pub const BIMODAL_REFERENCE: [ReferenceCase; 6] = [
    ReferenceCase { dim: 2, n: 1000, scale: 0.2, h_bar: 0.29, cov: 0.088, m_bar: 3.0 },
    ReferenceCase { dim: 4, n: 1000, scale: 0.4, h_bar: 0.51, cov: 0.069, m_bar: 4.0 },
    ReferenceCase { dim: 6, n: 1000, scale: 0.6, h_bar: 0.64, cov: 0.104, m_bar: 4.95 },
    ReferenceCase { dim: 10, n: 1000, scale: 0.7, h_bar: 0.76, cov: 0.267, m_bar: 5.84 },
    ReferenceCase { dim: 10, n: 2000, scale: 0.6, h_bar: 0.76, cov: 0.122, m_bar: 5.98 },
    ReferenceCase { dim: 20, n: 4000, scale: 0.5, h_bar: 0.95, cov: 0.421, m_bar: 5.58 },
];

/// Default seed of the benchmark runners.
pub const DEFAULT_SEED: u64 = 2011;

/// Ten-mode mixture: `N = 1000`, `gamma = 1/2`, `c = 0.2`, with the RWMH
/// baseline (`N0 = 1000`, `N = 5000`, `c = 0.2`) and the ergodicity bound.
pub fn mixture_config(seed: u64, runs: usize) -> RunConfig {
    RunConfig {
        runs,
        rwmh: Some(RwmhConfig {
            n0: 1000,
            n: 5000,
            scale: 0.2,
            burn_in: 0,
        }),
        ergodicity_bound: true,
        ..RunConfig::new(ModelSpec::Mixture2d, 1000, 0.5, 0.2, seed)
    }
}

/// Bimodal benchmark case `case` (index into [`BIMODAL_REFERENCE`]).
pub fn bimodal_config(case: usize, seed: u64, runs: usize) -> RunConfig {
    let r = BIMODAL_REFERENCE[case];
    RunConfig {
        runs,
        ..RunConfig::new(ModelSpec::Bimodal(r.dim), r.n, 0.5, r.scale, seed)
    }
}

/// Regression network: `N = 3000`, `gamma = 1/2`, `c = 0.5`.
pub fn ffnn_config(seed: u64, runs: usize) -> RunConfig {
    RunConfig {
        runs,
        ..RunConfig::new(ModelSpec::Ffnn, 3000, 0.5, 0.5, seed)
    }
}

/// One point of a proposal-scale sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub scale: f64,
    pub estimators: BTreeMap<String, RunEnsembleStats>,
    pub m_mean: f64,
    /// Mean over runs of the per-level acceptance rates, levels `1..`.
    pub mean_local_acceptance: Vec<f64>,
    pub mean_global_acceptance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub model: String,
    pub config: RunConfig,
    pub truth: BTreeMap<String, f64>,
    pub points: Vec<SweepPoint>,
    pub created_at: String,
}

fn mean_by_level(per_run: &[RunSummary], f: impl Fn(&LevelSummary) -> f64) -> Vec<f64> {
    let depth = per_run.iter().map(|r| r.levels.len()).max().unwrap_or(0);
    (0..depth)
        .map(|j| {
            let v: Vec<f64> = per_run.iter().filter_map(|r| r.levels.get(j)).map(&f).collect();
            v.iter().sum::<f64>() / v.len() as f64
        })
        .collect()
}

/// Re-run the ensemble of `config` for each proposal scale.
pub fn sweep_scale(config: &RunConfig, scales: &[f64]) -> Result<SweepReport> {
    let model = config.build_model();
    let truth = ground_truth(&model, config)?;
    let mut points = Vec::with_capacity(scales.len());
    for &c in scales {
        let cfg = RunConfig {
            scale: c,
            ..config.clone()
        };
        cfg.validate()?;
        let per_run: Vec<RunSummary> = (0..cfg.runs)
            .into_par_iter()
            .map(|k| run_once(&model, &cfg, k).map(|(_, s)| s))
            .collect::<Result<_>>()?;
        let est: Vec<_> = per_run.iter().map(|r| r.estimates.clone()).collect();
        points.push(SweepPoint {
            scale: c,
            estimators: collect_stats(&est, &truth),
            m_mean: per_run.iter().map(|r| r.m as f64).sum::<f64>() / per_run.len() as f64,
            mean_local_acceptance: mean_by_level(&per_run, |l| l.local_acceptance),
            mean_global_acceptance: mean_by_level(&per_run, |l| l.global_acceptance),
        });
    }
    Ok(SweepReport {
        model: config.model.to_string(),
        config: config.clone(),
        truth,
        points,
        created_at: chrono::Utc::now().to_rfc3339(),
    })
}
