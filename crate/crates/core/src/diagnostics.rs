//! Estimators, run-ensemble statistics and checks on chain output.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AimsError, Result};
use crate::kernel::{draw_local_candidate, local_accept, LevelInput, SeedSelector};
use crate::model::{log_posterior_unnormalized, GaussianMixture2D, ParamVector, Support, TargetModel};
use crate::schedule::{log_sum_exp_iter, WeightedSampleSet};

/// Mean of `h` over the chain.
pub fn estimate_expectation<F: Fn(&[f64]) -> f64>(states: &[ParamVector], h: F) -> f64 {
    assert!(!states.is_empty(), "empty chain");
    states.iter().map(|s| h(s)).sum::<f64>() / states.len() as f64
}

/// Sample mean and unbiased sample covariance (row-major `d x d`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

pub fn posterior_moments(states: &[ParamVector]) -> Moments {
    assert!(states.len() >= 2, "need at least two states");
    let d = states[0].dim();
    let n = states.len() as f64;
    let mut mean = vec![0.0; d];
    for s in states {
        for (m, x) in mean.iter_mut().zip(s.iter()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = vec![vec![0.0; d]; d];
    for s in states {
        for a in 0..d {
            let da = s[a] - mean[a];
            for b in a..d {
                cov[a][b] += da * (s[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            cov[a][b] /= n - 1.0;
            cov[b][a] = cov[a][b];
        }
    }
    Moments { mean, cov }
}

/// True when every pair of estimates is closer than `eps`.
pub fn stopping_rule(estimates: &[f64], eps: f64) -> bool {
    assert!(estimates.len() >= 2 && eps > 0.0);
    let lo = estimates.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = estimates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    hi - lo < eps
}

/// Spread of one estimator across independent runs.
///
/// `sd` uses the `1/K` normalization so that `mse = bias^2 + sd^2` exactly;
/// `standard_error` uses the unbiased variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEnsembleStats {
    pub estimates: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    pub cov: f64,
    pub standard_error: f64,
    pub truth: Option<f64>,
    pub bias: Option<f64>,
    pub mse: Option<f64>,
}

impl RunEnsembleStats {
    pub fn new(estimates: Vec<f64>, truth: Option<f64>) -> Self {
        let k = estimates.len() as f64;
        assert!(k >= 1.0, "no estimates");
        let mean = estimates.iter().sum::<f64>() / k;
        let ss: f64 = estimates.iter().map(|e| (e - mean).powi(2)).sum();
        let sd = (ss / k).sqrt();
        let standard_error = if k > 1.0 { (ss / (k - 1.0) / k).sqrt() } else { f64::NAN };
        let bias = truth.map(|t| mean - t);
        let mse = truth.map(|t| estimates.iter().map(|e| (e - t).powi(2)).sum::<f64>() / k);
        RunEnsembleStats {
            estimates,
            mean,
            sd,
            cov: sd / mean.abs(),
            standard_error,
            truth,
            bias,
            mse,
        }
    }
}

/// Share of states nearest to each mixture component.
pub fn mode_frequencies(model: &GaussianMixture2D, states: &[ParamVector]) -> Vec<f64> {
    let mut counts = vec![0usize; model.centers.len()];
    for s in states {
        counts[model.nearest_mode(s)] += 1;
    }
    counts.iter().map(|c| *c as f64 / states.len() as f64).collect()
}

/// Number of components that hold at least one state within `radius` sds of
/// the centre.
pub fn modes_visited(model: &GaussianMixture2D, states: &[ParamVector], radius: f64) -> usize {
    let r2 = (radius * model.sd).powi(2);
    model
        .centers
        .iter()
        .filter(|c| {
            states
                .iter()
                .any(|s| (s[0] - c[0]).powi(2) + (s[1] - c[1]).powi(2) <= r2)
        })
        .count()
}

/// Composite Simpson weights for `n` intervals (`n` even) on `[lo, hi]`.
pub fn simpson_weights(lo: f64, hi: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2 && n.is_multiple_of(2), "Simpson needs an even interval count");
    let h = (hi - lo) / n as f64;
    let nodes = (0..=n).map(|i| lo + h * i as f64).collect();
    let weights = (0..=n)
        .map(|i| {
            let c = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect();
    (nodes, weights)
}

/// Normalizer, mean and covariance of a 2-D density given in log space, by
/// tensor Simpson quadrature over a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMoments {
    pub log_normalizer: f64,
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
    /// Largest log-density seen on the grid and where.
    pub grid_max: f64,
    pub grid_argmax: [f64; 2],
}

pub fn grid_moments_2d<F: Fn(&[f64]) -> f64>(
    log_density: F,
    lo: [f64; 2],
    hi: [f64; 2],
    intervals: usize,
) -> GridMoments {
    let (xs, wx) = simpson_weights(lo[0], hi[0], intervals);
    let (ys, wy) = simpson_weights(lo[1], hi[1], intervals);
    let mut vals = Vec::with_capacity(xs.len() * ys.len());
    let mut grid_max = f64::NEG_INFINITY;
    let mut grid_argmax = [lo[0], lo[1]];
    for x in &xs {
        for y in &ys {
            let v = log_density(&[*x, *y]);
            if v > grid_max {
                grid_max = v;
                grid_argmax = [*x, *y];
            }
            vals.push(v);
        }
    }
    // Accumulate moments of exp(v - grid_max) so nothing overflows.
    let (mut z, mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, x) in xs.iter().enumerate() {
        for (j, y) in ys.iter().enumerate() {
            let w = wx[i] * wy[j] * (vals[i * ys.len() + j] - grid_max).exp();
            z += w;
            sx += w * x;
            sy += w * y;
            sxx += w * x * x;
            syy += w * y * y;
            sxy += w * x * y;
        }
    }
    let mx = sx / z;
    let my = sy / z;
    let cxy = sxy / z - mx * my;
    GridMoments {
        log_normalizer: grid_max + z.ln(),
        mean: [mx, my],
        cov: [[sxx / z - mx * mx, cxy], [cxy, syy / z - my * my]],
        grid_max,
        grid_argmax,
    }
}

/// Grid resolution used for 2-D ground truth.
pub const TRUTH_GRID_INTERVALS: usize = 2000;

/// Posterior mean and covariance of a 2-D model with box support.
pub fn mixture_truth(model: &dyn TargetModel, beta: f64) -> Result<GridMoments> {
    let (lo, hi) = box_2d(model)?;
    Ok(grid_moments_2d(
        |t| log_posterior_unnormalized(model, t, beta),
        lo,
        hi,
        TRUTH_GRID_INTERVALS,
    ))
}

fn box_2d(model: &dyn TargetModel) -> Result<([f64; 2], [f64; 2])> {
    match model.support() {
        Support::Box { lo, hi } if lo.len() == 2 => Ok(([lo[0], lo[1]], [hi[0], hi[1]])),
        Support::Box { .. } => Err(AimsError::BoundUndefined(
            "grid bound is implemented for two-dimensional boxes only".into(),
        )),
        Support::Unbounded => Err(AimsError::BoundUndefined("support is not compact".into())),
    }
}

/// Derivative-free compass search for a local maximum of `f` inside the box.
fn compass_ascent<F: Fn(&[f64]) -> f64>(f: &F, start: [f64; 2], lo: [f64; 2], hi: [f64; 2], step: f64) -> f64 {
    let mut x = start;
    let mut fx = f(&x);
    let mut h = step;
    while h > 1e-12 {
        let mut improved = false;
        for (dx, dy) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
            let c = [(x[0] + dx).clamp(lo[0], hi[0]), (x[1] + dy).clamp(lo[1], hi[1])];
            let fc = f(&c);
            if fc > fx {
                x = c;
                fx = fc;
                improved = true;
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    fx
}

/// Components of the uniform-ergodicity constant for one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityBound {
    /// `log M`; `M` itself overflows for sharply peaked targets.
    pub log_m: f64,
    /// `log max pi_j` with `pi_j` normalized over the box.
    pub log_max_target: f64,
    /// `log sum_i wbar_i min_theta q(theta | theta_i)`.
    pub log_min_mixture: f64,
}

impl ErgodicityBound {
    /// `1/M`, possibly zero after underflow.
    pub fn inverse_m(&self) -> f64 {
        (-self.log_m).exp()
    }
}

/// `M` with `pi_j` normalized by grid quadrature, its maximum found on the
/// grid and refined by local ascent from the grid argmax and the model's mode
/// hints, and the proposal minimum taken at each point's farthest box corner.
pub fn ergodicity_bound_m(level: &LevelInput<'_>) -> Result<ErgodicityBound> {
    ergodicity_bound_m_with_grid(level, TRUTH_GRID_INTERVALS)
}

pub fn ergodicity_bound_m_with_grid(level: &LevelInput<'_>, intervals: usize) -> Result<ErgodicityBound> {
    let model = level.model;
    let (lo, hi) = box_2d(model)?;
    let c2 = level.scale * level.scale;
    let log_q_norm = -(2.0 * std::f64::consts::PI * c2).ln();
    let log_min_mixture = log_sum_exp_iter(level.prev.points.iter().zip(&level.prev.norm_weights).filter(|(_, w)| **w > 0.0).map(|(p, w)| {
        let far2: f64 = (0..2)
            .map(|a| (p[a] - lo[a]).abs().max((p[a] - hi[a]).abs()).powi(2))
            .sum();
        w.ln() + log_q_norm - far2 / (2.0 * c2)
    }));

    let f = |t: &[f64]| log_posterior_unnormalized(model, t, level.beta);
    let grid = grid_moments_2d(f, lo, hi, intervals);
    let step = (hi[0] - lo[0]) / intervals as f64;
    let mut starts = vec![grid.grid_argmax];
    starts.extend(model.mode_hints().iter().map(|p| [p[0], p[1]]));
    let mut log_max = grid.grid_max;
    for s in starts {
        log_max = log_max.max(compass_ascent(&f, s, lo, hi, step));
    }
    let log_max_target = log_max - grid.log_normalizer;
    Ok(ErgodicityBound {
        log_m: log_max_target - log_min_mixture,
        log_max_target,
        log_min_mixture,
    })
}

/// Average of `h` over draws from the global proposal `pihat`: pick a seed by
/// weight, take one local Metropolis step toward `pi_j`, keep the seed if it
/// is rejected.
pub fn pihat_expectation_demo<R: Rng + ?Sized, H: Fn(&[f64]) -> f64>(
    rng: &mut R,
    level: &LevelInput<'_>,
    draws: usize,
    h: H,
) -> f64 {
    let prev: &WeightedSampleSet = level.prev;
    let sel = SeedSelector::new(&prev.norm_weights);
    let seed_targets: Vec<f64> = prev
        .points
        .iter()
        .map(|p| log_posterior_unnormalized(level.model, p, level.beta))
        .collect();
    let mut total = 0.0;
    for _ in 0..draws {
        let k = sel.sample(rng);
        let cand = draw_local_candidate(rng, &prev.points[k], level.scale);
        let lt = log_posterior_unnormalized(level.model, &cand, level.beta);
        total += if local_accept(rng, lt, seed_targets[k]) {
            h(&cand)
        } else {
            h(&prev.points[k])
        };
    }
    total / draws as f64
}

/// Sample autocorrelation at lags `0..=max_lag`.
pub fn autocorrelation(xs: &[f64], max_lag: usize) -> Vec<f64> {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let c0: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (0..=max_lag.min(n.saturating_sub(1)))
        .map(|k| {
            if c0 == 0.0 {
                return if k == 0 { 1.0 } else { 0.0 };
            }
            xs[..n - k]
                .iter()
                .zip(&xs[k..])
                .map(|(a, b)| (a - mean) * (b - mean))
                .sum::<f64>()
                / c0
        })
        .collect()
}

pub fn lag1_autocorrelation(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    autocorrelation(xs, 1)[1]
}

/// Integrated autocorrelation time with Geyer's initial positive sequence
/// truncation. At least 1.
pub fn integrated_autocorr_time(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return 1.0;
    }
    let rho = autocorrelation(xs, n - 1);
    let mut tau = -1.0;
    let mut k = 0;
    while k + 1 < rho.len() {
        let pair = rho[k] + rho[k + 1];
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        k += 2;
    }
    tau.max(1.0)
}

/// `n / tau`: effective number of independent draws in a chain.
pub fn autocorr_ess(xs: &[f64]) -> f64 {
    xs.len() as f64 / integrated_autocorr_time(xs)
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = a[i].min(b[j]);
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let sq = ne.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    (d, kolmogorov_survival(lambda))
}

/// `P(K > lambda)` for the Kolmogorov distribution.
fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// KS test between the halves of a chain after thinning each by the
/// integrated autocorrelation time, so the asymptotic law applies.
pub fn stationarity_ks(xs: &[f64]) -> (f64, f64) {
    let tau = integrated_autocorr_time(xs).ceil() as usize;
    let half = xs.len() / 2;
    let first: Vec<f64> = xs[..half].iter().step_by(tau).cloned().collect();
    let second: Vec<f64> = xs[half..].iter().step_by(tau).cloned().collect();
    ks_two_sample(&first, &second)
}
