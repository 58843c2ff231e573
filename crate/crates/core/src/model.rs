//! Target models: a prior/likelihood pair on `R^d`, plus the concrete models
//! used by the experiments.
//!
//! Every density is handled in log space. A point outside the prior support has
//! log-prior `-inf`; likelihoods are finite everywhere inside the support.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Deref;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{AimsError, Result};

/// A point in parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(coords: Vec<f64>) -> Self {
        ParamVector(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        ParamVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Exact bitwise equality of every coordinate.
    pub fn bitwise_eq(&self, other: &[f64]) -> bool {
        self.0.len() == other.len()
            && self
                .0
                .iter()
                .zip(other)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}

/// Prior support: an axis-aligned closed box or all of `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Support {
    Unbounded,
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Support {
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Support::Box {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    /// Boundary points are inside.
    pub fn contains(&self, theta: &[f64]) -> bool {
        match self {
            Support::Unbounded => theta.iter().all(|x| x.is_finite()),
            Support::Box { lo, hi } => theta
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(x, (l, h))| *x >= *l && *x <= *h),
        }
    }

    pub fn is_compact(&self) -> bool {
        matches!(self, Support::Box { .. })
    }

    pub fn volume(&self) -> f64 {
        match self {
            Support::Unbounded => f64::INFINITY,
            Support::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| h - l).product(),
        }
    }
}

/// A prior/likelihood pair. Implementations must be pure and thread-safe.
pub trait TargetModel: Send + Sync {
    fn dim(&self) -> usize;

    fn support(&self) -> &Support;

    fn log_prior(&self, theta: &[f64]) -> f64;

    fn log_likelihood(&self, theta: &[f64]) -> f64;

    fn sample_prior(&self, rng: &mut dyn RngCore) -> ParamVector;

    /// Points near local maxima of the likelihood, if the model knows them.
    fn mode_hints(&self) -> Vec<ParamVector> {
        Vec::new()
    }

    /// Model constants, recorded in run summaries for provenance.
    fn describe(&self) -> serde_json::Value;
}

/// `log pi_0(theta) + beta * log L(theta)`, or `-inf` off the prior support.
pub fn log_posterior_unnormalized(model: &dyn TargetModel, theta: &[f64], beta: f64) -> f64 {
    let lp = model.log_prior(theta);
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    if beta == 0.0 {
        return lp;
    }
    lp + beta * model.log_likelihood(theta)
}

/// Largest coordinate of `theta`.
pub fn quantity_max_component(theta: &[f64]) -> f64 {
    theta.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Log of the isotropic Gaussian density `N(x | mean, sd^2 I)`.
#[inline]
pub fn log_isotropic_normal(x: &[f64], mean: &[f64], sd: f64) -> f64 {
    let d = x.len() as f64;
    -sq_dist(x, mean) / (2.0 * sd * sd) - 0.5 * d * (2.0 * PI * sd * sd).ln()
}

fn log_sum_exp2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn log_uniform_box(support: &Support, theta: &[f64]) -> f64 {
    if support.contains(theta) {
        -support.volume().ln()
    } else {
        f64::NEG_INFINITY
    }
}

fn sample_uniform_box(support: &Support, rng: &mut dyn RngCore) -> ParamVector {
    match support {
        Support::Box { lo, hi } => lo
            .iter()
            .zip(hi)
            .map(|(l, h)| l + (h - l) * rng.random::<f64>())
            .collect::<Vec<_>>()
            .into(),
        Support::Unbounded => unreachable!("uniform prior requires a box"),
    }
}

/// Mode centres of the 2-D mixture: the first ten uniform draws on `[0,10]^2`
/// from `ChaCha8Rng::seed_from_u64(MIXTURE_MODE_SEED)`, `(x, y)` drawn in that
/// order via `random_range(0.0..10.0)`.
pub const MIXTURE_MODE_SEED: u64 = 2011;

pub const MIXTURE_MODES: [[f64; 2]; 10] = [
    [2.5199662570515424, 0.8260599633211374],
    [8.942460178123905, 9.66485410962001],
    [1.0103651863229923, 9.359919284742041],
    [8.991793283586638, 5.060849914895114],
    [3.208476292794429, 2.9647859012197886],
    [0.17021610437957024, 0.8640910365838472],
    [0.6506717027697739, 6.162861744314756],
    [1.2520137979996782, 9.511136682819899],
    [6.542200943067673, 2.4459573534047063],
    [3.8478972921309795, 3.814727515240861],
];

/// Uniform prior on `[0,a]^2` times an equally weighted mixture of isotropic
/// Gaussians.
#[derive(Debug, Clone)]
pub struct GaussianMixture2D {
    pub box_side: f64,
    pub centers: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub sd: f64,
    support: Support,
    log_weights: Vec<f64>,
}

impl GaussianMixture2D {
    pub fn new(box_side: f64, centers: Vec<[f64; 2]>, weights: Vec<f64>, sd: f64) -> Self {
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        GaussianMixture2D {
            box_side,
            centers,
            weights,
            sd,
            support: Support::cube(2, 0.0, box_side),
            log_weights,
        }
    }

    /// The ten-mode setup: `a = 10`, `sigma = 0.1`, weights `0.1`.
    pub fn reference() -> Self {
        Self::new(10.0, MIXTURE_MODES.to_vec(), vec![0.1; 10], 0.1)
    }

    /// Index of the nearest mode centre.
    pub fn nearest_mode(&self, theta: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centers.iter().enumerate() {
            let d = sq_dist(theta, c);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

impl TargetModel for GaussianMixture2D {
    fn dim(&self) -> usize {
        2
    }

    fn support(&self) -> &Support {
        &self.support
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        log_uniform_box(&self.support, theta)
    }

    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        crate::schedule::log_sum_exp_iter(
            self.centers
                .iter()
                .zip(&self.log_weights)
                .map(|(c, lw)| lw + log_isotropic_normal(theta, c, self.sd)),
        )
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> ParamVector {
        sample_uniform_box(&self.support, rng)
    }

    fn mode_hints(&self) -> Vec<ParamVector> {
        self.centers.iter().map(|c| ParamVector::new(c.to_vec())).collect()
    }

    fn describe(&self) -> serde_json::Value {
        json!({
            "kind": "mixture2d",
            "box_side": self.box_side,
            "sd": self.sd,
            "weights": self.weights,
            "centers": self.centers,
            "mode_seed": MIXTURE_MODE_SEED,
        })
    }
}

/// Uniform prior on `[-a,a]^d` times `N(mu, s^2 I) + N(-mu, s^2 I)` with
/// `mu = (0.5, ..., 0.5)`.
#[derive(Debug, Clone)]
pub struct BimodalGaussian {
    pub dim: usize,
    pub half_side: f64,
    pub offset: f64,
    pub sd: f64,
    support: Support,
    mean_pos: Vec<f64>,
    mean_neg: Vec<f64>,
}

impl BimodalGaussian {
    pub fn new(dim: usize) -> Self {
        Self::with_params(dim, 2.0, 0.5, 0.5)
    }

    pub fn with_params(dim: usize, half_side: f64, offset: f64, sd: f64) -> Self {
        BimodalGaussian {
            dim,
            half_side,
            offset,
            sd,
            support: Support::cube(dim, -half_side, half_side),
            mean_pos: vec![offset; dim],
            mean_neg: vec![-offset; dim],
        }
    }

    /// Exact draw from the truncated posterior by rejection: pick a component
    /// with probability 1/2, draw from it, retry until inside the cube.
    pub fn sample_posterior_direct<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        loop {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let mut inside = true;
            for x in out.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *x = sign * self.offset + self.sd * z;
                if x.abs() > self.half_side {
                    inside = false;
                }
            }
            if inside {
                return;
            }
        }
    }
}

impl TargetModel for BimodalGaussian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn support(&self) -> &Support {
        &self.support
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        log_uniform_box(&self.support, theta)
    }

    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        log_sum_exp2(
            log_isotropic_normal(theta, &self.mean_pos, self.sd),
            log_isotropic_normal(theta, &self.mean_neg, self.sd),
        )
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> ParamVector {
        sample_uniform_box(&self.support, rng)
    }

    fn mode_hints(&self) -> Vec<ParamVector> {
        vec![
            ParamVector::new(self.mean_pos.clone()),
            ParamVector::new(self.mean_neg.clone()),
        ]
    }

    fn describe(&self) -> serde_json::Value {
        json!({
            "kind": "bimodal",
            "dim": self.dim,
            "half_side": self.half_side,
            "offset": self.offset,
            "sd": self.sd,
        })
    }
}

/// Generating parameters of the regression data:
/// `(alpha_1, alpha_2, beta_1, beta_2, gamma_1, gamma_2)`.
pub const FFNN_TRUE_WEIGHTS: [f64; 6] = [5.0, -5.0, -1.0, -3.0, 5.0, 2.0];
pub const FFNN_NOISE_SD: f64 = 0.1;
pub const FFNN_PRIOR_SD: f64 = 5.0;
pub const FFNN_NUM_POINTS: usize = 100;

/// One-hidden-layer tanh network with two hidden units:
/// `sum_j alpha_j tanh(beta_j x + gamma_j)`. `theta` uses the layout
/// `(alpha_1, alpha_2, beta_1, beta_2, gamma_1, gamma_2, ...)`.
#[inline]
pub fn ffnn_predict(theta: &[f64], x: f64) -> f64 {
    theta[0] * (theta[2] * x + theta[4]).tanh() + theta[1] * (theta[3] * x + theta[5]).tanh()
}

/// `x_i = i/10` for `i = 1..=100`, `y_i = f(x_i) + eps_i`, `eps_i ~ N(0, sd^2)`.
pub fn generate_ffnn_dataset<R: Rng + ?Sized>(
    rng: &mut R,
    true_theta: &[f64],
    noise_sd: f64,
) -> Result<Vec<(f64, f64)>> {
    if !(noise_sd >= 0.0) || !noise_sd.is_finite() {
        return Err(AimsError::InvalidConfig(format!(
            "noise sd must be finite and non-negative, got {noise_sd}"
        )));
    }
    Ok((1..=FFNN_NUM_POINTS)
        .map(|i| {
            let x = i as f64 / 10.0;
            let eps: f64 = rng.sample(StandardNormal);
            (x, ffnn_predict(true_theta, x) + noise_sd * eps)
        })
        .collect())
}

/// Bayesian tanh-network regression with Gaussian prediction error.
/// `theta_7 = log sigma^{-2}` is the log-precision of the error.
#[derive(Debug, Clone)]
pub struct FfnnRegression {
    pub data: Vec<(f64, f64)>,
    pub prior_sd: f64,
    pub dataset_seed: Option<u64>,
    support: Support,
}

impl FfnnRegression {
    pub const DIM: usize = 7;

    pub fn new(data: Vec<(f64, f64)>, prior_sd: f64) -> Self {
        FfnnRegression {
            data,
            prior_sd,
            dataset_seed: None,
            support: Support::Unbounded,
        }
    }

    /// Data drawn from the generating network with `sigma = 0.1`, using a
    /// ChaCha8 stream seeded with `dataset_seed`.
    pub fn reference(dataset_seed: u64) -> Self {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(dataset_seed);
        let data = generate_ffnn_dataset(&mut rng, &FFNN_TRUE_WEIGHTS, FFNN_NOISE_SD)
            .expect("reference noise sd is valid");
        FfnnRegression {
            dataset_seed: Some(dataset_seed),
            ..Self::new(data, FFNN_PRIOR_SD)
        }
    }

    pub fn sum_sq_residuals(&self, theta: &[f64]) -> f64 {
        self.data
            .iter()
            .map(|&(x, y)| {
                let r = y - ffnn_predict(theta, x);
                r * r
            })
            .sum()
    }
}

impl TargetModel for FfnnRegression {
    fn dim(&self) -> usize {
        Self::DIM
    }

    fn support(&self) -> &Support {
        &self.support
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        let s = self.prior_sd;
        let ss: f64 = theta.iter().map(|x| x * x).sum();
        -ss / (2.0 * s * s) - 0.5 * theta.len() as f64 * (2.0 * PI * s * s).ln()
    }

    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        let n = self.data.len() as f64;
        let log_precision = theta[6];
        0.5 * n * log_precision
            - 0.5 * n * (2.0 * PI).ln()
            - 0.5 * log_precision.exp() * self.sum_sq_residuals(theta)
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> ParamVector {
        (0..Self::DIM)
            .map(|_| self.prior_sd * rng.sample::<f64, _>(StandardNormal))
            .collect::<Vec<_>>()
            .into()
    }

    fn describe(&self) -> serde_json::Value {
        json!({
            "kind": "ffnn",
            "hidden_units": 2,
            "activation": "tanh",
            "prior_sd": self.prior_sd,
            "true_weights": FFNN_TRUE_WEIGHTS,
            "noise_sd": FFNN_NOISE_SD,
            "dataset_seed": self.dataset_seed,
            "num_points": self.data.len(),
        })
    }
}

/// Test model: prior `N(0, 2 I)`, likelihood `exp(-|theta|^2 / 4)`, so the
/// posterior is `N(0, I)` and the likelihood equals the prior-to-posterior
/// density ratio up to a constant.
#[derive(Debug, Clone)]
pub struct StdNormalTest {
    pub dim: usize,
    support: Support,
}

impl StdNormalTest {
    pub fn new(dim: usize) -> Self {
        StdNormalTest {
            dim,
            support: Support::Unbounded,
        }
    }
}

impl TargetModel for StdNormalTest {
    fn dim(&self) -> usize {
        self.dim
    }

    fn support(&self) -> &Support {
        &self.support
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        let ss: f64 = theta.iter().map(|x| x * x).sum();
        -ss / 4.0 - 0.5 * self.dim as f64 * (4.0 * PI).ln()
    }

    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        -theta.iter().map(|x| x * x).sum::<f64>() / 4.0
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> ParamVector {
        (0..self.dim)
            .map(|_| std::f64::consts::SQRT_2 * rng.sample::<f64, _>(StandardNormal))
            .collect::<Vec<_>>()
            .into()
    }

    fn mode_hints(&self) -> Vec<ParamVector> {
        vec![ParamVector::zeros(self.dim)]
    }

    fn describe(&self) -> serde_json::Value {
        json!({ "kind": "stdnorm-test", "dim": self.dim, "prior_var": 2.0 })
    }
}

/// Model selection by string id: `mixture2d`, `bimodal:<d>`, `ffnn`,
/// `stdnorm-test` (optionally `stdnorm-test:<d>`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelSpec {
    Mixture2d,
    Bimodal(usize),
    Ffnn,
    StdNormal(usize),
}

impl ModelSpec {
    pub fn parse(id: &str) -> Result<Self> {
        let unknown = || AimsError::UnknownModel(id.to_string());
        let dim_arg = |s: &str| -> Result<usize> {
            match s.parse::<usize>() {
                Ok(d) if d > 0 => Ok(d),
                _ => Err(unknown()),
            }
        };
        match id.split_once(':') {
            None => match id {
                "mixture2d" => Ok(ModelSpec::Mixture2d),
                "ffnn" => Ok(ModelSpec::Ffnn),
                "stdnorm-test" => Ok(ModelSpec::StdNormal(1)),
                _ => Err(unknown()),
            },
            Some(("bimodal", d)) => Ok(ModelSpec::Bimodal(dim_arg(d)?)),
            Some(("stdnorm-test", d)) => Ok(ModelSpec::StdNormal(dim_arg(d)?)),
            Some(_) => Err(unknown()),
        }
    }

    /// Build the model. `dataset_seed` only matters for `ffnn`.
    pub fn build(&self, dataset_seed: u64) -> Model {
        match *self {
            ModelSpec::Mixture2d => Model::Mixture2d(GaussianMixture2D::reference()),
            ModelSpec::Bimodal(d) => Model::Bimodal(BimodalGaussian::new(d)),
            ModelSpec::Ffnn => Model::Ffnn(FfnnRegression::reference(dataset_seed)),
            ModelSpec::StdNormal(d) => Model::StdNormal(StdNormalTest::new(d)),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Mixture2d => write!(f, "mixture2d"),
            ModelSpec::Bimodal(d) => write!(f, "bimodal:{d}"),
            ModelSpec::Ffnn => write!(f, "ffnn"),
            ModelSpec::StdNormal(1) => write!(f, "stdnorm-test"),
            ModelSpec::StdNormal(d) => write!(f, "stdnorm-test:{d}"),
        }
    }
}

impl TryFrom<String> for ModelSpec {
    type Error = AimsError;

    fn try_from(s: String) -> Result<Self> {
        ModelSpec::parse(&s)
    }
}

impl From<ModelSpec> for String {
    fn from(m: ModelSpec) -> String {
        m.to_string()
    }
}

/// Closed set of concrete models, selectable by [`ModelSpec`].
#[derive(Debug, Clone)]
pub enum Model {
    Mixture2d(GaussianMixture2D),
    Bimodal(BimodalGaussian),
    Ffnn(FfnnRegression),
    StdNormal(StdNormalTest),
}

impl Model {
    fn inner(&self) -> &dyn TargetModel {
        match self {
            Model::Mixture2d(m) => m,
            Model::Bimodal(m) => m,
            Model::Ffnn(m) => m,
            Model::StdNormal(m) => m,
        }
    }
}

impl TargetModel for Model {
    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn support(&self) -> &Support {
        self.inner().support()
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        self.inner().log_prior(theta)
    }

    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        self.inner().log_likelihood(theta)
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> ParamVector {
        self.inner().sample_prior(rng)
    }

    fn mode_hints(&self) -> Vec<ParamVector> {
        self.inner().mode_hints()
    }

    fn describe(&self) -> serde_json::Value {
        self.inner().describe()
    }
}
