use aims::diagnostics::{ks_two_sample, stationarity_ks};
use aims::experiments::{run_full_aims, RunConfig};
use aims::kernel::{global_proposal_log_density, run_level, LevelInput};
use aims::model::{
    log_posterior_unnormalized, GaussianMixture2D, ModelSpec, ParamVector, StdNormalTest, TargetModel,
};
use aims::schedule::{
    ess_estimate, normalize, solve_next_beta, weight_cov, AnnealingSchedule, WeightedSampleSet,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn tempered_set(model: &dyn TargetModel, points: Vec<ParamVector>, beta: f64) -> WeightedSampleSet {
    let lls = points.iter().map(|p| model.log_likelihood(p)).collect();
    WeightedSampleSet::tempered(points, lls, 0.0, beta).unwrap()
}

fn points_strategy(max_n: usize, dim: usize) -> impl Strategy<Value = Vec<ParamVector>> {
    prop::collection::vec(prop::collection::vec(-3.0..3.0f64, dim), 1..=max_n)
        .prop_map(|v| v.into_iter().map(ParamVector::from).collect())
}

/// `pihat` summed directly in linear space.
fn pihat_linear(model: &dyn TargetModel, set: &WeightedSampleSet, beta: f64, scale: f64, theta: &[f64]) -> f64 {
    let d = theta.len() as f64;
    let pi = |x: &[f64]| log_posterior_unnormalized(model, x, beta).exp();
    let norm = (2.0 * std::f64::consts::PI * scale * scale).powf(-d / 2.0);
    set.points
        .iter()
        .zip(&set.norm_weights)
        .map(|(p, w)| {
            let d2: f64 = p.iter().zip(theta).map(|(a, b)| (a - b) * (a - b)).sum();
            let q = norm * (-d2 / (2.0 * scale * scale)).exp();
            w * q * (pi(theta) / pi(p)).min(1.0)
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalized_weights_and_ess(lw in prop::collection::vec(-50.0..50.0f64, 1..200)) {
        let w = normalize(&lw).unwrap();
        let n = w.len() as f64;
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|x| *x >= 0.0));
        let ess = ess_estimate(&w);
        prop_assert!(ess >= 1.0 - 1e-9 && ess <= n + 1e-9);
        let delta = weight_cov(&w);
        prop_assert!((ess - n / (1.0 + delta * delta)).abs() <= 1e-9 * n);
    }

    #[test]
    fn next_beta_is_in_range(
        lls in prop::collection::vec(-100.0..0.0f64, 2..100),
        beta_prev in 0.0..0.9f64,
        gamma in 0.05..0.95f64,
    ) {
        let b = solve_next_beta(&lls, beta_prev, gamma).unwrap();
        prop_assert!(b > beta_prev && b <= 1.0);
    }

    #[test]
    fn level_counters_and_exclusion(
        points in points_strategy(5, 2),
        beta in 0.05..1.0f64,
        scale in 0.05..2.0f64,
        chain_len in 2..80usize,
        seed in any::<u64>(),
    ) {
        let model = StdNormalTest::new(2);
        let prev = tempered_set(&model, points, beta);
        let level = LevelInput { prev: &prev, beta, scale, chain_len, model: &model };
        let rec = run_level(&mut ChaCha8Rng::seed_from_u64(seed), &level).unwrap();
        prop_assert_eq!(rec.states.len(), chain_len);
        prop_assert!(rec.global_accept_count <= rec.local_accept_count);
        prop_assert!(rec.local_accept_count <= rec.transitions());
        prop_assert_eq!(rec.repeat_count + rec.global_accept_count, rec.transitions());
        let moves = rec.states.windows(2).filter(|w| w[0] != w[1]).count();
        prop_assert_eq!(moves, rec.global_accept_count);
        for s in &rec.states {
            prop_assert!(!prev.points.iter().any(|p| p.bitwise_eq(s)));
        }
    }

    #[test]
    fn pihat_matches_linear_space_sum(
        points in points_strategy(5, 2),
        theta in prop::collection::vec(-3.0..3.0f64, 2),
        beta in 0.0..1.0f64,
        scale in 0.3..2.0f64,
    ) {
        let model = StdNormalTest::new(2);
        let prev = tempered_set(&model, points, beta);
        prop_assume!(!prev.points.iter().any(|p| p.bitwise_eq(&theta)));
        let level = LevelInput { prev: &prev, beta, scale, chain_len: 2, model: &model };
        let lt = log_posterior_unnormalized(&model, &theta, beta);
        let got = global_proposal_log_density(&theta, &level, lt).unwrap().exp();
        let want = pihat_linear(&model, &prev, beta, scale, &theta);
        prop_assert!((got - want).abs() <= 1e-10 * want, "{} vs {}", got, want);
    }

    #[test]
    fn schedules_are_strictly_increasing(seed in any::<u64>(), gamma in 0.2..0.8f64) {
        let cfg = RunConfig::new(ModelSpec::StdNormal(2), 200, gamma, 0.8, seed);
        let model = cfg.build_model();
        let run = run_full_aims(&model, &cfg, 0).unwrap();
        prop_assert!(run.schedule.is_valid());
        let b = run.schedule.betas();
        prop_assert_eq!(b[0], 0.0);
        prop_assert_eq!(*b.last().unwrap(), 1.0);
        prop_assert!(b.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(run.chains.len(), run.m() + 1);
        for l in &run.levels {
            prop_assert!(l.global_accept_count <= l.local_accept_count);
        }
    }
}

#[test]
fn schedule_validity_rejects_bad_sequences() {
    let mk = |betas: &[f64]| AnnealingSchedule {
        levels: betas
            .iter()
            .enumerate()
            .map(|(i, &b)| aims::schedule::ScheduleLevel {
                level: i,
                beta: b,
                ess_to_next: None,
                ess_to_posterior: 1.0,
            })
            .collect(),
    };
    assert!(mk(&[0.0, 0.3, 1.0]).is_valid());
    assert!(!mk(&[0.0, 0.3, 0.3, 1.0]).is_valid());
    assert!(!mk(&[0.1, 1.0]).is_valid());
    assert!(!mk(&[0.0, 0.7]).is_valid());
}

#[test]
fn global_acceptance_never_exceeds_local_on_mixture() {
    let cfg = RunConfig::new(ModelSpec::Mixture2d, 500, 0.5, 0.2, 7);
    let model = cfg.build_model();
    for k in 0..3 {
        let run = run_full_aims(&model, &cfg, k).unwrap();
        for l in &run.levels {
            assert!(l.global_accept_count <= l.local_accept_count, "run {k} level {}", l.level);
        }
        let mix = GaussianMixture2D::reference();
        assert!(run.final_chain().states.iter().all(|s| mix.support().contains(s)));
    }
}

/// Self-target: previous sample iid from `N(0, 1)` and `pi_j = N(0, 1)`.
#[test]
fn self_target_chain_is_stationary() {
    let model = StdNormalTest::new(1);
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let pts: Vec<ParamVector> = (0..2000)
        .map(|_| ParamVector::from(vec![StandardNormal.sample(&mut rng)]))
        .collect();
    let lls = pts.iter().map(|p| model.log_likelihood(p)).collect();
    let lt: Vec<f64> = pts.iter().map(|p| log_posterior_unnormalized(&model, p, 1.0)).collect();
    let prev = WeightedSampleSet::new(pts, lls, vec![0.0; lt.len()]).unwrap();
    let level = LevelInput { prev: &prev, beta: 1.0, scale: 0.8, chain_len: 40_000, model: &model };
    let rec = run_level(&mut rng, &level).unwrap();
    let xs: Vec<f64> = rec.states.iter().map(|s| s[0]).collect();

    let (d, p) = stationarity_ks(&xs);
    assert!(p > 0.001, "halves differ: D = {d}, p = {p}");

    // Against fresh iid draws, thinned to roughly independent states.
    let thinned: Vec<f64> = xs.iter().step_by(10).copied().collect();
    let iid: Vec<f64> = (0..thinned.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let (d, p) = ks_two_sample(&thinned, &iid);
    assert!(p > 0.001, "chain vs iid: D = {d}, p = {p}");
}

#[test]
fn schedule_length_grows_with_gamma() {
    let mean_m = |gamma: f64| {
        let cfg = RunConfig::new(ModelSpec::StdNormal(4), 500, gamma, 0.8, 5);
        let model = cfg.build_model();
        let ms: Vec<usize> = (0..10).map(|k| run_full_aims(&model, &cfg, k).unwrap().m()).collect();
        ms.iter().sum::<usize>() as f64 / ms.len() as f64
    };
    let (a, b, c) = (mean_m(0.2), mean_m(0.5), mean_m(0.8));
    assert!(a <= b && b <= c, "{a} {b} {c}");
    assert!(a < c);
}
