use fsvi_core::blr::{BlrModel, Dataset};
use fsvi_core::features::{FeatureMap, RbfFeatureMap};
use fsvi_core::gaussian::{kl_divergence, pushforward_linear};
use fsvi_core::gradcheck::{self, random_instance, random_state};
use fsvi_core::variational::{
    exact_kl, expected_log_likelihood, fixed_a_optimal_mean, marginal_kl, sample_measurement_set, Family,
    MarginalContext, MeasurementPolicy, MeasurementSet, Objective, ObjectiveKind, Problem, Provenance,
    VariationalState,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn rbf_problem(k: usize, n: usize, noise: f64, rng: &mut ChaCha8Rng) -> Problem {
    let map = RbfFeatureMap::linspace_1d(k, -2.0, 2.0, 0.6).unwrap();
    let model = BlrModel::new(FeatureMap::Rbf(map), noise).unwrap();
    let x = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-2.0..2.0));
    let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    Problem::new(model, Dataset::new(x, y).unwrap()).unwrap()
}

fn random_points(m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(m, 1, |_, _| rng.random_range(-2.5..2.5))
}

#[test]
fn gradient_suites_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for report in gradcheck::run_gradient_suites(30, gradcheck::DEFAULT_TOLERANCE, &mut rng).unwrap() {
        assert!(report.passed, "{}: {:.3e}", report.name, report.max_rel_error);
    }
}

#[test]
fn minibatch_partition_averages_to_the_full_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let problem = rbf_problem(5, 12, 0.3, &mut rng);
    for family in [Family::Full, Family::Ffg] {
        let st = random_state(family, 5, &mut rng);
        let (full, full_grad) = expected_log_likelihood(&st, &problem, None).unwrap();
        let batches: Vec<Vec<usize>> = (0..4).map(|b| (3 * b..3 * b + 3).collect()).collect();
        let mut value = 0.0;
        let mut grad = DVector::zeros(full_grad.flatten().len());
        for b in &batches {
            let (v, g) = expected_log_likelihood(&st, &problem, Some(b)).unwrap();
            value += v / 4.0;
            grad += g.flatten() / 4.0;
        }
        assert!((value - full).abs() < 1e-10 * full.abs().max(1.0));
        assert!((grad - full_grad.flatten()).amax() < 1e-10);
    }
}

#[test]
fn expected_log_likelihood_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let problem = rbf_problem(4, 8, 0.5, &mut rng);
    let st = random_state(Family::Full, 4, &mut rng);
    let (value, _) = expected_log_likelihood(&st, &problem, None).unwrap();
    let q = st.to_gaussian().unwrap();
    let draws = q.sample(&mut rng, 20_000).unwrap().values;
    let s2 = problem.model.noise_variance();
    let n = problem.data.len() as f64;
    let samples: Vec<f64> = draws
        .row_iter()
        .map(|w| {
            let r = &problem.data.targets - problem.phi() * w.transpose();
            -0.5 * n * (2.0 * std::f64::consts::PI * s2).ln() - r.norm_squared() / (2.0 * s2)
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
    let se = (var / samples.len() as f64).sqrt();
    assert!((mean - value).abs() < 3.5 * se, "mc {mean} +- {se} vs {value}");
}

#[test]
fn exact_elbo_is_stationary_at_the_posterior() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let problem = rbf_problem(6, 15, 0.1, &mut rng);
    let post = problem.model.exact_posterior(&problem.data).unwrap();
    let st = VariationalState::from_gaussian(&post, Family::Full).unwrap();
    let (_, g_ll) = expected_log_likelihood(&st, &problem, None).unwrap();
    let (_, g_kl) = exact_kl(&st, &problem).unwrap();
    assert!(g_ll.sub(&g_kl).flatten().amax() < 1e-8);
}

#[test]
fn marginal_kl_is_monotone_under_nesting() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let k = rng.random_range(2..=8);
        let problem = rbf_problem(k, 5, 0.2, &mut rng);
        let family = if rng.random::<bool>() { Family::Full } else { Family::Ffg };
        let st = random_state(family, k, &mut rng);
        let big = random_points(rng.random_range(2..=k + 3), &mut rng);
        let keep = rng.random_range(1..big.nrows());
        let small = big.rows(0, keep).into_owned();
        let kl = |pts: DMatrix<f64>| {
            let ctx = MarginalContext::new(&problem.model, &MeasurementSet::from_points(pts).unwrap()).unwrap();
            marginal_kl(&st, &ctx).unwrap().value
        };
        let (a, b) = (kl(small), kl(big));
        assert!(a <= b + 1e-9, "{a} > {b}");
    }
}

#[test]
fn marginal_kl_at_an_injective_set_equals_the_weight_kl() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let problem = rbf_problem(6, 5, 0.2, &mut rng);
    let FeatureMap::Rbf(map) = &problem.model.feature_map else { unreachable!() };
    let ctx = MarginalContext::new(&problem.model, &MeasurementSet::from_points(map.centers().clone()).unwrap()).unwrap();
    assert_eq!(ctx.num_retained(), 6);
    for family in [Family::Full, Family::Ffg] {
        let st = random_state(family, 6, &mut rng);
        let (w, _) = exact_kl(&st, &problem).unwrap();
        let f = marginal_kl(&st, &ctx).unwrap().value;
        assert!((w - f).abs() <= 1e-8 * w.abs(), "{w} vs {f}");
    }
}

#[test]
fn marginal_kl_matches_kl_of_pushforwards() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let inst = random_instance(Family::Full, &mut rng).unwrap();
        let model = &inst.problem.model;
        let ctx = MarginalContext::new(model, &inst.measurements).unwrap();
        let rows = ctx.rows.clone();
        let q = pushforward_linear(&inst.state.to_gaussian().unwrap(), &rows).unwrap();
        let p = pushforward_linear(model.prior(), &rows).unwrap();
        let direct = kl_divergence(&q, &p).unwrap();
        let ours = marginal_kl(&inst.state, &ctx).unwrap().value;
        assert!((direct - ours).abs() <= 1e-8 * direct.abs().max(1.0), "{direct} vs {ours}");
    }
}

#[test]
fn duplicate_points_are_dropped_without_changing_the_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let problem = rbf_problem(5, 5, 0.2, &mut rng);
    let st = random_state(Family::Full, 5, &mut rng);
    let pts = random_points(3, &mut rng);
    let doubled = DMatrix::from_fn(6, 1, |i, _| pts[(i % 3, 0)]);
    let a = MarginalContext::new(&problem.model, &MeasurementSet::from_points(pts).unwrap()).unwrap();
    let b = MarginalContext::new(&problem.model, &MeasurementSet::from_points(doubled).unwrap()).unwrap();
    assert_eq!(b.dropped, 3);
    let (va, vb) = (marginal_kl(&st, &a).unwrap().value, marginal_kl(&st, &b).unwrap().value);
    assert!((va - vb).abs() < 1e-10);
}

/// `(Phi^T Phi + s2 Phi_A^T (Phi_A Phi_A^T)^-1 Phi_A)^+ Phi^T y` formed directly.
fn fixed_a_oracle(problem: &Problem, points: &DMatrix<f64>) -> DVector<f64> {
    let phi = problem.phi();
    let phi_a = problem.model.features(points).unwrap();
    let kaa = &phi_a * phi_a.transpose();
    let proj = phi_a.transpose() * kaa.try_inverse().unwrap() * &phi_a;
    let h = phi.transpose() * phi + proj * problem.model.noise_variance();
    h.pseudo_inverse(1e-12).unwrap() * phi.transpose() * &problem.data.targets
}

#[test]
fn fixed_a_optimum_matches_the_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..20 {
        let k = rng.random_range(2..=8);
        let problem = rbf_problem(k, rng.random_range(k..=20), 0.1, &mut rng);
        let pts = random_points(rng.random_range(1..=k.min(6)), &mut rng);
        let ctx = MarginalContext::new(&problem.model, &MeasurementSet::from_points(pts.clone()).unwrap()).unwrap();
        let ours = fixed_a_optimal_mean(&problem, Some(&ctx)).unwrap();
        let oracle = fixed_a_oracle(&problem, &pts);
        assert!((&ours - &oracle).amax() < 1e-6 * oracle.amax().max(1.0));

        // the mean gradient of the fixed-set ELBO vanishes there, for either family
        let family = if i % 2 == 0 { Family::Full } else { Family::Ffg };
        let st = VariationalState::new(ours, random_state(family, k, &mut rng).scale).unwrap();
        let (_, g_ll) = expected_log_likelihood(&st, &problem, None).unwrap();
        let g_kl = marginal_kl(&st, &ctx).unwrap().grad;
        let g = &g_ll.mean - &g_kl.mean;
        assert!(g.amax() < 1e-6 * g_ll.mean.amax().max(1.0), "{}", g.amax());
    }
}

#[test]
fn measurement_sets_follow_the_policy() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let problem = rbf_problem(5, 30, 0.1, &mut rng);
    let policy = MeasurementPolicy::with_data_bounds(10, 0.5, &problem.data, true).unwrap();
    let set = sample_measurement_set(&policy, &problem.data, &mut rng).unwrap();
    assert_eq!(set.count(Provenance::FromData), 5);
    assert_eq!(set.count(Provenance::UniformBox), 5);
    let (lo, hi) = policy.bounds[0];
    for (i, p) in set.provenance.iter().enumerate() {
        let x = set.points[(i, 0)];
        match p {
            Provenance::FromData => assert!(problem.data.inputs.column(0).iter().any(|&v| v == x)),
            Provenance::UniformBox => assert!(x >= lo && x <= hi),
        }
    }
    assert!(MeasurementPolicy::new(4, 0.5, vec![(1.0, 1.0)], true).is_err());
}

#[test]
fn fixed_sets_stay_fixed_and_random_sets_move() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let problem = rbf_problem(5, 20, 0.1, &mut rng);
    let st = random_state(Family::Full, 5, &mut rng);
    let policy = MeasurementPolicy::with_data_bounds(4, 0.5, &problem.data, true).unwrap();
    let set = sample_measurement_set(&policy, &problem.data, &mut rng).unwrap();

    let mut fixed = Objective::new(&problem, ObjectiveKind::FixedA(set), None).unwrap();
    let a = fixed.evaluate(&st, &mut rng, 0).unwrap().kl;
    let b = fixed.evaluate(&st, &mut rng, 1).unwrap().kl;
    assert_eq!(a, b);

    let mut random = Objective::new(&problem, ObjectiveKind::RandA(policy.clone()), None).unwrap();
    let a = random.evaluate(&st, &mut rng, 0).unwrap().kl;
    let b = random.evaluate(&st, &mut rng, 1).unwrap().kl;
    assert_ne!(a, b);

    let frozen_policy = MeasurementPolicy {
        resample_each_step: false,
        ..policy
    };
    let mut frozen = Objective::new(&problem, ObjectiveKind::RandA(frozen_policy), None).unwrap();
    let a = frozen.evaluate(&st, &mut rng, 0).unwrap().kl;
    let b = frozen.evaluate(&st, &mut rng, 1).unwrap().kl;
    assert_eq!(a, b);
}

#[test]
fn objective_runs_are_reproducible() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let problem = rbf_problem(5, 20, 0.1, &mut rng);
    let st = random_state(Family::Ffg, 5, &mut rng);
    let policy = MeasurementPolicy::with_data_bounds(4, 0.5, &problem.data, true).unwrap();
    let eval = |seed| {
        let mut obj = Objective::new(&problem, ObjectiveKind::RandA(policy.clone()), Some(7)).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        (0..5).map(|s| obj.evaluate(&st, &mut r, s).unwrap().elbo_estimate).collect::<Vec<_>>()
    };
    assert_eq!(eval(1), eval(1));
    assert_ne!(eval(1), eval(2));
}
