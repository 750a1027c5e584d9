//! Finite-difference suites for the analytic objective gradients on random
//! small problems.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::blr::{BlrModel, Dataset};
use crate::error::Result;
use crate::features::{FeatureMap, RbfFeatureMap};
use crate::gaussian::GaussianDist;
use crate::optimize::finite_diff_check;
use crate::variational::{
    exact_kl, expected_log_likelihood, marginal_kl, Family, MarginalContext, MeasurementSet, Problem, Scale,
    VariationalState,
};

pub const DEFAULT_TOLERANCE: f64 = 1e-5;
const STEP: f64 = 1e-5;

/// A small random regression problem, state and measurement set.
#[derive(Debug, Clone)]
pub struct Instance {
    pub problem: Problem,
    pub state: VariationalState,
    pub measurements: MeasurementSet,
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Random RBF model with a random full-covariance prior, data, a random
/// state of `family` and up to `k + 2` measurement points.
pub fn random_instance<R: Rng + ?Sized>(family: Family, rng: &mut R) -> Result<Instance> {
    let k = rng.random_range(2..=6);
    let d = rng.random_range(1..=2);
    let n = rng.random_range(3..=12);
    let m = rng.random_range(1..=k + 2);
    let unit = Uniform::new(-2.0, 2.0).expect("valid range");

    let centers = DMatrix::from_fn(k, d, |_, _| rng.sample(unit));
    let lengthscales = DVector::from_fn(d, |_, _| rng.random_range(0.5..1.5));
    let map = FeatureMap::Rbf(RbfFeatureMap::new(centers, lengthscales)?);

    let a = DMatrix::from_fn(k, k, |_, _| 0.4 * normal(rng));
    let prior_cov = &a * a.transpose() + DMatrix::identity(k, k) * 0.5;
    let prior_mean = DVector::from_fn(k, |_, _| 0.5 * normal(rng));
    let prior = GaussianDist::new_full(prior_mean, prior_cov)?;
    let model = BlrModel::with_prior(map, rng.random_range(0.05..1.0), prior)?;

    let inputs = DMatrix::from_fn(n, d, |_, _| rng.sample(unit));
    let targets = DVector::from_fn(n, |_, _| normal(rng));
    let problem = Problem::new(model, Dataset::new(inputs, targets)?)?;

    let measurements = MeasurementSet::from_points(DMatrix::from_fn(m, d, |_, _| rng.sample(unit)))?;
    Ok(Instance {
        state: random_state(family, k, rng),
        problem,
        measurements,
    })
}

pub fn random_state<R: Rng + ?Sized>(family: Family, k: usize, rng: &mut R) -> VariationalState {
    let mean = DVector::from_fn(k, |_, _| normal(rng));
    let scale = match family {
        Family::Full => Scale::Full(DMatrix::from_fn(k, k, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Greater => 0.3 * normal(rng),
            std::cmp::Ordering::Equal => (0.3 * normal(rng)).exp(),
            std::cmp::Ordering::Less => 0.0,
        })),
        Family::Ffg => Scale::Ffg(DVector::from_fn(k, |_, _| (0.3 * normal(rng)).exp())),
    };
    VariationalState::new(mean, scale).expect("valid random state")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub instances: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Central-difference check of one instance's gradient; the closure maps
/// a state to `(value, gradient)`.
pub fn check_state_gradient<F>(state: &VariationalState, f: F) -> Result<f64>
where
    F: Fn(&VariationalState) -> Result<(f64, DVector<f64>)>,
{
    let family = state.family();
    let k = state.dim();
    let point = state.to_params();
    let (_, analytic) = f(state)?;
    let report = finite_diff_check(
        |p| {
            let st = VariationalState::from_params(family, k, p).expect("fixed layout");
            f(&st).map(|(v, _)| v).unwrap_or(f64::NAN)
        },
        &point,
        &analytic,
        STEP,
    );
    Ok(if report.max_rel_error.is_nan() {
        f64::INFINITY
    } else {
        report.max_rel_error
    })
}

/// Runs the expected log-likelihood, exact KL and marginal KL suites, each
/// over `instances` random problems split evenly between both families.
pub fn run_gradient_suites<R: Rng + ?Sized>(instances: usize, tolerance: f64, rng: &mut R) -> Result<Vec<SuiteReport>> {
    let mut worst = [0.0f64; 3];
    for i in 0..instances {
        let family = if i % 2 == 0 { Family::Full } else { Family::Ffg };
        let inst = random_instance(family, rng)?;
        let p = &inst.problem;
        let errs = [
            check_state_gradient(&inst.state, |s| {
                expected_log_likelihood(s, p, None).map(|(v, g)| (v, g.flatten()))
            })?,
            check_state_gradient(&inst.state, |s| exact_kl(s, p).map(|(v, g)| (v, g.flatten())))?,
            {
                let ctx = MarginalContext::new(&p.model, &inst.measurements)?;
                check_state_gradient(&inst.state, |s| marginal_kl(s, &ctx).map(|o| (o.value, o.grad.flatten())))?
            },
        ];
        for (w, e) in worst.iter_mut().zip(errs) {
            *w = w.max(e);
        }
    }
    Ok(["expected_log_likelihood", "exact_kl", "marginal_kl"]
        .iter()
        .zip(worst)
        .map(|(name, max_rel_error)| SuiteReport {
            name: name.to_string(),
            instances,
            max_rel_error,
            tolerance,
            passed: max_rel_error < tolerance,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn suites_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for r in run_gradient_suites(10, DEFAULT_TOLERANCE, &mut rng).unwrap() {
            assert!(r.passed, "{}: {}", r.name, r.max_rel_error);
        }
    }

    #[test]
    fn a_wrong_gradient_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = random_instance(Family::Full, &mut rng).unwrap();
        let err = check_state_gradient(&inst.state, |s| {
            exact_kl(s, &inst.problem).map(|(v, g)| (v, g.flatten() * 1.01))
        })
        .unwrap();
        assert!(err > 1e-3);
    }
}
