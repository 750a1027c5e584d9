use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::blr::{BlrModel, Dataset};
use crate::error::{check_dim, Error, Result};
use crate::gaussian::{cholesky_with_jitter, CholeskyFactor};
use crate::linalg;
use crate::ssge::{self, SsgeConfig};

use super::measurement::{sample_measurement_set, MeasurementPolicy, MeasurementSet};
use super::state::{Scale, StateGradient, VariationalState};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// A model and its training data with the reusable pieces precomputed.
#[derive(Debug, Clone)]
pub struct Problem {
    pub model: BlrModel,
    pub data: Dataset,
    phi: DMatrix<f64>,
    gram: DMatrix<f64>,
    prior_precision: DMatrix<f64>,
    prior_log_det: f64,
}

impl Problem {
    pub fn new(model: BlrModel, data: Dataset) -> Result<Self> {
        let phi = model.features(&data.inputs)?;
        let mut gram = phi.transpose() * &phi;
        linalg::symmetrize(&mut gram);
        let (prior_precision, _) = model.prior_precision()?;
        let prior_log_det = model.prior().cholesky()?.log_det();
        Ok(Self {
            model,
            data,
            phi,
            gram,
            prior_precision,
            prior_log_det,
        })
    }

    pub fn num_features(&self) -> usize {
        self.phi.ncols()
    }

    /// Training feature matrix, `n x k`.
    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }
}

/// `E_Q[log p(y | w)]` in closed form, with its gradient.
///
/// With a minibatch the data term is rescaled by `n / |batch|`.
pub fn expected_log_likelihood(
    state: &VariationalState,
    problem: &Problem,
    minibatch: Option<&[usize]>,
) -> Result<(f64, StateGradient)> {
    let k = problem.num_features();
    check_dim("state dimension", k, state.dim())?;
    let n = problem.data.len();
    let s2 = problem.model.noise_variance();
    let constant = -0.5 * n as f64 * (LN_2PI + s2.ln());

    let (phi_b, y_b, factor) = match minibatch {
        None => (None, None, 1.0),
        Some(rows) => {
            if rows.is_empty() || rows.iter().any(|&r| r >= n) {
                return Err(Error::InvalidParameter("minibatch indices out of range".into()));
            }
            let phi_b = linalg::select_rows(&problem.phi, rows);
            let y_b = DVector::from_iterator(rows.len(), rows.iter().map(|&r| problem.data.targets[r]));
            (Some(phi_b), Some(y_b), n as f64 / rows.len() as f64)
        }
    };
    let phi = phi_b.as_ref().unwrap_or(&problem.phi);
    let y = y_b.as_ref().unwrap_or(&problem.data.targets);

    let resid = y - phi * &state.mean;
    let mean_grad = phi.transpose() * &resid * (factor / s2);

    let s = state.scale_matrix();
    let (trace, factor_grad) = match (&state.scale, minibatch) {
        (Scale::Full(_), None) => {
            let gl = &problem.gram * &s;
            (gl.component_mul(&s).sum(), gl)
        }
        (Scale::Full(_), Some(_)) => {
            let ps = phi * &s;
            (ps.norm_squared(), phi.transpose() * ps)
        }
        (Scale::Ffg(sd), _) => {
            let diag: DVector<f64> = match minibatch {
                None => problem.gram.diagonal(),
                Some(_) => DVector::from_fn(k, |j, _| phi.column(j).norm_squared()),
            };
            let trace = diag.iter().zip(sd.iter()).map(|(g, v)| g * v * v).sum();
            (trace, DMatrix::from_diagonal(&diag.component_mul(sd)))
        }
    };
    let value = constant - factor * (resid.norm_squared() + trace) / (2.0 * s2);
    let scale_grad = state.scale_grad_from_factor_grad(&(factor_grad * (-factor / s2)));
    Ok((
        value,
        StateGradient {
            mean: mean_grad,
            scale: scale_grad,
        },
    ))
}

/// Weight-space `KL(Q || prior)` and its gradient.
pub fn exact_kl(state: &VariationalState, problem: &Problem) -> Result<(f64, StateGradient)> {
    let k = problem.num_features();
    check_dim("state dimension", k, state.dim())?;
    let prec = &problem.prior_precision;
    let diff = &state.mean - problem.model.prior().mean();
    let mean_grad = prec * &diff;
    let maha = diff.dot(&mean_grad);
    let (trace, scale_grad) = match &state.scale {
        Scale::Full(l) => {
            let m = prec * l;
            let trace = m.component_mul(l).sum();
            let mut g = Vec::with_capacity(linalg::tril_len(k));
            for i in 0..k {
                for j in 0..i {
                    g.push(m[(i, j)]);
                }
                g.push(m[(i, i)] * l[(i, i)] - 1.0);
            }
            (trace, DVector::from_vec(g))
        }
        Scale::Ffg(s) => {
            let trace = (0..k).map(|i| prec[(i, i)] * s[i] * s[i]).sum();
            (trace, DVector::from_fn(k, |i, _| prec[(i, i)] * s[i] * s[i] - 1.0))
        }
    };
    let value = 0.5 * (trace + maha - k as f64 + problem.prior_log_det - state.log_det());
    Ok((
        value,
        StateGradient {
            mean: mean_grad,
            scale: scale_grad,
        },
    ))
}

/// Everything about a measurement set that does not depend on the state.
///
/// Rows of `phi_A` that are numerically dependent on the others are
/// dropped (pivoted selection); the marginal KL is unchanged by this since
/// both marginals are supported on the same subspace.
#[derive(Debug, Clone)]
pub struct MarginalContext {
    /// Indices into the measurement set that were kept.
    pub retained: Vec<usize>,
    pub dropped: usize,
    /// Retained feature rows, `r x k`.
    pub rows: DMatrix<f64>,
    prior_factor: Option<CholeskyFactor>,
    prior_mean: DVector<f64>,
    /// Orthonormal basis of the row space of `rows`, `r x k`. The marginal
    /// KL is invariant to invertible row changes, so it is evaluated in this
    /// basis, which avoids squaring the conditioning of `phi_A`.
    basis: DMatrix<f64>,
    basis_factor: Option<CholeskyFactor>,
    basis_prior_mean: DVector<f64>,
    basis_weighted: DMatrix<f64>,
    pub jitter_events: usize,
}

impl MarginalContext {
    pub fn new(model: &BlrModel, set: &MeasurementSet) -> Result<Self> {
        let phi_a = model.features(&set.points)?;
        let retained = linalg::independent_rows(&phi_a);
        let dropped = set.len() - retained.len();
        if dropped > 0 {
            log::debug!("measurement set: dropped {dropped} dependent feature rows");
        }
        let rows = linalg::select_rows(&phi_a, &retained);
        let k = model.num_features();
        if retained.is_empty() {
            return Ok(Self {
                retained,
                dropped,
                rows,
                prior_factor: None,
                prior_mean: DVector::zeros(0),
                basis: DMatrix::zeros(0, k),
                basis_factor: None,
                basis_prior_mean: DVector::zeros(0),
                basis_weighted: DMatrix::zeros(0, k),
                jitter_events: 0,
            });
        }
        let prior_cov = model.prior().cov_dense();
        let factor = prior_factor_for(&rows, &prior_cov)?;
        let basis = rows.transpose().qr().q().transpose();
        let basis_factor = prior_factor_for(&basis, &prior_cov)?;
        let jitter_events = usize::from(factor.jitter_used > 0.0) + usize::from(basis_factor.jitter_used > 0.0);
        Ok(Self {
            retained,
            dropped,
            prior_mean: &rows * model.prior().mean(),
            rows,
            prior_factor: Some(factor),
            basis_prior_mean: &basis * model.prior().mean(),
            basis_weighted: basis_factor.solve(&basis),
            basis,
            basis_factor: Some(basis_factor),
            jitter_events,
        })
    }

    pub fn num_retained(&self) -> usize {
        self.retained.len()
    }

    /// `phi_A^T K_A^{-1} phi_A`; for the standard normal prior this is the
    /// orthogonal projection onto the row space of `phi_A`.
    pub fn projection(&self) -> DMatrix<f64> {
        let mut p = self.basis.transpose() * &self.basis_weighted;
        linalg::symmetrize(&mut p);
        p
    }

    pub fn prior_factor(&self) -> Option<&CholeskyFactor> {
        self.prior_factor.as_ref()
    }

    pub fn prior_mean(&self) -> &DVector<f64> {
        &self.prior_mean
    }
}

fn prior_factor_for(rows: &DMatrix<f64>, prior_cov: &DMatrix<f64>) -> Result<CholeskyFactor> {
    let mut cov = rows * prior_cov * rows.transpose();
    linalg::symmetrize(&mut cov);
    cholesky_with_jitter(&cov)
}

#[derive(Debug, Clone)]
pub struct MarginalKl {
    pub value: f64,
    pub grad: StateGradient,
    pub jitter_events: usize,
}

/// `KL(Q_A || P_A)` between the pushforwards of the variational posterior
/// and the prior at the measurement points, with its gradient.
pub fn marginal_kl(state: &VariationalState, ctx: &MarginalContext) -> Result<MarginalKl> {
    let k = state.dim();
    check_dim("state dimension", ctx.rows.ncols(), k)?;
    let family = state.family();
    let Some(kf) = ctx.basis_factor.as_ref() else {
        return Ok(MarginalKl {
            value: 0.0,
            grad: StateGradient::zeros(family, k),
            jitter_events: 0,
        });
    };
    let r = ctx.num_retained();
    let diff = &ctx.basis * &state.mean - &ctx.basis_prior_mean;
    let maha = kf.solve_lower_vec(&diff).norm_squared();
    let mean_grad = ctx.basis_weighted.transpose() * &diff;

    let s = state.scale_matrix();
    let rs = &ctx.basis * &s;
    let mut c = &rs * rs.transpose();
    linalg::symmetrize(&mut c);
    let cf = cholesky_with_jitter(&c).map_err(|_| Error::DegenerateMarginal)?;
    let trace = kf.solve_lower(&rs).norm_squared();
    let value = 0.5 * (-(r as f64) + maha + trace - cf.log_det() + kf.log_det());

    let factor_grad = ctx.basis_weighted.transpose() * &rs - ctx.basis.transpose() * cf.solve(&rs);
    let scale_grad = state.scale_grad_from_factor_grad(&factor_grad);
    Ok(MarginalKl {
        value,
        grad: StateGradient {
            mean: mean_grad,
            scale: scale_grad,
        },
        jitter_events: ctx.jitter_events + usize::from(cf.jitter_used > 0.0),
    })
}

/// Convenience wrapper building the context on the fly.
pub fn marginal_kl_at(state: &VariationalState, model: &BlrModel, set: &MeasurementSet) -> Result<(f64, StateGradient)> {
    let ctx = MarginalContext::new(model, set)?;
    let out = marginal_kl(state, &ctx)?;
    Ok((out.value, out.grad))
}

/// Stationary mean of the fixed-set objective,
/// `(Phi^T Phi + s2 P_A)^+ (Phi^T y + s2 P_A m0)`.
///
/// With `None` the projection term is removed, giving the minimum-norm
/// least-squares solution.
pub fn fixed_a_optimal_mean(problem: &Problem, ctx: Option<&MarginalContext>) -> Result<DVector<f64>> {
    let s2 = problem.model.noise_variance();
    let mut h = problem.gram.clone();
    let mut rhs = problem.phi.transpose() * &problem.data.targets;
    if let Some(ctx) = ctx {
        let p = ctx.projection();
        rhs += &p * problem.model.prior().mean() * s2;
        h += p * s2;
    }
    linalg::symmetrize(&mut h);
    let svd = h.svd(true, true);
    let max = svd.singular_values.max();
    let tol = f64::EPSILON * problem.num_features() as f64 * max;
    let pinv = svd
        .pseudo_inverse(tol)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(pinv * rhs)
}

/// The four training objectives.
#[derive(Debug, Clone)]
pub enum ObjectiveKind {
    /// Exact weight-space KL.
    Exact,
    /// Marginal KL at one measurement set kept for the whole run.
    FixedA(MeasurementSet),
    /// Marginal KL at a measurement set drawn from the policy (every step
    /// unless the policy says otherwise).
    RandA(MeasurementPolicy),
    /// As `RandA`, but the KL gradient uses a spectral Stein estimate of the
    /// variational score.
    Ssge(MeasurementPolicy, SsgeConfig),
}

impl ObjectiveKind {
    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveKind::Exact => "exact",
            ObjectiveKind::FixedA(_) => "fixed-a",
            ObjectiveKind::RandA(_) => "rand-a",
            ObjectiveKind::Ssge(..) => "ssge",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub elbo_estimate: f64,
    pub expected_ll: f64,
    pub kl: f64,
    /// Ascent direction for the ELBO estimate.
    pub grad: StateGradient,
    pub jitter_events: usize,
    pub dropped_rows: usize,
}

#[derive(Debug, Clone)]
struct MinibatchSampler {
    size: usize,
    order: Vec<usize>,
    pos: usize,
}

impl MinibatchSampler {
    fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[usize] {
        if self.pos >= self.order.len() {
            self.order.shuffle(rng);
            self.pos = 0;
        }
        let end = (self.pos + self.size).min(self.order.len());
        let start = self.pos;
        self.pos = end;
        &self.order[start..end]
    }
}

/// Stateful evaluator of an objective over a training run. Holds the fixed
/// measurement context (for `FixedA`, or `RandA`/`Ssge` with resampling off)
/// and the minibatch schedule.
///
/// Per-step randomness is consumed in a fixed order: minibatch, then
/// measurement set, then estimator samples.
#[derive(Debug, Clone)]
pub struct Objective<'p> {
    problem: &'p Problem,
    kind: ObjectiveKind,
    minibatch: Option<MinibatchSampler>,
    frozen: Option<MarginalContext>,
}

impl<'p> Objective<'p> {
    pub fn new(problem: &'p Problem, kind: ObjectiveKind, minibatch_size: Option<usize>) -> Result<Self> {
        let n = problem.data.len();
        let minibatch = match minibatch_size {
            Some(0) => return Err(Error::InvalidParameter("minibatch size must be >= 1".into())),
            Some(b) if b < n => Some(MinibatchSampler {
                size: b,
                order: (0..n).collect(),
                pos: n,
            }),
            _ => None,
        };
        let frozen = match &kind {
            ObjectiveKind::FixedA(set) => Some(MarginalContext::new(&problem.model, set)?),
            ObjectiveKind::Ssge(_, cfg) => {
                cfg.validate()?;
                None
            }
            _ => None,
        };
        Ok(Self {
            problem,
            kind,
            minibatch,
            frozen,
        })
    }

    pub fn kind(&self) -> &ObjectiveKind {
        &self.kind
    }

    pub fn problem(&self) -> &Problem {
        self.problem
    }

    fn measurement_context<R: Rng + ?Sized>(&mut self, policy: &MeasurementPolicy, rng: &mut R) -> Result<(MarginalContext, bool)> {
        if !policy.resample_each_step {
            if let Some(ctx) = &self.frozen {
                return Ok((ctx.clone(), false));
            }
        }
        let set = sample_measurement_set(policy, &self.problem.data, rng)?;
        let ctx = MarginalContext::new(&self.problem.model, &set)?;
        if !policy.resample_each_step {
            self.frozen = Some(ctx.clone());
        }
        Ok((ctx, true))
    }

    pub fn evaluate<R: Rng + ?Sized>(&mut self, state: &VariationalState, rng: &mut R, _step: usize) -> Result<ObjectiveEval> {
        let batch: Option<Vec<usize>> = self.minibatch.as_mut().map(|mb| mb.next(rng).to_vec());
        let (ell, ell_grad) = expected_log_likelihood(state, self.problem, batch.as_deref())?;

        let kind = self.kind.clone();
        let (kl, kl_grad, jitter_events, dropped_rows) = match &kind {
            ObjectiveKind::Exact => {
                let (v, g) = exact_kl(state, self.problem)?;
                (v, g, 0, 0)
            }
            ObjectiveKind::FixedA(_) => {
                let ctx = self.frozen.as_ref().expect("fixed context built in new");
                let out = marginal_kl(state, ctx)?;
                (out.value, out.grad, out.jitter_events, ctx.dropped)
            }
            ObjectiveKind::RandA(policy) => {
                let (ctx, _) = self.measurement_context(policy, rng)?;
                let out = marginal_kl(state, &ctx)?;
                (out.value, out.grad, out.jitter_events, ctx.dropped)
            }
            ObjectiveKind::Ssge(policy, cfg) => {
                let (ctx, _) = self.measurement_context(policy, rng)?;
                // closed form for logging only
                let logged = marginal_kl(state, &ctx)?;
                let g = ssge::kl_gradient_with_context(state, &ctx, cfg, rng)?;
                (logged.value, g, logged.jitter_events, ctx.dropped)
            }
        };
        Ok(ObjectiveEval {
            elbo_estimate: ell - kl,
            expected_ll: ell,
            kl,
            grad: ell_grad.sub(&kl_grad),
            jitter_events,
            dropped_rows,
        })
    }
}
