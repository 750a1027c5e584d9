//! Adam on the unconstrained variational parameters, plus a central
//! finite-difference gradient checker.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::variational::{Objective, VariationalState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_steps: usize,
    pub log_every: usize,
    /// Stop early once the gradient norm falls below this. Off by default.
    pub tolerance_grad_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_steps: 5000,
            log_every: 50,
            tolerance_grad_norm: None,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter("learning rate must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidParameter("adam betas must lie in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("adam epsilon must be positive".into()));
        }
        if self.log_every == 0 {
            return Err(Error::InvalidParameter("log_every must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    m: DVector<f64>,
    v: DVector<f64>,
    t: i32,
}

impl Adam {
    pub fn new(config: AdamConfig, num_params: usize) -> Self {
        Self {
            config,
            m: DVector::zeros(num_params),
            v: DVector::zeros(num_params),
            t: 0,
        }
    }

    /// One ascent step on `params` along `grad`.
    pub fn step(&mut self, params: &mut DVector<f64>, grad: &DVector<f64>) {
        let c = &self.config;
        self.t += 1;
        let bc1 = 1.0 - c.beta1.powi(self.t);
        let bc2 = 1.0 - c.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g;
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] += c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub elbo_estimate: f64,
    pub kl_term: f64,
    pub expected_ll_term: f64,
    pub grad_norm: f64,
    pub jitter_events: usize,
}

#[derive(Debug, Clone)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
    pub final_state: VariationalState,
    pub steps_taken: usize,
    pub total_jitter_events: usize,
    pub total_dropped_rows: usize,
}

/// Training stopped on an error; carries everything recorded so far.
#[derive(Debug, Clone)]
pub struct TrainAborted {
    pub error: Error,
    pub trace: TrainTrace,
}

impl std::fmt::Display for TrainAborted {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "training aborted after {} steps: {}", self.trace.steps_taken, self.error)
    }
}

impl std::error::Error for TrainAborted {}

/// Maximizes the objective from `initial` with Adam.
///
/// The objective is evaluated at the current parameters at every step and
/// recorded every `log_every` steps and at the last step; the final state
/// is the one after `max_steps` updates.
pub fn run<R: Rng + ?Sized>(
    objective: &mut Objective<'_>,
    initial: &VariationalState,
    config: &AdamConfig,
    rng: &mut R,
) -> std::result::Result<TrainTrace, Box<TrainAborted>> {
    let family = initial.family();
    let k = initial.dim();
    let mut trace = TrainTrace {
        records: Vec::new(),
        final_state: initial.clone(),
        steps_taken: 0,
        total_jitter_events: 0,
        total_dropped_rows: 0,
    };
    if let Err(error) = config.validate() {
        return Err(Box::new(TrainAborted { error, trace }));
    }
    let mut params = initial.to_params();
    let mut adam = Adam::new(config.clone(), params.len());
    let mut state = initial.clone();

    for step in 0..config.max_steps {
        let eval = match objective.evaluate(&state, rng, step) {
            Ok(e) => e,
            Err(error) => {
                trace.final_state = state;
                return Err(Box::new(TrainAborted { error, trace }));
            }
        };
        let grad = eval.grad.flatten();
        let grad_norm = grad.norm();
        trace.total_jitter_events += eval.jitter_events;
        trace.total_dropped_rows += eval.dropped_rows;
        let last = step + 1 == config.max_steps;
        let converged = config.tolerance_grad_norm.is_some_and(|tol| grad_norm < tol);
        if step % config.log_every == 0 || last || converged {
            trace.records.push(TraceRecord {
                step,
                elbo_estimate: eval.elbo_estimate,
                kl_term: eval.kl,
                expected_ll_term: eval.expected_ll,
                grad_norm,
                jitter_events: eval.jitter_events,
            });
        }
        if !grad_norm.is_finite() || !eval.elbo_estimate.is_finite() {
            trace.final_state = state;
            return Err(Box::new(TrainAborted {
                error: Error::NonFiniteGradient { step },
                trace,
            }));
        }
        if converged {
            break;
        }
        adam.step(&mut params, &grad);
        trace.steps_taken = step + 1;
        state = match VariationalState::from_params(family, k, &params) {
            Ok(s) => s,
            Err(_) => {
                trace.final_state = state;
                return Err(Box::new(TrainAborted {
                    error: Error::NonFiniteGradient { step },
                    trace,
                }));
            }
        };
    }
    trace.final_state = state;
    Ok(trace)
}

/// Fraction of consecutive recorded intervals after `after_step` over which
/// the ELBO estimate did not decrease.
pub fn elbo_monotone_fraction(trace: &TrainTrace, after_step: usize) -> f64 {
    let recs: Vec<&TraceRecord> = trace.records.iter().filter(|r| r.step >= after_step).collect();
    if recs.len() < 2 {
        return 1.0;
    }
    let ok = recs
        .windows(2)
        .filter(|w| w[1].elbo_estimate >= w[0].elbo_estimate)
        .count();
    ok as f64 / (recs.len() - 1) as f64
}

/// Logs a warning when the ELBO trace is not (mostly) non-decreasing.
pub fn warn_if_not_monotone(trace: &TrainTrace, after_step: usize) -> f64 {
    let frac = elbo_monotone_fraction(trace, after_step);
    if frac < 0.99 {
        log::warn!("ELBO trace non-decreasing in only {:.1}% of intervals", 100.0 * frac);
    }
    frac
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateReport {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteDiffReport {
    pub max_rel_error: f64,
    pub coordinates: Vec<CoordinateReport>,
}

/// Central differences of `f` at `point` compared against `analytic`.
///
/// Errors are relative to the gradient's scale: `|a_i - n_i| / max(|a|_inf,
/// |n|_inf)`, with a floor of `1e-12` on the denominator, so tiny
/// components do not blow up the ratio.
pub fn finite_diff_check<F>(f: F, point: &DVector<f64>, analytic: &DVector<f64>, h: f64) -> FiniteDiffReport
where
    F: Fn(&DVector<f64>) -> f64,
{
    assert_eq!(point.len(), analytic.len(), "gradient length must match the point");
    let mut numeric = DVector::zeros(point.len());
    let mut x = point.clone();
    for i in 0..point.len() {
        let orig = x[i];
        x[i] = orig + h;
        let fp = f(&x);
        x[i] = orig - h;
        let fm = f(&x);
        x[i] = orig;
        numeric[i] = (fp - fm) / (2.0 * h);
    }
    let scale = analytic.amax().max(numeric.amax()).max(1e-12);
    let coordinates: Vec<CoordinateReport> = (0..point.len())
        .map(|i| CoordinateReport {
            index: i,
            analytic: analytic[i],
            numeric: numeric[i],
            rel_error: (analytic[i] - numeric[i]).abs() / scale,
        })
        .collect();
    let max_rel_error = coordinates.iter().map(|c| c.rel_error).fold(0.0, f64::max);
    FiniteDiffReport {
        max_rel_error,
        coordinates,
    }
}
