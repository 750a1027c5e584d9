//! Variational families, measurement sets, and the training objectives.

mod measurement;
mod objectives;
mod state;

pub use measurement::{sample_measurement_set, MeasurementPolicy, MeasurementSet, Provenance};
pub use objectives::{
    exact_kl, expected_log_likelihood, fixed_a_optimal_mean, marginal_kl, marginal_kl_at, MarginalContext,
    MarginalKl, Objective, ObjectiveEval, ObjectiveKind, Problem,
};
pub use state::{Family, Scale, StateGradient, VariationalState};
