use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::blr::{BlrModel, Dataset};
use crate::error::{check_dim, Error, Result};
use crate::gaussian::{kl_divergence_from_factor, GaussianDist};
use crate::variational::VariationalState;

/// Weight-space KL from the variational distribution to the exact posterior.
pub fn kl_to_posterior(state: &VariationalState, model: &BlrModel, data: &Dataset) -> Result<f64> {
    kl_divergence_from_factor(&state.mean, &state.scale_matrix(), &model.exact_posterior(data)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub x: f64,
    pub mean: f64,
    pub std_noiseless: f64,
    pub std_noisy: f64,
}

/// Predictive marginals of a 1-D model along `grid`.
pub fn emit_predictive_curve(weights: &GaussianDist, model: &BlrModel, grid: &[f64]) -> Result<Vec<CurveRow>> {
    check_dim("predictive curve input dimension", 1, model.feature_map.input_dim())?;
    let inputs = DMatrix::from_column_slice(grid.len(), 1, grid);
    let (mean, var) = model.predictive_marginals(weights, &inputs)?;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, &x)| CurveRow {
            x,
            mean: mean[i],
            std_noiseless: var[i].sqrt(),
            std_noisy: (var[i] + model.noise_variance()).sqrt(),
        })
        .collect())
}

pub fn format_curve_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("x,mean,std_noiseless,std_noisy\n");
    for r in rows {
        let _ = writeln!(out, "{:?},{:?},{:?},{:?}", r.x, r.mean, r.std_noiseless, r.std_noisy);
    }
    out
}

pub fn write_curve_csv(path: &Path, rows: &[CurveRow]) -> Result<()> {
    std::fs::write(path, format_curve_csv(rows)).map_err(Error::from)
}

/// `count` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}
