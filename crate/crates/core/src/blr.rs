//! Bayesian linear regression `y = w^T phi(x) + eps`, `eps ~ N(0, noise)`,
//! `w ~ prior`. Everything is computed in weight space (k x k solves).

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::features::FeatureMap;
use crate::gaussian::{cholesky_with_jitter, pushforward_linear, Covariance, GaussianDist};
use crate::io;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: DMatrix<f64>,
    pub targets: DVector<f64>,
}

impl Dataset {
    pub fn new(inputs: DMatrix<f64>, targets: DVector<f64>) -> Result<Self> {
        check_dim("dataset targets", inputs.nrows(), targets.len())?;
        if inputs.nrows() == 0 {
            return Err(Error::InvalidParameter("dataset must have at least one row".into()));
        }
        if inputs.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("dataset values must be finite".into()));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            inputs: crate::linalg::select_rows(&self.inputs, rows),
            targets: DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.targets[i])),
        }
    }

    /// Last column is the target, the others are inputs.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        if m.ncols() < 2 {
            return Err(Error::Parse {
                line: 1,
                column: m.ncols(),
                message: "dataset needs at least one input column and a target column".into(),
            });
        }
        let d = m.ncols() - 1;
        Self::new(m.columns(0, d).into_owned(), m.column(d).into_owned())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::from_matrix(&io::read_matrix_csv(path)?)
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let d = self.input_dim();
        let mut m = DMatrix::zeros(self.len(), d + 1);
        m.columns_mut(0, d).copy_from(&self.inputs);
        m.column_mut(d).copy_from(&self.targets);
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlrModel {
    pub feature_map: FeatureMap,
    noise_variance: f64,
    prior: GaussianDist,
}

/// Predictive marginals over outputs, with and without observation noise.
#[derive(Debug, Clone)]
pub struct Predictive {
    pub noiseless: GaussianDist,
    pub noisy: GaussianDist,
}

impl BlrModel {
    /// Model with the standard normal weight prior.
    pub fn new(feature_map: FeatureMap, noise_variance: f64) -> Result<Self> {
        let k = feature_map.num_features();
        Self::with_prior(feature_map, noise_variance, GaussianDist::standard(k))
    }

    pub fn with_prior(feature_map: FeatureMap, noise_variance: f64, prior: GaussianDist) -> Result<Self> {
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be positive, got {noise_variance}"
            )));
        }
        check_dim("prior dimension", feature_map.num_features(), prior.dim())?;
        Ok(Self {
            feature_map,
            noise_variance,
            prior,
        })
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn prior(&self) -> &GaussianDist {
        &self.prior
    }

    pub fn num_features(&self) -> usize {
        self.feature_map.num_features()
    }

    pub fn features(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.feature_map.matrix(inputs)
    }

    /// `(S0^{-1}, S0^{-1} m0)` for the prior `N(m0, S0)`.
    pub fn prior_precision(&self) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let k = self.num_features();
        let prec = match self.prior.covariance() {
            Covariance::Diagonal(d) => {
                if d.iter().any(|&v| v <= 0.0) {
                    return Err(Error::SingularReference { max_jitter: 0.0 });
                }
                DMatrix::from_diagonal(&d.map(|v| 1.0 / v))
            }
            Covariance::Full(_) => self.prior.cholesky()?.solve(&DMatrix::identity(k, k)),
        };
        let shift = &prec * self.prior.mean();
        Ok((prec, shift))
    }

    pub fn exact_posterior(&self, data: &Dataset) -> Result<GaussianDist> {
        let phi = self.features(&data.inputs)?;
        let (mut precision, shift) = self.prior_precision()?;
        precision += phi.transpose() * &phi / self.noise_variance;
        crate::linalg::symmetrize(&mut precision);
        let factor = cholesky_with_jitter(&precision)?;
        let k = self.num_features();
        let mut cov = factor.solve(&DMatrix::identity(k, k));
        crate::linalg::symmetrize(&mut cov);
        let rhs = shift + phi.transpose() * &data.targets / self.noise_variance;
        let mean = factor.solve_vec(&rhs);
        GaussianDist::new_full(mean, cov)
    }

    pub fn predictive(&self, weights: &GaussianDist, test_inputs: &DMatrix<f64>) -> Result<Predictive> {
        let phi = self.features(test_inputs)?;
        let noiseless = pushforward_linear(weights, &phi)?;
        let mut noisy_cov = noiseless.cov_dense();
        for i in 0..noisy_cov.nrows() {
            noisy_cov[(i, i)] += self.noise_variance;
        }
        let noisy = GaussianDist::new_full(noiseless.mean().clone(), noisy_cov)?;
        Ok(Predictive { noiseless, noisy })
    }

    /// Per-point predictive means and noiseless variances, without forming
    /// the joint covariance.
    pub fn predictive_marginals(
        &self,
        weights: &GaussianDist,
        test_inputs: &DMatrix<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let phi = self.features(test_inputs)?;
        check_dim("predictive weights", phi.ncols(), weights.dim())?;
        let mean = &phi * weights.mean();
        let var = match weights.covariance() {
            Covariance::Diagonal(d) => DVector::from_fn(phi.nrows(), |i, _| {
                phi.row(i).iter().zip(d.iter()).map(|(p, v)| p * p * v).sum::<f64>()
            }),
            Covariance::Full(s) => {
                let ps = &phi * s;
                DVector::from_fn(phi.nrows(), |i, _| ps.row(i).dot(&phi.row(i)).max(0.0))
            }
        };
        Ok((mean, var))
    }

    /// Mean negative log predictive density over test points, using the
    /// per-point marginal predictive `N(mean_i, var_i + noise)`.
    pub fn nlpd(&self, weights: &GaussianDist, test: &Dataset) -> Result<f64> {
        let (mean, var) = self.predictive_marginals(weights, &test.inputs)?;
        let total: f64 = (0..test.len())
            .map(|i| {
                let v = var[i] + self.noise_variance;
                let r = test.targets[i] - mean[i];
                0.5 * (LN_2PI + v.ln() + r * r / v)
            })
            .sum();
        Ok(total / test.len() as f64)
    }

    /// `log N(y; Phi m0, Phi S0 Phi^T + noise I)` via the determinant lemma
    /// and Woodbury, so the cost is cubic in k rather than n.
    pub fn log_marginal_likelihood(&self, data: &Dataset) -> Result<f64> {
        let phi = self.features(&data.inputs)?;
        let n = data.len() as f64;
        let s2 = self.noise_variance;
        let prior_factor = self.prior.cholesky()?;
        let r = &data.targets - &phi * self.prior.mean();
        // B = I + L0^T Phi^T Phi L0 / s2
        let pl = &phi * &prior_factor.l;
        let k = pl.ncols();
        let mut b = DMatrix::identity(k, k) + pl.transpose() * &pl / s2;
        crate::linalg::symmetrize(&mut b);
        let bf = cholesky_with_jitter(&b)?;
        let u = pl.transpose() * &r;
        let z = bf.solve_lower_vec(&u);
        let quad = r.norm_squared() / s2 - z.norm_squared() / (s2 * s2);
        let log_det = n * s2.ln() + bf.log_det();
        Ok(-0.5 * (n * LN_2PI + log_det + quad))
    }
}
