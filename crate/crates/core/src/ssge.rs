//! Spectral Stein gradient estimator.
//!
//! Estimates the score `grad log q` of a distribution known only through
//! samples. The Gram matrix of an RBF kernel over the samples is
//! eigendecomposed; Nystrom extensions of the leading eigenvectors give
//! approximate eigenfunctions `psi_j`, and Stein's identity gives the
//! coefficients of the score in that basis:
//!
//! ```text
//! psi_j(x) = sqrt(M) / lambda_j * sum_i u_ij k(x, x_i)
//! beta_j   = -(1/M) sum_i grad psi_j(x_i)
//! g(x)     = sum_j beta_j psi_j(x)
//! ```

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::blr::BlrModel;
use crate::error::{Error, Result};
use crate::linalg;
use crate::variational::{MarginalContext, MeasurementSet, StateGradient, VariationalState};

/// Eigenvalues below this fraction of the largest are discarded.
const EIGEN_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EigenCount {
    /// Smallest count whose eigenvalue mass reaches `eigen_threshold`.
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    MedianHeuristic,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsgeConfig {
    pub num_samples: usize,
    pub num_eigen: EigenCount,
    pub eigen_threshold: f64,
    pub bandwidth: Bandwidth,
    /// Estimate the prior score from prior samples too, instead of using the
    /// exact Gaussian prior-marginal score. Off by default.
    pub estimate_prior_score: bool,
}

impl Default for SsgeConfig {
    fn default() -> Self {
        Self {
            num_samples: 100,
            num_eigen: EigenCount::Auto,
            eigen_threshold: 0.99,
            bandwidth: Bandwidth::MedianHeuristic,
            estimate_prior_score: false,
        }
    }
}

impl SsgeConfig {
    pub fn with_samples(num_samples: usize) -> Self {
        Self {
            num_samples,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_samples < 2 {
            return Err(Error::InvalidParameter("ssge needs at least 2 samples".into()));
        }
        if !(self.eigen_threshold > 0.0 && self.eigen_threshold <= 1.0) {
            return Err(Error::InvalidParameter("eigen threshold must lie in (0, 1]".into()));
        }
        if let EigenCount::Fixed(j) = self.num_eigen {
            if j == 0 || j > self.num_samples {
                return Err(Error::InvalidParameter(format!(
                    "number of eigenfunctions must lie in 1..={}",
                    self.num_samples
                )));
            }
        }
        if let Bandwidth::Fixed(h) = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidParameter("bandwidth must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Fitted score estimator.
#[derive(Debug, Clone)]
pub struct ScoreEstimate {
    /// Retained eigenvalues, descending.
    pub eigenvalues: DVector<f64>,
    /// Matching eigenvectors of the Gram matrix, `M x J`.
    pub eigenvectors: DMatrix<f64>,
    /// Score coefficients, `J x m`.
    pub beta: DMatrix<f64>,
    pub basis_samples: DMatrix<f64>,
    pub bandwidth_used: f64,
}

fn sq_dist(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    a.row(i)
        .iter()
        .zip(b.row(j).iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Median of the pairwise Euclidean distances between distinct samples.
pub fn median_bandwidth(samples: &DMatrix<f64>) -> Result<f64> {
    let m = samples.nrows();
    let mut d = Vec::with_capacity(m * (m.saturating_sub(1)) / 2);
    for i in 0..m {
        for j in i + 1..m {
            d.push(sq_dist(samples, i, samples, j).sqrt());
        }
    }
    match linalg::median(&mut d) {
        Some(h) if h > 0.0 => Ok(h),
        _ => Err(Error::DegenerateKernel("median pairwise distance is zero")),
    }
}

fn kernel_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let inv = 1.0 / (2.0 * h * h);
    DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| (-sq_dist(a, i, b, j) * inv).exp())
}

pub fn fit_score(samples: &DMatrix<f64>, config: &SsgeConfig) -> Result<ScoreEstimate> {
    config.validate()?;
    let m_count = samples.nrows();
    if m_count < 2 {
        return Err(Error::InvalidParameter("ssge needs at least 2 samples".into()));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("ssge samples must be finite".into()));
    }
    let h = match config.bandwidth {
        Bandwidth::MedianHeuristic => median_bandwidth(samples)?,
        Bandwidth::Fixed(h) => h,
    };
    let gram = kernel_matrix(samples, samples, h);
    let eig = SymmetricEigen::new(gram.clone());

    let mut order: Vec<usize> = (0..m_count).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda_max = eig.eigenvalues[order[0]];
    if !(lambda_max > 0.0) {
        return Err(Error::DegenerateKernel("gram matrix has no positive eigenvalue"));
    }
    let positive: Vec<usize> = order
        .into_iter()
        .filter(|&i| eig.eigenvalues[i] > EIGEN_FLOOR * lambda_max)
        .collect();
    let count = match config.num_eigen {
        EigenCount::Fixed(j) => j.min(positive.len()),
        EigenCount::Auto if config.eigen_threshold >= 1.0 => positive.len(),
        EigenCount::Auto => {
            let total: f64 = positive.iter().map(|&i| eig.eigenvalues[i]).sum();
            let mut acc = 0.0;
            let mut j = positive.len();
            for (idx, &i) in positive.iter().enumerate() {
                acc += eig.eigenvalues[i];
                if acc / total >= config.eigen_threshold {
                    j = idx + 1;
                    break;
                }
            }
            j
        }
    };
    let kept = &positive[..count];
    let eigenvalues = DVector::from_iterator(count, kept.iter().map(|&i| eig.eigenvalues[i]));
    let eigenvectors = DMatrix::from_fn(m_count, count, |r, c| eig.eigenvectors[(r, kept[c])]);

    // A[i, d] = sum_n k(x_n, x_i) (x_i - x_n)_d / h^2 = (x_id * rowsum_i - (K X)_id) / h^2
    let row_sums = gram.column_sum();
    let kx = &gram * samples;
    let dim = samples.ncols();
    let a = DMatrix::from_fn(m_count, dim, |i, d| (samples[(i, d)] * row_sums[i] - kx[(i, d)]) / (h * h));
    let mut beta = eigenvectors.transpose() * a;
    let sqrt_m = (m_count as f64).sqrt();
    for j in 0..count {
        let scale = -1.0 / (sqrt_m * eigenvalues[j]);
        let mut row = beta.row_mut(j);
        row *= scale;
    }
    Ok(ScoreEstimate {
        eigenvalues,
        eigenvectors,
        beta,
        basis_samples: samples.clone(),
        bandwidth_used: h,
    })
}

impl ScoreEstimate {
    pub fn num_eigen(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenfunction values at each row of `points`, `N x J`.
    pub fn eigenfunctions(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        let kx = kernel_matrix(points, &self.basis_samples, self.bandwidth_used);
        let mut psi = kx * &self.eigenvectors;
        let sqrt_m = (self.basis_samples.nrows() as f64).sqrt();
        for (j, mut col) in psi.column_iter_mut().enumerate() {
            col *= sqrt_m / self.eigenvalues[j];
        }
        psi
    }

    /// Estimated score at each row of `points`, `N x m`.
    pub fn evaluate_rows(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        self.eigenfunctions(points) * &self.beta
    }

    pub fn evaluate(&self, x: &DVector<f64>) -> DVector<f64> {
        self.evaluate_rows(&DMatrix::from_row_slice(1, x.len(), x.as_slice()))
            .row(0)
            .transpose()
    }
}

/// Reparameterized Monte Carlo gradient of `KL(Q_A || P_A)` in which the
/// variational score is replaced by its spectral Stein estimate.
pub fn kl_gradient_estimate<R: Rng + ?Sized>(
    state: &VariationalState,
    model: &BlrModel,
    set: &MeasurementSet,
    config: &SsgeConfig,
    rng: &mut R,
) -> Result<StateGradient> {
    let ctx = MarginalContext::new(model, set)?;
    kl_gradient_with_context(state, &ctx, config, rng)
}

pub fn kl_gradient_with_context<R: Rng + ?Sized>(
    state: &VariationalState,
    ctx: &MarginalContext,
    config: &SsgeConfig,
    rng: &mut R,
) -> Result<StateGradient> {
    config.validate()?;
    let k = state.dim();
    let Some(kf) = ctx.prior_factor() else {
        return Ok(StateGradient::zeros(state.family(), k));
    };
    let m_count = config.num_samples;
    let eps = DMatrix::from_fn(m_count, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let s = state.scale_matrix();
    let mut weights = &eps * s.transpose();
    for mut row in weights.row_iter_mut() {
        row += state.mean.transpose();
    }
    // f_i = phi_A w_i, one per row
    let f = &weights * ctx.rows.transpose();

    let q_score = fit_score(&f, config)?.evaluate_rows(&f);
    let p_score = if config.estimate_prior_score {
        let r = ctx.num_retained();
        let z = DMatrix::from_fn(m_count, r, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut prior_f = &z * kf.l.transpose();
        for mut row in prior_f.row_iter_mut() {
            row += ctx.prior_mean().transpose();
        }
        fit_score(&prior_f, config)?.evaluate_rows(&f)
    } else {
        let mut centered = f.clone();
        for mut row in centered.row_iter_mut() {
            row -= ctx.prior_mean().transpose();
        }
        -kf.solve(&centered.transpose()).transpose()
    };

    // pull back to weight space: h_i = phi_A^T (g_q - g_p)(f_i)
    let pulled = (q_score - p_score) * &ctx.rows;
    let inv_m = 1.0 / m_count as f64;
    let mean_grad = pulled.row_sum().transpose() * inv_m;
    let factor_grad = pulled.transpose() * &eps * inv_m;
    Ok(StateGradient {
        mean: mean_grad,
        scale: state.scale_grad_from_factor_grad(&factor_grad),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn normal_samples(seed: u64, m: usize, dim: usize) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(m, dim, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    fn mse_vs_true_score(x: &DMatrix<f64>, cfg: &SsgeConfig) -> f64 {
        let est = fit_score(x, cfg).unwrap();
        let g = est.evaluate_rows(x);
        (g + x).norm_squared() / x.len() as f64
    }

    #[test]
    fn standard_normal_score_is_recovered() {
        let x = normal_samples(0, 1000, 1);
        let mse = mse_vs_true_score(&x, &SsgeConfig::with_samples(1000));
        assert!(mse < 0.05, "mse {mse}");
    }

    #[test]
    fn median_of_a_single_pair() {
        let x = DMatrix::from_column_slice(2, 1, &[0.0, 2.0]);
        let est = fit_score(&x, &SsgeConfig::with_samples(2)).unwrap();
        assert_eq!(est.bandwidth_used, 2.0);
    }

    #[test]
    fn full_threshold_keeps_every_positive_eigenpair() {
        let x = normal_samples(1, 30, 2);
        let cfg = SsgeConfig {
            eigen_threshold: 1.0,
            ..SsgeConfig::with_samples(30)
        };
        let est = fit_score(&x, &cfg).unwrap();
        let eig = SymmetricEigen::new(kernel_matrix(&x, &x, est.bandwidth_used));
        let lmax = eig.eigenvalues.max();
        let positive = eig.eigenvalues.iter().filter(|&&l| l > EIGEN_FLOOR * lmax).count();
        assert_eq!(est.num_eigen(), positive);
    }

    #[test]
    fn duplicate_samples_are_degenerate() {
        let x = DMatrix::from_element(5, 2, 0.7);
        assert!(matches!(
            fit_score(&x, &SsgeConfig::with_samples(5)),
            Err(Error::DegenerateKernel(_))
        ));
    }

    #[test]
    fn permutation_invariance() {
        let x = normal_samples(2, 40, 2);
        let rev = DMatrix::from_fn(40, 2, |i, j| x[(39 - i, j)]);
        let cfg = SsgeConfig::with_samples(40);
        let probe = normal_samples(3, 10, 2);
        let a = fit_score(&x, &cfg).unwrap().evaluate_rows(&probe);
        let b = fit_score(&rev, &cfg).unwrap().evaluate_rows(&probe);
        assert!((a - b).amax() < 1e-10);
    }

    #[test]
    fn bandwidth_scales_with_samples() {
        let x = normal_samples(4, 25, 3);
        let h = median_bandwidth(&x).unwrap();
        assert_eq!(median_bandwidth(&(&x * 2.0)).unwrap(), 2.0 * h);
        assert_eq!(median_bandwidth(&(&x * 0.25)).unwrap(), 0.25 * h);
        assert_relative_eq!(median_bandwidth(&(&x * 3.7)).unwrap(), 3.7 * h, max_relative = 1e-14);
    }

    #[test]
    fn auto_count_keeps_at_least_one() {
        let x = normal_samples(5, 20, 1);
        let est = fit_score(&x, &SsgeConfig::with_samples(20)).unwrap();
        assert!(est.num_eigen() >= 1);
        assert!(est.eigenvalues.iter().all(|&l| l > 0.0));
        for w in est.eigenvalues.as_slice().windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(SsgeConfig::with_samples(1).validate().is_err());
        let cfg = SsgeConfig {
            eigen_threshold: 0.0,
            ..SsgeConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SsgeConfig {
            num_eigen: EigenCount::Fixed(101),
            ..SsgeConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
