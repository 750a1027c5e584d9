use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gaussian::GaussianDist;
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Full,
    Ffg,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Full => "full",
            Family::Ffg => "ffg",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Family::Full),
            "ffg" => Ok(Family::Ffg),
            other => Err(Error::InvalidParameter(format!(
                "unknown family {other:?}, expected one of: full, ffg"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scale {
    /// Lower-triangular factor with positive diagonal, `Sigma = L L^T`.
    Full(DMatrix<f64>),
    /// Positive standard deviations, `Sigma = diag(s^2)`.
    Ffg(DVector<f64>),
}

/// Gaussian approximate posterior over the weights.
///
/// The unconstrained parameter vector used by the optimizer is the mean
/// followed by the scale parameters: for `Full` the row-major lower triangle
/// of `L` with `ln L_ii` on the diagonal, for `Ffg` the vector `ln s`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    pub mean: DVector<f64>,
    pub scale: Scale,
}

/// Gradient with respect to the unconstrained parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGradient {
    pub mean: DVector<f64>,
    pub scale: DVector<f64>,
}

impl StateGradient {
    pub fn zeros(family: Family, k: usize) -> Self {
        Self {
            mean: DVector::zeros(k),
            scale: DVector::zeros(scale_len(family, k)),
        }
    }

    pub fn flatten(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.mean.len() + self.scale.len(),
            self.mean.iter().chain(self.scale.iter()).cloned(),
        )
    }

    pub fn norm(&self) -> f64 {
        (self.mean.norm_squared() + self.scale.norm_squared()).sqrt()
    }

    pub fn dot(&self, other: &StateGradient) -> f64 {
        self.mean.dot(&other.mean) + self.scale.dot(&other.scale)
    }

    pub fn is_finite(&self) -> bool {
        self.mean.iter().chain(self.scale.iter()).all(|v| v.is_finite())
    }

    pub fn sub(&self, other: &StateGradient) -> StateGradient {
        StateGradient {
            mean: &self.mean - &other.mean,
            scale: &self.scale - &other.scale,
        }
    }
}

fn scale_len(family: Family, k: usize) -> usize {
    match family {
        Family::Full => linalg::tril_len(k),
        Family::Ffg => k,
    }
}

impl VariationalState {
    /// Mean zero, unit scale: the standard normal prior.
    pub fn prior_init(family: Family, k: usize) -> Self {
        let scale = match family {
            Family::Full => Scale::Full(DMatrix::identity(k, k)),
            Family::Ffg => Scale::Ffg(DVector::from_element(k, 1.0)),
        };
        Self {
            mean: DVector::zeros(k),
            scale,
        }
    }

    pub fn new(mean: DVector<f64>, scale: Scale) -> Result<Self> {
        match &scale {
            Scale::Full(l) => {
                check_dim("full scale rows", mean.len(), l.nrows())?;
                check_dim("full scale cols", mean.len(), l.ncols())?;
                for i in 0..l.nrows() {
                    if !(l[(i, i)] > 0.0) {
                        return Err(Error::InvalidParameter(format!(
                            "scale factor diagonal must be positive at {i}"
                        )));
                    }
                    for j in i + 1..l.ncols() {
                        if l[(i, j)] != 0.0 {
                            return Err(Error::InvalidParameter(
                                "scale factor must be lower triangular".into(),
                            ));
                        }
                    }
                }
            }
            Scale::Ffg(s) => {
                check_dim("ffg scale", mean.len(), s.len())?;
                if s.iter().any(|&v| !(v > 0.0)) {
                    return Err(Error::InvalidParameter("ffg scales must be positive".into()));
                }
            }
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("mean must be finite".into()));
        }
        Ok(Self { mean, scale })
    }

    /// Full state from a Gaussian with positive-definite covariance, or an
    /// FFG state keeping only the marginal variances.
    pub fn from_gaussian(dist: &GaussianDist, family: Family) -> Result<Self> {
        let scale = match family {
            Family::Full => {
                let chol = Cholesky::new(dist.cov_dense()).ok_or(Error::SingularReference { max_jitter: 0.0 })?;
                Scale::Full(chol.unpack())
            }
            Family::Ffg => Scale::Ffg(dist.covariance().diagonal().map(f64::sqrt)),
        };
        Self::new(dist.mean().clone(), scale)
    }

    pub fn family(&self) -> Family {
        match self.scale {
            Scale::Full(_) => Family::Full,
            Scale::Ffg(_) => Family::Ffg,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        match &self.scale {
            Scale::Full(l) => {
                let mut c = l * l.transpose();
                linalg::symmetrize(&mut c);
                c
            }
            Scale::Ffg(s) => DMatrix::from_diagonal(&s.map(|v| v * v)),
        }
    }

    /// `L` such that `L L^T = Sigma` (diagonal for FFG).
    pub fn scale_matrix(&self) -> DMatrix<f64> {
        match &self.scale {
            Scale::Full(l) => l.clone(),
            Scale::Ffg(s) => DMatrix::from_diagonal(s),
        }
    }

    /// `ln |Sigma|`, read straight off the scale parameters.
    pub fn log_det(&self) -> f64 {
        match &self.scale {
            Scale::Full(l) => 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>(),
            Scale::Ffg(s) => 2.0 * s.iter().map(|d| d.ln()).sum::<f64>(),
        }
    }

    pub fn to_gaussian(&self) -> Result<GaussianDist> {
        match &self.scale {
            Scale::Full(_) => GaussianDist::new_full(self.mean.clone(), self.covariance()),
            Scale::Ffg(s) => GaussianDist::new_diagonal(self.mean.clone(), s.map(|v| v * v)),
        }
    }

    pub fn num_params(family: Family, k: usize) -> usize {
        k + scale_len(family, k)
    }

    pub fn to_params(&self) -> DVector<f64> {
        let k = self.dim();
        let mut out = Vec::with_capacity(Self::num_params(self.family(), k));
        out.extend(self.mean.iter().cloned());
        match &self.scale {
            Scale::Full(l) => {
                for i in 0..k {
                    for j in 0..i {
                        out.push(l[(i, j)]);
                    }
                    out.push(l[(i, i)].ln());
                }
            }
            Scale::Ffg(s) => out.extend(s.iter().map(|v| v.ln())),
        }
        DVector::from_vec(out)
    }

    pub fn from_params(family: Family, k: usize, params: &DVector<f64>) -> Result<Self> {
        check_dim("parameter vector", Self::num_params(family, k), params.len())?;
        let mean = params.rows(0, k).into_owned();
        let rest = &params.as_slice()[k..];
        let scale = match family {
            Family::Full => {
                let mut l = linalg::unpack_tril(k, rest);
                for i in 0..k {
                    l[(i, i)] = l[(i, i)].exp();
                }
                Scale::Full(l)
            }
            Family::Ffg => Scale::Ffg(DVector::from_iterator(k, rest.iter().map(|v| v.exp()))),
        };
        Ok(Self { mean, scale })
    }

    /// Chain rule from a symmetric `dF/dSigma` to the unconstrained scale
    /// parameters.
    pub fn scale_grad_from_sigma_grad(&self, sigma_grad: &DMatrix<f64>) -> DVector<f64> {
        match &self.scale {
            Scale::Full(l) => self.scale_grad_from_factor_grad(&(sigma_grad * l * 2.0)),
            Scale::Ffg(s) => DVector::from_fn(s.len(), |i, _| 2.0 * sigma_grad[(i, i)] * s[i] * s[i]),
        }
    }

    /// Chain rule from `dF/dL` (Full only: lower triangle is used) or
    /// `dF/ds` (FFG: the diagonal is used) to the unconstrained parameters.
    pub fn scale_grad_from_factor_grad(&self, factor_grad: &DMatrix<f64>) -> DVector<f64> {
        match &self.scale {
            Scale::Full(l) => {
                let k = l.nrows();
                let mut out = Vec::with_capacity(linalg::tril_len(k));
                for i in 0..k {
                    for j in 0..i {
                        out.push(factor_grad[(i, j)]);
                    }
                    out.push(factor_grad[(i, i)] * l[(i, i)]);
                }
                DVector::from_vec(out)
            }
            Scale::Ffg(s) => DVector::from_fn(s.len(), |i, _| factor_grad[(i, i)] * s[i]),
        }
    }
}
