//! Multivariate Gaussian value type.
//!
//! Covariances are stored either densely or as a diagonal vector. All
//! solves and log-determinants go through a Cholesky factor; when a factor
//! cannot be formed, a bounded ladder of diagonal jitter is tried before
//! giving up with [`Error::SingularReference`].

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg;

const SYMMETRY_TOLERANCE: f64 = 1e-10;
const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovKind {
    Full,
    Diagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Full(DMatrix<f64>),
    Diagonal(DVector<f64>),
}

impl Covariance {
    pub fn dim(&self) -> usize {
        match self {
            Covariance::Full(m) => m.nrows(),
            Covariance::Diagonal(d) => d.len(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Covariance::Full(m) => m.clone(),
            Covariance::Diagonal(d) => DMatrix::from_diagonal(d),
        }
    }

    pub fn diagonal(&self) -> DVector<f64> {
        match self {
            Covariance::Full(m) => m.diagonal(),
            Covariance::Diagonal(d) => d.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDist {
    mean: DVector<f64>,
    cov: Covariance,
}

/// Lower-triangular factor `L` with `L L^T = cov + jitter_used * I`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    pub l: DMatrix<f64>,
    pub jitter_used: f64,
}

impl CholeskyFactor {
    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Solves `L x = b` for every column of `b`.
    pub fn solve_lower(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.l
            .solve_lower_triangular(b)
            .expect("cholesky factor has a positive diagonal")
    }

    pub fn solve_lower_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.l
            .solve_lower_triangular(b)
            .expect("cholesky factor has a positive diagonal")
    }

    /// Solves `(L L^T) x = b`.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let y = self.solve_lower(b);
        self.l
            .tr_solve_lower_triangular(&y)
            .expect("cholesky factor has a positive diagonal")
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let y = self.solve_lower_vec(b);
        self.l
            .tr_solve_lower_triangular(&y)
            .expect("cholesky factor has a positive diagonal")
    }

    /// `(L L^T)^{-1}`, only for callers that genuinely need the dense inverse
    /// (e.g. gradients of a log-determinant).
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.l.nrows();
        self.solve(&DMatrix::identity(n, n))
    }
}

/// Cholesky factorization with the escalating jitter ladder.
///
/// A plain factorization is attempted first. After that, jitter starts at
/// `1e-10 * mean(diag)` and is multiplied by 10 up to `1e-4 * mean(diag)`.
pub fn cholesky_with_jitter(matrix: &DMatrix<f64>) -> Result<CholeskyFactor> {
    let n = matrix.nrows();
    check_dim("cholesky (square)", n, matrix.ncols())?;
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularReference { max_jitter: 0.0 });
    }
    if let Some(c) = Cholesky::new(matrix.clone()) {
        return Ok(CholeskyFactor {
            l: c.unpack(),
            jitter_used: 0.0,
        });
    }
    let scale = if n == 0 {
        0.0
    } else {
        matrix.diagonal().iter().sum::<f64>() / n as f64
    };
    if scale <= 0.0 {
        return Err(Error::SingularReference { max_jitter: 0.0 });
    }
    let mut jitter = JITTER_START * scale;
    let max_jitter = JITTER_MAX * scale * (1.0 + 1e-12);
    while jitter <= max_jitter {
        let mut jittered = matrix.clone();
        for i in 0..n {
            jittered[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::<f64, Dyn>::new(jittered) {
            return Ok(CholeskyFactor {
                l: c.unpack(),
                jitter_used: jitter,
            });
        }
        jitter *= 10.0;
    }
    Err(Error::SingularReference {
        max_jitter: JITTER_MAX * scale,
    })
}

/// Samples together with the standard-normal draws that produced them.
#[derive(Debug, Clone)]
pub struct Draws {
    /// `count x n`, one sample per row.
    pub values: DMatrix<f64>,
    /// `count x n` standard-normal draws, `values[i] = mean + L noise[i]`.
    pub noise: DMatrix<f64>,
}

impl GaussianDist {
    pub fn new_full(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        check_dim("gaussian covariance rows", mean.len(), cov.nrows())?;
        check_dim("gaussian covariance cols", mean.len(), cov.ncols())?;
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "gaussian parameters must be finite".into(),
            ));
        }
        let scale = cov.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        let n = cov.nrows();
        for i in 0..n {
            if cov[(i, i)] < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "negative variance {} at index {i}",
                    cov[(i, i)]
                )));
            }
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > SYMMETRY_TOLERANCE * scale {
                    return Err(Error::InvalidParameter(format!(
                        "covariance not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self {
            mean,
            cov: Covariance::Full(cov),
        })
    }

    pub fn new_diagonal(mean: DVector<f64>, variances: DVector<f64>) -> Result<Self> {
        check_dim("gaussian diagonal", mean.len(), variances.len())?;
        if mean.iter().chain(variances.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "gaussian parameters must be finite".into(),
            ));
        }
        if let Some(i) = variances.iter().position(|&v| v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "negative variance {} at index {i}",
                variances[i]
            )));
        }
        Ok(Self {
            mean,
            cov: Covariance::Diagonal(variances),
        })
    }

    /// `N(0, I_n)`, stored diagonally.
    pub fn standard(n: usize) -> Self {
        Self {
            mean: DVector::zeros(n),
            cov: Covariance::Diagonal(DVector::from_element(n, 1.0)),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &Covariance {
        &self.cov
    }

    pub fn kind(&self) -> CovKind {
        match self.cov {
            Covariance::Full(_) => CovKind::Full,
            Covariance::Diagonal(_) => CovKind::Diagonal,
        }
    }

    pub fn cov_dense(&self) -> DMatrix<f64> {
        self.cov.to_dense()
    }

    /// Factor of the covariance (with jitter when needed).
    pub fn cholesky(&self) -> Result<CholeskyFactor> {
        match &self.cov {
            Covariance::Full(m) => cholesky_with_jitter(m),
            Covariance::Diagonal(d) => {
                let jitter = diagonal_jitter(d)?;
                Ok(CholeskyFactor {
                    l: DMatrix::from_diagonal(&d.map(|v| (v + jitter).sqrt())),
                    jitter_used: jitter,
                })
            }
        }
    }

    /// Any `S` with `S S^T = cov`. Falls back to an eigen square root for
    /// PSD matrices that are too singular to factorize.
    fn sampling_factor(&self) -> Result<DMatrix<f64>> {
        match &self.cov {
            Covariance::Diagonal(d) => Ok(DMatrix::from_diagonal(&d.map(f64::sqrt))),
            Covariance::Full(m) => match cholesky_with_jitter(m) {
                Ok(f) => Ok(f.l),
                Err(e) => {
                    let eig = SymmetricEigen::new(m.clone());
                    let largest = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                    if eig
                        .eigenvalues
                        .iter()
                        .any(|&v| v < -1e-8 * largest.max(f64::MIN_POSITIVE))
                    {
                        return Err(e);
                    }
                    let mut s = eig.eigenvectors.clone();
                    for (j, mut col) in s.column_iter_mut().enumerate() {
                        col *= eig.eigenvalues[j].max(0.0).sqrt();
                    }
                    Ok(s)
                }
            },
        }
    }

    /// Draws `count` samples as `mean + S eps` with `eps ~ N(0, I)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Draws> {
        if count == 0 {
            return Err(Error::InvalidParameter("sample count must be >= 1".into()));
        }
        let n = self.dim();
        let factor = self.sampling_factor()?;
        let noise = DMatrix::from_fn(count, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut values = &noise * factor.transpose();
        for mut row in values.row_iter_mut() {
            row += self.mean.transpose();
        }
        Ok(Draws { values, noise })
    }

    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim("log_density point", self.dim(), x.len())?;
        let factor = self.cholesky()?;
        let z = factor.solve_lower_vec(&(x - &self.mean));
        let n = self.dim() as f64;
        Ok(-0.5 * (n * (2.0 * std::f64::consts::PI).ln() + factor.log_det() + z.norm_squared()))
    }

    /// Gradient of the log-density, `-cov^{-1} (x - mean)`.
    pub fn score(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("score point", self.dim(), x.len())?;
        let factor = self.cholesky()?;
        Ok(-factor.solve_vec(&(x - &self.mean)))
    }
}

fn diagonal_jitter(d: &DVector<f64>) -> Result<f64> {
    if d.iter().all(|&v| v > 0.0) {
        return Ok(0.0);
    }
    let scale = d.mean();
    if scale <= 0.0 {
        return Err(Error::SingularReference { max_jitter: 0.0 });
    }
    // Entries are non-negative, so the first rung already suffices.
    Ok(JITTER_START * scale)
}

/// Closed-form `KL(q || p)`.
///
/// When `q`'s covariance cannot be factorized without jitter it is treated
/// as singular and the divergence is `+inf`; `p` is the reference and gets
/// the jitter ladder.
pub fn kl_divergence(q: &GaussianDist, p: &GaussianDist) -> Result<f64> {
    check_dim("kl_divergence", p.dim(), q.dim())?;
    let n = q.dim() as f64;
    let diff = p.mean() - q.mean();

    if let (Covariance::Diagonal(qd), Covariance::Diagonal(pd)) = (&q.cov, &p.cov) {
        let jitter = diagonal_jitter(pd)?;
        if qd.iter().any(|&v| v <= 0.0) {
            return Ok(f64::INFINITY);
        }
        let mut total = -n;
        for i in 0..qd.len() {
            let pv = pd[i] + jitter;
            total += (qd[i] + diff[i] * diff[i]) / pv + pv.ln() - qd[i].ln();
        }
        return Ok(0.5 * total);
    }

    let q_lower = match &q.cov {
        Covariance::Diagonal(d) => {
            if d.iter().any(|&v| v <= 0.0) {
                return Ok(f64::INFINITY);
            }
            DMatrix::from_diagonal(&d.map(f64::sqrt))
        }
        Covariance::Full(m) => match Cholesky::new(m.clone()) {
            Some(c) => c.unpack(),
            None => return Ok(f64::INFINITY),
        },
    };
    kl_divergence_from_factor(q.mean(), &q_lower, p)
}

/// `KL(N(mean, L L^T) || p)` for a lower-triangular `L`, without forming
/// `L L^T`. A non-positive diagonal entry makes the divergence `+inf`.
pub fn kl_divergence_from_factor(mean: &DVector<f64>, lower: &DMatrix<f64>, p: &GaussianDist) -> Result<f64> {
    check_dim("kl_divergence mean", p.dim(), mean.len())?;
    check_dim("kl_divergence factor", p.dim(), lower.nrows())?;
    if lower.diagonal().iter().any(|&d| !(d > 0.0)) {
        return Ok(f64::INFINITY);
    }
    let p_factor = p.cholesky()?;
    let diff = p.mean() - mean;
    let q_log_det = 2.0 * lower.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let trace = p_factor.solve_lower(lower).norm_squared();
    let maha = p_factor.solve_lower_vec(&diff).norm_squared();
    Ok(0.5 * (trace + maha - p.dim() as f64 + p_factor.log_det() - q_log_det))
}

/// Distribution of `map * w` for `w ~ weights_dist`.
pub fn pushforward_linear(weights_dist: &GaussianDist, map: &DMatrix<f64>) -> Result<GaussianDist> {
    check_dim("pushforward map columns", weights_dist.dim(), map.ncols())?;
    let mean = map * weights_dist.mean();
    let cov = match &weights_dist.cov {
        Covariance::Diagonal(d) => linalg::scaled_gram(map, d),
        Covariance::Full(s) => {
            let mut c = map * s * map.transpose();
            linalg::symmetrize(&mut c);
            c
        }
    };
    Ok(GaussianDist {
        mean,
        cov: Covariance::Full(cov),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dvec(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn kl_from_a_nearly_singular_factor_stays_finite() {
        // L L^T underflows to singular, but the divergence is finite
        let lower = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 1e-200]);
        let mean = dvec(&[0.3, -0.2]);
        let p = GaussianDist::standard(2);
        let kl = kl_divergence_from_factor(&mean, &lower, &p).unwrap();
        let expected = 0.5 * (1.0 + 0.25 + 0.09 + 0.04 - 2.0 - 2.0 * 1e-200_f64.ln());
        assert_relative_eq!(kl, expected, max_relative = 1e-12);
        let zero = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 0.0]);
        assert_eq!(kl_divergence_from_factor(&mean, &zero, &p).unwrap(), f64::INFINITY);
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        &a * a.transpose() + DMatrix::identity(n, n) * 0.1
    }

    /// Monte Carlo estimate of E_q[log q - log p] with its standard error.
    fn mc_kl(q: &GaussianDist, p: &GaussianDist, count: usize, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws = q.sample(&mut rng, count).unwrap();
        let vals: Vec<f64> = draws
            .values
            .row_iter()
            .map(|r| {
                let x = r.transpose();
                q.log_density(&x).unwrap() - p.log_density(&x).unwrap()
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / count as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
        (mean, (var / count as f64).sqrt())
    }

    #[test]
    fn kl_identity_case() {
        let p = GaussianDist::standard(2);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let pf = GaussianDist::new_full(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        assert!(kl_divergence(&pf, &pf).unwrap().abs() < 1e-12);
    }

    #[test]
    fn kl_shifted_mean_matches_monte_carlo() {
        let q = GaussianDist::new_full(dvec(&[1.0, 0.0]), DMatrix::identity(2, 2)).unwrap();
        let p = GaussianDist::new_full(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let kl = kl_divergence(&q, &p).unwrap();
        assert_relative_eq!(kl, 0.5, epsilon = 1e-14);
        let (mc, se) = mc_kl(&q, &p, 200_000, 7);
        assert!((mc - kl).abs() < 3.0 * se, "mc {mc} se {se}");
    }

    #[test]
    fn kl_variance_ratio_matches_monte_carlo() {
        let q = GaussianDist::new_full(dvec(&[0.0]), DMatrix::from_element(1, 1, 2.0)).unwrap();
        let p = GaussianDist::new_full(dvec(&[0.0]), DMatrix::from_element(1, 1, 1.0)).unwrap();
        let kl = kl_divergence(&q, &p).unwrap();
        assert_relative_eq!(kl, (2.0 - 1.0 - 2f64.ln()) / 2.0, epsilon = 1e-14);
        assert_relative_eq!(kl, 0.15343, epsilon = 1e-5);
        let (mc, se) = mc_kl(&q, &p, 200_000, 11);
        assert!((mc - kl).abs() < 3.0 * se, "mc {mc} se {se}");
    }

    #[test]
    fn kl_diagonal_path_matches_dense_path() {
        let q = GaussianDist::new_diagonal(dvec(&[0.3, -1.0, 2.0]), dvec(&[0.5, 2.0, 1.5])).unwrap();
        let p = GaussianDist::new_diagonal(dvec(&[0.0, 0.5, 1.0]), dvec(&[1.0, 3.0, 0.7])).unwrap();
        let qf = GaussianDist::new_full(q.mean().clone(), q.cov_dense()).unwrap();
        let pf = GaussianDist::new_full(p.mean().clone(), p.cov_dense()).unwrap();
        let a = kl_divergence(&q, &p).unwrap();
        let b = kl_divergence(&qf, &pf).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn kl_singular_q_is_infinite_and_singular_p_errors() {
        let singular = GaussianDist::new_full(DVector::zeros(2), DMatrix::from_element(2, 2, 1.0)).unwrap();
        let p = GaussianDist::standard(2);
        assert_eq!(kl_divergence(&singular, &p).unwrap(), f64::INFINITY);
        let zero = GaussianDist::new_full(DVector::zeros(2), DMatrix::zeros(2, 2)).unwrap();
        assert!(matches!(
            kl_divergence(&p, &zero),
            Err(Error::SingularReference { .. })
        ));
    }

    #[test]
    fn kl_dimension_mismatch() {
        let err = kl_divergence(&GaussianDist::standard(2), &GaussianDist::standard(3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn rank_one_reference_factorizes_with_jitter() {
        let m = DMatrix::from_element(2, 2, 1.0);
        let f = cholesky_with_jitter(&m).unwrap();
        assert!(f.jitter_used > 0.0);
        let mut target = m.clone();
        for i in 0..2 {
            target[(i, i)] += f.jitter_used;
        }
        let recon = &f.l * f.l.transpose();
        assert!((recon - &target).norm() / target.norm() < 1e-8);
    }

    #[test]
    fn cholesky_reconstructs_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..8 {
            let m = random_spd(&mut rng, n);
            let f = cholesky_with_jitter(&m).unwrap();
            assert_eq!(f.jitter_used, 0.0);
            assert!((&f.l * f.l.transpose() - &m).norm() / m.norm() < 1e-8);
        }
    }

    #[test]
    fn invalid_construction_is_rejected() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.2, 1.0]);
        assert!(GaussianDist::new_full(DVector::zeros(2), asym).is_err());
        assert!(GaussianDist::new_diagonal(DVector::zeros(2), dvec(&[1.0, -1.0])).is_err());
        assert!(matches!(
            GaussianDist::new_full(DVector::zeros(3), DMatrix::identity(2, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pushforward_examples() {
        let w = GaussianDist::standard(2);
        let id = pushforward_linear(&w, &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(id.cov_dense(), DMatrix::identity(2, 2));
        assert_eq!(id.kind(), CovKind::Full);

        let ones = pushforward_linear(&w, &DMatrix::from_element(3, 2, 1.0)).unwrap();
        assert_eq!(ones.mean(), &DVector::zeros(3));
        assert_eq!(ones.cov_dense(), DMatrix::from_element(3, 3, 2.0));

        let w2 = GaussianDist::new_diagonal(dvec(&[1.0, 2.0]), dvec(&[1.0, 4.0])).unwrap();
        let first = pushforward_linear(&w2, &DMatrix::from_row_slice(1, 2, &[1.0, 0.0])).unwrap();
        assert_eq!(first.mean()[0], 1.0);
        assert_eq!(first.cov_dense()[(0, 0)], 1.0);

        assert!(pushforward_linear(&w, &DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn sampling_is_deterministic_for_a_seed() {
        let d = GaussianDist::standard(3);
        let a = d.sample(&mut ChaCha8Rng::seed_from_u64(42), 2).unwrap();
        let b = d.sample(&mut ChaCha8Rng::seed_from_u64(42), 2).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.noise, b.noise);
    }

    #[test]
    fn zero_covariance_samples_equal_mean() {
        let d = GaussianDist::new_full(dvec(&[1.5, -2.0]), DMatrix::zeros(2, 2)).unwrap();
        let s = d.sample(&mut ChaCha8Rng::seed_from_u64(1), 5).unwrap();
        for row in s.values.row_iter() {
            assert_eq!(row[0], 1.5);
            assert_eq!(row[1], -2.0);
        }
    }

    #[test]
    fn sample_mean_obeys_clt_bound() {
        let d = GaussianDist::new_full(dvec(&[0.0]), DMatrix::identity(1, 1)).unwrap();
        let n = 100_000;
        let s = d.sample(&mut ChaCha8Rng::seed_from_u64(5), n).unwrap();
        let mean = s.values.mean();
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn samples_are_reparameterized() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let d = GaussianDist::new_full(dvec(&[1.0, -1.0]), cov.clone()).unwrap();
        let s = d.sample(&mut ChaCha8Rng::seed_from_u64(9), 4).unwrap();
        let l = cholesky_with_jitter(&cov).unwrap().l;
        for i in 0..4 {
            let expected = d.mean() + &l * s.noise.row(i).transpose();
            assert_relative_eq!(s.values.row(i).transpose(), expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn log_density_examples() {
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        let d1 = GaussianDist::new_full(dvec(&[0.0]), DMatrix::identity(1, 1)).unwrap();
        assert_relative_eq!(d1.log_density(&dvec(&[0.0])).unwrap(), -0.5 * ln2pi, epsilon = 1e-14);
        assert_relative_eq!(d1.log_density(&dvec(&[0.0])).unwrap(), -0.91894, epsilon = 1e-5);

        let d2 = GaussianDist::standard(2);
        assert_relative_eq!(d2.log_density(&dvec(&[1.0, 1.0])).unwrap(), -ln2pi - 1.0, epsilon = 1e-14);

        let d3 = GaussianDist::new_full(dvec(&[3.0]), DMatrix::from_element(1, 1, 4.0)).unwrap();
        assert_relative_eq!(
            d3.log_density(&dvec(&[3.0])).unwrap(),
            -0.5 * (8.0 * std::f64::consts::PI).ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn score_is_negative_precision_times_offset() {
        let d = GaussianDist::new_full(dvec(&[1.0]), DMatrix::from_element(1, 1, 4.0)).unwrap();
        assert_relative_eq!(d.score(&dvec(&[3.0])).unwrap()[0], -0.5, epsilon = 1e-14);
    }
}
