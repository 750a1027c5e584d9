//! Numerical diagnostics for when function-space KL divergences are finite.
//!
//! * A linear model with `k` features pushes its weight distribution onto a
//!   `k`-dimensional subspace, so at `k + 1` generic points its marginal is
//!   singular while a non-degenerate GP marginal is not ([`marginal_rank_diagnostic`],
//!   [`kl_blowup_curve`]).
//! * When the feature map is injective on a witness set, weight-space and
//!   function-space KLs coincide ([`kl_equality_check`]).
//! * A one-hidden-layer ReLU network of width `k` is piecewise linear with
//!   `k + 1` pieces almost surely, so networks of different widths live on
//!   disjoint sets of functions ([`count_linear_pieces`], [`width_singularity_report`]).

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::blr::BlrModel;
use crate::error::{check_dim, Error, Result};
use crate::features::injectivity_certificate;
use crate::gaussian::{kl_divergence, pushforward_linear, GaussianDist};
use crate::linalg::{self, numerical_rank};
use crate::variational::VariationalState;

/// Zero-mean GP with a squared-exponential kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpPrior {
    pub lengthscales: DVector<f64>,
    pub variance: f64,
}

impl GpPrior {
    pub fn squared_exponential(lengthscales: DVector<f64>, variance: f64) -> Result<Self> {
        if lengthscales.is_empty() || lengthscales.iter().any(|&l| !(l > 0.0)) || !(variance > 0.0) {
            return Err(Error::InvalidParameter(
                "GP hyperparameters must be positive".into(),
            ));
        }
        Ok(Self {
            lengthscales,
            variance,
        })
    }

    pub fn kernel_matrix(&self, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim("gp input dimension", self.lengthscales.len(), points.ncols())?;
        let m = points.nrows();
        let mut k = DMatrix::from_fn(m, m, |i, j| {
            let sq: f64 = (0..points.ncols())
                .map(|d| ((points[(i, d)] - points[(j, d)]) / self.lengthscales[d]).powi(2))
                .sum();
            self.variance * (-0.5 * sq).exp()
        });
        linalg::symmetrize(&mut k);
        Ok(k)
    }

    pub fn marginal(&self, points: &DMatrix<f64>) -> Result<GaussianDist> {
        GaussianDist::new_full(DVector::zeros(points.nrows()), self.kernel_matrix(points)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDiagnostic {
    pub num_points: usize,
    pub num_features: usize,
    pub q_rank: usize,
    pub p_rank: usize,
}

/// Numerical ranks of the parametric marginal `phi_A Sigma phi_A^T` and the
/// GP kernel matrix at the same points.
pub fn marginal_rank_diagnostic(
    model: &BlrModel,
    weights: &GaussianDist,
    gp: &GpPrior,
    points: &DMatrix<f64>,
) -> Result<RankDiagnostic> {
    let phi = model.features(points)?;
    let q = pushforward_linear(weights, &phi)?;
    let m = points.nrows();
    let k = model.num_features();
    let q_rank = numerical_rank(&q.cov_dense());
    assert!(q_rank <= m.min(k), "rank({q_rank}) exceeds min(m = {m}, k = {k})");
    let p_rank = numerical_rank(&gp.kernel_matrix(points)?);
    Ok(RankDiagnostic {
        num_points: m,
        num_features: k,
        q_rank,
        p_rank,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupPoint {
    pub epsilon: f64,
    /// `KL(Q_A + eps I || P_A)`.
    pub forward_kl: f64,
    /// `KL(P_A || Q_A + eps I)`.
    pub reverse_kl: f64,
}

/// KL between a jittered parametric marginal and the GP marginal as the
/// jitter shrinks.
pub fn kl_blowup_curve(
    model: &BlrModel,
    gp: &GpPrior,
    points: &DMatrix<f64>,
    jitters: &[f64],
) -> Result<Vec<BlowupPoint>> {
    let phi = model.features(points)?;
    let q = pushforward_linear(model.prior(), &phi)?;
    let p = gp.marginal(points)?;
    kl_blowup_curve_against(&q, &p, jitters)
}

/// As [`kl_blowup_curve`] for explicit marginals.
pub fn kl_blowup_curve_against(q: &GaussianDist, p: &GaussianDist, jitters: &[f64]) -> Result<Vec<BlowupPoint>> {
    check_dim("blowup marginals", q.dim(), p.dim())?;
    if jitters.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidParameter("jitters must be positive".into()));
    }
    if jitters.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidParameter("jitters must be in descending order".into()));
    }
    let base = q.cov_dense();
    jitters
        .iter()
        .map(|&epsilon| {
            let mut cov = base.clone();
            for i in 0..cov.nrows() {
                cov[(i, i)] += epsilon;
            }
            let qe = GaussianDist::new_full(q.mean().clone(), cov)?;
            Ok(BlowupPoint {
                epsilon,
                forward_kl: kl_divergence(&qe, p)?,
                reverse_kl: kl_divergence(p, &qe)?,
            })
        })
        .collect()
}

/// Least-squares slope of the forward KL against `ln(1/eps)` over the
/// points with `eps <= max_epsilon`. Each rank-deficient dimension
/// contributes 1/2 asymptotically.
pub fn blowup_slope(curve: &[BlowupPoint], max_epsilon: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter(|p| p.epsilon <= max_epsilon)
        .map(|p| ((1.0 / p.epsilon).ln(), p.forward_kl))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlEqualityReport {
    pub weight_kl: f64,
    pub function_kl: f64,
    pub rel_diff: f64,
}

/// Weight-space KL to the prior against the marginal KL at `witness`, a set
/// of `k` points with linearly independent features.
pub fn kl_equality_check(model: &BlrModel, state: &VariationalState, witness: &DMatrix<f64>) -> Result<KlEqualityReport> {
    let k = model.num_features();
    let cert = injectivity_certificate(&model.feature_map, witness)?;
    if witness.nrows() != k || cert.witness_subset.is_none() {
        return Err(Error::InvalidParameter(format!(
            "witness must be {k} points with independent features (rank {} of {} points)",
            cert.certified_rank,
            witness.nrows()
        )));
    }
    let (weight_kl, function_kl) = weight_and_function_kl(model, state, witness)?;
    let denom = weight_kl.abs().max(function_kl.abs());
    let rel_diff = if denom == 0.0 {
        0.0
    } else {
        (weight_kl - function_kl).abs() / denom
    };
    Ok(KlEqualityReport {
        weight_kl,
        function_kl,
        rel_diff,
    })
}

/// `(KL(Q || P), KL(Q_A || P_A))` for any measurement points, no
/// injectivity requirement.
pub fn weight_and_function_kl(model: &BlrModel, state: &VariationalState, points: &DMatrix<f64>) -> Result<(f64, f64)> {
    let q = state.to_gaussian()?;
    let weight_kl = kl_divergence(&q, model.prior())?;
    let phi = model.features(points)?;
    let function_kl = kl_divergence(&pushforward_linear(&q, &phi)?, &pushforward_linear(model.prior(), &phi)?)?;
    Ok((weight_kl, function_kl))
}

/// One-hidden-layer ReLU network `f(x) = w2 . relu(W1 x + b1) + b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReluNet1HL {
    /// `width x input_dim`.
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DVector<f64>,
    pub b2: f64,
}

/// Distribution over network parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WeightPrior {
    StandardNormal,
    /// Standard normal, except each outgoing weight is exactly zero with
    /// probability `zero_prob`.
    SpikeOutput { zero_prob: f64 },
}

impl ReluNet1HL {
    pub fn new(w1: DMatrix<f64>, b1: DVector<f64>, w2: DVector<f64>, b2: f64) -> Result<Self> {
        let k = w1.nrows();
        check_dim("relu b1", k, b1.len())?;
        check_dim("relu w2", k, w2.len())?;
        if w1.iter().chain(b1.iter()).chain(w2.iter()).any(|v| !v.is_finite()) || !b2.is_finite() {
            return Err(Error::InvalidParameter("network parameters must be finite".into()));
        }
        Ok(Self { w1, b1, w2, b2 })
    }

    pub fn sample<R: Rng + ?Sized>(input_dim: usize, width: usize, prior: WeightPrior, rng: &mut R) -> Self {
        let mut n = || rng.sample::<f64, _>(StandardNormal);
        let w1 = DMatrix::from_fn(width, input_dim, |_, _| n());
        let b1 = DVector::from_fn(width, |_, _| n());
        let mut w2 = DVector::from_fn(width, |_, _| n());
        let b2 = n();
        if let WeightPrior::SpikeOutput { zero_prob } = prior {
            for v in w2.iter_mut() {
                if rng.random::<f64>() < zero_prob {
                    *v = 0.0;
                }
            }
        }
        Self { w1, b1, w2, b2 }
    }

    pub fn width(&self) -> usize {
        self.w1.nrows()
    }

    pub fn evaluate(&self, x: &DVector<f64>) -> f64 {
        let hidden = &self.w1 * x + &self.b1;
        self.w2
            .iter()
            .zip(hidden.iter())
            .map(|(w, h)| w * h.max(0.0))
            .sum::<f64>()
            + self.b2
    }
}

const BREAKPOINT_TOLERANCE: f64 = 1e-9;
const SLOPE_TOLERANCE: f64 = 1e-9;

/// Number of linear pieces of `t -> f(t, 0, ..., 0)`.
///
/// Neuron `i` can only bend the function at `t_i = -b1_i / w1_i0`, where
/// the slope jumps by `w2_i |w1_i0|`. Breakpoints closer than `1e-9` are
/// merged and only merged jumps larger than `1e-9` count.
pub fn count_linear_pieces(net: &ReluNet1HL) -> usize {
    let mut kinks: Vec<(f64, f64)> = (0..net.width())
        .filter_map(|i| {
            let a = net.w1[(i, 0)];
            let jump = net.w2[i] * a.abs();
            (a != 0.0 && jump != 0.0).then(|| (-net.b1[i] / a, jump))
        })
        .collect();
    kinks.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut pieces = 1;
    let mut i = 0;
    while i < kinks.len() {
        let mut total = kinks[i].1;
        let mut j = i + 1;
        while j < kinks.len() && kinks[j].0 - kinks[j - 1].0 <= BREAKPOINT_TOLERANCE {
            total += kinks[j].1;
            j += 1;
        }
        if total.abs() > SLOPE_TOLERANCE {
            pieces += 1;
        }
        i = j;
    }
    pieces
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthReport {
    pub width_a: usize,
    pub width_b: usize,
    pub pieces_a: BTreeMap<usize, usize>,
    pub pieces_b: BTreeMap<usize, usize>,
    /// Draws of either width whose piece count equals the other width + 1.
    pub overlap: usize,
}

pub fn width_singularity_report<R: Rng + ?Sized>(
    width_a: usize,
    width_b: usize,
    draws: usize,
    prior: WeightPrior,
    rng: &mut R,
) -> Result<WidthReport> {
    if width_a == 0 || width_b == 0 || width_a == width_b {
        return Err(Error::InvalidParameter("widths must be positive and distinct".into()));
    }
    let histogram = |width: usize, rng: &mut R| {
        let mut h = BTreeMap::new();
        for _ in 0..draws {
            let net = ReluNet1HL::sample(1, width, prior, rng);
            *h.entry(count_linear_pieces(&net)).or_insert(0) += 1;
        }
        h
    };
    let pieces_a = histogram(width_a, rng);
    let pieces_b = histogram(width_b, rng);
    let overlap = pieces_a.get(&(width_b + 1)).copied().unwrap_or(0) + pieces_b.get(&(width_a + 1)).copied().unwrap_or(0);
    Ok(WidthReport {
        width_a,
        width_b,
        pieces_a,
        pieces_b,
        overlap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureMap, RbfFeatureMap};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_feature_model() -> BlrModel {
        let map = RbfFeatureMap::linspace_1d(2, -1.0, 1.0, 1.0).unwrap();
        BlrModel::new(FeatureMap::Rbf(map), 0.1).unwrap()
    }

    fn unit_gp() -> GpPrior {
        GpPrior::squared_exponential(DVector::from_element(1, 1.0), 1.0).unwrap()
    }

    /// Counts slope changes of `f` on a fine grid; independent of the
    /// breakpoint formula.
    fn probe_pieces(net: &ReluNet1HL, lo: f64, hi: f64, n: usize) -> usize {
        let h = (hi - lo) / n as f64;
        let f = |t: f64| net.evaluate(&DVector::from_element(1, t));
        let slopes: Vec<f64> = (0..n).map(|i| (f(lo + (i + 1) as f64 * h) - f(lo + i as f64 * h)) / h).collect();
        1 + slopes.windows(2).filter(|w| (w[1] - w[0]).abs() > 1e-6).count()
    }

    #[test]
    fn rank_examples() {
        let model = two_feature_model();
        let pts = DMatrix::from_column_slice(3, 1, &[-1.3, 0.2, 1.1]);
        let r = marginal_rank_diagnostic(&model, model.prior(), &unit_gp(), &pts).unwrap();
        assert_eq!((r.q_rank, r.p_rank), (2, 3));

        let pts = DMatrix::from_column_slice(2, 1, &[-0.4, 0.9]);
        let r = marginal_rank_diagnostic(&model, model.prior(), &unit_gp(), &pts).unwrap();
        assert_eq!((r.q_rank, r.p_rank), (2, 2));

        let pts = DMatrix::from_column_slice(3, 1, &[-0.4, 0.9, 0.9]);
        let r = marginal_rank_diagnostic(&model, model.prior(), &unit_gp(), &pts).unwrap();
        assert_eq!(r.p_rank, 2);
    }

    #[test]
    fn halving_jitter_adds_half_log_two() {
        let model = two_feature_model();
        let pts = DMatrix::from_column_slice(3, 1, &[-1.3, 0.2, 1.1]);
        let curve = kl_blowup_curve(&model, &unit_gp(), &pts, &[2e-9, 1e-9]).unwrap();
        let inc = curve[1].forward_kl - curve[0].forward_kl;
        let expected = 0.5 * 2f64.ln();
        assert!((inc - expected).abs() < 0.1 * expected, "increment {inc}");
        assert!(curve[1].reverse_kl > curve[0].reverse_kl);
    }

    #[test]
    fn exact_match_gives_zero_kl() {
        let model = two_feature_model();
        let pts = DMatrix::from_column_slice(3, 1, &[-1.3, 0.2, 1.1]);
        let q = pushforward_linear(model.prior(), &model.features(&pts).unwrap()).unwrap();
        let mut pc = q.cov_dense();
        for i in 0..3 {
            pc[(i, i)] += 0.25;
        }
        let p = GaussianDist::new_full(q.mean().clone(), pc).unwrap();
        let curve = kl_blowup_curve_against(&q, &p, &[1.0, 0.25, 0.01]).unwrap();
        assert!(curve[1].forward_kl.abs() < 1e-12);
        assert!(curve[1].reverse_kl.abs() < 1e-12);
    }

    #[test]
    fn jitter_order_is_validated() {
        let model = two_feature_model();
        let pts = DMatrix::from_column_slice(3, 1, &[-1.3, 0.2, 1.1]);
        assert!(kl_blowup_curve(&model, &unit_gp(), &pts, &[1e-9, 1e-8]).is_err());
        assert!(kl_blowup_curve(&model, &unit_gp(), &pts, &[0.0]).is_err());
    }

    #[test]
    fn prior_state_has_zero_kls() {
        let map = RbfFeatureMap::linspace_1d(5, -2.0, 2.0, 0.5).unwrap();
        let centers = map.centers().clone();
        let model = BlrModel::new(FeatureMap::Rbf(map), 0.1).unwrap();
        let st = VariationalState::prior_init(crate::variational::Family::Full, 5);
        let r = kl_equality_check(&model, &st, &centers).unwrap();
        assert_eq!(r.weight_kl, 0.0);
        assert!(r.function_kl.abs() < 1e-12);
    }

    #[test]
    fn equality_check_requires_a_witness() {
        let map = RbfFeatureMap::linspace_1d(5, -2.0, 2.0, 0.5).unwrap();
        let model = BlrModel::new(FeatureMap::Rbf(map), 0.1).unwrap();
        let st = VariationalState::prior_init(crate::variational::Family::Full, 5);
        assert!(kl_equality_check(&model, &st, &DMatrix::from_column_slice(4, 1, &[-1.0, 0.0, 1.0, 2.0])).is_err());
    }

    #[test]
    fn pieces_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let net = ReluNet1HL::sample(1, 3, WeightPrior::StandardNormal, &mut rng);
            assert_eq!(count_linear_pieces(&net), 4);
        }
        let mut net = ReluNet1HL::sample(1, 3, WeightPrior::StandardNormal, &mut rng);
        net.w2[1] = 0.0;
        assert!(count_linear_pieces(&net) <= 3);

        let zero = ReluNet1HL::new(DMatrix::zeros(4, 1), DVector::zeros(4), DVector::zeros(4), 0.0).unwrap();
        assert_eq!(count_linear_pieces(&zero), 1);
    }

    #[test]
    fn coincident_cancelling_kinks_do_not_count() {
        // two neurons with the same breakpoint and opposite jumps
        let w1 = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let b1 = DVector::from_column_slice(&[-0.5, -0.5]);
        let w2 = DVector::from_column_slice(&[2.0, -2.0]);
        let net = ReluNet1HL::new(w1, b1, w2, 0.3).unwrap();
        assert_eq!(count_linear_pieces(&net), 1);
    }

    #[test]
    fn breakpoint_count_matches_grid_probe() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let net = ReluNet1HL::sample(1, 4, WeightPrior::StandardNormal, &mut rng);
            let kinks: Vec<f64> = (0..4).map(|i| -net.b1[i] / net.w1[(i, 0)]).collect();
            let lo = kinks.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
            let hi = kinks.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
            // a kink strictly inside a grid cell shows up as two slope changes
            let probed = probe_pieces(&net, lo, hi, 20_000);
            let counted = count_linear_pieces(&net);
            assert!(probed >= counted && probed <= 2 * counted - 1, "probed {probed} counted {counted}");
        }
    }

    #[test]
    fn different_widths_do_not_overlap() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = width_singularity_report(1, 2, 100, WeightPrior::StandardNormal, &mut rng).unwrap();
        assert_eq!(r.pieces_a.get(&2), Some(&100));
        assert_eq!(r.pieces_b.get(&3), Some(&100));
        assert_eq!(r.overlap, 0);
        assert!(width_singularity_report(2, 2, 1, WeightPrior::StandardNormal, &mut rng).is_err());
    }

    #[test]
    fn spike_prior_can_overlap() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = width_singularity_report(3, 5, 200, WeightPrior::SpikeOutput { zero_prob: 0.3 }, &mut rng).unwrap();
        // reported, not asserted on beyond being well-formed
        assert_eq!(r.pieces_a.values().sum::<usize>(), 200);
        assert_eq!(r.pieces_b.values().sum::<usize>(), 200);
    }
}
