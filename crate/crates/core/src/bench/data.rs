use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::blr::{BlrModel, Dataset};
use crate::error::{Error, Result};
use crate::features::{FeatureMap, RbfFeatureMap};
use crate::io;

pub const TOY_NUM_FEATURES: usize = 20;
pub const TOY_LENGTHSCALE: f64 = 0.2;
pub const TOY_NOISE_VARIANCE: f64 = 0.01;
pub const TOY_CLUSTER_CENTER: f64 = 1.2;
pub const TOY_CLUSTER_STD: f64 = 0.3;
pub const TOY_POINTS_PER_CLUSTER: usize = 20;
/// Held-out points per cluster, drawn after the training set.
pub const TOY_TEST_POINTS_PER_CLUSTER: usize = 100;

#[derive(Debug, Clone)]
pub struct ToyProblem {
    pub model: BlrModel,
    pub train: Dataset,
    pub test: Dataset,
    pub true_weights: DVector<f64>,
}

/// The 1-D two-cluster regression problem: 20 RBF features on `[-2, 2]`,
/// weights from the prior, noise std 0.1.
pub fn generate_toy<R: Rng + ?Sized>(rng: &mut R) -> Result<ToyProblem> {
    let map = RbfFeatureMap::linspace_1d(TOY_NUM_FEATURES, -2.0, 2.0, TOY_LENGTHSCALE)?;
    let model = BlrModel::new(FeatureMap::Rbf(map), TOY_NOISE_VARIANCE)?;
    let true_weights = DVector::from_fn(TOY_NUM_FEATURES, |_, _| rng.sample::<f64, _>(StandardNormal));
    let train = toy_dataset(&model, &true_weights, TOY_POINTS_PER_CLUSTER, rng)?;
    let test = toy_dataset(&model, &true_weights, TOY_TEST_POINTS_PER_CLUSTER, rng)?;
    Ok(ToyProblem {
        model,
        train,
        test,
        true_weights,
    })
}

fn toy_dataset<R: Rng + ?Sized>(model: &BlrModel, w: &DVector<f64>, per_cluster: usize, rng: &mut R) -> Result<Dataset> {
    let left = Normal::new(-TOY_CLUSTER_CENTER, TOY_CLUSTER_STD).expect("valid normal");
    let right = Normal::new(TOY_CLUSTER_CENTER, TOY_CLUSTER_STD).expect("valid normal");
    let mut xs: Vec<f64> = (0..per_cluster).map(|_| rng.sample(left)).collect();
    xs.extend((0..per_cluster).map(|_| rng.sample(right)));
    let inputs = DMatrix::from_column_slice(xs.len(), 1, &xs);
    let noise_std = model.noise_variance().sqrt();
    let f = model.features(&inputs)? * w;
    let targets = DVector::from_fn(xs.len(), |i, _| f[i] + noise_std * rng.sample::<f64, _>(StandardNormal));
    Dataset::new(inputs, targets)
}

/// Train-set statistics used to standardize inputs and targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub input_mean: DVector<f64>,
    pub input_std: DVector<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

impl Standardization {
    /// Constant columns get a unit scale.
    pub fn fit(train: &Dataset) -> Self {
        let n = train.len() as f64;
        let (input_mean, input_std): (Vec<f64>, Vec<f64>) = (0..train.input_dim())
            .map(|d| mean_std(train.inputs.column(d).iter().copied(), n))
            .unzip();
        let (target_mean, target_std) = mean_std(train.targets.iter().copied(), n);
        Self {
            input_mean: DVector::from_vec(input_mean),
            input_std: DVector::from_vec(input_std),
            target_mean,
            target_std,
        }
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        let inputs = DMatrix::from_fn(data.len(), data.input_dim(), |i, d| {
            (data.inputs[(i, d)] - self.input_mean[d]) / self.input_std[d]
        });
        let targets = data.targets.map(|y| (y - self.target_mean) / self.target_std);
        Dataset::new(inputs, targets)
    }

    /// Converts a per-point NLPD on the standardized scale back to the
    /// original target scale.
    pub fn destandardize_nlpd(&self, nlpd: f64) -> f64 {
        nlpd + self.target_std.ln()
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone, n: f64) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 0.0 { std } else { 1.0 })
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    /// Row indices into the original dataset.
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub standardization: Option<Standardization>,
}

pub fn load_and_split(path: &Path, split_fraction: f64, seed: u64, standardize: bool) -> Result<Split> {
    let data = Dataset::from_matrix(&io::read_matrix_csv(path)?)?;
    split_dataset(&data, split_fraction, seed, standardize)
}

/// Uniformly random split with `round(n * split_fraction)` training rows.
pub fn split_dataset(data: &Dataset, split_fraction: f64, seed: u64, standardize: bool) -> Result<Split> {
    if !(split_fraction > 0.0 && split_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "split fraction must lie in (0, 1), got {split_fraction}"
        )));
    }
    let n = data.len();
    let n_train = (n as f64 * split_fraction).round() as usize;
    if n_train == 0 {
        return Err(Error::EmptySplit("train"));
    }
    if n_train >= n {
        return Err(Error::EmptySplit("test"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test_rows = order.split_off(n_train);
    let train_rows = order;
    let mut train = data.subset(&train_rows);
    let mut test = data.subset(&test_rows);
    let standardization = standardize.then(|| Standardization::fit(&train));
    if let Some(s) = &standardization {
        train = s.apply(&train)?;
        test = s.apply(&test)?;
    }
    Ok(Split {
        train,
        test,
        train_rows,
        test_rows,
        standardization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_shapes_and_determinism() {
        let a = generate_toy(&mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = generate_toy(&mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.true_weights, b.true_weights);
        assert_eq!((a.train.len(), a.train.input_dim(), a.model.num_features()), (40, 1, 20));
        assert_eq!(a.test.len(), 200);
        assert_eq!(a.model.noise_variance(), 0.01);
    }

    #[test]
    fn toy_noise_level() {
        for seed in 0..20 {
            let toy = generate_toy(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let r = &toy.train.targets - toy.model.features(&toy.train.inputs).unwrap() * &toy.true_weights;
            let mean = r.mean();
            let std = (r.map(|v| (v - mean).powi(2)).sum() / 39.0).sqrt();
            assert!((0.07..=0.13).contains(&std), "seed {seed}: residual std {std}");
        }
    }

    fn synthetic(n: usize) -> Dataset {
        let inputs = DMatrix::from_fn(n, 2, |i, d| (i * (d + 3)) as f64 * 0.37 + d as f64);
        let targets = DVector::from_fn(n, |i, _| 5.0 + 3.0 * (i as f64).sin());
        Dataset::new(inputs, targets).unwrap()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let d = synthetic(100);
        let a = split_dataset(&d, 0.9, 3, false).unwrap();
        assert_eq!((a.train.len(), a.test.len()), (90, 10));
        let b = split_dataset(&d, 0.9, 3, false).unwrap();
        assert_eq!(a.train_rows, b.train_rows);
        let c = split_dataset(&d, 0.9, 4, false).unwrap();
        assert_ne!(a.train_rows, c.train_rows);
        let mut all: Vec<usize> = a.train_rows.iter().chain(&a.test_rows).copied().collect();
        all.sort();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn standardized_train_is_centered() {
        let s = split_dataset(&synthetic(100), 0.9, 0, true).unwrap();
        assert!(s.train.targets.mean().abs() < 1e-10);
        for d in 0..2 {
            assert!(s.train.inputs.column(d).mean().abs() < 1e-10);
        }
        let st = s.standardization.unwrap();
        assert!((s.train.targets.variance() - 1.0).abs() < 1e-10);
        assert!(st.target_std > 0.0);
    }

    #[test]
    fn empty_splits_are_rejected() {
        let d = synthetic(3);
        assert!(matches!(split_dataset(&d, 0.1, 0, false), Err(Error::EmptySplit("train"))));
        assert!(matches!(split_dataset(&d, 0.9, 0, false), Err(Error::EmptySplit("test"))));
        assert!(split_dataset(&d, 1.0, 0, false).is_err());
    }
}
