//! Feature maps `x -> phi(x)` for the linear model.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::io;
use crate::linalg;

/// Unnormalized Gaussian bumps sharing one lengthscale vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfFeatureMap {
    centers: DMatrix<f64>,
    lengthscales: DVector<f64>,
}

impl RbfFeatureMap {
    pub fn new(centers: DMatrix<f64>, lengthscales: DVector<f64>) -> Result<Self> {
        if centers.nrows() == 0 || centers.ncols() == 0 {
            return Err(Error::InvalidParameter(
                "rbf map needs at least one center and one input dimension".into(),
            ));
        }
        check_dim("rbf lengthscales", centers.ncols(), lengthscales.len())?;
        if lengthscales.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidParameter(
                "lengthscales must be positive and finite".into(),
            ));
        }
        if centers.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("centers must be finite".into()));
        }
        Ok(Self {
            centers,
            lengthscales,
        })
    }

    /// `count` centers evenly spaced on `[lo, hi]` in one dimension.
    pub fn linspace_1d(count: usize, lo: f64, hi: f64, lengthscale: f64) -> Result<Self> {
        let centers = DMatrix::from_fn(count, 1, |i, _| {
            if count == 1 {
                lo
            } else {
                lo + (hi - lo) * i as f64 / (count - 1) as f64
            }
        });
        Self::new(centers, DVector::from_element(1, lengthscale))
    }

    /// Centers from k-means on `inputs`, lengthscales from the per-dimension
    /// median of absolute pairwise differences.
    pub fn from_kmeans<R: Rng + ?Sized>(inputs: &DMatrix<f64>, k: usize, rng: &mut R) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(Error::InvalidParameter("k-means needs at least one input".into()));
        }
        let centers = kmeans(inputs, k.min(inputs.nrows()).max(1), rng);
        let lengthscales = median_heuristic_lengthscales(inputs);
        Self::new(centers, lengthscales)
    }

    pub fn centers(&self) -> &DMatrix<f64> {
        &self.centers
    }

    pub fn lengthscales(&self) -> &DVector<f64> {
        &self.lengthscales
    }

    pub fn num_features(&self) -> usize {
        self.centers.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.centers.ncols()
    }

    pub fn evaluate(&self, inputs: &DMatrix<f64>) -> Result<FeatureMatrix> {
        check_dim("rbf input dimension", self.input_dim(), inputs.ncols())?;
        let values = DMatrix::from_fn(inputs.nrows(), self.num_features(), |i, j| {
            let mut sq = 0.0;
            for d in 0..self.input_dim() {
                let z = (inputs[(i, d)] - self.centers[(j, d)]) / self.lengthscales[d];
                sq += z * z;
            }
            (-0.5 * sq).exp()
        });
        Ok(FeatureMatrix {
            values,
            source_inputs: inputs.clone(),
        })
    }
}

/// Features for a fixed set of known inputs, e.g. loaded from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookupFeatureMap {
    inputs: DMatrix<f64>,
    values: DMatrix<f64>,
}

impl LookupFeatureMap {
    pub fn new(inputs: DMatrix<f64>, values: DMatrix<f64>) -> Result<Self> {
        check_dim("lookup rows", inputs.nrows(), values.nrows())?;
        Ok(Self { inputs, values })
    }

    pub fn known_inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    /// Exact (bitwise) row lookup; unknown rows are an error.
    pub fn evaluate(&self, inputs: &DMatrix<f64>) -> Result<FeatureMatrix> {
        check_dim("lookup input dimension", self.inputs.ncols(), inputs.ncols())?;
        let mut values = DMatrix::zeros(inputs.nrows(), self.values.ncols());
        for i in 0..inputs.nrows() {
            let row = inputs.row(i);
            let hit = (0..self.inputs.nrows())
                .find(|&r| {
                    self.inputs
                        .row(r)
                        .iter()
                        .zip(row.iter())
                        .all(|(a, b)| a.to_bits() == b.to_bits())
                })
                .ok_or(Error::UnknownInput(i))?;
            values.row_mut(i).copy_from(&self.values.row(hit));
        }
        Ok(FeatureMatrix {
            values,
            source_inputs: inputs.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureMap {
    Rbf(RbfFeatureMap),
    /// `phi(x) = x`.
    Identity { dim: usize },
    Lookup(LookupFeatureMap),
}

impl FeatureMap {
    pub fn num_features(&self) -> usize {
        match self {
            FeatureMap::Rbf(m) => m.num_features(),
            FeatureMap::Identity { dim } => *dim,
            FeatureMap::Lookup(m) => m.values.ncols(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            FeatureMap::Rbf(m) => m.input_dim(),
            FeatureMap::Identity { dim } => *dim,
            FeatureMap::Lookup(m) => m.inputs.ncols(),
        }
    }

    pub fn evaluate(&self, inputs: &DMatrix<f64>) -> Result<FeatureMatrix> {
        match self {
            FeatureMap::Rbf(m) => m.evaluate(inputs),
            FeatureMap::Identity { dim } => {
                check_dim("identity input dimension", *dim, inputs.ncols())?;
                Ok(FeatureMatrix {
                    values: inputs.clone(),
                    source_inputs: inputs.clone(),
                })
            }
            FeatureMap::Lookup(m) => m.evaluate(inputs),
        }
    }

    /// Shorthand for `evaluate(..).values`.
    pub fn matrix(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.evaluate(inputs)?.values)
    }
}

/// `values[(i, j)] = phi_j(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: DMatrix<f64>,
    pub source_inputs: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectivityCertificate {
    pub certified_rank: usize,
    /// Indices of `k` candidate points with linearly independent features.
    pub witness_subset: Option<Vec<usize>>,
}

/// Searches `candidate_points` for `k` inputs whose feature vectors are
/// linearly independent. Such a set makes `w -> (w^T phi(a))_a` injective.
pub fn injectivity_certificate(map: &FeatureMap, candidate_points: &DMatrix<f64>) -> Result<InjectivityCertificate> {
    let phi = map.matrix(candidate_points)?;
    let k = map.num_features();
    let certified_rank = linalg::numerical_rank(&phi);
    let mut witness_subset = None;
    if certified_rank == k {
        let rows = linalg::independent_rows(&phi);
        if rows.len() == k && linalg::numerical_rank(&linalg::select_rows(&phi, &rows)) == k {
            witness_subset = Some(rows);
        }
    }
    Ok(InjectivityCertificate {
        certified_rank,
        witness_subset,
    })
}

/// Loads a feature CSV and, when given, the matching inputs CSV. Without an
/// inputs file each row is keyed by its zero-based row index.
pub fn load_features(features: &Path, inputs: Option<&Path>) -> Result<(FeatureMatrix, LookupFeatureMap)> {
    let values = io::read_matrix_csv(features)?;
    let source_inputs = match inputs {
        Some(p) => {
            let m = io::read_matrix_csv(p)?;
            check_dim("inputs csv rows", values.nrows(), m.nrows())?;
            m
        }
        None => DMatrix::from_fn(values.nrows(), 1, |i, _| i as f64),
    };
    let lookup = LookupFeatureMap::new(source_inputs.clone(), values.clone())?;
    Ok((
        FeatureMatrix {
            values,
            source_inputs,
        },
        lookup,
    ))
}

pub fn save_features(features: &FeatureMatrix, features_path: &Path, inputs_path: Option<&Path>) -> Result<()> {
    io::write_matrix_csv(features_path, &features.values, Some("features"))?;
    if let Some(p) = inputs_path {
        io::write_matrix_csv(p, &features.source_inputs, Some("inputs"))?;
    }
    Ok(())
}

fn kmeans<R: Rng + ?Sized>(inputs: &DMatrix<f64>, k: usize, rng: &mut R) -> DMatrix<f64> {
    let n = inputs.nrows();
    let sq_dist = |i: usize, c: &DMatrix<f64>, j: usize| -> f64 {
        (0..inputs.ncols())
            .map(|d| (inputs[(i, d)] - c[(j, d)]).powi(2))
            .sum()
    };

    // k-means++ seeding
    let mut centers = DMatrix::zeros(k, inputs.ncols());
    centers.row_mut(0).copy_from(&inputs.row(rng.random_range(0..n)));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(i, &centers, 0)).collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).copy_from(&inputs.row(pick));
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(i, &centers, c));
        }
    }

    let mut assignment = vec![usize::MAX; n];
    for _ in 0..100 {
        let mut changed = false;
        for (i, slot) in assignment.iter_mut().enumerate() {
            let best = (0..k)
                .map(|j| (j, sq_dist(i, &centers, j)))
                .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
                .0;
            if *slot != best {
                *slot = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = DMatrix::<f64>::zeros(k, inputs.ncols());
        let mut counts = vec![0usize; k];
        for (i, &a) in assignment.iter().enumerate() {
            let mut row = sums.row_mut(a);
            row += inputs.row(i);
            counts[a] += 1;
        }
        for j in 0..k {
            // empty clusters keep their previous center
            if counts[j] > 0 {
                let mean = sums.row(j) / counts[j] as f64;
                centers.row_mut(j).copy_from(&mean);
            }
        }
    }
    centers
}

fn median_heuristic_lengthscales(inputs: &DMatrix<f64>) -> DVector<f64> {
    const MAX_POINTS: usize = 400;
    let n = inputs.nrows();
    let stride = n.div_ceil(MAX_POINTS).max(1);
    let idx: Vec<usize> = (0..n).step_by(stride).collect();
    DVector::from_fn(inputs.ncols(), |d, _| {
        let mut diffs = Vec::with_capacity(idx.len() * idx.len() / 2);
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                diffs.push((inputs[(i, d)] - inputs[(j, d)]).abs());
            }
        }
        match linalg::median(&mut diffs) {
            Some(m) if m > 0.0 => m,
            _ => {
                let col = inputs.column(d);
                let sd = col.variance().sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            }
        }
    })
}
