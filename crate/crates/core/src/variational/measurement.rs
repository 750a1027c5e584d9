use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::blr::Dataset;
use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    FromData,
    UniformBox,
}

/// Finite index set at which marginals are compared.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub points: DMatrix<f64>,
    pub provenance: Vec<Provenance>,
}

impl MeasurementSet {
    pub fn new(points: DMatrix<f64>, provenance: Vec<Provenance>) -> Result<Self> {
        check_dim("measurement provenance", points.nrows(), provenance.len())?;
        if points.nrows() == 0 {
            return Err(Error::InvalidParameter("measurement set must be nonempty".into()));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("measurement points must be finite".into()));
        }
        Ok(Self { points, provenance })
    }

    /// Every point tagged as drawn from data.
    pub fn from_points(points: DMatrix<f64>) -> Result<Self> {
        let n = points.nrows();
        Self::new(points, vec![Provenance::FromData; n])
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    /// Rows at `idx`, keeping provenance.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        Self::new(
            crate::linalg::select_rows(&self.points, idx),
            idx.iter().map(|&i| self.provenance[i]).collect(),
        )
    }

    pub fn count(&self, tag: Provenance) -> usize {
        self.provenance.iter().filter(|&&p| p == tag).count()
    }
}

/// How measurement sets are drawn: a fraction of training inputs, the rest
/// uniformly from an axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementPolicy {
    pub size: usize,
    pub data_fraction: f64,
    pub bounds: Vec<(f64, f64)>,
    pub resample_each_step: bool,
}

impl MeasurementPolicy {
    pub fn new(size: usize, data_fraction: f64, bounds: Vec<(f64, f64)>, resample_each_step: bool) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidParameter("measurement size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&data_fraction) {
            return Err(Error::InvalidParameter(format!(
                "data fraction must lie in [0, 1], got {data_fraction}"
            )));
        }
        for (dim, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo < hi) {
                return Err(Error::InvalidBox { dim, lo, hi });
            }
        }
        Ok(Self {
            size,
            data_fraction,
            bounds,
            resample_each_step,
        })
    }

    /// Box = bounding box of the training inputs.
    pub fn with_data_bounds(size: usize, data_fraction: f64, data: &Dataset, resample_each_step: bool) -> Result<Self> {
        let bounds = (0..data.input_dim())
            .map(|d| {
                let col = data.inputs.column(d);
                (col.min(), col.max())
            })
            .collect();
        Self::new(size, data_fraction, bounds, resample_each_step)
    }

    pub fn num_from_data(&self) -> usize {
        (self.size as f64 * self.data_fraction).floor() as usize
    }
}

/// `floor(size * data_fraction)` training inputs (without replacement when
/// possible), the remainder uniform over the box.
pub fn sample_measurement_set<R: Rng + ?Sized>(
    policy: &MeasurementPolicy,
    data: &Dataset,
    rng: &mut R,
) -> Result<MeasurementSet> {
    for (dim, &(lo, hi)) in policy.bounds.iter().enumerate() {
        if !(lo < hi) {
            return Err(Error::InvalidBox { dim, lo, hi });
        }
    }
    let from_data = policy.num_from_data();
    let from_box = policy.size - from_data;
    let d = data.input_dim();
    if from_box > 0 {
        check_dim("measurement box dimension", d, policy.bounds.len())?;
    }
    let n = data.len();
    if from_data > 0 && n == 0 {
        return Err(Error::InvalidParameter(
            "cannot draw measurement points from an empty dataset".into(),
        ));
    }

    let rows: Vec<usize> = if from_data <= n {
        index::sample(rng, n, from_data).into_vec()
    } else {
        (0..from_data).map(|_| rng.random_range(0..n)).collect()
    };

    let mut points = DMatrix::zeros(policy.size, d);
    let mut provenance = Vec::with_capacity(policy.size);
    for (i, &r) in rows.iter().enumerate() {
        points.row_mut(i).copy_from(&data.inputs.row(r));
        provenance.push(Provenance::FromData);
    }
    for i in from_data..policy.size {
        for (j, &(lo, hi)) in policy.bounds.iter().enumerate() {
            points[(i, j)] = rng.random_range(lo..hi);
        }
        provenance.push(Provenance::UniformBox);
    }
    MeasurementSet::new(points, provenance)
}
