//! Small dense linear-algebra helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value threshold used for every numerical rank decision.
pub const RANK_TOLERANCE: f64 = 1e-8;

/// Number of singular values above `RANK_TOLERANCE * sigma_max`.
pub fn numerical_rank(matrix: &DMatrix<f64>) -> usize {
    if matrix.nrows() == 0 || matrix.ncols() == 0 {
        return 0;
    }
    let sv = matrix.singular_values();
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOLERANCE * max).count()
}

/// Greedy pivoted Gram-Schmidt over the rows of `matrix`.
///
/// Repeatedly picks the row with the largest residual norm after projecting
/// out the rows already picked, stopping once that residual falls below
/// `RANK_TOLERANCE` times the largest row norm. This is column-pivoted QR
/// applied to the transpose. Returned indices are in ascending order.
pub fn independent_rows(matrix: &DMatrix<f64>) -> Vec<usize> {
    let (m, k) = matrix.shape();
    let mut residual = matrix.clone();
    let max_norm = (0..m)
        .map(|i| residual.row(i).norm())
        .fold(0.0_f64, f64::max);
    let mut chosen = Vec::new();
    if max_norm == 0.0 {
        return chosen;
    }
    let mut available: Vec<bool> = vec![true; m];
    while chosen.len() < k.min(m) {
        let (best, best_norm) = (0..m)
            .filter(|&i| available[i])
            .map(|i| (i, residual.row(i).norm()))
            .fold((usize::MAX, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best == usize::MAX || best_norm <= RANK_TOLERANCE * max_norm {
            break;
        }
        available[best] = false;
        chosen.push(best);
        let q = residual.row(best).transpose() / best_norm;
        for i in 0..m {
            if available[i] {
                let c = residual.row(i).dot(&q.transpose());
                let update = q.transpose() * c;
                let mut row = residual.row_mut(i);
                row -= update;
            }
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Rows of `matrix` at `indices`, in the given order.
pub fn select_rows(matrix: &DMatrix<f64>, indices: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(indices.len(), matrix.ncols(), |i, j| matrix[(indices[i], j)])
}

pub fn symmetrize(matrix: &mut DMatrix<f64>) {
    let n = matrix.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (matrix[(i, j)] + matrix[(j, i)]);
            matrix[(i, j)] = v;
            matrix[(j, i)] = v;
        }
    }
}

/// `a * diag(d) * a^T` without materializing the diagonal matrix.
pub fn scaled_gram(a: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = a.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= d[j];
    }
    let mut out = &scaled * a.transpose();
    symmetrize(&mut out);
    out
}

/// Number of free entries in a `k x k` lower-triangular matrix.
pub fn tril_len(k: usize) -> usize {
    k * (k + 1) / 2
}

/// Row-major packing of the lower triangle (diagonal included).
pub fn pack_tril(matrix: &DMatrix<f64>) -> Vec<f64> {
    let k = matrix.nrows();
    let mut out = Vec::with_capacity(tril_len(k));
    for i in 0..k {
        for j in 0..=i {
            out.push(matrix[(i, j)]);
        }
    }
    out
}

pub fn unpack_tril(k: usize, packed: &[f64]) -> DMatrix<f64> {
    debug_assert_eq!(packed.len(), tril_len(k));
    let mut out = DMatrix::zeros(k, k);
    let mut idx = 0;
    for i in 0..k {
        for j in 0..=i {
            out[(i, j)] = packed[idx];
            idx += 1;
        }
    }
    out
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}
