//! Principal coordinates analysis (classical multidimensional scaling).

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::Scalar;

/// Classical scaling of an `n × n` dissimilarity matrix into `k` dimensions.
///
/// Gower double-centring of the squared dissimilarities followed by a
/// symmetric eigendecomposition. Axes are ordered by decreasing eigenvalue;
/// axes with non-positive eigenvalues (non-Euclidean input) are zeroed.
/// Returns one row of `k` coordinates per point.
pub fn pcoa<T: Scalar>(dist: &[Vec<T>], k: usize) -> Result<Vec<Vec<T>>> {
    let n = dist.len();
    if n == 0 {
        return Err(Error::Data("empty dissimilarity matrix".into()));
    }
    if dist.iter().any(|row| row.len() != n) {
        return Err(Error::Data("dissimilarity matrix is not square".into()));
    }
    if k > n.saturating_sub(1).max(1) {
        return Err(Error::Data(format!("cannot embed {n} points in {k} dimensions")));
    }
    let tol = 1e-9;
    for i in 0..n {
        if dist[i][i].as_f64().abs() > tol {
            return Err(Error::Data(format!("dissimilarity diagonal entry {i} is nonzero")));
        }
        for j in (i + 1)..n {
            let (a, b) = (dist[i][j].as_f64(), dist[j][i].as_f64());
            if (a - b).abs() > tol * (1.0 + a.abs()) {
                return Err(Error::Data(format!("dissimilarity matrix is not symmetric at ({i}, {j})")));
            }
        }
    }

    let sq = DMatrix::from_fn(n, n, |i, j| {
        let d = dist[i][j].as_f64();
        -0.5 * d * d
    });
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let centred = DMatrix::from_fn(n, n, |i, j| sq[(i, j)] - row_means[i] - row_means[j] + grand);

    let eig = SymmetricEigen::new(centred);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).expect("NaN eigenvalue"));

    let mut coords = vec![vec![T::zero(); k]; n];
    for (axis, &col) in order.iter().take(k).enumerate() {
        let lambda = eig.eigenvalues[col];
        if lambda <= 1e-12 {
            continue;
        }
        let scale = lambda.sqrt();
        for (i, row) in coords.iter_mut().enumerate() {
            row[axis] = T::lit(eig.eigenvectors[(i, col)] * scale);
        }
    }
    Ok(coords)
}
