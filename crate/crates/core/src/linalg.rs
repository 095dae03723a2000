use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::Vector;
use crate::measurements::MeasurementSystem;

const EIGEN_MAX_ITER: usize = 10_000;

/// `(1/m) * sum_i phi_i phi_i^T`.
pub fn second_moment_matrix(system: &MeasurementSystem) -> DMatrix<f64> {
    let d = system.dim();
    let mut acc = DMatrix::<f64>::zeros(d, d);
    for phi in system.rows() {
        for i in 0..d {
            for j in i..d {
                acc[(i, j)] += phi[i] * phi[j];
            }
        }
    }
    let scale = 1.0 / system.len() as f64;
    for i in 0..d {
        for j in i..d {
            let v = acc[(i, j)] * scale;
            acc[(i, j)] = v;
            acc[(j, i)] = v;
        }
    }
    acc
}

#[derive(Clone, Debug)]
pub struct Extremes {
    pub min_value: f64,
    pub min_vector: Vector,
    pub max_value: f64,
    pub max_vector: Vector,
}

/// Smallest and largest eigenpairs of a symmetric matrix.
pub fn symmetric_extremes(matrix: &DMatrix<f64>) -> Result<Extremes> {
    let dim = matrix.nrows();
    let eig = SymmetricEigen::try_new(matrix.clone(), f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(Error::EigenNonConvergence { dim })?;
    let values = &eig.eigenvalues;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenNonConvergence { dim });
    }
    // Lowest index wins ties.
    let mut lo = 0;
    let mut hi = 0;
    for i in 1..values.len() {
        if values[i] < values[lo] {
            lo = i;
        }
        if values[i] > values[hi] {
            hi = i;
        }
    }
    let column =
        |i: usize| Vector::from_vec_unchecked(eig.eigenvectors.column(i).iter().copied().collect());
    Ok(Extremes {
        min_value: values[lo],
        min_vector: column(lo),
        max_value: values[hi],
        max_vector: column(hi),
    })
}
