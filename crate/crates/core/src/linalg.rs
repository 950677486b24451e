//! Dense symmetric eigenvalues by cyclic Jacobi rotations.
//!
//! Matrices are row-major `n × n` slices. Only eigenvalues are produced; the
//! consensus analysis never needs the eigenvectors.

use thiserror::Error;

/// Off-diagonal Frobenius tolerance, relative to `max(1, ‖A‖_F)`.
pub const JACOBI_TOLERANCE: f64 = 1e-12;

/// Upper bound on full sweeps over the upper triangle.
pub const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EigenError {
    #[error("matrix has {len} entries, expected {n}×{n}")]
    Shape { len: usize, n: usize },
    #[error("matrix is not symmetric at ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[i * n + j] * a[i * n + j];
            }
        }
    }
    sum.sqrt()
}

/// Eigenvalues of a symmetric matrix, sorted ascending.
pub fn symmetric_eigenvalues(matrix: &[f64], n: usize) -> Result<Vec<f64>, EigenError> {
    if matrix.len() != n * n {
        return Err(EigenError::Shape {
            len: matrix.len(),
            n,
        });
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if matrix[i * n + j] != matrix[j * n + i] {
                return Err(EigenError::NotSymmetric { i, j });
            }
        }
    }

    let mut a = matrix.to_vec();
    let frobenius = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let threshold = JACOBI_TOLERANCE * frobenius.max(1.0);

    let mut sweeps = 0;
    let mut off = off_diagonal_norm(&a, n);
    while off > threshold {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(EigenError::NoConvergence {
                sweeps,
                off_norm: off,
            });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A <- A J
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                // A <- Jᵀ A
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
            }
        }
        sweeps += 1;
        off = off_diagonal_norm(&a, n);
    }

    let mut values: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Spectral norm of a symmetric matrix: the largest absolute eigenvalue.
pub fn symmetric_spectral_norm(matrix: &[f64], n: usize) -> Result<f64, EigenError> {
    let values = symmetric_eigenvalues(matrix, n)?;
    Ok(values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix_is_returned_sorted() {
        let m = [3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 2.0];
        assert_eq!(symmetric_eigenvalues(&m, 3).unwrap(), vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_by_two_closed_form() {
        // [[2, 1], [1, 2]] has eigenvalues 1 and 3.
        let vals = symmetric_eigenvalues(&[2.0, 1.0, 1.0, 2.0], 2).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14);
        assert!((vals[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn trace_and_frobenius_are_preserved() {
        let m = [
            4.0, 1.0, -2.0, 0.5, //
            1.0, 3.0, 0.0, 1.5, //
            -2.0, 0.0, 1.0, -1.0, //
            0.5, 1.5, -1.0, 2.0,
        ];
        let vals = symmetric_eigenvalues(&m, 4).unwrap();
        let trace: f64 = (0..4).map(|i| m[i * 4 + i]).sum();
        let frob2: f64 = m.iter().map(|v| v * v).sum();
        assert!((vals.iter().sum::<f64>() - trace).abs() < 1e-12);
        assert!((vals.iter().map(|v| v * v).sum::<f64>() - frob2).abs() < 1e-10);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let err = symmetric_eigenvalues(&[1.0, 2.0, 0.0, 1.0], 2).unwrap_err();
        assert_eq!(err, EigenError::NotSymmetric { i: 0, j: 1 });
    }

    #[test]
    fn empty_matrix() {
        assert!(symmetric_eigenvalues(&[], 0).unwrap().is_empty());
    }
}
