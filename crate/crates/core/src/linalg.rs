//! Numeric reference computations used to check the closed forms.
//!
//! Nothing in here knows about the block structure of the covariance
//! matrices; the routines work on arbitrary dense input.

use nalgebra::{DMatrix, SymmetricEigen};

/// Error-free transformation `a + b = s + e`.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Error-free transformation `a * b = p + e` via FMA.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// `init - sum(x_i * y_i)` evaluated in doubled working precision.
fn compensated_residual(init: f64, xs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let mut s = init;
    let mut c = 0.0;
    for (x, y) in xs {
        let (p, pe) = two_prod(x, -y);
        let (t, se) = two_sum(s, p);
        s = t;
        c += pe + se;
    }
    s + c
}

/// Sign and natural log of the absolute value of a determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    pub sign: f64,
    pub ln_abs: f64,
}

impl LogDet {
    pub fn det(&self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.ln_abs.exp()
        }
    }

    pub fn log2_abs(&self) -> f64 {
        self.ln_abs / std::f64::consts::LN_2
    }
}

/// Determinant through an in-place Crout LU with partial pivoting whose
/// inner products are accumulated with compensated summation.
pub fn lu_log_det(m: &DMatrix<f64>) -> LogDet {
    assert!(m.is_square(), "determinant of a non-square matrix");
    let n = m.nrows();
    // row-major working copy
    let mut a: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| m[(i, j)])
        .collect();
    let idx = |i: usize, j: usize| i * n + j;
    let mut sign = 1.0;
    let mut ln_abs = 0.0;

    for k in 0..n {
        for i in k..n {
            let v = compensated_residual(a[idx(i, k)], (0..k).map(|p| (a[idx(i, p)], a[idx(p, k)])));
            a[idx(i, k)] = v;
        }
        let pivot_row = (k..n)
            .max_by(|&x, &y| a[idx(x, k)].abs().total_cmp(&a[idx(y, k)].abs()))
            .unwrap_or(k);
        if pivot_row != k {
            for j in 0..n {
                a.swap(idx(k, j), idx(pivot_row, j));
            }
            sign = -sign;
        }
        let pivot = a[idx(k, k)];
        if pivot == 0.0 {
            return LogDet {
                sign: 0.0,
                ln_abs: f64::NEG_INFINITY,
            };
        }
        for j in k + 1..n {
            let v = compensated_residual(a[idx(k, j)], (0..k).map(|p| (a[idx(k, p)], a[idx(p, j)])));
            a[idx(k, j)] = v;
        }
        for i in k + 1..n {
            a[idx(i, k)] /= pivot;
        }
        if pivot < 0.0 {
            sign = -sign;
        }
        ln_abs += pivot.abs().ln();
    }
    LogDet { sign, ln_abs }
}

pub fn determinant(m: &DMatrix<f64>) -> f64 {
    lu_log_det(m).det()
}

/// Eigenvalues in ascending order with the matching unit eigenvectors as columns.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// Groups ascending eigenvalues whose neighbours lie within
/// `rel_tol * max(1, spectral radius)`; returns `(cluster mean, size)`.
pub fn cluster_eigenvalues(sorted: &[f64], rel_tol: f64) -> Vec<(f64, usize)> {
    let radius = sorted.iter().fold(0.0f64, |r, v| r.max(v.abs()));
    let tol = rel_tol * radius.max(1.0);
    let mut clusters: Vec<(f64, usize, f64)> = Vec::new(); // (sum, count, last)
    for &v in sorted {
        match clusters.last_mut() {
            Some((sum, count, last)) if (v - *last).abs() <= tol => {
                *sum += v;
                *count += 1;
                *last = v;
            }
            _ => clusters.push((v, 1, v)),
        }
    }
    clusters
        .into_iter()
        .map(|(sum, count, _)| (sum / count as f64, count))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn determinant_of_known_matrices() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        assert_relative_eq!(determinant(&m), 4.0, max_relative = 1e-14);
        let p = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_relative_eq!(determinant(&p), -1.0, max_relative = 1e-15);
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(determinant(&s), 0.0);
    }

    #[test]
    fn determinant_matches_nalgebra() {
        let m = DMatrix::from_fn(6, 6, |i, j| {
            ((i * 7 + j * 3) % 5) as f64 + if i == j { 3.0 } else { 0.0 }
        });
        assert_relative_eq!(determinant(&m), m.clone().determinant(), max_relative = 1e-12);
    }

    #[test]
    fn clusters_merge_close_values() {
        let c = cluster_eigenvalues(&[0.2, 0.2 + 1e-12, 1.0, 1.0, 2.6], 1e-8);
        assert_eq!(c.len(), 3);
        assert_eq!(c[0].1, 2);
        assert_eq!(c[1].1, 2);
        assert_eq!(c[2].1, 1);
    }
}
