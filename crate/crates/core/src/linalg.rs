//! Small dense linear-algebra helpers.
//!
//! Every linear system in this crate is symmetric positive definite (graph
//! Laplacians regularized on the consensus direction, Hessians of strictly
//! convex functions), so a plain Cholesky factorization covers all solves.
//! Matrices are at most a few dozen rows; no external backend is needed.

use ndarray::{Array1, Array2, ArrayView1};

/// Cholesky factor L (lower triangular, A = L Lᵀ).
///
/// Returns `None` when the matrix is not positive definite, which callers
/// treat as an infeasibility signal rather than an error.
pub fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return None;
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Solve A x = b given the Cholesky factor of A.
pub fn cholesky_solve(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    // forward substitution L y = b
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[[i, k]] * y[k];
        }
        y[i] = sum / l[[i, i]];
    }
    // back substitution Lᵀ x = y
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l[[k, i]] * x[k];
        }
        x[i] = sum / l[[i, i]];
    }
    x
}

/// Solve A x = b for symmetric positive definite A. `None` if A is not PD.
pub fn solve_spd(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    cholesky(a).map(|l| cholesky_solve(&l, b))
}

/// rank-1 update: m += s * a bᵀ
pub fn add_scaled_outer(m: &mut Array2<f64>, s: f64, a: ArrayView1<f64>, b: ArrayView1<f64>) {
    for i in 0..a.len() {
        let sa = s * a[i];
        if sa == 0.0 {
            continue;
        }
        for j in 0..b.len() {
            m[[i, j]] += sa * b[j];
        }
    }
}

pub fn mean(v: &Array1<f64>) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.sum() / v.len() as f64
    }
}

/// Γ v = v − mean(v)·1, the projection onto the zero-mean subspace.
pub fn project_zero_mean(v: &Array1<f64>) -> Array1<f64> {
    let m = mean(v);
    v.mapv(|x| x - m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cholesky_solves_spd_system() {
        let a = array![[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]];
        let b = array![1.0, 2.0, 3.0];
        let x = solve_spd(&a, &b).unwrap();
        let r = a.dot(&x) - &b;
        assert!(r.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(cholesky(&a).is_none());
    }

    #[test]
    fn projection_removes_mean() {
        let v = array![1.0, 2.0, 6.0];
        let p = project_zero_mean(&v);
        assert!(mean(&p).abs() < 1e-15);
        assert!((p[2] - p[0] - 5.0).abs() < 1e-15);
    }
}
