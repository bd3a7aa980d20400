//! Dense linear solves for the small systems built by the TPS warp.

use alloc::vec::Vec;

/// Solves `A x = b` in place by Gaussian elimination with partial pivoting.
/// `a` is row-major `n x n`; `rhs` holds `m` right-hand sides column-wise as
/// `n x m`. Returns `None` when a pivot falls below `tol · max|A|`.
pub(crate) fn solve(mut a: Vec<f64>, mut rhs: Vec<f64>, n: usize, m: usize, tol: f64) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(rhs.len(), n * m);
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .expect("non-empty range");
        if a[pivot * n + col].abs() <= tol * scale {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
            }
            for k in 0..m {
                rhs.swap(pivot * m + k, col * m + k);
            }
        }
        let p = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / p;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            for k in 0..m {
                rhs[row * m + k] -= f * rhs[col * m + k];
            }
        }
    }
    for col in (0..n).rev() {
        let p = a[col * n + col];
        for k in 0..m {
            let mut acc = rhs[col * m + k];
            for j in col + 1..n {
                acc -= a[col * n + j] * rhs[j * m + k];
            }
            rhs[col * m + k] = acc / p;
        }
    }
    Some(rhs)
}
