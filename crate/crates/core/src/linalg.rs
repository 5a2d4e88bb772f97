//! Small dense linear solves.

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
///
/// Each row is first scaled by its largest magnitude so that `pivot_tol`
/// is relative. Returns `None` when a pivot falls below `pivot_tol`.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>, pivot_tol: f64) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|r| r.len() == n));
    for (row, rhs) in a.iter_mut().zip(b.iter_mut()) {
        let scale = row.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if scale == 0.0 || !scale.is_finite() {
            return None;
        }
        row.iter_mut().for_each(|x| *x /= scale);
        *rhs /= scale;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < pivot_tol {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= factor * a[col][c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - tail) / a[r][r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_with_pivoting() {
        // zero leading entry forces a row swap
        let a = vec![vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]];
        let x = solve_dense(a.clone(), vec![5.0, 3.0, 6.0], 1e-12).unwrap();
        for (row, rhs) in a.iter().zip([5.0, 3.0, 6.0]) {
            let lhs: f64 = row.iter().zip(&x).map(|(p, q)| p * q).sum();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_is_none() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(solve_dense(a, vec![1.0, 2.0], 1e-12).is_none());
    }

    #[test]
    fn empty_system() {
        assert_eq!(solve_dense(vec![], vec![], 1e-12), Some(vec![]));
    }
}
