//! Dense square linear systems by Gaussian elimination with row pivoting.

use thiserror::Error;

/// Pivots smaller than this multiple of the original row scale are treated as zero.
pub const PIVOT_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinearError {
    #[error("matrix is singular (pivot {pivot:e} at column {column})")]
    SingularMatrix { column: usize, pivot: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Solves `a · x = b` for a square, row-major `a`.
///
/// Rows are pivoted on the largest remaining magnitude in each column. A pivot
/// below `PIVOT_TOLERANCE` times the largest entry of its original row is
/// reported as [`LinearError::SingularMatrix`].
pub fn solve_linear(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>, LinearError> {
    let n = a.len();
    if n == 0 {
        return Err(LinearError::Dimension("empty system".into()));
    }
    if b.len() != n {
        return Err(LinearError::Dimension(format!(
            "right-hand side has length {} for a {n}x{n} system",
            b.len()
        )));
    }
    if let Some((i, row)) = a.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(LinearError::Dimension(format!(
            "row {i} has length {} for a {n}x{n} system",
            row.len()
        )));
    }

    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut rhs = b.to_vec();
    let mut scale: Vec<f64> = m
        .iter()
        .map(|row| row.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
        .collect();

    for col in 0..n {
        let (pivot_row, pivot_abs) = (col..n)
            .map(|r| (r, m[r][col].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if scale[pivot_row] == 0.0 || pivot_abs < PIVOT_TOLERANCE * scale[pivot_row] {
            return Err(LinearError::SingularMatrix {
                column: col,
                pivot: m[pivot_row][col],
            });
        }
        m.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        scale.swap(col, pivot_row);

        let pivot = m[col][col];
        let (upper, lower) = m.split_at_mut(col + 1);
        let pivot_row = &upper[col];
        for (offset, row) in lower.iter_mut().enumerate() {
            let factor = row[col] / pivot;
            if factor == 0.0 {
                continue;
            }
            row[col] = 0.0;
            for k in col + 1..n {
                row[k] -= factor * pivot_row[k];
            }
            rhs[col + 1 + offset] -= factor * rhs[col];
        }
    }

    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let tail: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (rhs[i] - tail) / m[i][i];
    }
    Ok(x)
}

/// Max-norm of `a · x − b`.
pub fn residual_max_norm(a: &[Vec<f64>], x: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(row, bi)| {
            let ax: f64 = row.iter().zip(x).map(|(aij, xj)| aij * xj).sum();
            (ax - bi).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    #[test]
    fn identity_returns_rhs() {
        let a = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let x = solve_linear(&a, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn zero_matrix_is_singular() {
        let a = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        assert!(matches!(
            solve_linear(&a, &[1.0, 1.0]),
            Err(LinearError::SingularMatrix { .. })
        ));
    }

    #[test]
    fn rank_deficient_is_singular() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(matches!(
            solve_linear(&a, &[1.0, 2.0]),
            Err(LinearError::SingularMatrix { .. })
        ));
    }

    #[test]
    fn two_by_two_back_substitution() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let b = [3.0, 5.0];
        let x = solve_linear(&a, &b).unwrap();
        assert!(residual_max_norm(&a, &x, &b) <= 1e-9);
        // 2x + y = 3, x + 3y = 5 gives x = 4/5, y = 7/5
        assert!((x[0] - 0.8).abs() < 1e-14);
        assert!((x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn needs_row_exchange() {
        let a = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let x = solve_linear(&a, &[2.0, 3.0]).unwrap();
        assert_eq!(x, vec![3.0, 2.0]);
    }

    #[test]
    fn dimension_errors() {
        assert!(matches!(
            solve_linear(&[], &[]),
            Err(LinearError::Dimension(_))
        ));
        assert!(matches!(
            solve_linear(&[vec![1.0, 0.0]], &[1.0]),
            Err(LinearError::Dimension(_))
        ));
        assert!(matches!(
            solve_linear(&[vec![1.0]], &[1.0, 2.0]),
            Err(LinearError::Dimension(_))
        ));
    }

    #[test]
    fn residual_bound_on_random_well_conditioned_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let n = rng.gen_range(1..=12);
            // Diagonal dominance bounds the condition number well below 1e6.
            let mut a: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            for (i, row) in a.iter_mut().enumerate() {
                let off: f64 = row.iter().map(|v: &f64| v.abs()).sum();
                row[i] = off + rng.gen_range(0.5..2.0);
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let x = solve_linear(&a, &b).unwrap();
            assert!(residual_max_norm(&a, &x, &b) <= 1e-9 * (1.0 + max_abs(&b)));
        }
    }
}
