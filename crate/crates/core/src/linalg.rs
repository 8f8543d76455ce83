//! Small dense linear solves.

use crate::error::{Error, Result};

/// LU factors of a row-scaled square matrix, with the row permutation.
struct Lu {
    lu: Vec<Vec<f64>>,
    perm: Vec<usize>,
    scale: Vec<f64>,
}

impl Lu {
    fn factor(a: &[Vec<f64>]) -> Result<Self> {
        let n = a.len();
        let scale: Vec<f64> = a
            .iter()
            .map(|row| {
                let m = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if m > 0.0 {
                    1.0 / m
                } else {
                    1.0
                }
            })
            .collect();
        let mut lu: Vec<Vec<f64>> = a
            .iter()
            .zip(&scale)
            .map(|(row, s)| row.iter().map(|v| v * s).collect())
            .collect();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| lu[i][col].abs().total_cmp(&lu[j][col].abs()))
                .expect("nonempty range");
            if lu[pivot][col].abs() < f64::EPSILON * 1e-3 {
                return Err(Error::IllConditioned(f64::INFINITY));
            }
            lu.swap(col, pivot);
            perm.swap(col, pivot);
            let (top, rest) = lu.split_at_mut(col + 1);
            let pivot_row = &top[col];
            for row in rest {
                let f = row[col] / pivot_row[col];
                row[col] = f;
                for (r, p) in row[col + 1..].iter_mut().zip(&pivot_row[col + 1..]) {
                    *r -= f * p;
                }
            }
        }
        Ok(Lu { lu, perm, scale })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p] * self.scale[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[i][j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[i][j] * x[j];
            }
            x[i] /= self.lu[i][i];
        }
        x
    }
}

fn residual(a: &[Vec<f64>], x: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(row, &bi)| bi - row.iter().zip(x).map(|(aij, xj)| aij * xj).sum::<f64>())
        .collect()
}

/// Solves `a x = b` with row scaling, partial pivoting and one step of
/// iterative refinement. Returns `x` and the max-norm residual.
pub(crate) fn solve(a: &[Vec<f64>], b: &[f64]) -> Result<(Vec<f64>, f64)> {
    assert!(a.iter().all(|row| row.len() == a.len()) && b.len() == a.len());
    let lu = Lu::factor(a)?;
    let mut x = lu.solve(b);
    let r = residual(a, &x, b);
    let dx = lu.solve(&r);
    for (xi, di) in x.iter_mut().zip(dx) {
        *xi += di;
    }
    let res = residual(a, &x, b).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((x, res))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_systems() {
        let a = vec![vec![0.5, 0.25], vec![1.0, 1.0]];
        let (x, res) = solve(&a, &[0.0, 1.0]).unwrap();
        assert!((x[0] + 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        assert!(res < 1e-15);

        let a = vec![vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 1.0], vec![3.0, 0.0, -1.0]];
        let (x, _) = solve(&a, &[3.0, 3.0, 2.0]).unwrap();
        for (v, e) in x.iter().zip([1.0, 1.0, 1.0]) {
            assert!((v - e).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_singular() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(solve(&a, &[1.0, 2.0]).is_err());
    }
}
