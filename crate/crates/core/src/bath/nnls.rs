//! Small dense non-negative least squares (Lawson-Hanson active set on the
//! normal equations). Problem sizes here are a handful of columns.

use alloc::vec;
use alloc::vec::Vec;

/// Solves `min ||A x - y||` subject to `x >= 0`, where `A` is given through
/// its Gram matrix `ata` (row-major, `n x n`) and `aty = A^T y`.
pub fn nnls_normal(ata: &[f64], aty: &[f64], n: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];
    let scale = aty.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let tol = 1e-13 * scale;

    for _outer in 0..(3 * n + 10) {
        let w = gradient(ata, aty, &x, n);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&a, &b| w[a].partial_cmp(&w[b]).unwrap());
        let Some(j) = candidate else {
            break;
        };
        passive[j] = true;

        for _inner in 0..(3 * n + 10) {
            let s = solve_passive(ata, aty, &passive, n);
            let Some(s) = s else {
                // Singular subproblem: drop the newest column and stop.
                passive[j] = false;
                return x;
            };
            if (0..n).filter(|&i| passive[i]).all(|i| s[i] > 0.0) {
                x = s;
                break;
            }
            let mut alpha = f64::INFINITY;
            for i in 0..n {
                if passive[i] && s[i] <= 0.0 {
                    let a = x[i] / (x[i] - s[i]);
                    if a < alpha {
                        alpha = a;
                    }
                }
            }
            for i in 0..n {
                x[i] += alpha * (s[i] - x[i]);
                if passive[i] && x[i] <= 1e-300 {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
    }
    x
}

fn gradient(ata: &[f64], aty: &[f64], x: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| aty[i] - (0..n).map(|j| ata[i * n + j] * x[j]).sum::<f64>())
        .collect()
}

fn solve_passive(ata: &[f64], aty: &[f64], passive: &[bool], n: usize) -> Option<Vec<f64>> {
    let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
    let m = idx.len();
    let mut mat = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    for (r, &i) in idx.iter().enumerate() {
        rhs[r] = aty[i];
        for (c, &j) in idx.iter().enumerate() {
            mat[r * m + c] = ata[i * n + j];
        }
    }
    let sol = solve_dense(&mut mat, &mut rhs, m)?;
    let mut out = vec![0.0; n];
    for (r, &i) in idx.iter().enumerate() {
        out[i] = sol[r];
    }
    Some(out)
}

/// Gaussian elimination with partial pivoting; `None` when singular.
pub fn solve_dense(mat: &mut [f64], rhs: &mut [f64], m: usize) -> Option<Vec<f64>> {
    let norm = mat.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for col in 0..m {
        let pivot = (col..m).max_by(|&a, &b| mat[a * m + col].abs().partial_cmp(&mat[b * m + col].abs()).unwrap())?;
        if mat[pivot * m + col].abs() <= 1e-14 * norm {
            return None;
        }
        if pivot != col {
            for c in 0..m {
                mat.swap(pivot * m + c, col * m + c);
            }
            rhs.swap(pivot, col);
        }
        for r in col + 1..m {
            let f = mat[r * m + col] / mat[col * m + col];
            for c in col..m {
                mat[r * m + c] -= f * mat[col * m + c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let mut acc = rhs[r];
        for c in r + 1..m {
            acc -= mat[r * m + c] * x[c];
        }
        x[r] = acc / mat[r * m + r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal(a: &[[f64; 2]], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut ata = vec![0.0; 4];
        let mut aty = vec![0.0; 2];
        for (row, &yi) in a.iter().zip(y) {
            for i in 0..2 {
                aty[i] += row[i] * yi;
                for j in 0..2 {
                    ata[i * 2 + j] += row[i] * row[j];
                }
            }
        }
        (ata, aty)
    }

    #[test]
    fn unconstrained_solution_when_positive() {
        let a = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let y = [1.0, 2.0, 3.0];
        let (ata, aty) = normal(&a, &y);
        let x = nnls_normal(&ata, &aty, 2);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn clamps_negative_coefficient() {
        // Unconstrained optimum is (2, -1); NNLS must put x1 = 0.
        let a = [[1.0, 1.0], [1.0, 2.0], [1.0, 3.0]];
        let y = [1.0, 0.0, -1.0];
        let (ata, aty) = normal(&a, &y);
        let x = nnls_normal(&ata, &aty, 2);
        assert_eq!(x[1], 0.0);
        assert!(x[0] >= 0.0);
        // Best single-column fit: x0 = mean(y) = 0.
        assert!(x[0].abs() < 1e-12);
    }
}
