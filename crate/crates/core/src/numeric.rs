//! Small floating-point helpers shared by the checkers.

use nalgebra::DMatrix;

/// Relative pivot tolerance used for numerical rank decisions.
pub const RANK_TOL: f64 = 1e-9;

/// Numerical rank by Gaussian elimination with full pivoting. Pivots smaller
/// than `rel_tol` times the first (largest) pivot count as zero.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let mut a = m.clone();
    let (rows, cols) = a.shape();
    let mut first = None;
    let mut rank = 0;
    for k in 0..rows.min(cols) {
        let mut best = (k, k, 0.0f64);
        for i in k..rows {
            for j in k..cols {
                let v = a[(i, j)].abs();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        let (pi, pj, pv) = best;
        let scale = *first.get_or_insert(pv);
        if pv == 0.0 || pv <= rel_tol * scale {
            break;
        }
        a.swap_rows(k, pi);
        a.swap_columns(k, pj);
        let pivot = a[(k, k)];
        for i in k + 1..rows {
            let f = a[(i, k)] / pivot;
            if f == 0.0 {
                continue;
            }
            for j in k..cols {
                let d = f * a[(k, j)];
                a[(i, j)] -= d;
            }
        }
        rank += 1;
    }
    rank
}

/// Induced infinity norm (maximum absolute row sum).
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Central-difference step `ε^{1/3}·max(1, |x|)`.
pub fn fd_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(1.0)
}
