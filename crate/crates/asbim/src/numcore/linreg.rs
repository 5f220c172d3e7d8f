//! Ordinary least squares via normal equations with partial pivoting.
//! Small fixed designs only (a handful of predictors).

use crate::error::{Error, Result};

/// A fitted least-squares model.
#[derive(Debug, Clone)]
pub struct LeastSquaresFit {
    /// One coefficient per design column.
    pub coef: Vec<f64>,
    /// Residual standard deviation, sqrt(SSE / (n - p)); zero when the
    /// fit is exact.
    pub residual_sd: f64,
}

impl LeastSquaresFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        row.iter().zip(&self.coef).map(|(x, b)| x * b).sum()
    }
}

/// Fit `y ~ X` by ordinary least squares. Rows of `xs` are design rows
/// (include a leading 1 for an intercept). Errors if the system is
/// singular or there are fewer observations than predictors.
pub fn least_squares(xs: &[Vec<f64>], ys: &[f64]) -> Result<LeastSquaresFit> {
    let n = xs.len();
    if n == 0 || n != ys.len() {
        return Err(Error::Config(format!(
            "least squares needs matching nonzero rows, got {} xs and {} ys",
            n,
            ys.len()
        )));
    }
    let p = xs[0].len();
    if p == 0 || xs.iter().any(|r| r.len() != p) {
        return Err(Error::Config("ragged design matrix".into()));
    }
    if n < p {
        return Err(Error::Degenerate(format!(
            "least squares underdetermined: {n} rows for {p} predictors"
        )));
    }

    // Normal equations: (X'X) b = X'y.
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (row, &y) in xs.iter().zip(ys) {
        for i in 0..p {
            xty[i] += row[i] * y;
            for j in 0..p {
                xtx[i][j] += row[i] * row[j];
            }
        }
    }
    let coef = solve(&mut xtx, &mut xty)?;

    let mut sse = 0.0;
    for (row, &y) in xs.iter().zip(ys) {
        let pred: f64 = row.iter().zip(&coef).map(|(x, b)| x * b).sum();
        sse += (y - pred) * (y - pred);
    }
    let dof = n.saturating_sub(p);
    let residual_sd = if dof > 0 { (sse / dof as f64).sqrt() } else { 0.0 };

    Ok(LeastSquaresFit { coef, residual_sd })
}

/// Gaussian elimination with partial pivoting, in place.
fn solve(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<Vec<f64>> {
    let p = b.len();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    for col in 0..p {
        let pivot_row = (col..p)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot_row][col].abs() < 1e-12 * scale {
            return Err(Error::Degenerate("singular design matrix".into()));
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..p {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..p {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; p];
    for col in (0..p).rev() {
        let mut acc = b[col];
        for k in col + 1..p {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Ok(x)
}
