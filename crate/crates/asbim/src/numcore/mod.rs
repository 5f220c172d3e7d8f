//! Minimal dense numerical kernel: vectors, matrices, activations,
//! masked softmax, a reverse-mode gradient tape, and a finite-difference
//! gradient checker. All arithmetic is f64.

mod fd;
pub mod linreg;
pub mod tape;

pub use fd::finite_difference_check;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense vector of finite f64 values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Build from raw elements, rejecting NaN/Inf.
    pub fn new(elements: Vec<f64>) -> Result<Self> {
        if let Some(i) = elements.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!(
                "vector element {i} is not finite"
            )));
        }
        Ok(Vector(elements))
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Dense row-major matrix of finite f64 values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Config(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Config(format!(
                "matrix {rows}x{cols} needs {} elements, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!(
                "matrix element {i} is not finite"
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// `W x + b`.
pub fn dense_forward(x: &Vector, w: &Matrix, b: &Vector) -> Result<Vector> {
    if w.cols() != x.dim() || w.rows() != b.dim() {
        return Err(Error::Config(format!(
            "dense dimension mismatch: W is {}x{}, x has {}, b has {}",
            w.rows(),
            w.cols(),
            x.dim(),
            b.dim()
        )));
    }
    let mut out = Vec::with_capacity(w.rows());
    for r in 0..w.rows() {
        let row = w.row(r);
        let mut acc = b[r];
        for (wc, xc) in row.iter().zip(x.iter()) {
            acc += wc * xc;
        }
        out.push(acc);
    }
    Ok(Vector(out))
}

/// Elementwise `max(0, x)`.
pub fn relu(x: &Vector) -> Vector {
    Vector(x.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect())
}

/// Softmax over unmasked positions, with max-subtraction for stability.
///
/// Masked positions get exactly 0; unmasked outputs are positive and sum
/// to 1. Errors if every position is masked.
pub fn masked_softmax(scores: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if scores.len() != mask.len() {
        return Err(Error::Config(format!(
            "masked_softmax length mismatch: {} scores vs {} mask entries",
            scores.len(),
            mask.len()
        )));
    }
    let max = scores
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&s, _)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Degenerate(
            "masked_softmax: all positions masked".into(),
        ));
    }
    let mut out = vec![0.0; scores.len()];
    let mut sum = 0.0;
    for (i, (&s, &m)) in scores.iter().zip(mask).enumerate() {
        if m {
            let e = (s - max).exp();
            out[i] = e;
            sum += e;
        }
    }
    for v in out.iter_mut() {
        *v /= sum;
    }
    Ok(out)
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dense_identity() {
        let x = Vector::new(vec![1.0, 2.0]).unwrap();
        let w = Matrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let b = Vector::zeros(2);
        let y = dense_forward(&x, &w, &b).unwrap();
        assert_eq!(y.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn dense_forced_zero() {
        let x = Vector::new(vec![1.0, 1.0]).unwrap();
        let w = Matrix::new(1, 2, vec![2.0, 3.0]).unwrap();
        let b = Vector::new(vec![-5.0]).unwrap();
        let y = dense_forward(&x, &w, &b).unwrap();
        assert_eq!(y.as_slice(), &[0.0]);
    }

    #[test]
    fn dense_matches_dot_product_oracle() {
        // Independent elementwise oracle over a fixed pseudo-random instance.
        let q = 4;
        let h = 3;
        let mut state = 0x9E37u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        let xv: Vec<f64> = (0..q).map(|_| next()).collect();
        let wv: Vec<f64> = (0..h * q).map(|_| next()).collect();
        let bv: Vec<f64> = (0..h).map(|_| next()).collect();

        let x = Vector::new(xv.clone()).unwrap();
        let w = Matrix::new(h, q, wv.clone()).unwrap();
        let b = Vector::new(bv.clone()).unwrap();
        let y = dense_forward(&x, &w, &b).unwrap();

        for r in 0..h {
            let mut expect = bv[r];
            for c in 0..q {
                expect += wv[r * q + c] * xv[c];
            }
            assert!((y[r] - expect).abs() < 1e-12, "row {r}");
        }
    }

    #[test]
    fn dense_dimension_mismatch() {
        let x = Vector::new(vec![1.0, 2.0, 3.0]).unwrap();
        let w = Matrix::new(2, 2, vec![1.0; 4]).unwrap();
        let b = Vector::zeros(2);
        assert!(matches!(dense_forward(&x, &w, &b), Err(Error::Config(_))));
    }

    #[test]
    fn relu_definition() {
        let x = Vector::new(vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).as_slice(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn relu_all_negative_and_all_positive() {
        let neg = Vector::new(vec![-3.0, -0.5]).unwrap();
        assert_eq!(relu(&neg).as_slice(), &[0.0, 0.0]);
        let pos = Vector::new(vec![0.25, 7.0]).unwrap();
        assert_eq!(relu(&pos).as_slice(), pos.as_slice());
    }

    #[test]
    fn softmax_symmetry() {
        let out = masked_softmax(&[0.0, 0.0, 0.0], &[true, true, true]).unwrap();
        for v in &out {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_single_unmasked() {
        let out = masked_softmax(&[5.0, 0.0], &[true, false]).unwrap();
        assert_eq!(out, vec![1.0, 0.0]);
    }

    #[test]
    fn softmax_matches_direct_evaluation() {
        let scores = [1.0, 2.0, 3.0];
        let out = masked_softmax(&scores, &[true, true, true]).unwrap();
        let sum: f64 = scores.iter().map(|s| s.exp()).sum();
        for (o, s) in out.iter().zip(&scores) {
            assert!((o - s.exp() / sum).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_all_masked_is_error() {
        assert!(matches!(
            masked_softmax(&[1.0, 2.0], &[false, false]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn vector_rejects_nan() {
        assert!(Vector::new(vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::new(1, 2, vec![1.0, f64::INFINITY]).is_err());
    }

    proptest! {
        #[test]
        fn relu_idempotent(xs in proptest::collection::vec(-1e6f64..1e6, 1..32)) {
            let v = Vector::new(xs).unwrap();
            let once = relu(&v);
            let twice = relu(&once);
            prop_assert_eq!(once.as_slice(), twice.as_slice());
        }

        #[test]
        fn softmax_properties(
            scores in proptest::collection::vec(-30.0f64..30.0, 2..12),
            mask_bits in proptest::collection::vec(any::<bool>(), 2..12),
        ) {
            let n = scores.len().min(mask_bits.len());
            let scores = &scores[..n];
            let mut mask = mask_bits[..n].to_vec();
            if !mask.iter().any(|&m| m) {
                mask[0] = true;
            }
            let out = masked_softmax(scores, &mask).unwrap();
            let mut sum = 0.0;
            for (i, &a) in out.iter().enumerate() {
                prop_assert!(a >= 0.0);
                if !mask[i] {
                    prop_assert_eq!(a, 0.0);
                }
                sum += a;
            }
            prop_assert!((sum - 1.0).abs() <= 1e-12);

            // Shift invariance over unmasked scores.
            let shifted: Vec<f64> = scores.iter().map(|s| s + 13.5).collect();
            let out2 = masked_softmax(&shifted, &mask).unwrap();
            for (a, b) in out.iter().zip(&out2) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn dense_is_linear_in_x(
            xs in proptest::collection::vec(-10.0f64..10.0, 3),
            ys in proptest::collection::vec(-10.0f64..10.0, 3),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let w = Matrix::new(2, 3, vec![0.5, -1.0, 2.0, 1.5, 0.25, -0.75]).unwrap();
            let bias = Vector::new(vec![0.3, -0.7]).unwrap();
            let x = Vector::new(xs.clone()).unwrap();
            let y = Vector::new(ys.clone()).unwrap();
            let combo = Vector::new(
                xs.iter().zip(&ys).map(|(xi, yi)| a * xi + b * yi).collect(),
            ).unwrap();

            let f_combo = dense_forward(&combo, &w, &bias).unwrap();
            let fx = dense_forward(&x, &w, &bias).unwrap();
            let fy = dense_forward(&y, &w, &bias).unwrap();
            for i in 0..2 {
                let expect = a * fx[i] + b * fy[i] - (a + b - 1.0) * bias[i];
                prop_assert!((f_combo[i] - expect).abs() < 1e-9);
            }
        }
    }
}
