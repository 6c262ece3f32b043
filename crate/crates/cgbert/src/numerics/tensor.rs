//! Dense row-major tensors with the handful of operations the model needs.
//!
//! Values are stored as `f64`. In [`Precision::F32`] mode every operation
//! result is rounded through `f32`, so all stored values stay exactly
//! representable in 32 bits (which is what the checkpoint format persists).

use thiserror::Error;

/// Additive mask sentinel standing in for -inf. Large enough that
/// `exp(x + NEG_MASK - rowmax)` underflows to exactly 0.0, small enough
/// not to produce NaNs in intermediate arithmetic.
pub const NEG_MASK: f64 = -1e9;

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("shape {shape:?} expects {expected} elements, got {got}")]
    ShapeData {
        shape: Vec<usize>,
        expected: usize,
        got: usize,
    },
    #[error("shape mismatch: {left:?} vs {right:?} in {op}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("fully masked row {row}")]
    FullyMaskedRow { row: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Numeric mode for a run: F64 for gradient checking, F32 for training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    #[inline]
    pub fn quantize(self, x: f64) -> f64 {
        match self {
            Precision::F64 => x,
            Precision::F32 => x as f32 as f64,
        }
    }

    pub fn quantize_slice(self, xs: &mut [f64]) {
        if self == Precision::F32 {
            for x in xs.iter_mut() {
                *x = *x as f32 as f64;
            }
        }
    }
}

/// Row-major dense tensor. The model only ever needs rank 2 (vectors are
/// `[1, n]`), but the shape is kept general.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, TensorError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(TensorError::ShapeData {
                shape,
                expected,
                got: data.len(),
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn full(shape: Vec<usize>, value: f64) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![value; n],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![1, 1],
            data: vec![value],
        }
    }

    /// A `[1, n]` row vector.
    pub fn row(values: Vec<f64>) -> Self {
        Tensor {
            shape: vec![1, values.len()],
            data: values,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    pub fn scalar_value(&self) -> f64 {
        debug_assert!(self.is_scalar());
        self.data[0]
    }

    /// Rows of a rank-2 tensor.
    pub fn rows(&self) -> usize {
        debug_assert_eq!(self.shape.len(), 2);
        self.shape[0]
    }

    /// Columns of a rank-2 tensor.
    pub fn cols(&self) -> usize {
        debug_assert_eq!(self.shape.len(), 2);
        self.shape[1]
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn quantize(mut self, precision: Precision) -> Self {
        precision.quantize_slice(&mut self.data);
        self
    }

    // ── Forward math used by the graph ops ───────────────────────────

    /// `[m,k] x [k,n] -> [m,n]`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        let (m, k) = (self.rows(), self.cols());
        let (k2, n) = (other.rows(), other.cols());
        if k != k2 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let mut out = vec![0.0; m * n];
        // ikj order: the inner loop runs over contiguous rows of both
        // `other` and `out`, which autovectorizes.
        for i in 0..m {
            let out_row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[p * n..(p + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Tensor {
            shape: vec![m, n],
            data: out,
        })
    }

    /// `[m,k] x [n,k]^T -> [m,n]` without materializing the transpose.
    pub fn matmul_nt(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        let (m, k) = (self.rows(), self.cols());
        let (n, k2) = (other.rows(), other.cols());
        if k != k2 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul_nt",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let a_row = &self.data[i * k..(i + 1) * k];
            for j in 0..n {
                let b_row = &other.data[j * k..(j + 1) * k];
                let mut s = 0.0;
                for (a, b) in a_row.iter().zip(b_row) {
                    s += a * b;
                }
                out[i * n + j] = s;
            }
        }
        Ok(Tensor {
            shape: vec![m, n],
            data: out,
        })
    }

    /// `[k,m]^T x [k,n] -> [m,n]` without materializing the transpose.
    pub fn matmul_tn(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        let (k, m) = (self.rows(), self.cols());
        let (k2, n) = (other.rows(), other.cols());
        if k != k2 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul_tn",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let mut out = vec![0.0; m * n];
        for p in 0..k {
            let a_row = &self.data[p * m..(p + 1) * m];
            let b_row = &other.data[p * n..(p + 1) * n];
            for i in 0..m {
                let a = a_row[i];
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out[i * n..(i + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Tensor {
            shape: vec![m, n],
            data: out,
        })
    }

    /// Elementwise add; `other` may be a `[1,n]` row broadcast against `[m,n]`.
    pub fn add(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        if self.shape == other.shape {
            let data = self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect();
            return Ok(Tensor {
                shape: self.shape.clone(),
                data,
            });
        }
        if other.shape.len() == 2
            && other.shape[0] == 1
            && self.shape.len() == 2
            && self.shape[1] == other.shape[1]
        {
            let n = self.cols();
            let data = self
                .data
                .iter()
                .enumerate()
                .map(|(i, a)| a + other.data[i % n])
                .collect();
            return Ok(Tensor {
                shape: self.shape.clone(),
                data,
            });
        }
        Err(TensorError::ShapeMismatch {
            op: "add",
            left: self.shape.clone(),
            right: other.shape.clone(),
        })
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch {
                op: "sub",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch {
                op: "mul",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn scale(&self, c: f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|a| a * c).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&a| f(a)).collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

/// 0.5 * x * (1 + erf(x / sqrt(2))), the exact-erf form.
#[inline]
pub fn gelu_scalar(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

/// d/dx gelu(x) = Phi(x) + x * phi(x).
#[inline]
pub fn gelu_grad_scalar(x: f64) -> f64 {
    let phi = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2)) + x * phi
}

pub fn gelu(x: &Tensor) -> Tensor {
    x.map(gelu_scalar)
}

/// Row softmax of `scores + mask`. Mask entries are 0 or [`NEG_MASK`];
/// a row with every entry masked is an error.
pub fn masked_softmax(scores: &Tensor, mask: &Tensor) -> Result<Tensor, TensorError> {
    if scores.shape() != mask.shape() {
        return Err(TensorError::ShapeMismatch {
            op: "masked_softmax",
            left: scores.shape().to_vec(),
            right: mask.shape().to_vec(),
        });
    }
    let (rows, cols) = (scores.rows(), scores.cols());
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        let s = scores.row_slice(r);
        let m = mask.row_slice(r);
        if m.iter().all(|&v| v <= NEG_MASK / 2.0) {
            return Err(TensorError::FullyMaskedRow { row: r });
        }
        let mut rowmax = f64::NEG_INFINITY;
        for c in 0..cols {
            rowmax = rowmax.max(s[c] + m[c]);
        }
        let o = &mut out[r * cols..(r + 1) * cols];
        let mut denom = 0.0;
        for c in 0..cols {
            let e = (s[c] + m[c] - rowmax).exp();
            o[c] = e;
            denom += e;
        }
        for v in o.iter_mut() {
            *v /= denom;
        }
    }
    Tensor::new(vec![rows, cols], out)
}

/// Per-row layer normalization with population variance, then scale and shift.
pub fn layer_norm(
    x: &Tensor,
    gain: &Tensor,
    bias: &Tensor,
    eps: f64,
) -> Result<Tensor, TensorError> {
    let n = x.cols();
    if gain.numel() != n || bias.numel() != n {
        return Err(TensorError::ShapeMismatch {
            op: "layer_norm",
            left: x.shape().to_vec(),
            right: gain.shape().to_vec(),
        });
    }
    let rows = x.rows();
    let mut out = vec![0.0; rows * n];
    for r in 0..rows {
        let xr = x.row_slice(r);
        let mean = xr.iter().sum::<f64>() / n as f64;
        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let inv_std = 1.0 / (var + eps).sqrt();
        let o = &mut out[r * n..(r + 1) * n];
        for c in 0..n {
            o[c] = (xr[c] - mean) * inv_std * gain.data()[c] + bias.data()[c];
        }
    }
    Tensor::new(vec![rows, n], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn new_rejects_bad_shape() {
        let err = Tensor::new(vec![2, 3], vec![1.0; 5]).unwrap_err();
        assert!(matches!(err, TensorError::ShapeData { .. }));
    }

    #[test]
    fn matmul_small() {
        let a = Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Tensor::new(vec![3, 2], vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
        // A @ B^T via matmul_nt agrees with explicit matmul
        let bt = Tensor::new(vec![2, 3], vec![7.0, 9.0, 11.0, 8.0, 10.0, 12.0]).unwrap();
        let c2 = a.matmul_nt(&bt).unwrap();
        assert_eq!(c.data(), c2.data());
        // A^T @ B via matmul_tn
        let at = Tensor::new(vec![3, 2], vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]).unwrap();
        let c3 = at.matmul_tn(&b).unwrap();
        let c4 = a.matmul(&b).unwrap();
        assert_eq!(c3.data(), c4.data());
    }

    #[test]
    fn add_broadcasts_row() {
        let a = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::row(vec![10.0, 20.0]);
        assert_eq!(a.add(&b).unwrap().data(), &[11.0, 22.0, 13.0, 24.0]);
        let bad = Tensor::row(vec![1.0, 2.0, 3.0]);
        assert!(a.add(&bad).is_err());
    }

    // Frozen from a 50-digit evaluation of e^x / sum e^x.
    #[test]
    fn softmax_123_matches_high_precision() {
        let s = Tensor::row(vec![1.0, 2.0, 3.0]);
        let m = Tensor::row(vec![0.0, 0.0, 0.0]);
        let p = masked_softmax(&s, &m).unwrap();
        assert_close(p.data()[0], 0.09003057317038046, 1e-4);
        assert_close(p.data()[1], 0.24472847105479765, 1e-4);
        assert_close(p.data()[2], 0.6652409557748219, 1e-4);
    }

    #[test]
    fn softmax_hard_mask_symmetry() {
        let s = Tensor::row(vec![0.0, 0.0, 5.0]);
        let m = Tensor::row(vec![0.0, 0.0, NEG_MASK]);
        let p = masked_softmax(&s, &m).unwrap();
        assert_eq!(p.data()[0], 0.5);
        assert_eq!(p.data()[1], 0.5);
        assert_eq!(p.data()[2], 0.0);
    }

    #[test]
    fn softmax_constant_row_uniform() {
        for c in [-3.5, 0.0, 1e4] {
            let s = Tensor::row(vec![c, c, c]);
            let m = Tensor::row(vec![0.0, 0.0, 0.0]);
            let p = masked_softmax(&s, &m).unwrap();
            for v in p.data() {
                assert_close(*v, 1.0 / 3.0, 1e-12);
            }
        }
    }

    #[test]
    fn softmax_fully_masked_row_errors() {
        let s = Tensor::row(vec![1.0, 2.0]);
        let m = Tensor::row(vec![NEG_MASK, NEG_MASK]);
        let err = masked_softmax(&s, &m).unwrap_err();
        assert_eq!(err, TensorError::FullyMaskedRow { row: 0 });
        assert!(err.to_string().contains("fully masked row"));
    }

    #[test]
    fn gelu_values() {
        assert_eq!(gelu_scalar(0.0), 0.0);
        assert_close(gelu_scalar(10.0), 10.0, 1e-6);
        // Frozen from 1 * Phi(1) at 50 digits.
        assert_close(gelu_scalar(1.0), 0.8413447460685429, 1e-4);
        assert_close(gelu_scalar(0.5), 0.3457312306370066, 1e-9);
        assert_close(gelu_scalar(-1.3), -0.1258406299612934, 1e-9);
    }

    #[test]
    fn layer_norm_zero_variance() {
        let x = Tensor::row(vec![5.0, 5.0, 5.0]);
        let g = Tensor::row(vec![1.0, 1.0, 1.0]);
        let b = Tensor::row(vec![0.0, 0.0, 0.0]);
        let y = layer_norm(&x, &g, &b, 1e-12).unwrap();
        for v in y.data() {
            assert_close(*v, 0.0, 1e-5);
        }
    }

    #[test]
    fn layer_norm_two_points() {
        let x = Tensor::row(vec![1.0, 3.0]);
        let g = Tensor::row(vec![1.0, 1.0]);
        let b = Tensor::row(vec![0.0, 0.0]);
        let y = layer_norm(&x, &g, &b, 1e-12).unwrap();
        assert_close(y.data()[0], -1.0, 1e-5);
        assert_close(y.data()[1], 1.0, 1e-5);
    }

    #[test]
    fn layer_norm_shift_invariant() {
        let x = Tensor::row(vec![0.3, -1.2, 2.5, 0.9]);
        let shifted = x.map(|v| v + 17.25);
        let g = Tensor::row(vec![1.3, 0.7, -0.2, 1.0]);
        let b = Tensor::row(vec![0.1, 0.2, 0.3, 0.4]);
        let y0 = layer_norm(&x, &g, &b, 1e-12).unwrap();
        let y1 = layer_norm(&shifted, &g, &b, 1e-12).unwrap();
        for (a, b) in y0.data().iter().zip(y1.data()) {
            assert_close(*a, *b, 1e-9);
        }
    }

    #[test]
    fn precision_roundtrip() {
        let x = 0.1f64 + 0.2f64;
        let q = Precision::F32.quantize(x);
        assert_eq!(q, q as f32 as f64);
        assert_eq!(Precision::F64.quantize(x), x);
    }
}
