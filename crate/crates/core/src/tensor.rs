// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dense row-major tensors and the handful of kernels the transformer needs.
//!
//! Every kernel reduces sequentially along the last axis so results are
//! reproducible run to run. Non-finite outputs are reported as errors.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inverse-frequency base for rotary embeddings (GPT-NeoX default).
pub const ROTARY_BASE: f64 = 10_000.0;

/// Element precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    #[default]
    F32,
    F64,
}

/// Floating-point element type of a [`Tensor`].
pub trait Scalar: Float + Default + Debug + Send + Sync + 'static {
    const DTYPE: DType;
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    const DTYPE: DType = DType::F32;
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const DTYPE: DType = DType::F64;
    fn from_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Dense row-major array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::ShapeMismatch {
                op: "tensor",
                expected: shape,
                got: vec![data.len()],
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![T::zero(); n],
        }
    }

    pub fn vector(data: Vec<T>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn scalar(v: T) -> Self {
        Self {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn from_f64(shape: Vec<usize>, data: &[f64]) -> Result<Self> {
        Self::new(shape, data.iter().map(|&v| T::from_f64(v)).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn last_dim(&self) -> usize {
        self.shape.last().copied().unwrap_or(0)
    }

    /// Number of rows when viewed as `[rows, last_dim]`.
    pub fn rows(&self) -> usize {
        match self.last_dim() {
            0 => 0,
            d => self.data.len() / d,
        }
    }

    pub fn row(&self, i: usize) -> &[T] {
        let d = self.last_dim();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        let d = self.last_dim();
        &mut self.data[i * d..(i + 1) * d]
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                expected: shape,
                got: self.shape,
            });
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.as_f64()).collect()
    }
}

fn finite<T: Scalar>(op: &'static str, t: Tensor<T>) -> Result<Tensor<T>> {
    if t.is_finite() {
        Ok(t)
    } else {
        Err(Error::NonFinite { op })
    }
}

fn mismatch(op: &'static str, expected: &[usize], got: &[usize]) -> Error {
    Error::ShapeMismatch {
        op,
        expected: expected.to_vec(),
        got: got.to_vec(),
    }
}

/// Matrix product over the last two axes, batched over leading axes.
///
/// A rank-2 right operand is broadcast across the batch of the left one.
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.shape.len() < 2 || b.shape.len() < 2 {
        return Err(mismatch("matmul", &[0, 0], &a.shape));
    }
    let (m, k) = (a.shape[a.shape.len() - 2], a.shape[a.shape.len() - 1]);
    let (k2, n) = (b.shape[b.shape.len() - 2], b.shape[b.shape.len() - 1]);
    if k != k2 {
        return Err(mismatch("matmul", &a.shape, &b.shape));
    }
    let batch_a: usize = a.shape[..a.shape.len() - 2].iter().product();
    let broadcast = b.shape.len() == 2;
    if !broadcast
        && a.shape[..a.shape.len() - 2] != b.shape[..b.shape.len() - 2] {
            return Err(mismatch("matmul", &a.shape, &b.shape));
        }
    let mut out = vec![T::zero(); batch_a * m * n];
    for bi in 0..batch_a {
        let ao = bi * m * k;
        let bo = if broadcast { 0 } else { bi * k * n };
        let oo = bi * m * n;
        for i in 0..m {
            for j in 0..n {
                let mut acc = T::zero();
                for p in 0..k {
                    acc = acc + a.data[ao + i * k + p] * b.data[bo + p * n + j];
                }
                out[oo + i * n + j] = acc;
            }
        }
    }
    let mut shape = a.shape[..a.shape.len() - 2].to_vec();
    shape.extend([m, n]);
    finite("matmul", Tensor { shape, data: out })
}

/// `a · bᵀ` for rank-2 operands: `[m, k] × [n, k] → [m, n]`.
pub fn matmul_nt<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let k = a.last_dim();
    if b.last_dim() != k {
        return Err(mismatch("matmul_nt", &a.shape, &b.shape));
    }
    let (m, n) = (a.rows(), b.rows());
    let mut out = Vec::with_capacity(m * n);
    for i in 0..m {
        let ar = a.row(i);
        for j in 0..n {
            out.push(dot(ar, b.row(j)));
        }
    }
    finite("matmul_nt", Tensor { shape: vec![m, n], data: out })
}

/// `aᵀ · b` for rank-2 operands: `[k, m] × [k, n] → [m, n]`.
pub fn matmul_tn<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.rows() != b.rows() {
        return Err(mismatch("matmul_tn", &a.shape, &b.shape));
    }
    let (k, m, n) = (a.rows(), a.last_dim(), b.last_dim());
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        for j in 0..n {
            let mut acc = T::zero();
            for p in 0..k {
                acc = acc + a.data[p * m + i] * b.data[p * n + j];
            }
            out[i * n + j] = acc;
        }
    }
    finite("matmul_tn", Tensor { shape: vec![m, n], data: out })
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc = acc + x * y;
    }
    acc
}

/// `x · Wᵀ + bias` with `W` stored `[out, in]`.
pub fn linear<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, bias: Option<&Tensor<T>>) -> Result<Tensor<T>> {
    let mut y = matmul_nt(x, w)?;
    if let Some(b) = bias {
        let n = y.last_dim();
        if b.len() != n {
            return Err(mismatch("linear", &[n], &b.shape));
        }
        for r in 0..y.rows() {
            for (v, &bb) in y.row_mut(r).iter_mut().zip(&b.data) {
                *v = *v + bb;
            }
        }
    }
    finite("linear", y)
}

pub fn add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.shape != b.shape {
        return Err(mismatch("add", &a.shape, &b.shape));
    }
    let data = a.data.iter().zip(&b.data).map(|(&x, &y)| x + y).collect();
    finite("add", Tensor { shape: a.shape.clone(), data })
}

pub fn scale<T: Scalar>(a: &Tensor<T>, s: T) -> Result<Tensor<T>> {
    finite("scale", a.map(|v| v * s))
}

/// Softmax over the last axis with max subtraction.
pub fn softmax_lastdim<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    if x.last_dim() == 0 {
        return Err(Error::EmptyLastDim { op: "softmax" });
    }
    let mut out = x.clone();
    for r in 0..out.rows() {
        softmax_in_place(out.row_mut(r));
    }
    finite("softmax", out)
}

fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().fold(T::neg_infinity(), |m, &v| if v > m { v } else { m });
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum = sum + *v;
    }
    for v in row.iter_mut() {
        *v = *v / sum;
    }
}

/// Log-softmax of a single slice.
pub fn log_softmax<T: Scalar>(row: &[T]) -> Result<Vec<T>> {
    if row.is_empty() {
        return Err(Error::EmptyLastDim { op: "log_softmax" });
    }
    let max = row.iter().fold(T::neg_infinity(), |m, &v| if v > m { v } else { m });
    let mut sum = T::zero();
    for &v in row {
        sum = sum + (v - max).exp();
    }
    let lse = max + sum.ln();
    let out: Vec<T> = row.iter().map(|&v| v - lse).collect();
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::NonFinite { op: "log_softmax" })
    }
}

/// Row-wise softmax over a square score matrix with entries `j > i` masked out.
pub fn causal_softmax<T: Scalar>(scores: &Tensor<T>) -> Result<Tensor<T>> {
    let n = scores.last_dim();
    if n == 0 {
        return Err(Error::EmptyLastDim { op: "causal_softmax" });
    }
    let mut out = scores.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let keep = (r + 1).min(n);
        softmax_in_place(&mut row[..keep]);
        for v in &mut row[keep..] {
            *v = T::zero();
        }
    }
    finite("causal_softmax", out)
}

/// Per-row standardisation followed by the affine `gain * x̂ + bias`.
pub fn layer_norm<T: Scalar>(x: &Tensor<T>, gain: &Tensor<T>, bias: &Tensor<T>, eps: T) -> Result<Tensor<T>> {
    let d = x.last_dim();
    if gain.len() != d || bias.len() != d {
        return Err(mismatch("layer_norm", &[d], &gain.shape));
    }
    if d == 0 {
        return Err(Error::EmptyLastDim { op: "layer_norm" });
    }
    let mut out = x.clone();
    for r in 0..out.rows() {
        normalize_row(out.row_mut(r), eps);
        for ((v, &g), &b) in out.row_mut(r).iter_mut().zip(&gain.data).zip(&bias.data) {
            *v = *v * g + b;
        }
    }
    finite("layer_norm", out)
}

/// Standardises `row` in place; returns `(mean, 1/std)`.
pub(crate) fn normalize_row<T: Scalar>(row: &mut [T], eps: T) -> (T, T) {
    let n = T::from_f64(row.len() as f64);
    let mut sum = T::zero();
    for &v in row.iter() {
        sum = sum + v;
    }
    let mean = sum / n;
    let mut var = T::zero();
    for &v in row.iter() {
        let c = v - mean;
        var = var + c * c;
    }
    var = var / n;
    let inv = T::one() / (var + eps).sqrt();
    for v in row.iter_mut() {
        *v = (*v - mean) * inv;
    }
    (mean, inv)
}

/// Exact (erf-based) GELU.
pub fn gelu<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    finite("gelu", x.map(gelu_scalar))
}

pub(crate) fn gelu_scalar<T: Scalar>(v: T) -> T {
    let x = v.as_f64();
    T::from_f64(0.5 * x * (1.0 + libm::erf(x / core::f64::consts::SQRT_2)))
}

pub(crate) fn gelu_grad_scalar<T: Scalar>(v: T) -> T {
    let x = v.as_f64();
    let cdf = 0.5 * (1.0 + libm::erf(x / core::f64::consts::SQRT_2));
    let pdf = libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * core::f64::consts::PI);
    T::from_f64(cdf + x * pdf)
}

pub fn slice_cols<T: Scalar>(x: &Tensor<T>, start: usize, len: usize) -> Result<Tensor<T>> {
    let d = x.last_dim();
    if start + len > d {
        return Err(mismatch("slice_cols", &[start + len], &x.shape));
    }
    let rows = x.rows();
    let mut data = Vec::with_capacity(rows * len);
    for r in 0..rows {
        data.extend_from_slice(&x.row(r)[start..start + len]);
    }
    Ok(Tensor { shape: vec![rows, len], data })
}

pub fn concat_cols<T: Scalar>(parts: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let rows = parts.first().map_or(0, |p| p.rows());
    if parts.iter().any(|p| p.rows() != rows) {
        return Err(Error::ShapeMismatch {
            op: "concat_cols",
            expected: vec![rows],
            got: parts.iter().map(|p| p.rows()).collect(),
        });
    }
    let width: usize = parts.iter().map(|p| p.last_dim()).sum();
    let mut data = Vec::with_capacity(rows * width);
    for r in 0..rows {
        for p in parts {
            data.extend_from_slice(p.row(r));
        }
    }
    Ok(Tensor { shape: vec![rows, width], data })
}

pub fn select_row<T: Scalar>(x: &Tensor<T>, row: usize) -> Result<Tensor<T>> {
    if row >= x.rows() {
        return Err(mismatch("select_row", &[row + 1], &x.shape));
    }
    Ok(Tensor {
        shape: vec![1, x.last_dim()],
        data: x.row(row).to_vec(),
    })
}

/// Replaces row `row` of `base` with `src`.
pub fn scatter_row<T: Scalar>(base: &Tensor<T>, row: usize, src: &Tensor<T>) -> Result<Tensor<T>> {
    if row >= base.rows() || src.len() != base.last_dim() {
        return Err(mismatch("scatter_row", &base.shape, &src.shape));
    }
    let mut out = base.clone();
    out.row_mut(row).copy_from_slice(&src.data);
    Ok(out)
}

/// Width of the rotated prefix for a head of size `d_head`.
pub fn rotary_width(d_head: usize, rotary_fraction: f64) -> usize {
    libm::floor(d_head as f64 * rotary_fraction) as usize
}

/// Rotates the leading `⌊rotary_fraction · d⌋` coordinates of a single
/// query/key vector by the angles for `position`, pairing coordinate `i`
/// with `i + width/2` (GPT-NeoX layout).
pub fn rotary_apply<T: Scalar>(x: &Tensor<T>, position: usize, rotary_fraction: f64) -> Result<Tensor<T>> {
    let mut out = x.clone();
    let d = x.last_dim();
    let width = rotary_width(d, rotary_fraction);
    if !width.is_multiple_of(2) {
        return Err(Error::OddRotaryWidth { width });
    }
    for r in 0..out.rows() {
        rotate_row(out.row_mut(r), position, width, false);
    }
    finite("rotary", out)
}

/// Rotates row `i` of `x` by the angles for position `i`.
pub fn rotary_rows<T: Scalar>(x: &Tensor<T>, rotary_fraction: f64) -> Result<Tensor<T>> {
    rotary_rows_dir(x, rotary_fraction, false)
}

pub(crate) fn rotary_rows_dir<T: Scalar>(x: &Tensor<T>, rotary_fraction: f64, inverse: bool) -> Result<Tensor<T>> {
    let width = rotary_width(x.last_dim(), rotary_fraction);
    if !width.is_multiple_of(2) {
        return Err(Error::OddRotaryWidth { width });
    }
    let mut out = x.clone();
    for r in 0..out.rows() {
        rotate_row(out.row_mut(r), r, width, inverse);
    }
    finite("rotary", out)
}

fn rotate_row<T: Scalar>(row: &mut [T], position: usize, width: usize, inverse: bool) {
    // zero angle is the identity; skip so signed zeros survive untouched
    if position == 0 || width == 0 {
        return;
    }
    let half = width / 2;
    for i in 0..half {
        let inv_freq = 1.0 / libm::pow(ROTARY_BASE, (2 * i) as f64 / width as f64);
        let angle = position as f64 * inv_freq;
        let (sin, cos) = (T::from_f64(libm::sin(angle)), T::from_f64(libm::cos(angle)));
        let sin = if inverse { -sin } else { sin };
        let (a, b) = (row[i], row[i + half]);
        row[i] = a * cos - b * sin;
        row[i + half] = b * cos + a * sin;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
    }

    #[test]
    fn matmul_hand_cases() {
        let id = Tensor::<f64>::from_f64(vec![2, 2], &[1., 0., 0., 1.]).unwrap();
        let b = Tensor::from_f64(vec![2, 2], &[3., 4., 5., 6.]).unwrap();
        assert_eq!(matmul(&id, &b).unwrap().data(), &[3., 4., 5., 6.]);
        let r = Tensor::<f64>::from_f64(vec![1, 2], &[1., 2.]).unwrap();
        let c = Tensor::from_f64(vec![2, 1], &[3., 4.]).unwrap();
        assert_eq!(matmul(&r, &c).unwrap().data(), &[11.]);
        assert!(matmul(&r, &r).is_err());
    }

    #[test]
    fn matmul_against_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = rand_tensor(&mut rng, vec![7, 5]);
        let b = rand_tensor(&mut rng, vec![5, 3]);
        let got = matmul(&a, &b).unwrap();
        for i in 0..7 {
            for j in 0..3 {
                let mut want = 0.0;
                for k in 0..5 {
                    want += a.data()[i * 5 + k] * b.data()[k * 3 + j];
                }
                let g = got.data()[i * 3 + j];
                assert!((g - want).abs() <= 1e-6 * want.abs().max(1.0));
            }
        }
        // transposed variants agree with the plain product
        let bt = Tensor::new(vec![3, 5], (0..15).map(|i| b.data()[(i % 5) * 3 + i / 5]).collect()).unwrap();
        assert_eq!(matmul_nt(&a, &bt).unwrap(), got);
    }

    #[test]
    fn batched_matmul_matches_per_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = rand_tensor(&mut rng, vec![2, 3, 4]);
        let b = rand_tensor(&mut rng, vec![2, 4, 2]);
        let got = matmul(&a, &b).unwrap();
        assert_eq!(got.shape(), &[2, 3, 2]);
        for bi in 0..2 {
            let ab = Tensor::new(vec![3, 4], a.data()[bi * 12..(bi + 1) * 12].to_vec()).unwrap();
            let bb = Tensor::new(vec![4, 2], b.data()[bi * 8..(bi + 1) * 8].to_vec()).unwrap();
            assert_eq!(matmul(&ab, &bb).unwrap().data(), &got.data()[bi * 6..(bi + 1) * 6]);
        }
    }

    #[test]
    fn softmax_cases() {
        let s = softmax_lastdim(&Tensor::<f64>::vector(vec![0.0, 0.0])).unwrap();
        assert_eq!(s.data(), &[0.5, 0.5]);
        let s = softmax_lastdim(&Tensor::<f32>::vector(vec![1000.0; 3])).unwrap();
        for &v in s.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-6);
        }
        let s = softmax_lastdim(&Tensor::<f64>::vector(vec![0.0, 3f64.ln()])).unwrap();
        assert!((s.data()[0] - 0.25).abs() < 1e-12 && (s.data()[1] - 0.75).abs() < 1e-12);
        assert!(matches!(
            softmax_lastdim(&Tensor::<f64>::zeros(vec![2, 0])),
            Err(Error::EmptyLastDim { .. })
        ));
    }

    #[test]
    fn layer_norm_cases() {
        let g = Tensor::<f64>::vector(vec![1.0; 3]);
        let b = Tensor::<f64>::vector(vec![0.0; 3]);
        let out = layer_norm(&Tensor::vector(vec![1.0, 1.0, 1.0]), &g, &b, 1e-5).unwrap();
        assert_eq!(out.data(), &[0.0, 0.0, 0.0]);
        let g2 = Tensor::<f64>::vector(vec![1.0; 2]);
        let b2 = Tensor::<f64>::vector(vec![0.0; 2]);
        let out = layer_norm(&Tensor::vector(vec![1.0, 3.0]), &g2, &b2, 1e-12).unwrap();
        assert!((out.data()[0] + 1.0).abs() < 1e-9 && (out.data()[1] - 1.0).abs() < 1e-9);
        assert!(layer_norm(&Tensor::vector(vec![1.0, 3.0]), &g, &b, 1e-5).is_err());
    }

    #[test]
    fn layer_norm_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = rand_tensor(&mut rng, vec![1, 64]);
        let g = Tensor::<f64>::vector(vec![1.0; 64]);
        let b = Tensor::<f64>::vector(vec![0.0; 64]);
        let out = layer_norm(&x, &g, &b, 1e-5).unwrap();
        let mean = out.data().iter().sum::<f64>() / 64.0;
        let var = out.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 64.0;
        assert!(mean.abs() < 1e-6);
        assert!((var - 1.0).abs() < 1e-4);
    }

    #[test]
    fn rotary_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = rand_tensor(&mut rng, vec![1, 8]);
        assert_eq!(rotary_apply(&x, 0, 1.0).unwrap(), x);
        assert_eq!(rotary_apply(&x, 5, 0.0).unwrap(), x);
        assert!(matches!(
            rotary_apply(&Tensor::<f64>::zeros(vec![1, 6]), 1, 0.5),
            Err(Error::OddRotaryWidth { width: 3 })
        ));
        let y = rotary_apply(&x, 7, 0.5).unwrap();
        // width 4: pairs (0,2), (1,3); rest untouched
        for (i, j) in [(0, 2), (1, 3)] {
            let n0 = x.data()[i].hypot(x.data()[j]);
            let n1 = y.data()[i].hypot(y.data()[j]);
            assert!((n0 - n1).abs() < 1e-6);
        }
        assert_eq!(&y.data()[4..], &x.data()[4..]);
        let back = rotary_rows_dir(&rotary_rows(&x, 1.0).unwrap(), 1.0, true).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn non_finite_is_an_error() {
        let a = Tensor::<f32>::vector(vec![f32::MAX, f32::MAX]);
        assert!(matches!(add(&a, &a), Err(Error::NonFinite { .. })));
    }
}
