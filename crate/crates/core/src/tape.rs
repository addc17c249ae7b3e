// SPDX-License-Identifier: MIT OR Apache-2.0

//! Suffix reverse-mode differentiation.
//!
//! A [`SuffixTape`] records only the operations that depend on a single seed
//! activation. Everything upstream of the seed, and every weight, enters as a
//! constant. Operations whose inputs are all constant are evaluated eagerly
//! and never recorded.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{self, Scalar, Tensor};

/// A value flowing through a taped computation.
#[derive(Debug, Clone)]
pub enum Val<T> {
    Const(Tensor<T>),
    Node(usize),
}

#[derive(Debug, Clone)]
enum Op<'a, T> {
    Seed,
    ScatterRow { base: Tensor<T>, row: usize, src: usize },
    Add(Val<T>, Val<T>),
    Scale(usize, T),
    Sum(usize),
    Linear { x: usize, w: &'a Tensor<T>, b: Option<&'a Tensor<T>> },
    LayerNorm { x: usize, gain: &'a Tensor<T>, bias: &'a Tensor<T>, eps: T },
    Gelu(usize),
    SliceCols { x: usize, start: usize, len: usize },
    ConcatCols(Vec<Val<T>>),
    Rotary { x: usize, fraction: f64 },
    MatMulNt(Val<T>, Val<T>),
    MatMul(Val<T>, Val<T>),
    CausalSoftmax(usize),
    SelectRow { x: usize, row: usize },
    NegLogProb { x: usize, index: usize },
}

/// Operation graph from a seed activation to a scalar loss.
///
/// Weights are borrowed for `'a`; the tape is single-use.
#[derive(Debug)]
pub struct SuffixTape<'a, T> {
    ops: Vec<Op<'a, T>>,
    values: Vec<Tensor<T>>,
}

impl<'a, T: Scalar> SuffixTape<'a, T> {
    /// Starts a tape whose node 0 is `seed`.
    pub fn new(seed: Tensor<T>) -> Self {
        Self {
            ops: vec![Op::Seed],
            values: vec![seed],
        }
    }

    pub fn seed(&self) -> Val<T> {
        Val::Node(0)
    }

    pub fn seed_value(&self) -> &Tensor<T> {
        &self.values[0]
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Current value of `v`.
    pub fn value<'v>(&'v self, v: &'v Val<T>) -> &'v Tensor<T> {
        match v {
            Val::Const(t) => t,
            Val::Node(i) => &self.values[*i],
        }
    }

    fn push(&mut self, op: Op<'a, T>) -> Result<Val<T>> {
        let value = eval(&op, &self.values)?;
        self.ops.push(op);
        self.values.push(value);
        Ok(Val::Node(self.ops.len() - 1))
    }

    pub fn scatter_row(&mut self, base: Tensor<T>, row: usize, src: &Val<T>) -> Result<Val<T>> {
        match src {
            Val::Const(s) => Ok(Val::Const(tensor::scatter_row(&base, row, s)?)),
            Val::Node(i) => self.push(Op::ScatterRow { base, row, src: *i }),
        }
    }

    pub fn add(&mut self, a: &Val<T>, b: &Val<T>) -> Result<Val<T>> {
        if let (Val::Const(x), Val::Const(y)) = (a, b) {
            return Ok(Val::Const(tensor::add(x, y)?));
        }
        self.push(Op::Add(a.clone(), b.clone()))
    }

    pub fn scale(&mut self, x: &Val<T>, s: T) -> Result<Val<T>> {
        match x {
            Val::Const(t) => Ok(Val::Const(tensor::scale(t, s)?)),
            Val::Node(i) => self.push(Op::Scale(*i, s)),
        }
    }

    pub fn sum(&mut self, x: &Val<T>) -> Result<Val<T>> {
        match x {
            Val::Const(t) => Ok(Val::Const(sum_all(t))),
            Val::Node(i) => self.push(Op::Sum(*i)),
        }
    }

    pub fn linear(&mut self, x: &Val<T>, w: &'a Tensor<T>, b: Option<&'a Tensor<T>>) -> Result<Val<T>> {
        match x {
            Val::Const(t) => Ok(Val::Const(tensor::linear(t, w, b)?)),
            Val::Node(i) => self.push(Op::Linear { x: *i, w, b }),
        }
    }

    pub fn layer_norm(&mut self, x: &Val<T>, gain: &'a Tensor<T>, bias: &'a Tensor<T>, eps: T) -> Result<Val<T>> {
        match x {
            Val::Const(t) => Ok(Val::Const(tensor::layer_norm(t, gain, bias, eps)?)),
            Val::Node(i) => self.push(Op::LayerNorm { x: *i, gain, bias, eps }),
        }
    }

    pub fn gelu(&mut self, x: &Val<T>) -> Result<Val<T>> {
        match x {
            Val::Const(t) => Ok(Val::Const(tensor::gelu(t)?)),
            Val::Node(i) => self.push(Op::Gelu(*i)),
        }
    }

    pub fn slice_cols(&mut self, x: &Val<T>, start: usize, len: usize) -> Result<Val<T>> {
        match x {
            Val::Const(t) => Ok(Val::Const(tensor::slice_cols(t, start, len)?)),
            Val::Node(i) => self.push(Op::SliceCols { x: *i, start, len }),
        }
    }

    pub fn concat_cols(&mut self, parts: &[Val<T>]) -> Result<Val<T>> {
        if parts.iter().all(|p| matches!(p, Val::Const(_))) {
            let refs: Vec<&Tensor<T>> = parts.iter().map(|p| self.value(p)).collect();
            return Ok(Val::Const(tensor::concat_cols(&refs)?));
        }
        self.push(Op::ConcatCols(parts.to_vec()))
    }

    /// Rotates row `i` by the angles for position `i`.
    pub fn rotary(&mut self, x: &Val<T>, fraction: f64) -> Result<Val<T>> {
        match x {
            Val::Const(t) => Ok(Val::Const(tensor::rotary_rows(t, fraction)?)),
            Val::Node(i) => self.push(Op::Rotary { x: *i, fraction }),
        }
    }

    pub fn matmul_nt(&mut self, a: &Val<T>, b: &Val<T>) -> Result<Val<T>> {
        if let (Val::Const(x), Val::Const(y)) = (a, b) {
            return Ok(Val::Const(tensor::matmul_nt(x, y)?));
        }
        self.push(Op::MatMulNt(a.clone(), b.clone()))
    }

    pub fn matmul(&mut self, a: &Val<T>, b: &Val<T>) -> Result<Val<T>> {
        if let (Val::Const(x), Val::Const(y)) = (a, b) {
            return Ok(Val::Const(tensor::matmul(x, y)?));
        }
        self.push(Op::MatMul(a.clone(), b.clone()))
    }

    pub fn causal_softmax(&mut self, x: &Val<T>) -> Result<Val<T>> {
        match x {
            Val::Const(t) => Ok(Val::Const(tensor::causal_softmax(t)?)),
            Val::Node(i) => self.push(Op::CausalSoftmax(*i)),
        }
    }

    pub fn select_row(&mut self, x: &Val<T>, row: usize) -> Result<Val<T>> {
        match x {
            Val::Const(t) => Ok(Val::Const(tensor::select_row(t, row)?)),
            Val::Node(i) => self.push(Op::SelectRow { x: *i, row }),
        }
    }

    /// `-log softmax(x)[index]` for a single-row `x`.
    pub fn neg_log_prob(&mut self, x: &Val<T>, index: usize) -> Result<Val<T>> {
        match x {
            Val::Const(t) => Ok(Val::Const(neg_log_prob(t, index)?)),
            Val::Node(i) => self.push(Op::NegLogProb { x: *i, index }),
        }
    }

    /// Re-evaluates the recorded graph with a new seed and returns the value
    /// of `loss`.
    pub fn replay(&self, seed: &Tensor<T>, loss: &Val<T>) -> Result<T> {
        let id = self.loss_node(loss)?;
        if seed.shape() != self.values[0].shape() {
            return Err(Error::ShapeMismatch {
                op: "replay",
                expected: self.values[0].shape().to_vec(),
                got: seed.shape().to_vec(),
            });
        }
        let Some(id) = id else {
            return Ok(self.value(loss).data()[0]);
        };
        let mut values = Vec::with_capacity(id + 1);
        values.push(seed.clone());
        for op in &self.ops[1..=id] {
            let v = eval(op, &values)?;
            values.push(v);
        }
        Ok(values[id].data()[0])
    }

    fn loss_node(&self, loss: &Val<T>) -> Result<Option<usize>> {
        let t = match loss {
            Val::Const(t) => t,
            Val::Node(i) if *i < self.values.len() => &self.values[*i],
            Val::Node(_) => return Err(Error::TapeIncomplete),
        };
        if t.len() != 1 {
            return Err(Error::NonScalarLoss { shape: t.shape().to_vec() });
        }
        Ok(match loss {
            Val::Node(i) => Some(*i),
            Val::Const(_) => None,
        })
    }
}

fn sum_all<T: Scalar>(t: &Tensor<T>) -> Tensor<T> {
    let mut acc = T::zero();
    for &v in t.data() {
        acc = acc + v;
    }
    Tensor::scalar(acc)
}

fn neg_log_prob<T: Scalar>(x: &Tensor<T>, index: usize) -> Result<Tensor<T>> {
    if x.rows() != 1 || index >= x.last_dim() {
        return Err(Error::ShapeMismatch {
            op: "neg_log_prob",
            expected: vec![1, index + 1],
            got: x.shape().to_vec(),
        });
    }
    let lp = tensor::log_softmax(x.row(0))?;
    Ok(Tensor::scalar(-lp[index]))
}

fn get<'v, T>(values: &'v [Tensor<T>], v: &'v Val<T>) -> &'v Tensor<T> {
    match v {
        Val::Const(t) => t,
        Val::Node(i) => &values[*i],
    }
}

fn eval<T: Scalar>(op: &Op<'_, T>, values: &[Tensor<T>]) -> Result<Tensor<T>> {
    match op {
        Op::Seed => Err(Error::Precondition("seed cannot be re-evaluated".into())),
        Op::ScatterRow { base, row, src } => tensor::scatter_row(base, *row, &values[*src]),
        Op::Add(a, b) => tensor::add(get(values, a), get(values, b)),
        Op::Scale(x, s) => tensor::scale(&values[*x], *s),
        Op::Sum(x) => Ok(sum_all(&values[*x])),
        Op::Linear { x, w, b } => tensor::linear(&values[*x], w, *b),
        Op::LayerNorm { x, gain, bias, eps } => tensor::layer_norm(&values[*x], gain, bias, *eps),
        Op::Gelu(x) => tensor::gelu(&values[*x]),
        Op::SliceCols { x, start, len } => tensor::slice_cols(&values[*x], *start, *len),
        Op::ConcatCols(parts) => {
            let refs: Vec<&Tensor<T>> = parts.iter().map(|p| get(values, p)).collect();
            tensor::concat_cols(&refs)
        }
        Op::Rotary { x, fraction } => tensor::rotary_rows(&values[*x], *fraction),
        Op::MatMulNt(a, b) => tensor::matmul_nt(get(values, a), get(values, b)),
        Op::MatMul(a, b) => tensor::matmul(get(values, a), get(values, b)),
        Op::CausalSoftmax(x) => tensor::causal_softmax(&values[*x]),
        Op::SelectRow { x, row } => tensor::select_row(&values[*x], *row),
        Op::NegLogProb { x, index } => neg_log_prob(&values[*x], *index),
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<Tensor<T>>], id: usize, g: Tensor<T>) -> Result<()> {
    grads[id] = Some(match grads[id].take() {
        None => g,
        Some(prev) => tensor::add(&prev, &g)?,
    });
    Ok(())
}

fn accumulate_val<T: Scalar>(grads: &mut [Option<Tensor<T>>], v: &Val<T>, g: Tensor<T>) -> Result<()> {
    match v {
        Val::Node(i) => accumulate(grads, *i, g),
        Val::Const(_) => Ok(()),
    }
}

/// Gradient of the scalar `loss` with respect to the tape's seed activation.
///
/// Every weight and every upstream activation is held constant. A loss that
/// does not depend on the seed yields a zero gradient.
pub fn vjp_seed_gradient<T: Scalar>(tape: &SuffixTape<'_, T>, loss: &Val<T>) -> Result<Tensor<T>> {
    let seed_shape = tape.values[0].shape().to_vec();
    let Some(id) = tape.loss_node(loss)? else {
        return Ok(Tensor::zeros(seed_shape));
    };
    let values = &tape.values;
    let mut grads: Vec<Option<Tensor<T>>> = vec![None; id + 1];
    grads[id] = Some(Tensor::new(values[id].shape().to_vec(), vec![T::one()])?);
    for n in (1..=id).rev() {
        let Some(g) = grads[n].take() else { continue };
        match &tape.ops[n] {
            Op::Seed => unreachable!("seed is node 0"),
            Op::ScatterRow { row, src, .. } => {
                accumulate(&mut grads, *src, Tensor::vector(g.row(*row).to_vec()).reshape(values[*src].shape().to_vec())?)?;
            }
            Op::Add(a, b) => {
                accumulate_val(&mut grads, a, g.clone())?;
                accumulate_val(&mut grads, b, g)?;
            }
            Op::Scale(x, s) => accumulate(&mut grads, *x, tensor::scale(&g, *s)?)?,
            Op::Sum(x) => {
                let shape = values[*x].shape().to_vec();
                let n = values[*x].len();
                accumulate(&mut grads, *x, Tensor::new(shape, vec![g.data()[0]; n])?)?;
            }
            Op::Linear { x, w, .. } => {
                // y = x Wᵀ + b  ⇒  dx = g W
                accumulate(&mut grads, *x, tensor::matmul(&g, w)?)?;
            }
            Op::LayerNorm { x, gain, eps, .. } => {
                accumulate(&mut grads, *x, layer_norm_backward(&values[*x], gain, *eps, &g))?;
            }
            Op::Gelu(x) => {
                let xv = &values[*x];
                let data = xv.data().iter().zip(g.data()).map(|(&v, &gg)| gg * tensor::gelu_grad_scalar(v)).collect();
                accumulate(&mut grads, *x, Tensor::new(xv.shape().to_vec(), data)?)?;
            }
            Op::SliceCols { x, start, len } => {
                let mut dx = Tensor::zeros(values[*x].shape().to_vec());
                for r in 0..g.rows() {
                    dx.row_mut(r)[*start..*start + *len].copy_from_slice(g.row(r));
                }
                accumulate(&mut grads, *x, dx)?;
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for p in parts {
                    let w = get(values, p).last_dim();
                    if let Val::Node(i) = p {
                        accumulate(&mut grads, *i, tensor::slice_cols(&g, offset, w)?)?;
                    }
                    offset += w;
                }
            }
            Op::Rotary { x, fraction } => {
                accumulate(&mut grads, *x, tensor::rotary_rows_dir(&g, *fraction, true)?)?;
            }
            Op::MatMulNt(a, b) => {
                // s = a bᵀ  ⇒  da = g b,  db = gᵀ a
                if let Val::Node(i) = a {
                    accumulate(&mut grads, *i, tensor::matmul(&g, get(values, b))?)?;
                }
                if let Val::Node(i) = b {
                    accumulate(&mut grads, *i, tensor::matmul_tn(&g, get(values, a))?)?;
                }
            }
            Op::MatMul(a, b) => {
                // y = a b  ⇒  da = g bᵀ,  db = aᵀ g
                if let Val::Node(i) = a {
                    accumulate(&mut grads, *i, tensor::matmul_nt(&g, get(values, b))?)?;
                }
                if let Val::Node(i) = b {
                    accumulate(&mut grads, *i, tensor::matmul_tn(get(values, a), &g)?)?;
                }
            }
            Op::CausalSoftmax(x) => {
                let p = &values[n];
                let mut dx = Tensor::zeros(p.shape().to_vec());
                for r in 0..p.rows() {
                    let (pr, gr) = (p.row(r), g.row(r));
                    let inner = tensor::dot(pr, gr);
                    for (d, (&pv, &gv)) in dx.row_mut(r).iter_mut().zip(pr.iter().zip(gr)) {
                        *d = pv * (gv - inner);
                    }
                }
                accumulate(&mut grads, *x, dx)?;
            }
            Op::SelectRow { x, row } => {
                let mut dx = Tensor::zeros(values[*x].shape().to_vec());
                dx.row_mut(*row).copy_from_slice(g.row(0));
                accumulate(&mut grads, *x, dx)?;
            }
            Op::NegLogProb { x, index } => {
                let xv = &values[*x];
                let lp = tensor::log_softmax(xv.row(0))?;
                let gs = g.data()[0];
                let data = lp
                    .iter()
                    .enumerate()
                    .map(|(j, &l)| {
                        let onehot = if j == *index { T::one() } else { T::zero() };
                        gs * (l.exp() - onehot)
                    })
                    .collect();
                accumulate(&mut grads, *x, Tensor::new(xv.shape().to_vec(), data)?)?;
            }
        }
    }
    Ok(grads[0].take().unwrap_or_else(|| Tensor::zeros(seed_shape)))
}

fn layer_norm_backward<T: Scalar>(x: &Tensor<T>, gain: &Tensor<T>, eps: T, g: &Tensor<T>) -> Tensor<T> {
    let d = x.last_dim();
    let n = T::from_f64(d as f64);
    let mut dx = Tensor::zeros(x.shape().to_vec());
    let mut xhat = vec![T::zero(); d];
    let mut gy = vec![T::zero(); d];
    for r in 0..x.rows() {
        xhat.copy_from_slice(x.row(r));
        let (_, inv) = tensor::normalize_row(&mut xhat, eps);
        for j in 0..d {
            gy[j] = g.row(r)[j] * gain.data()[j];
        }
        let mean_g = gy.iter().fold(T::zero(), |a, &v| a + v) / n;
        let mean_gx = gy.iter().zip(&xhat).fold(T::zero(), |a, (&u, &v)| a + u * v) / n;
        for (j, out) in dx.row_mut(r).iter_mut().enumerate() {
            *out = inv * (gy[j] - mean_g - xhat[j] * mean_gx);
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_t(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn sum_has_unit_gradient() {
        let mut tape = SuffixTape::new(Tensor::<f64>::vector(vec![1.0, -2.0, 3.0]));
        let s = tape.seed();
        let loss = tape.sum(&s).unwrap();
        let g = vjp_seed_gradient(&tape, &loss).unwrap();
        assert_eq!(g.data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn zero_scaled_path_has_zero_gradient() {
        let mut tape = SuffixTape::new(Tensor::<f64>::vector(vec![0.3, 0.4]));
        let s = tape.seed();
        let z = tape.scale(&s, 0.0).unwrap();
        let loss = tape.sum(&z).unwrap();
        assert_eq!(vjp_seed_gradient(&tape, &loss).unwrap().data(), &[0.0, 0.0]);
        // loss built only from constants
        let c = Val::Const(Tensor::scalar(2.0));
        assert_eq!(vjp_seed_gradient(&tape, &c).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn non_scalar_and_foreign_losses_are_rejected() {
        let mut tape = SuffixTape::new(Tensor::<f64>::vector(vec![0.3, 0.4]));
        let s = tape.seed();
        let y = tape.scale(&s, 2.0).unwrap();
        assert!(matches!(vjp_seed_gradient(&tape, &y), Err(Error::NonScalarLoss { .. })));
        assert!(matches!(vjp_seed_gradient(&tape, &Val::Node(99)), Err(Error::TapeIncomplete)));
    }

    #[test]
    fn replay_reproduces_loss_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = rand_t(&mut rng, vec![5, 4]);
        let seed = rand_t(&mut rng, vec![3, 4]);
        let mut tape = SuffixTape::new(seed.clone());
        let s = tape.seed();
        let h = tape.linear(&s, &w, None).unwrap();
        let h = tape.gelu(&h).unwrap();
        let r = tape.select_row(&h, 2).unwrap();
        let loss = tape.neg_log_prob(&r, 1).unwrap();
        let recorded = tape.value(&loss).data()[0];
        assert_eq!(tape.replay(&seed, &loss).unwrap().to_bits(), recorded.to_bits());
    }

    #[test]
    fn constant_only_ops_are_not_recorded() {
        let mut tape = SuffixTape::new(Tensor::<f64>::vector(vec![1.0]));
        let a = Val::Const(Tensor::vector(vec![1.0, 2.0]));
        let b = tape.add(&a, &a).unwrap();
        assert!(matches!(b, Val::Const(_)));
        assert_eq!(tape.len(), 1);
    }
}
