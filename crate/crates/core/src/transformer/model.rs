// SPDX-License-Identifier: MIT OR Apache-2.0

//! Weights and the hooked forward pass.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::hooks::{ActivationCache, Site, TapRequest};
use crate::tape::{SuffixTape, Val};
use crate::tensor::{self, Scalar, Tensor};
use crate::transformer::config::{ModelConfig, WeightLayout};

#[derive(Debug, Clone)]
pub struct LayerWeights<T> {
    pub ln1_gain: Tensor<T>,
    pub ln1_bias: Tensor<T>,
    pub ln2_gain: Tensor<T>,
    pub ln2_bias: Tensor<T>,
    /// `[3 * d_model, d_model]`, rows grouped per head as `[q | k | v]`.
    pub qkv_weight: Tensor<T>,
    pub qkv_bias: Tensor<T>,
    pub attn_out_weight: Tensor<T>,
    pub attn_out_bias: Tensor<T>,
    pub mlp_up_weight: Tensor<T>,
    pub mlp_up_bias: Tensor<T>,
    pub mlp_down_weight: Tensor<T>,
    pub mlp_down_bias: Tensor<T>,
}

/// An immutable, fully materialised decoder.
#[derive(Debug, Clone)]
pub struct Model<T> {
    config: ModelConfig,
    embed: Tensor<T>,
    layers: Vec<LayerWeights<T>>,
    final_gain: Tensor<T>,
    final_bias: Tensor<T>,
    unembed: Option<Tensor<T>>,
}

struct Loader<'l, T> {
    tensors: BTreeMap<String, Tensor<T>>,
    layout: &'l WeightLayout,
}

impl<T: Scalar> Loader<'_, T> {
    fn take(&mut self, name: String, shape: &[usize]) -> Result<Tensor<T>> {
        let t = self.tensors.remove(&name).ok_or_else(|| Error::MissingTensor(name.clone()))?;
        // 1-D parameters are sometimes stored as [1, n]
        let got = t.shape().to_vec();
        let same = got == shape || (shape.len() == 1 && got.iter().product::<usize>() == shape[0] && got.len() == 2 && got[0] == 1);
        if !same {
            return Err(Error::TensorShape { name, expected: shape.to_vec(), got });
        }
        t.reshape(shape.to_vec())
    }

    fn take_layer(&mut self, template: &str, i: usize, shape: &[usize]) -> Result<Tensor<T>> {
        self.take(WeightLayout::layer(template, i), shape)
    }
}

impl<T: Scalar> Model<T> {
    /// Builds a model from named tensors, checking every name and shape
    /// against `config` and `layout`. Extra tensors are ignored.
    pub fn from_tensors(config: ModelConfig, layout: &WeightLayout, tensors: BTreeMap<String, Tensor<T>>) -> Result<Self> {
        let config = config.validated()?;
        let (d, f, v) = (config.d_model, config.d_mlp, config.vocab_size);
        let mut ld = Loader { tensors, layout };
        let embed = ld.take(ld.layout.embed.clone(), &[v, d])?;
        let mut layers = Vec::with_capacity(config.n_layers);
        for i in 0..config.n_layers {
            let lay = ld.layout.clone();
            layers.push(LayerWeights {
                ln1_gain: ld.take_layer(&lay.ln1_weight, i, &[d])?,
                ln1_bias: ld.take_layer(&lay.ln1_bias, i, &[d])?,
                ln2_gain: ld.take_layer(&lay.ln2_weight, i, &[d])?,
                ln2_bias: ld.take_layer(&lay.ln2_bias, i, &[d])?,
                qkv_weight: ld.take_layer(&lay.qkv_weight, i, &[3 * d, d])?,
                qkv_bias: ld.take_layer(&lay.qkv_bias, i, &[3 * d])?,
                attn_out_weight: ld.take_layer(&lay.attn_out_weight, i, &[d, d])?,
                attn_out_bias: ld.take_layer(&lay.attn_out_bias, i, &[d])?,
                mlp_up_weight: ld.take_layer(&lay.mlp_up_weight, i, &[f, d])?,
                mlp_up_bias: ld.take_layer(&lay.mlp_up_bias, i, &[f])?,
                mlp_down_weight: ld.take_layer(&lay.mlp_down_weight, i, &[d, f])?,
                mlp_down_bias: ld.take_layer(&lay.mlp_down_bias, i, &[d])?,
            });
        }
        let final_gain = ld.take(ld.layout.final_ln_weight.clone(), &[d])?;
        let final_bias = ld.take(ld.layout.final_ln_bias.clone(), &[d])?;
        let unembed = if config.tied_embeddings {
            None
        } else {
            Some(ld.take(ld.layout.unembed.clone(), &[v, d])?)
        };
        let model = Self { config, embed, layers, final_gain, final_bias, unembed };
        if !model.all_finite() {
            return Err(Error::NonFinite { op: "load_model" });
        }
        Ok(model)
    }

    fn all_finite(&self) -> bool {
        let mut all = vec![&self.embed, &self.final_gain, &self.final_bias];
        if let Some(u) = &self.unembed {
            all.push(u);
        }
        for l in &self.layers {
            all.extend([
                &l.ln1_gain, &l.ln1_bias, &l.ln2_gain, &l.ln2_bias, &l.qkv_weight, &l.qkv_bias,
                &l.attn_out_weight, &l.attn_out_bias, &l.mlp_up_weight, &l.mlp_up_bias,
                &l.mlp_down_weight, &l.mlp_down_bias,
            ]);
        }
        all.iter().all(|t| t.is_finite())
    }

    /// Named tensors in `layout`, the inverse of [`Model::from_tensors`].
    pub fn to_tensors(&self, layout: &WeightLayout) -> BTreeMap<String, Tensor<T>> {
        let mut out = BTreeMap::new();
        out.insert(layout.embed.clone(), self.embed.clone());
        for (i, l) in self.layers.iter().enumerate() {
            let mut put = |tpl: &str, t: &Tensor<T>| {
                out.insert(WeightLayout::layer(tpl, i), t.clone());
            };
            put(&layout.ln1_weight, &l.ln1_gain);
            put(&layout.ln1_bias, &l.ln1_bias);
            put(&layout.ln2_weight, &l.ln2_gain);
            put(&layout.ln2_bias, &l.ln2_bias);
            put(&layout.qkv_weight, &l.qkv_weight);
            put(&layout.qkv_bias, &l.qkv_bias);
            put(&layout.attn_out_weight, &l.attn_out_weight);
            put(&layout.attn_out_bias, &l.attn_out_bias);
            put(&layout.mlp_up_weight, &l.mlp_up_weight);
            put(&layout.mlp_up_bias, &l.mlp_up_bias);
            put(&layout.mlp_down_weight, &l.mlp_down_weight);
            put(&layout.mlp_down_bias, &l.mlp_down_bias);
        }
        out.insert(layout.final_ln_weight.clone(), self.final_gain.clone());
        out.insert(layout.final_ln_bias.clone(), self.final_bias.clone());
        if let Some(u) = &self.unembed {
            out.insert(layout.unembed.clone(), u.clone());
        }
        out
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layers(&self) -> &[LayerWeights<T>] {
        &self.layers
    }

    pub fn embedding(&self) -> &Tensor<T> {
        &self.embed
    }

    pub fn final_norm(&self) -> (&Tensor<T>, &Tensor<T>) {
        (&self.final_gain, &self.final_bias)
    }

    /// `[vocab, d_model]` output projection (the embedding when tied).
    pub fn unembedding(&self) -> &Tensor<T> {
        self.unembed.as_ref().unwrap_or(&self.embed)
    }

    pub fn eps(&self) -> T {
        T::from_f64(self.config.layer_norm_eps)
    }

    /// Checks ids and length, then gathers the embedding rows.
    pub fn embed_tokens(&self, tokens: &[u32]) -> Result<Tensor<T>> {
        let max = self.config.max_positions;
        if tokens.is_empty() || tokens.len() > max {
            return Err(Error::SequenceLength { len: tokens.len(), max });
        }
        let d = self.config.d_model;
        let mut data = Vec::with_capacity(tokens.len() * d);
        for &t in tokens {
            if t as usize >= self.config.vocab_size {
                return Err(Error::TokenOutOfRange { id: t, vocab: self.config.vocab_size });
            }
            data.extend_from_slice(self.embed.row(t as usize));
        }
        Tensor::new(vec![tokens.len(), d], data)
    }

    /// Runs the model, calling `hook` at every site with the full
    /// `[seq, width]` activation, which the hook may read or overwrite.
    /// Returns logits `[seq, vocab]`.
    pub fn forward_with_hook<F>(&self, tokens: &[u32], hook: F) -> Result<Tensor<T>>
    where
        F: FnMut(Site, &mut Tensor<T>) -> Result<()>,
    {
        let x = self.embed_tokens(tokens)?;
        let mut backend = Plain { hook };
        let hidden = run_layers(self, &mut backend, x)?;
        tensor::linear(&hidden, self.unembedding(), None)
    }

    /// Forward pass recording the requested taps.
    pub fn forward(&self, tokens: &[u32], taps: &TapRequest) -> Result<(Tensor<T>, ActivationCache<T>)> {
        for loc in taps {
            loc.site.validate(&self.config)?;
            if loc.position >= tokens.len() {
                return Err(Error::UnresolvablePosition {
                    spec: alloc::format!("{loc}"),
                    reason: alloc::format!("sequence has {} tokens", tokens.len()),
                });
            }
        }
        let mut cache = ActivationCache::new();
        let logits = self.forward_with_hook(tokens, |site, acts| {
            for loc in taps.range(crate::hooks::Location { site, position: 0 }..) {
                if loc.site != site {
                    break;
                }
                cache.insert(*loc, Tensor::vector(acts.row(loc.position).to_vec()));
            }
            Ok(())
        })?;
        Ok((logits, cache))
    }

    pub fn logits(&self, tokens: &[u32]) -> Result<Tensor<T>> {
        self.forward_with_hook(tokens, |_, _| Ok(()))
    }

    /// Sum over positions `1..n` of `log p(token_t | tokens_<t)`.
    pub fn sequence_logprob(&self, tokens: &[u32]) -> Result<T> {
        if tokens.len() < 2 {
            return Err(Error::SequenceLength { len: tokens.len(), max: self.config.max_positions });
        }
        let logits = self.logits(tokens)?;
        sum_token_logprobs(&logits, tokens, 1, tokens.len())
    }

    /// Records the computation downstream of `site` at row `position` on a
    /// suffix tape seeded with `seed`, ending in `-log p(target)` at the
    /// final position. Upstream activations are computed untaped.
    pub fn tape_from<'a>(
        &'a self,
        tokens: &[u32],
        site: Site,
        position: usize,
        seed: Tensor<T>,
        target: u32,
    ) -> Result<(SuffixTape<'a, T>, Val<T>)> {
        site.validate(&self.config)?;
        if position >= tokens.len() {
            return Err(Error::UnresolvablePosition {
                spec: alloc::format!("{site}@{position}"),
                reason: alloc::format!("sequence has {} tokens", tokens.len()),
            });
        }
        if target as usize >= self.config.vocab_size {
            return Err(Error::TokenOutOfRange { id: target, vocab: self.config.vocab_size });
        }
        if seed.len() != site.width(&self.config) {
            return Err(Error::ShapeMismatch {
                op: "tape_from",
                expected: vec![site.width(&self.config)],
                got: seed.shape().to_vec(),
            });
        }
        let x = self.embed_tokens(tokens)?;
        let mut backend = Taped { tape: SuffixTape::new(seed), site, position, injected: false };
        let x = Val::Const(x);
        let hidden = run_layers(self, &mut backend, x)?;
        if !backend.injected {
            return Err(Error::TapeIncomplete);
        }
        let tape = &mut backend.tape;
        let last = tape.select_row(&hidden, tokens.len() - 1)?;
        let logits = tape.linear(&last, self.unembedding(), None)?;
        let loss = tape.neg_log_prob(&logits, target as usize)?;
        Ok((backend.tape, loss))
    }
}

/// Sum of `log p(tokens[t])` for `t` in `start..end`, read from the logits
/// at `t - 1`.
pub fn sum_token_logprobs<T: Scalar>(logits: &Tensor<T>, tokens: &[u32], start: usize, end: usize) -> Result<T> {
    if start == 0 || end > tokens.len() || start > end {
        return Err(Error::RegionOutOfBounds { start, end, len: tokens.len() });
    }
    let mut total = T::zero();
    for t in start..end {
        let lp = tensor::log_softmax(logits.row(t - 1))?;
        total = total + lp[tokens[t] as usize];
    }
    Ok(total)
}

/// Operations the layer stack needs; implemented eagerly and on a tape.
pub(crate) trait Backend<'a, T: Scalar> {
    type V: Clone;
    fn linear(&mut self, x: &Self::V, w: &'a Tensor<T>, b: Option<&'a Tensor<T>>) -> Result<Self::V>;
    fn layer_norm(&mut self, x: &Self::V, g: &'a Tensor<T>, b: &'a Tensor<T>, eps: T) -> Result<Self::V>;
    fn gelu(&mut self, x: &Self::V) -> Result<Self::V>;
    fn add(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn scale(&mut self, x: &Self::V, s: T) -> Result<Self::V>;
    fn slice_cols(&mut self, x: &Self::V, start: usize, len: usize) -> Result<Self::V>;
    fn concat_cols(&mut self, parts: &[Self::V]) -> Result<Self::V>;
    fn rotary(&mut self, x: &Self::V, fraction: f64) -> Result<Self::V>;
    fn matmul_nt(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn matmul(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn causal_softmax(&mut self, x: &Self::V) -> Result<Self::V>;
    fn site(&mut self, site: Site, v: Self::V) -> Result<Self::V>;
}

struct Plain<F> {
    hook: F,
}

impl<'a, T: Scalar, F> Backend<'a, T> for Plain<F>
where
    F: FnMut(Site, &mut Tensor<T>) -> Result<()>,
{
    type V = Tensor<T>;
    fn linear(&mut self, x: &Tensor<T>, w: &'a Tensor<T>, b: Option<&'a Tensor<T>>) -> Result<Tensor<T>> {
        tensor::linear(x, w, b)
    }
    fn layer_norm(&mut self, x: &Tensor<T>, g: &'a Tensor<T>, b: &'a Tensor<T>, eps: T) -> Result<Tensor<T>> {
        tensor::layer_norm(x, g, b, eps)
    }
    fn gelu(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        tensor::gelu(x)
    }
    fn add(&mut self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        tensor::add(a, b)
    }
    fn scale(&mut self, x: &Tensor<T>, s: T) -> Result<Tensor<T>> {
        tensor::scale(x, s)
    }
    fn slice_cols(&mut self, x: &Tensor<T>, start: usize, len: usize) -> Result<Tensor<T>> {
        tensor::slice_cols(x, start, len)
    }
    fn concat_cols(&mut self, parts: &[Tensor<T>]) -> Result<Tensor<T>> {
        let refs: Vec<&Tensor<T>> = parts.iter().collect();
        tensor::concat_cols(&refs)
    }
    fn rotary(&mut self, x: &Tensor<T>, fraction: f64) -> Result<Tensor<T>> {
        tensor::rotary_rows(x, fraction)
    }
    fn matmul_nt(&mut self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        tensor::matmul_nt(a, b)
    }
    fn matmul(&mut self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        tensor::matmul(a, b)
    }
    fn causal_softmax(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        tensor::causal_softmax(x)
    }
    fn site(&mut self, site: Site, mut v: Tensor<T>) -> Result<Tensor<T>> {
        (self.hook)(site, &mut v)?;
        if !v.is_finite() {
            return Err(Error::NonFinite { op: "hook" });
        }
        Ok(v)
    }
}

struct Taped<'a, T> {
    tape: SuffixTape<'a, T>,
    site: Site,
    position: usize,
    injected: bool,
}

impl<'a, T: Scalar> Backend<'a, T> for Taped<'a, T> {
    type V = Val<T>;
    fn linear(&mut self, x: &Val<T>, w: &'a Tensor<T>, b: Option<&'a Tensor<T>>) -> Result<Val<T>> {
        self.tape.linear(x, w, b)
    }
    fn layer_norm(&mut self, x: &Val<T>, g: &'a Tensor<T>, b: &'a Tensor<T>, eps: T) -> Result<Val<T>> {
        self.tape.layer_norm(x, g, b, eps)
    }
    fn gelu(&mut self, x: &Val<T>) -> Result<Val<T>> {
        self.tape.gelu(x)
    }
    fn add(&mut self, a: &Val<T>, b: &Val<T>) -> Result<Val<T>> {
        self.tape.add(a, b)
    }
    fn scale(&mut self, x: &Val<T>, s: T) -> Result<Val<T>> {
        self.tape.scale(x, s)
    }
    fn slice_cols(&mut self, x: &Val<T>, start: usize, len: usize) -> Result<Val<T>> {
        self.tape.slice_cols(x, start, len)
    }
    fn concat_cols(&mut self, parts: &[Val<T>]) -> Result<Val<T>> {
        self.tape.concat_cols(parts)
    }
    fn rotary(&mut self, x: &Val<T>, fraction: f64) -> Result<Val<T>> {
        self.tape.rotary(x, fraction)
    }
    fn matmul_nt(&mut self, a: &Val<T>, b: &Val<T>) -> Result<Val<T>> {
        self.tape.matmul_nt(a, b)
    }
    fn matmul(&mut self, a: &Val<T>, b: &Val<T>) -> Result<Val<T>> {
        self.tape.matmul(a, b)
    }
    fn causal_softmax(&mut self, x: &Val<T>) -> Result<Val<T>> {
        self.tape.causal_softmax(x)
    }
    fn site(&mut self, site: Site, v: Val<T>) -> Result<Val<T>> {
        if site != self.site {
            return Ok(v);
        }
        let Val::Const(base) = v else {
            return Err(Error::Precondition("seed site reached twice".into()));
        };
        self.injected = true;
        let seed = self.tape.seed();
        self.tape.scatter_row(base, self.position, &seed)
    }
}

/// Embedding → layers → final layer norm. Returns `[seq, d_model]`.
fn run_layers<'a, T: Scalar, B: Backend<'a, T>>(model: &'a Model<T>, b: &mut B, x: B::V) -> Result<B::V> {
    let cfg = &model.config;
    let eps = model.eps();
    let dh = cfg.d_head;
    let inv_sqrt = T::from_f64(1.0 / libm::sqrt(dh as f64));
    let mut x = x;
    for (li, w) in model.layers.iter().enumerate() {
        let h1 = b.layer_norm(&x, &w.ln1_gain, &w.ln1_bias, eps)?;
        let qkv = b.linear(&h1, &w.qkv_weight, Some(&w.qkv_bias))?;
        let mut heads = Vec::with_capacity(cfg.n_heads);
        for h in 0..cfg.n_heads {
            let base = h * 3 * dh;
            let q = b.slice_cols(&qkv, base, dh)?;
            let k = b.slice_cols(&qkv, base + dh, dh)?;
            let v = b.slice_cols(&qkv, base + 2 * dh, dh)?;
            let q = b.rotary(&q, cfg.rotary_fraction)?;
            let k = b.rotary(&k, cfg.rotary_fraction)?;
            let scores = b.matmul_nt(&q, &k)?;
            let scores = b.scale(&scores, inv_sqrt)?;
            let probs = b.causal_softmax(&scores)?;
            let z = b.matmul(&probs, &v)?;
            heads.push(b.site(Site::head(li, h), z)?);
        }
        let cat = b.concat_cols(&heads)?;
        let attn = b.linear(&cat, &w.attn_out_weight, Some(&w.attn_out_bias))?;
        let attn = b.site(Site::attn(li), attn)?;
        let out = if cfg.parallel_residual {
            let h2 = b.layer_norm(&x, &w.ln2_gain, &w.ln2_bias, eps)?;
            let mlp = mlp(b, w, &h2)?;
            let mlp = b.site(Site::mlp(li), mlp)?;
            let s = b.add(&mlp, &attn)?;
            b.add(&s, &x)?
        } else {
            let mid = b.add(&x, &attn)?;
            let h2 = b.layer_norm(&mid, &w.ln2_gain, &w.ln2_bias, eps)?;
            let mlp = mlp(b, w, &h2)?;
            let mlp = b.site(Site::mlp(li), mlp)?;
            b.add(&mid, &mlp)?
        };
        x = b.site(Site::resid(li), out)?;
    }
    b.layer_norm(&x, &model.final_gain, &model.final_bias, eps)
}

fn mlp<'a, T: Scalar, B: Backend<'a, T>>(b: &mut B, w: &'a LayerWeights<T>, h: &B::V) -> Result<B::V> {
    let up = b.linear(h, &w.mlp_up_weight, Some(&w.mlp_up_bias))?;
    let act = b.gelu(&up)?;
    b.linear(&act, &w.mlp_down_weight, Some(&w.mlp_down_bias))
}
