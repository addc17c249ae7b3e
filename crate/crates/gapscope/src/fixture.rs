// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded tiny models, a small trained byte-level BPE tokenizer and the
//! datasets that go with them. Used by the tests and by `gapscope fixture`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use gapscope_core::datagen::{self, Construction, Distribution, GenOptions, MinimalPair, SplitSizes, VocabularySet};
use gapscope_core::intervention::TokenizedPair;
use gapscope_core::transformer::{bytes_to_unicode, pretokenize};
use gapscope_core::{Model, ModelConfig, Scalar, Tensor, Tokenizer, WeightLayout};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};

use crate::archive;
use crate::error::Result;
use crate::io;

pub fn tiny_config(n_layers: usize, n_heads: usize, d_model: usize, vocab_size: usize, parallel_residual: bool) -> ModelConfig {
    ModelConfig {
        n_layers,
        n_heads,
        d_model,
        d_head: 0,
        d_mlp: 0,
        vocab_size,
        max_positions: 64,
        rotary_fraction: 0.5,
        parallel_residual,
        layer_norm_eps: 1e-5,
        tied_embeddings: false,
    }
    .validated()
    .expect("fixture config is valid")
}

/// Name and shape of every parameter under the default layout.
pub fn parameter_shapes(config: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let l = WeightLayout::default();
    let (d, f, v) = (config.d_model, config.d_mlp, config.vocab_size);
    let mut out = vec![(l.embed.clone(), vec![v, d])];
    for i in 0..config.n_layers {
        let at = |t: &str| WeightLayout::layer(t, i);
        out.extend([
            (at(&l.ln1_weight), vec![d]),
            (at(&l.ln1_bias), vec![d]),
            (at(&l.ln2_weight), vec![d]),
            (at(&l.ln2_bias), vec![d]),
            (at(&l.qkv_weight), vec![3 * d, d]),
            (at(&l.qkv_bias), vec![3 * d]),
            (at(&l.attn_out_weight), vec![d, d]),
            (at(&l.attn_out_bias), vec![d]),
            (at(&l.mlp_up_weight), vec![f, d]),
            (at(&l.mlp_up_bias), vec![f]),
            (at(&l.mlp_down_weight), vec![d, f]),
            (at(&l.mlp_down_bias), vec![d]),
        ]);
    }
    out.push((l.final_ln_weight.clone(), vec![d]));
    out.push((l.final_ln_bias.clone(), vec![d]));
    if !config.tied_embeddings {
        out.push((l.unembed.clone(), vec![v, d]));
    }
    out
}

/// Gaussian weights; layer-norm gains near one.
pub fn random_tensors<T: Scalar>(config: &ModelConfig, seed: u64) -> BTreeMap<String, Tensor<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = BTreeMap::new();
    for (name, shape) in parameter_shapes(config) {
        let n: usize = shape.iter().product();
        let is_gain = name.ends_with("layernorm.weight");
        let (mean, std) = if is_gain {
            (1.0, 0.1)
        } else if shape.len() == 1 {
            (0.0, 0.05)
        } else {
            (0.0, 1.0 / (shape[1] as f64).sqrt())
        };
        let normal = Normal::new(mean, std).expect("finite std");
        let data = (0..n).map(|_| T::from_f64(normal.sample(&mut rng))).collect();
        out.insert(name, Tensor::new(shape, data).expect("shape matches"));
    }
    out
}

pub fn random_model<T: Scalar>(config: &ModelConfig, seed: u64) -> Model<T> {
    Model::from_tensors(config.clone(), &WeightLayout::default(), random_tensors(config, seed)).expect("fixture model builds")
}

/// Learns byte-level BPE merges on `corpus` until the vocabulary has
/// `vocab_limit` entries or no pair occurs twice. Ties go to the
/// lexicographically smallest pair.
pub fn train_bpe(corpus: &[String], vocab_limit: usize) -> (BTreeMap<String, u32>, Vec<(String, String)>) {
    let table = bytes_to_unicode();
    let mut vocab: BTreeMap<String, u32> = BTreeMap::new();
    for (i, c) in table.iter().enumerate() {
        vocab.insert(c.to_string(), i as u32);
    }
    let mut words: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    for text in corpus {
        for piece in pretokenize(text) {
            let syms = piece.bytes().map(|b| table[b as usize].to_string()).collect();
            *words.entry(syms).or_default() += 1;
        }
    }
    let mut merges = Vec::new();
    while vocab.len() < vocab_limit {
        let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
        for (w, n) in &words {
            for p in w.windows(2) {
                *counts.entry((p[0].clone(), p[1].clone())).or_default() += n;
            }
        }
        let Some((best, n)) = counts.into_iter().fold(None, |acc: Option<((String, String), usize)>, (p, n)| match acc {
            Some((_, m)) if m >= n => acc,
            _ => Some((p, n)),
        }) else {
            break;
        };
        if n < 2 {
            break;
        }
        let joined = format!("{}{}", best.0, best.1);
        let next_id = vocab.len() as u32;
        vocab.entry(joined.clone()).or_insert(next_id);
        words = words
            .into_iter()
            .map(|(w, n)| {
                let mut out = Vec::with_capacity(w.len());
                let mut i = 0;
                while i < w.len() {
                    if i + 1 < w.len() && w[i] == best.0 && w[i + 1] == best.1 {
                        out.push(joined.clone());
                        i += 2;
                    } else {
                        out.push(w[i].clone());
                        i += 1;
                    }
                }
                (out, n)
            })
            .fold(BTreeMap::new(), |mut acc, (w, n)| {
                *acc.entry(w).or_default() += n;
                acc
            });
        merges.push(best);
    }
    (vocab, merges)
}

/// The first `k` entries of every builtin category.
pub fn small_vocab(distribution: Distribution, k: usize) -> VocabularySet {
    let full = VocabularySet::builtin(distribution);
    let categories = full.categories.iter().map(|(c, w)| (c.clone(), w.iter().take(k).cloned().collect())).collect();
    VocabularySet::new(distribution, categories)
}

/// Sizes small enough for tiny-model runs.
pub fn small_sizes() -> SplitSizes {
    SplitSizes { train: 12, id_test: 6, ood_test: 6 }
}

/// Pairs from a reduced vocabulary, before symmetrization.
pub fn small_split(constructions: &[Construction], seed: u64) -> Result<datagen::DatasetSplit> {
    let opts = GenOptions { seed, sizes: small_sizes(), ..GenOptions::default() };
    Ok(datagen::build_splits(constructions, &small_vocab(Distribution::Id, 8), &small_vocab(Distribution::Ood, 8), &opts)?)
}

/// Sentences and continuations the fixture tokenizer is trained on. Output
/// words are repeated so they end up as single tokens.
pub fn corpus(pairs: &[MinimalPair]) -> Vec<String> {
    let outputs: BTreeSet<String> = pairs.iter().flat_map(|p| [&p.y_base, &p.y_source]).map(|y| datagen::continuation_text(y)).collect();
    let mut out = Vec::new();
    for y in &outputs {
        out.extend(std::iter::repeat_n(y.clone(), 32));
    }
    for p in pairs {
        out.push(format!("{}{}", p.base, datagen::continuation_text(&p.y_base)));
        out.push(format!("{}{}", p.source, datagen::continuation_text(&p.y_source)));
    }
    out
}

/// Tokenizer of at most `vocab_limit` entries trained on `pairs`.
pub fn tokenizer_for(pairs: &[MinimalPair], vocab_limit: usize) -> (Tokenizer, BTreeMap<String, u32>, Vec<(String, String)>) {
    let (vocab, merges) = train_bpe(&corpus(pairs), vocab_limit);
    let tok = Tokenizer::new(vocab.clone(), merges.clone()).expect("trained tokenizer is consistent");
    (tok, vocab, merges)
}

/// Tokenizes and drops pairs with multi-token outputs.
pub fn tokenize_all(pairs: &[MinimalPair], tok: &Tokenizer) -> Result<Vec<TokenizedPair>> {
    let mut out = Vec::new();
    for p in pairs {
        if let Some(t) = p.tokenize(tok)? {
            out.push(t);
        }
    }
    Ok(out)
}

/// Writes `model.safetensors`, `config.json`, `vocab.json` and `merges.txt`.
pub fn write_fixture(dir: &Path, config: &ModelConfig, model: &Model<f64>, vocab: &BTreeMap<String, u32>, merges: &[(String, String)]) -> Result<()> {
    archive::save_model(&dir.join("model.safetensors"), model, None)?;
    io::write_json(&dir.join("config.json"), config)?;
    io::write_tokenizer(&dir.join("vocab.json"), &dir.join("merges.txt"), vocab, merges)
}

/// A tiny model plus a tokenizer trained on a small FGD/NPI dataset.
pub struct Bundle {
    pub config: ModelConfig,
    pub model: Model<f64>,
    pub tokenizer: Tokenizer,
    pub vocab: BTreeMap<String, u32>,
    pub merges: Vec<(String, String)>,
}

pub fn bundle(seed: u64) -> Result<Bundle> {
    let split = small_split(&Construction::ALL, seed)?;
    let all: Vec<MinimalPair> = split.all().cloned().collect();
    let (tokenizer, vocab, merges) = tokenizer_for(&all, 512);
    let config = tiny_config(2, 2, 32, 512, true);
    let model = random_model(&config, seed);
    Ok(Bundle { config, model, tokenizer, vocab, merges })
}

/// A model whose final-layer residual carries the label on one planted
/// direction `u`, plus pairs whose source and base differ in sign along
/// `u` at the last token.
pub struct PlantedTask {
    pub model: Model<f64>,
    pub pairs: Vec<TokenizedPair>,
    pub hook: gapscope_core::intervention::HookPoint,
    pub planted: Vec<f64>,
}

fn zero_mean_unit(mut v: Vec<f64>) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

pub fn planted_task(seed: u64, n_pairs: usize) -> PlantedTask {
    use gapscope_core::intervention::{HookPoint, PositionSpec};
    use gapscope_core::Site;
    use rand::Rng;

    let config = tiny_config(2, 2, 16, 64, true);
    let d = config.d_model;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut gauss = |n: usize| -> Vec<f64> { (0..n).map(|_| normal.sample(&mut rng)).collect() };
    let u = zero_mean_unit(gauss(d));
    let mut tensors = random_tensors::<f64>(&config, seed);
    let layout = WeightLayout::default();
    for i in 0..config.n_layers {
        for name in [&layout.attn_out_weight, &layout.attn_out_bias, &layout.mlp_down_weight, &layout.mlp_down_bias] {
            let t = tensors.get_mut(&WeightLayout::layer(name, i)).expect("layer tensor");
            t.data_mut().iter_mut().for_each(|v| *v *= 0.01);
        }
    }
    for v in tensors.get_mut(&layout.final_ln_bias).expect("final bias").data_mut() {
        *v = 0.0;
    }
    for v in tensors.get_mut(&layout.final_ln_weight).expect("final gain").data_mut() {
        *v = 1.0;
    }
    // Tokens 0..8 are prefix filler, 8..16 carry +u, 16..24 carry -u.
    let (y_source, y_base) = (60u32, 61u32);
    let project_out = |mut c: Vec<f64>| {
        let c0 = zero_mean_unit(c.clone());
        let dot: f64 = c0.iter().zip(&u).map(|(a, b)| a * b).sum();
        c = c0.iter().zip(&u).map(|(a, b)| a - dot * b).collect();
        c
    };
    {
        let embed = tensors.get_mut(&layout.embed).expect("embedding");
        for tok in 0..24usize {
            let mut row = project_out(gauss(d));
            let sign = match tok {
                8..=15 => 1.5,
                16..=23 => -1.5,
                _ => 0.0,
            };
            row.iter_mut().zip(&u).for_each(|(r, ui)| *r += sign * ui);
            embed.row_mut(tok).copy_from_slice(&row);
        }
    }
    {
        let unembed = tensors.get_mut(&layout.unembed).expect("unembedding");
        for (tok, sign) in [(y_source, 4.0), (y_base, -4.0)] {
            unembed.row_mut(tok as usize).iter_mut().zip(&u).for_each(|(r, ui)| *r = sign * ui);
        }
    }
    let model = Model::from_tensors(config, &layout, tensors).expect("planted model builds");
    let mut pairs = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let len = rng.random_range(2..6);
        let mut base: Vec<u32> = (0..len).map(|_| rng.random_range(0..8)).collect();
        let mut source = base.clone();
        base.push(rng.random_range(16..24));
        source.push(rng.random_range(8..16));
        pairs.push(TokenizedPair { base, source, y_base, y_source, alignment: Default::default() });
    }
    PlantedTask { model, pairs, hook: HookPoint::new(Site::resid(1), PositionSpec::FromRight(-1)), planted: u }
}
