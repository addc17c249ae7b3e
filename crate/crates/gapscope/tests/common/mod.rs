// SPDX-License-Identifier: MIT OR Apache-2.0

//! Independent reference implementations shared by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;

use fancy_regex::Regex;
use gapscope_core::intervention::TokenizedPair;
use gapscope_core::Model;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---- forward pass, one position at a time

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `w[out, in] · x + b`
fn affine(w: &[f64], out: usize, x: &[f64], b: Option<&[f64]>) -> Vec<f64> {
    let n = x.len();
    (0..out).map(|o| dot(&w[o * n..(o + 1) * n], x) + b.map_or(0.0, |b| b[o])).collect()
}

fn ln(x: &[f64], g: &[f64], b: &[f64], eps: f64) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv = 1.0 / (var + eps).sqrt();
    x.iter().enumerate().map(|(i, v)| (v - mean) * inv * g[i] + b[i]).collect()
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

fn rotate(v: &mut [f64], pos: usize, width: usize) {
    let half = width / 2;
    for i in 0..half {
        let theta = pos as f64 * 10_000f64.powf(-(2.0 * i as f64) / width as f64);
        let (s, c) = theta.sin_cos();
        let (a, b) = (v[i], v[i + half]);
        v[i] = a * c - b * s;
        v[i + half] = b * c + a * s;
    }
}

/// Logits per position, computed with explicit loops.
pub fn naive_logits(model: &Model<f64>, tokens: &[u32]) -> Vec<Vec<f64>> {
    let cfg = model.config();
    let (d, nh, dh, f) = (cfg.d_model, cfg.n_heads, cfg.d_head, cfg.d_mlp);
    let width = (dh as f64 * cfg.rotary_fraction).floor() as usize;
    let eps = cfg.layer_norm_eps;
    let mut xs: Vec<Vec<f64>> = tokens.iter().map(|&t| model.embedding().row(t as usize).to_vec()).collect();
    for l in model.layers() {
        let g = |t: &gapscope_core::Tensor<f64>| t.data().to_vec();
        let (w_qkv, b_qkv) = (g(&l.qkv_weight), g(&l.qkv_bias));
        let mut qs = vec![vec![vec![0.0; dh]; xs.len()]; nh];
        let mut ks = qs.clone();
        let mut vs = qs.clone();
        for (t, x) in xs.iter().enumerate() {
            let h = ln(x, l.ln1_gain.data(), l.ln1_bias.data(), eps);
            let qkv = affine(&w_qkv, 3 * d, &h, Some(&b_qkv));
            for head in 0..nh {
                let o = head * 3 * dh;
                qs[head][t] = qkv[o..o + dh].to_vec();
                ks[head][t] = qkv[o + dh..o + 2 * dh].to_vec();
                vs[head][t] = qkv[o + 2 * dh..o + 3 * dh].to_vec();
                rotate(&mut qs[head][t], t, width);
                rotate(&mut ks[head][t], t, width);
            }
        }
        let mut next = Vec::with_capacity(xs.len());
        for (t, x) in xs.iter().enumerate() {
            let mut concat = Vec::with_capacity(d);
            for head in 0..nh {
                let scores: Vec<f64> = (0..=t).map(|j| dot(&qs[head][t], &ks[head][j]) / (dh as f64).sqrt()).collect();
                let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
                let z: f64 = e.iter().sum();
                let mut o = vec![0.0; dh];
                for j in 0..=t {
                    for k in 0..dh {
                        o[k] += e[j] / z * vs[head][j][k];
                    }
                }
                concat.extend(o);
            }
            let attn = affine(l.attn_out_weight.data(), d, &concat, Some(l.attn_out_bias.data()));
            let mlp = |inp: &[f64]| {
                let h = ln(inp, l.ln2_gain.data(), l.ln2_bias.data(), eps);
                let up: Vec<f64> = affine(l.mlp_up_weight.data(), f, &h, Some(l.mlp_up_bias.data())).into_iter().map(gelu).collect();
                affine(l.mlp_down_weight.data(), d, &up, Some(l.mlp_down_bias.data()))
            };
            let out: Vec<f64> = if cfg.parallel_residual {
                let m = mlp(x);
                (0..d).map(|i| x[i] + attn[i] + m[i]).collect()
            } else {
                let mid: Vec<f64> = (0..d).map(|i| x[i] + attn[i]).collect();
                let m = mlp(&mid);
                (0..d).map(|i| mid[i] + m[i]).collect()
            };
            next.push(out);
        }
        xs = next;
    }
    let (g, b) = model.final_norm();
    xs.iter()
        .map(|x| {
            let h = ln(x, g.data(), b.data(), eps);
            affine(model.unembedding().data(), cfg.vocab_size, &h, None)
        })
        .collect()
}

pub fn log_softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z = row.iter().map(|v| (v - m).exp()).sum::<f64>().ln() + m;
    row.iter().map(|v| v - z).collect()
}

// ---- reference byte-level BPE

const GPT2_PATTERN: &str = r"'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+";

fn byte_table() -> BTreeMap<u8, char> {
    let mut bs: Vec<u32> = (b'!' as u32..=b'~' as u32).chain(0xA1..=0xAC).chain(0xAE..=0xFF).collect();
    let mut cs = bs.clone();
    let mut n = 0;
    for b in 0..256u32 {
        if !bs.contains(&b) {
            bs.push(b);
            cs.push(256 + n);
            n += 1;
        }
    }
    bs.into_iter().zip(cs).map(|(b, c)| (b as u8, char::from_u32(c).unwrap())).collect()
}

pub struct ReferenceBpe {
    re: Regex,
    table: BTreeMap<u8, char>,
    ranks: BTreeMap<(String, String), usize>,
    vocab: BTreeMap<String, u32>,
}

impl ReferenceBpe {
    pub fn new(vocab: &BTreeMap<String, u32>, merges: &[(String, String)]) -> Self {
        Self {
            re: Regex::new(GPT2_PATTERN).unwrap(),
            table: byte_table(),
            ranks: merges.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect(),
            vocab: vocab.clone(),
        }
    }

    fn bpe(&self, piece: &str) -> Vec<String> {
        let mut word: Vec<String> = piece.bytes().map(|b| self.table[&b].to_string()).collect();
        loop {
            let best = (0..word.len().saturating_sub(1))
                .filter_map(|i| self.ranks.get(&(word[i].clone(), word[i + 1].clone())).map(|r| (*r, i)))
                .min();
            let Some((_, i)) = best else { break };
            let (a, b) = (word[i].clone(), word[i + 1].clone());
            let mut out = Vec::new();
            let mut j = 0;
            while j < word.len() {
                if j + 1 < word.len() && word[j] == a && word[j + 1] == b {
                    out.push(format!("{a}{b}"));
                    j += 2;
                } else {
                    out.push(word[j].clone());
                    j += 1;
                }
            }
            word = out;
        }
        word
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut ids = Vec::new();
        for m in self.re.find_iter(text) {
            for sym in self.bpe(m.unwrap().as_str()) {
                ids.push(self.vocab[&sym]);
            }
        }
        ids
    }
}

/// Fifty sentences mixing dataset text with contractions, digits,
/// punctuation runs, repeated whitespace and non-ASCII text.
pub fn tokenizer_corpus(dataset_sentences: &[String]) -> Vec<String> {
    let mut out: Vec<String> = [
        "I'm sure they'll say it's fine, but we'd rather not.",
        "She said: \"don't\" -- twice!!",
        "Numbers 12345 and 3.14159 or 1,000,000.",
        "  leading and trailing spaces  ",
        "tabs\tand\nnewlines\n\nhere",
        "Ünïcödé wörds, naïve café façade.",
        "日本語のテキスト and 中文 mixed.",
        "emoji 🙂🙃 and symbols ©®™ §¶",
        "What's the capital of France? Paris.",
        "The man knows who the teacher liked.",
        "Who did the dentist see?",
        "'s 't 're 've 'm 'll 'd",
        "x    y     z",
        "end with spaces   ",
        "CAPITAL LETTERS AND lower",
        "a-b_c/d\\e|f",
        "",
        "   ",
        "1st 2nd 3rd 4th",
        "¿Qué? ¡Sí!",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    out.extend(dataset_sentences.iter().take(50 - out.len()).cloned());
    out
}

// ---- random inputs

pub fn random_tokens(rng: &mut ChaCha8Rng, len: usize, vocab: usize) -> Vec<u32> {
    (0..len).map(|_| rng.random_range(0..vocab as u32)).collect()
}

/// Pair of random sequences with distinct random labels.
pub fn random_pair(rng: &mut ChaCha8Rng, vocab: usize) -> TokenizedPair {
    let n = rng.random_range(3..9);
    let base = random_tokens(rng, n, vocab);
    let n = rng.random_range(3..9);
    let source = random_tokens(rng, n, vocab);
    let y_base = rng.random_range(0..vocab as u32);
    let mut y_source = rng.random_range(0..vocab as u32);
    while y_source == y_base {
        y_source = rng.random_range(0..vocab as u32);
    }
    TokenizedPair { base, source, y_base, y_source, alignment: Default::default() }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
