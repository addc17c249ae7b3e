// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::format;
use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_true() -> bool {
    true
}

fn default_eps() -> f64 {
    1e-5
}

/// Architecture hyperparameters of a GPT-NeoX style decoder.
///
/// Field aliases accept the key names used by Hugging Face `config.json`
/// files, so a checkpoint's config can be read as-is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(alias = "num_hidden_layers")]
    pub n_layers: usize,
    #[serde(alias = "num_attention_heads")]
    pub n_heads: usize,
    #[serde(alias = "hidden_size")]
    pub d_model: usize,
    /// Zero means `d_model / n_heads`.
    #[serde(default)]
    pub d_head: usize,
    /// Zero means `4 * d_model`.
    #[serde(default, alias = "intermediate_size")]
    pub d_mlp: usize,
    pub vocab_size: usize,
    #[serde(alias = "max_position_embeddings")]
    pub max_positions: usize,
    #[serde(alias = "rotary_pct")]
    pub rotary_fraction: f64,
    #[serde(default = "default_true", alias = "use_parallel_residual")]
    pub parallel_residual: bool,
    #[serde(default = "default_eps")]
    pub layer_norm_eps: f64,
    #[serde(default, alias = "tie_word_embeddings")]
    pub tied_embeddings: bool,
}

impl ModelConfig {
    /// Fills derived widths and checks the structural invariants.
    pub fn validated(mut self) -> Result<Self> {
        if self.n_heads == 0 {
            return Err(Error::InvalidConfig("n_heads must be positive".into()));
        }
        if self.d_head == 0 {
            self.d_head = self.d_model / self.n_heads;
        }
        if self.d_mlp == 0 {
            self.d_mlp = 4 * self.d_model;
        }
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.d_model != self.n_heads * self.d_head {
            return fail(format!(
                "d_model {} != n_heads {} x d_head {}",
                self.d_model, self.n_heads, self.d_head
            ));
        }
        if self.n_layers == 0 {
            return fail("n_layers must be at least 1".to_string());
        }
        if self.vocab_size < 2 {
            return fail("vocab_size must be at least 2".to_string());
        }
        if self.max_positions == 0 {
            return fail("max_positions must be positive".to_string());
        }
        if !(self.rotary_fraction > 0.0 && self.rotary_fraction <= 1.0) {
            return fail(format!("rotary_fraction {} not in (0, 1]", self.rotary_fraction));
        }
        if !crate::tensor::rotary_width(self.d_head, self.rotary_fraction).is_multiple_of(2) {
            return fail("rotated width must be even".to_string());
        }
        if !(self.layer_norm_eps > 0.0) {
            return fail("layer_norm_eps must be positive".to_string());
        }
        Ok(self)
    }
}

/// Tensor names in a weight archive. `{i}` stands for the layer index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightLayout {
    pub embed: String,
    pub ln1_weight: String,
    pub ln1_bias: String,
    pub ln2_weight: String,
    pub ln2_bias: String,
    pub qkv_weight: String,
    pub qkv_bias: String,
    pub attn_out_weight: String,
    pub attn_out_bias: String,
    pub mlp_up_weight: String,
    pub mlp_up_bias: String,
    pub mlp_down_weight: String,
    pub mlp_down_bias: String,
    pub final_ln_weight: String,
    pub final_ln_bias: String,
    pub unembed: String,
}

impl Default for WeightLayout {
    fn default() -> Self {
        let l = |s: &str| format!("gpt_neox.layers.{{i}}.{s}");
        Self {
            embed: "gpt_neox.embed_in.weight".into(),
            ln1_weight: l("input_layernorm.weight"),
            ln1_bias: l("input_layernorm.bias"),
            ln2_weight: l("post_attention_layernorm.weight"),
            ln2_bias: l("post_attention_layernorm.bias"),
            qkv_weight: l("attention.query_key_value.weight"),
            qkv_bias: l("attention.query_key_value.bias"),
            attn_out_weight: l("attention.dense.weight"),
            attn_out_bias: l("attention.dense.bias"),
            mlp_up_weight: l("mlp.dense_h_to_4h.weight"),
            mlp_up_bias: l("mlp.dense_h_to_4h.bias"),
            mlp_down_weight: l("mlp.dense_4h_to_h.weight"),
            mlp_down_bias: l("mlp.dense_4h_to_h.bias"),
            final_ln_weight: "gpt_neox.final_layer_norm.weight".into(),
            final_ln_bias: "gpt_neox.final_layer_norm.bias".into(),
            unembed: "embed_out.weight".into(),
        }
    }
}

impl WeightLayout {
    pub fn layer(template: &str, i: usize) -> String {
        template.replace("{i}", &i.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ModelConfig {
        ModelConfig {
            n_layers: 2,
            n_heads: 2,
            d_model: 8,
            d_head: 0,
            d_mlp: 0,
            vocab_size: 300,
            max_positions: 32,
            rotary_fraction: 0.5,
            parallel_residual: true,
            layer_norm_eps: 1e-5,
            tied_embeddings: false,
        }
    }

    #[test]
    fn derived_widths() {
        let c = base().validated().unwrap();
        assert_eq!((c.d_head, c.d_mlp), (4, 32));
    }

    #[test]
    fn invariants_rejected() {
        let mut c = base();
        c.d_head = 3;
        assert!(c.validated().is_err());
        let mut c = base();
        c.vocab_size = 1;
        assert!(c.validated().is_err());
        let mut c = base();
        c.n_layers = 0;
        assert!(c.validated().is_err());
        let mut c = base();
        c.rotary_fraction = 0.0;
        assert!(c.validated().is_err());
    }
}
