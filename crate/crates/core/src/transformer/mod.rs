// SPDX-License-Identifier: MIT OR Apache-2.0

//! GPT-NeoX style decoder: configuration, tokenizer and hooked forward pass.

mod config;
mod model;
mod tokenizer;

pub use config::{ModelConfig, WeightLayout};
pub use model::{sum_token_logprobs, LayerWeights, Model};
pub use tokenizer::{bytes_to_unicode, pretokenize, Tokenizer};
