// SPDX-License-Identifier: MIT OR Apache-2.0

//! Causal-intervention engine for small decoder-only transformers.
//!
//! Everything here is `no_std` with `alloc`; file formats and the command
//! line live in the `gapscope` crate.

#![no_std]
extern crate alloc;

pub mod das;
pub mod datagen;
pub mod error;
pub mod hooks;
pub mod intervention;
pub mod metrics;
pub mod tape;
pub mod tensor;
pub mod transformer;

pub use error::{Error, Result};
pub use hooks::{ActivationCache, Location, Site, SiteKind, TapRequest};
pub use tensor::{DType, Scalar, Tensor};
pub use transformer::{Model, ModelConfig, Tokenizer, WeightLayout};
