// SPDX-License-Identifier: MIT OR Apache-2.0

//! Activation sites exposed by the forward pass.

use alloc::collections::{BTreeMap, BTreeSet};
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::transformer::ModelConfig;

/// Component whose output can be tapped or replaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SiteKind {
    /// Residual stream after the whole layer.
    ResidOut,
    /// Attention block output, after the output projection and its bias.
    AttnOut,
    /// MLP block output.
    MlpOut,
    /// One head's value-weighted sum, before the shared output projection.
    HeadOut,
}

impl SiteKind {
    pub fn prefix(self) -> &'static str {
        match self {
            Self::ResidOut => "resid",
            Self::AttnOut => "attn",
            Self::MlpOut => "mlp",
            Self::HeadOut => "head",
        }
    }
}

/// A component at a given layer (and head, for [`SiteKind::HeadOut`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Site {
    pub layer: usize,
    pub kind: SiteKind,
    pub head: Option<usize>,
}

impl Site {
    pub fn resid(layer: usize) -> Self {
        Self { layer, kind: SiteKind::ResidOut, head: None }
    }
    pub fn attn(layer: usize) -> Self {
        Self { layer, kind: SiteKind::AttnOut, head: None }
    }
    pub fn mlp(layer: usize) -> Self {
        Self { layer, kind: SiteKind::MlpOut, head: None }
    }
    pub fn head(layer: usize, head: usize) -> Self {
        Self { layer, kind: SiteKind::HeadOut, head: Some(head) }
    }

    pub fn validate(&self, config: &ModelConfig) -> Result<()> {
        let ok = self.layer < config.n_layers
            && match (self.kind, self.head) {
                (SiteKind::HeadOut, Some(h)) => h < config.n_heads,
                (SiteKind::HeadOut, None) => false,
                (_, None) => true,
                (_, Some(_)) => false,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidHook(alloc::format!("{self}")))
        }
    }

    /// Width of the activation vector at this site.
    pub fn width(&self, config: &ModelConfig) -> usize {
        match self.kind {
            SiteKind::HeadOut => config.d_head,
            _ => config.d_model,
        }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.head {
            Some(h) => write!(f, "{}.{}.{}", self.kind.prefix(), self.layer, h),
            None => write!(f, "{}.{}", self.kind.prefix(), self.layer),
        }
    }
}

/// A site at one absolute token position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub site: Site,
    pub position: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.site, self.position)
    }
}

/// The set of locations to record during a forward pass.
pub type TapRequest = BTreeSet<Location>;

/// Activations recorded during a forward pass, one vector per location.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ActivationCache<T> {
    entries: BTreeMap<Location, Tensor<T>>,
}

impl<T> ActivationCache<T> {
    pub fn new() -> Self {
        Self { entries: BTreeMap::new() }
    }

    pub fn insert(&mut self, loc: Location, value: Tensor<T>) {
        self.entries.insert(loc, value);
    }

    pub fn get(&self, loc: &Location) -> Option<&Tensor<T>> {
        self.entries.get(loc)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &Location> {
        self.entries.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Location, &Tensor<T>)> {
        self.entries.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn config() -> ModelConfig {
        ModelConfig {
            n_layers: 2,
            n_heads: 4,
            d_model: 16,
            d_head: 0,
            d_mlp: 0,
            vocab_size: 10,
            max_positions: 8,
            rotary_fraction: 0.5,
            parallel_residual: true,
            layer_norm_eps: 1e-5,
            tied_embeddings: false,
        }
        .validated()
        .unwrap()
    }

    #[test]
    fn validity_and_width() {
        let c = config();
        assert!(Site::head(1, 3).validate(&c).is_ok());
        assert!(Site::head(1, 4).validate(&c).is_err());
        assert!(Site::resid(2).validate(&c).is_err());
        assert!(Site { layer: 0, kind: SiteKind::MlpOut, head: Some(0) }.validate(&c).is_err());
        assert!(Site { layer: 0, kind: SiteKind::HeadOut, head: None }.validate(&c).is_err());
        assert_eq!(Site::head(0, 0).width(&c), 4);
        assert_eq!(Site::attn(0).width(&c), 16);
    }

    #[test]
    fn display_and_order() {
        assert_eq!(Location { site: Site::head(7, 5), position: 3 }.to_string(), "head.7.5@3");
        let mut taps = TapRequest::new();
        taps.insert(Location { site: Site::mlp(1), position: 0 });
        taps.insert(Location { site: Site::resid(0), position: 2 });
        assert_eq!(taps.iter().next().unwrap().site.layer, 0);
    }
}
