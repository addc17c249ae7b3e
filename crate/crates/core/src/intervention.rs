// SPDX-License-Identifier: MIT OR Apache-2.0

//! Activation patching, projection swaps and scaling at hook points.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hooks::{ActivationCache, Location, Site, TapRequest};
use crate::tensor::{Scalar, Tensor};
use crate::transformer::Model;

/// Which token(s) of a sequence a hook point addresses.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionSpec {
    /// Index from the left.
    Absolute(usize),
    /// Index from the right; `-1` is the final token.
    FromRight(isize),
    /// A named slot from the pair's alignment map.
    Slot(String),
    /// Every position. Only meaningful for scaling.
    All,
}

impl fmt::Display for PositionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Absolute(i) => write!(f, "{i}"),
            Self::FromRight(i) => write!(f, "{i}"),
            Self::Slot(s) => f.write_str(s),
            Self::All => f.write_str("*"),
        }
    }
}

impl PositionSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "*" {
            return Ok(Self::All);
        }
        if let Ok(i) = s.parse::<isize>() {
            return Ok(if i < 0 { Self::FromRight(i) } else { Self::Absolute(i as usize) });
        }
        let valid = !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || c == '_');
        if valid {
            Ok(Self::Slot(s.to_string()))
        } else {
            Err(Error::InvalidHook(format!("bad position `{s}`")))
        }
    }
}

/// A site plus a position rule, e.g. `head.7.5@-1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HookPoint {
    pub site: Site,
    pub position: PositionSpec,
}

impl fmt::Display for HookPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.site, self.position)
    }
}

impl HookPoint {
    pub fn new(site: Site, position: PositionSpec) -> Self {
        Self { site, position }
    }

    /// Parses `resid.L`, `attn.L`, `mlp.L` or `head.L.H`, optionally followed
    /// by `@pos`. Without a suffix the position is [`PositionSpec::All`].
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidHook(s.to_string());
        let (site_str, pos) = match s.split_once('@') {
            Some((a, b)) => (a, PositionSpec::parse(b).map_err(|_| bad())?),
            None => (s, PositionSpec::All),
        };
        let parts: Vec<&str> = site_str.trim().split('.').collect();
        let num = |p: &str| p.parse::<usize>().map_err(|_| bad());
        let site = match parts.as_slice() {
            ["resid", l] => Site::resid(num(l)?),
            ["attn", l] => Site::attn(num(l)?),
            ["mlp", l] => Site::mlp(num(l)?),
            ["head", l, h] => Site::head(num(l)?, num(h)?),
            _ => return Err(bad()),
        };
        Ok(Self { site, position: pos })
    }

    pub fn validate(&self, model_config: &crate::transformer::ModelConfig) -> Result<()> {
        self.site.validate(model_config).map_err(|_| Error::InvalidHook(self.to_string()))
    }
}

/// Half-open token range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }
    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Where a slot sits on each side of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSpans {
    pub base: Span,
    pub source: Span,
}

pub type Alignment = BTreeMap<String, SlotSpans>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Base,
    Source,
}

/// A minimal pair after tokenization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizedPair {
    pub base: Vec<u32>,
    pub source: Vec<u32>,
    pub y_base: u32,
    pub y_source: u32,
    pub alignment: Alignment,
}

impl TokenizedPair {
    pub fn tokens(&self, side: Side) -> &[u32] {
        match side {
            Side::Base => &self.base,
            Side::Source => &self.source,
        }
    }

    /// Swaps the roles of base and source.
    pub fn flipped(&self) -> Self {
        Self {
            base: self.source.clone(),
            source: self.base.clone(),
            y_base: self.y_source,
            y_source: self.y_base,
            alignment: self
                .alignment
                .iter()
                .map(|(k, v)| (k.clone(), SlotSpans { base: v.source, source: v.base }))
                .collect(),
        }
    }
}

/// Resolves `spec` to a single index on `side` of `pair`.
///
/// Slots must span the same number of tokens on both sides; a multi-token
/// slot resolves to its last token.
pub fn resolve_position(spec: &PositionSpec, pair: &TokenizedPair, side: Side) -> Result<usize> {
    let len = pair.tokens(side).len();
    let fail = |reason: String| Error::UnresolvablePosition { spec: spec.to_string(), reason };
    match spec {
        PositionSpec::Absolute(i) if *i < len => Ok(*i),
        PositionSpec::Absolute(_) => Err(fail(format!("sequence has {len} tokens"))),
        PositionSpec::FromRight(i) => {
            let back = i.unsigned_abs();
            if *i < 0 && back <= len {
                Ok(len - back)
            } else {
                Err(fail(format!("sequence has {len} tokens")))
            }
        }
        PositionSpec::Slot(name) => {
            let spans = pair.alignment.get(name).ok_or_else(|| fail("no such slot".into()))?;
            if spans.base.len() != spans.source.len() {
                return Err(fail(format!(
                    "slot spans {} base tokens but {} source tokens",
                    spans.base.len(),
                    spans.source.len()
                )));
            }
            let span = match side {
                Side::Base => spans.base,
                Side::Source => spans.source,
            };
            if span.is_empty() {
                return Err(fail("slot is empty".into()));
            }
            if span.end > len {
                return Err(fail(format!("span ends at {} past {len} tokens", span.end)));
            }
            Ok(span.end - 1)
        }
        PositionSpec::All => Err(fail("`*` does not name a single position".into())),
    }
}

/// What to do with the activation at a hook point.
#[derive(Debug, Clone, PartialEq)]
pub enum Action<T> {
    /// Replace with a cached source activation.
    Patch(Tensor<T>),
    /// Swap the component along the unit vector `direction` for the source's.
    ProjectSwap { direction: Tensor<T>, source: Tensor<T> },
    /// Multiply by a constant.
    Scale(T),
}

/// An action at a site and a resolved position (`None` = every position).
#[derive(Debug, Clone, PartialEq)]
pub struct Intervention<T> {
    pub site: Site,
    pub position: Option<usize>,
    pub action: Action<T>,
}

impl<T: Scalar> Intervention<T> {
    pub fn patch(loc: Location, source: Tensor<T>) -> Self {
        Self { site: loc.site, position: Some(loc.position), action: Action::Patch(source) }
    }

    pub fn project_swap(loc: Location, direction: Tensor<T>, source: Tensor<T>) -> Self {
        Self { site: loc.site, position: Some(loc.position), action: Action::ProjectSwap { direction, source } }
    }

    pub fn scale(site: Site, position: Option<usize>, alpha: T) -> Self {
        Self { site, position, action: Action::Scale(alpha) }
    }

    fn label(&self) -> String {
        match self.position {
            Some(p) => format!("{}@{p}", self.site),
            None => format!("{}@*", self.site),
        }
    }

    fn check(&self, model: &Model<T>, seq: usize) -> Result<()> {
        let cfg = model.config();
        self.site.validate(cfg)?;
        if let Some(p) = self.position {
            if p >= seq {
                return Err(Error::UnresolvablePosition {
                    spec: self.label(),
                    reason: format!("sequence has {seq} tokens"),
                });
            }
        }
        let width = self.site.width(cfg);
        let rows = if self.position.is_some() { 1 } else { seq };
        let want = |t: &Tensor<T>, what: &'static str| -> Result<()> {
            if t.len() == rows * width && t.last_dim() == width {
                Ok(())
            } else {
                Err(Error::ShapeMismatch { op: what, expected: vec![rows, width], got: t.shape().to_vec() })
            }
        };
        match &self.action {
            Action::Patch(src) => want(src, "patch"),
            Action::ProjectSwap { direction, source } => {
                if self.position.is_none() {
                    return Err(Error::InvalidHook(format!("{}: projection swap needs one position", self.label())));
                }
                want(source, "project_swap")?;
                want(direction, "project_swap")?;
                unit_norm(direction).map(|_| ())
            }
            Action::Scale(a) => {
                if a.is_finite() {
                    Ok(())
                } else {
                    Err(Error::NonFinite { op: "scale" })
                }
            }
        }
    }

    fn apply(&self, acts: &mut Tensor<T>) -> Result<()> {
        let rows: Vec<usize> = match self.position {
            Some(p) => vec![p],
            None => (0..acts.rows()).collect(),
        };
        for (k, r) in rows.into_iter().enumerate() {
            let row = acts.row_mut(r);
            match &self.action {
                Action::Patch(src) => {
                    let w = row.len();
                    row.copy_from_slice(&src.data()[k * w..(k + 1) * w]);
                }
                Action::ProjectSwap { direction, source } => {
                    swap_along(row, source.data(), direction.data());
                }
                Action::Scale(a) => {
                    for v in row.iter_mut() {
                        *v = *v * *a;
                    }
                }
            }
        }
        Ok(())
    }
}

fn overlaps<T>(a: &Intervention<T>, b: &Intervention<T>) -> bool {
    a.site == b.site && (a.position.is_none() || b.position.is_none() || a.position == b.position)
}

/// Records the activation at each location in one forward pass.
pub fn capture<T: Scalar>(model: &Model<T>, tokens: &[u32], locations: &[Location]) -> Result<ActivationCache<T>> {
    let taps: TapRequest = locations.iter().copied().collect();
    Ok(model.forward(tokens, &taps)?.1)
}

/// Resolves hook points against one side of a pair into locations.
pub fn locate(points: &[HookPoint], pair: &TokenizedPair, side: Side) -> Result<Vec<Location>> {
    points
        .iter()
        .map(|hp| Ok(Location { site: hp.site, position: resolve_position(&hp.position, pair, side)? }))
        .collect()
}

/// Forward pass with every intervention applied at its site before
/// anything downstream reads it.
pub fn run_with<T: Scalar>(model: &Model<T>, tokens: &[u32], interventions: &[Intervention<T>]) -> Result<Tensor<T>> {
    run_with_taps(model, tokens, interventions, &[]).map(|r| r.0)
}

/// [`run_with`] that also records activations at `locations`, after any
/// intervention at that site has been applied.
pub fn run_with_taps<T: Scalar>(
    model: &Model<T>,
    tokens: &[u32],
    interventions: &[Intervention<T>],
    locations: &[Location],
) -> Result<(Tensor<T>, ActivationCache<T>)> {
    for (i, iv) in interventions.iter().enumerate() {
        iv.check(model, tokens.len())?;
        if interventions[..i].iter().any(|o| overlaps(o, iv)) {
            return Err(Error::DuplicateSite(iv.label()));
        }
    }
    for loc in locations {
        loc.site.validate(model.config())?;
        if loc.position >= tokens.len() {
            return Err(Error::UnresolvablePosition { spec: loc.to_string(), reason: format!("sequence has {} tokens", tokens.len()) });
        }
    }
    let mut cache = ActivationCache::new();
    let logits = model.forward_with_hook(tokens, |site, acts| {
        for iv in interventions.iter().filter(|iv| iv.site == site) {
            iv.apply(acts)?;
        }
        for loc in locations.iter().filter(|l| l.site == site) {
            cache.insert(*loc, Tensor::vector(acts.row(loc.position).to_vec()));
        }
        Ok(())
    })?;
    Ok((logits, cache))
}

fn unit_norm<T: Scalar>(a: &Tensor<T>) -> Result<f64> {
    let norm = libm::sqrt(a.data().iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>());
    if libm::fabs(norm - 1.0) <= 1e-6 {
        Ok(norm)
    } else {
        Err(Error::NonUnitDirection { norm })
    }
}

fn swap_along<T: Scalar>(row: &mut [T], source: &[T], a: &[T]) {
    let mut coef = T::zero();
    for ((b, s), d) in row.iter().zip(source).zip(a) {
        coef = coef + (*s - *b) * *d;
    }
    for (b, d) in row.iter_mut().zip(a) {
        *b = *b + coef * *d;
    }
}

/// `f_b + (<f_s, a> - <f_b, a>) a` for a unit vector `a`.
pub fn das_apply<T: Scalar>(f_b: &Tensor<T>, f_s: &Tensor<T>, a: &Tensor<T>) -> Result<Tensor<T>> {
    if f_b.len() != f_s.len() || f_b.len() != a.len() {
        return Err(Error::ShapeMismatch { op: "das_apply", expected: f_b.shape().to_vec(), got: a.shape().to_vec() });
    }
    unit_norm(a)?;
    Ok(das_apply_unchecked(f_b, f_s, a))
}

pub(crate) fn das_apply_unchecked<T: Scalar>(f_b: &Tensor<T>, f_s: &Tensor<T>, a: &Tensor<T>) -> Tensor<T> {
    let mut out = f_b.clone();
    swap_along(out.data_mut(), f_s.data(), a.data());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hook_strings_round_trip() {
        for s in ["resid.0@-1", "attn.3@2", "mlp.1@verb", "head.7.5@-1", "head.9.2@*"] {
            assert_eq!(HookPoint::parse(s).unwrap().to_string(), s);
        }
        assert_eq!(HookPoint::parse("head.7.5").unwrap().position, PositionSpec::All);
        for s in ["head.1", "resid.x", "ffn.1", "resid.1@", "resid.1@a-b"] {
            assert!(HookPoint::parse(s).is_err(), "{s}");
        }
    }

    fn pair() -> TokenizedPair {
        let mut alignment = Alignment::new();
        alignment.insert("verb".into(), SlotSpans { base: Span::new(3, 4), source: Span::new(2, 3) });
        alignment.insert("filler".into(), SlotSpans { base: Span::new(1, 3), source: Span::new(1, 2) });
        TokenizedPair { base: vec![1; 7], source: vec![1; 6], y_base: 0, y_source: 1, alignment }
    }

    #[test]
    fn positions_resolve() {
        let p = pair();
        assert_eq!(resolve_position(&PositionSpec::FromRight(-1), &p, Side::Base).unwrap(), 6);
        assert_eq!(resolve_position(&PositionSpec::FromRight(-1), &p, Side::Source).unwrap(), 5);
        assert_eq!(resolve_position(&PositionSpec::Slot("verb".into()), &p, Side::Base).unwrap(), 3);
        assert_eq!(resolve_position(&PositionSpec::Slot("verb".into()), &p, Side::Source).unwrap(), 2);
        assert!(resolve_position(&PositionSpec::Slot("filler".into()), &p, Side::Base).is_err());
        assert!(resolve_position(&PositionSpec::FromRight(-8), &p, Side::Base).is_err());
        assert!(resolve_position(&PositionSpec::Absolute(7), &p, Side::Base).is_err());
    }

    #[test]
    fn das_apply_basis_case() {
        let fb = Tensor::vector(vec![1.0f64, 2.0]);
        let fs = Tensor::vector(vec![3.0, 4.0]);
        let e1 = Tensor::vector(vec![1.0, 0.0]);
        assert_eq!(das_apply(&fb, &fs, &e1).unwrap().data(), &[3.0, 2.0]);
        assert_eq!(das_apply(&fb, &fb, &e1).unwrap(), fb);
        let long = Tensor::vector(vec![2.0, 0.0]);
        assert!(matches!(das_apply(&fb, &fs, &long), Err(Error::NonUnitDirection { .. })));
    }
}
