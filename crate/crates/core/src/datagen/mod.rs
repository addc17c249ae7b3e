// SPDX-License-Identifier: MIT OR Apache-2.0

//! Template-driven minimal pairs for filler-gap, NPI-licensing and control
//! constructions.

mod templates;
mod vocab;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intervention::{Alignment, SlotSpans, Span, TokenizedPair};
use crate::transformer::Tokenizer;

pub use templates::{template, NpiOutputs};
pub use vocab::VocabularySet;

// ---- labels

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Construction {
    EWhK,
    EWhW,
    MWh,
    RelCl,
    Cleft,
    PCleft,
    Topic,
    Cond,
    DNeg,
    SOnly,
    Qnt,
    EmbQ,
    SmpQ,
    Sup,
    Only,
    Ctrl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phenomenon {
    Fgd,
    Npi,
    Control,
}

impl Construction {
    pub const ALL: [Construction; 16] = [
        Self::EWhK,
        Self::EWhW,
        Self::MWh,
        Self::RelCl,
        Self::Cleft,
        Self::PCleft,
        Self::Topic,
        Self::Cond,
        Self::DNeg,
        Self::SOnly,
        Self::Qnt,
        Self::EmbQ,
        Self::SmpQ,
        Self::Sup,
        Self::Only,
        Self::Ctrl,
    ];

    pub fn fgd() -> impl Iterator<Item = Construction> {
        Self::ALL.into_iter().filter(|c| c.phenomenon() == Phenomenon::Fgd)
    }

    pub fn npi() -> impl Iterator<Item = Construction> {
        Self::ALL.into_iter().filter(|c| c.phenomenon() == Phenomenon::Npi)
    }

    pub fn phenomenon(self) -> Phenomenon {
        use Construction::*;
        match self {
            EWhK | EWhW | MWh | RelCl | Cleft | PCleft | Topic => Phenomenon::Fgd,
            Cond | DNeg | SOnly | Qnt | EmbQ | SmpQ | Sup | Only => Phenomenon::Npi,
            Ctrl => Phenomenon::Control,
        }
    }

    fn index(self) -> u64 {
        Self::ALL.iter().position(|c| *c == self).unwrap_or(0) as u64
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Dataset(format!("unknown construction `{s}`")))
    }
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Id,
    Ood,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Id,
    Ood,
}

// ---- templates

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tok {
    Lit(String),
    /// A word drawn from a vocabulary category.
    Cat(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fill {
    /// Realized once and shared by both sides.
    Same(Vec<Tok>),
    /// Differs between sides; an empty side is the null string.
    Alt { base: Vec<Tok>, source: Vec<Tok> },
    /// One `base|source` entry from a category.
    AltPair(String),
    /// Two distinct `text:label` entries; the labels become the outputs.
    AltLinked(String),
}

impl Fill {
    fn alternates(&self) -> bool {
        !matches!(self, Fill::Same(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub name: String,
    pub fill: Fill,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputRule {
    Choice(Vec<String>),
    /// Taken from an [`Fill::AltLinked`] slot.
    Linked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub construction: Construction,
    pub distribution: Distribution,
    pub slots: Vec<Slot>,
    pub y_base: OutputRule,
    pub y_source: OutputRule,
}

/// One realized pair before split assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Realized {
    pub base: Vec<String>,
    pub source: Vec<String>,
    pub y_base: String,
    pub y_source: String,
    pub alignment: Alignment,
    pub alternating: String,
}

fn split_words(s: &str) -> impl Iterator<Item = String> + '_ {
    s.split_whitespace().map(String::from)
}

impl Template {
    /// Index of the one alternating slot.
    pub fn alternating_slot(&self) -> Result<usize> {
        let alts: Vec<usize> = (0..self.slots.len()).filter(|i| self.slots[*i].fill.alternates()).collect();
        match alts.as_slice() {
            [i] => Ok(*i),
            _ => Err(Error::Dataset(format!("{} template has {} alternating slots", self.construction, alts.len()))),
        }
    }

    /// Fills the template. `pick(label, options)` returns an index into
    /// `options`; labels are vocabulary categories, `y_base` or `y_source`.
    pub fn realize(&self, vocab: &VocabularySet, pick: &mut dyn FnMut(&str, &[String]) -> usize) -> Result<Realized> {
        let alt_index = self.alternating_slot()?;
        let mut draw = |label: &str, list: &[String]| -> Result<String> {
            let i = pick(label, list);
            list.get(i).cloned().ok_or_else(|| Error::Dataset(format!("index {i} out of range for `{label}`")))
        };
        let fill_toks = |toks: &[Tok], draw: &mut dyn FnMut(&str, &[String]) -> Result<String>| -> Result<Vec<String>> {
            let mut out = Vec::new();
            for t in toks {
                match t {
                    Tok::Lit(w) => out.push(w.clone()),
                    Tok::Cat(c) => out.extend(split_words(&draw(c, vocab.words(c)?)?)),
                }
            }
            Ok(out)
        };
        let mut base = Vec::new();
        let mut source = Vec::new();
        let mut alignment = Alignment::new();
        let mut linked: Option<(String, String)> = None;
        for slot in &self.slots {
            let (b, s) = match &slot.fill {
                Fill::Same(toks) => {
                    let w = fill_toks(toks, &mut draw)?;
                    (w.clone(), w)
                }
                Fill::Alt { base, source } => (fill_toks(base, &mut draw)?, fill_toks(source, &mut draw)?),
                Fill::AltPair(c) => {
                    let entry = draw(c, vocab.words(c)?)?;
                    let (b, s) = entry
                        .split_once('|')
                        .ok_or_else(|| Error::Dataset(format!("`{entry}` in `{c}` is not a base|source entry")))?;
                    (split_words(b).collect(), split_words(s).collect())
                }
                Fill::AltLinked(c) => {
                    let list = vocab.words(c)?;
                    if list.len() < 2 {
                        return Err(Error::VocabularyTooSmall(format!("`{c}` needs two entries")));
                    }
                    let first = draw(c, list)?;
                    let mut second = draw(c, list)?;
                    let mut tries = 0;
                    while second == first {
                        tries += 1;
                        if tries > 64 {
                            return Err(Error::Dataset(format!("could not draw two distinct `{c}` entries")));
                        }
                        second = draw(c, list)?;
                    }
                    let parse = |e: &str| -> Result<(String, String)> {
                        e.split_once(':')
                            .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                            .ok_or_else(|| Error::Dataset(format!("`{e}` in `{c}` is not a text:label entry")))
                    };
                    let (bt, bl) = parse(&first)?;
                    let (st, sl) = parse(&second)?;
                    linked = Some((bl, sl));
                    (split_words(&bt).collect(), split_words(&st).collect())
                }
            };
            let spans = SlotSpans {
                base: Span::new(base.len(), base.len() + b.len()),
                source: Span::new(source.len(), source.len() + s.len()),
            };
            if alignment.insert(slot.name.clone(), spans).is_some() {
                return Err(Error::Dataset(format!("duplicate slot name `{}`", slot.name)));
            }
            base.extend(b);
            source.extend(s);
        }
        let mut output = |rule: &OutputRule, label: &str, from_link: Option<&String>| -> Result<String> {
            match (rule, from_link) {
                (OutputRule::Choice(list), _) => draw(label, list),
                (OutputRule::Linked, Some(l)) => Ok(l.clone()),
                (OutputRule::Linked, None) => Err(Error::Dataset("linked output without a linked slot".into())),
            }
        };
        let y_base = output(&self.y_base, "y_base", linked.as_ref().map(|l| &l.0))?;
        let y_source = output(&self.y_source, "y_source", linked.as_ref().map(|l| &l.1))?;
        Ok(Realized {
            base,
            source,
            y_base,
            y_source,
            alignment,
            alternating: self.slots[alt_index].name.clone(),
        })
    }
}

// ---- pairs

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinimalPair {
    pub base: String,
    pub source: String,
    pub y_base: String,
    pub y_source: String,
    pub construction: Construction,
    pub split: Split,
    /// Slot name → word span on each side.
    pub alignment: Alignment,
    /// Name of the slot that differs between base and source.
    pub alternating: String,
}

impl MinimalPair {
    pub fn flipped(&self) -> Self {
        Self {
            base: self.source.clone(),
            source: self.base.clone(),
            y_base: self.y_source.clone(),
            y_source: self.y_base.clone(),
            construction: self.construction,
            split: self.split,
            alignment: self
                .alignment
                .iter()
                .map(|(k, v)| (k.clone(), SlotSpans { base: v.source, source: v.base }))
                .collect(),
            alternating: self.alternating.clone(),
        }
    }

    /// Word distance from the end of the alternating slot to the output
    /// on the base side.
    pub fn dependency_distance(&self) -> Option<usize> {
        let span = self.alignment.get(&self.alternating)?;
        let n = self.base.split_whitespace().count();
        Some(n + 1 - span.base.end)
    }

    /// Tokenizes both sides, mapping word spans to token spans. Returns
    /// `None` when either output is not a single token.
    pub fn tokenize(&self, tok: &Tokenizer) -> Result<Option<TokenizedPair>> {
        let (Some(y_base), Some(y_source)) = (single_token(tok, &self.y_base), single_token(tok, &self.y_source)) else {
            return Ok(None);
        };
        let (base, bmap) = word_token_offsets(tok, &self.base)?;
        let (source, smap) = word_token_offsets(tok, &self.source)?;
        let mut alignment = Alignment::new();
        for (name, s) in &self.alignment {
            let get = |map: &[usize], i: usize| {
                map.get(i).copied().ok_or_else(|| Error::Dataset(format!("slot `{name}` outside sentence")))
            };
            alignment.insert(
                name.clone(),
                SlotSpans {
                    base: Span::new(get(&bmap, s.base.start)?, get(&bmap, s.base.end)?),
                    source: Span::new(get(&smap, s.source.start)?, get(&smap, s.source.end)?),
                },
            );
        }
        Ok(Some(TokenizedPair { base, source, y_base, y_source, alignment }))
    }
}

/// Text used to score an output word as a continuation.
pub fn continuation_text(y: &str) -> String {
    match y.chars().next() {
        Some(c) if c.is_alphanumeric() => format!(" {y}"),
        _ => y.to_string(),
    }
}

fn single_token(tok: &Tokenizer, y: &str) -> Option<u32> {
    match tok.encode(&continuation_text(y)).as_slice() {
        [id] => Some(*id),
        _ => None,
    }
}

/// Token ids plus, for each word boundary `k`, the number of tokens that
/// encode the first `k` words.
fn word_token_offsets(tok: &Tokenizer, sentence: &str) -> Result<(Vec<u32>, Vec<usize>)> {
    let words: Vec<&str> = sentence.split_whitespace().collect();
    let full = tok.encode(&words.join(" "));
    let mut map = Vec::with_capacity(words.len() + 1);
    map.push(0);
    for k in 1..=words.len() {
        let prefix = tok.encode(&words[..k].join(" "));
        if !full.starts_with(&prefix) {
            return Err(Error::Tokenizer(format!("word boundary {k} of `{sentence}` splits a token")));
        }
        map.push(prefix.len());
    }
    Ok((full, map))
}

// ---- generation

/// Pair counts per construction, before symmetrization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub id_test: usize,
    pub ood_test: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        Self { train: 200, id_test: 50, ood_test: 50 }
    }
}

fn rng_for(template: &Template, seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = match template.distribution {
        Distribution::Id => 0,
        Distribution::Ood => 1,
    };
    rng.set_stream(template.construction.index() * 2 + dist);
    rng
}

/// `n` pairs in which no sentence string, base or source, repeats.
pub fn generate(template: &Template, vocab: &VocabularySet, n: usize, seed: u64) -> Result<Vec<MinimalPair>> {
    let mut rng = rng_for(template, seed);
    let mut used = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    let budget = 1000 + n * 200;
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        if attempts > budget {
            return Err(Error::VocabularyTooSmall(format!(
                "{} produced only {} distinct pairs of {n}",
                template.construction,
                out.len()
            )));
        }
        let r = template.realize(vocab, &mut |_, list| rng.random_range(0..list.len()))?;
        let (b, s) = (r.base.join(" "), r.source.join(" "));
        if b == s || used.contains(&b) || used.contains(&s) {
            continue;
        }
        used.insert(b.clone());
        used.insert(s.clone());
        out.push(MinimalPair {
            base: b,
            source: s,
            y_base: r.y_base,
            y_source: r.y_source,
            construction: template.construction,
            split: match template.distribution {
                Distribution::Id => Split::Train,
                Distribution::Ood => Split::Ood,
            },
            alignment: r.alignment,
            alternating: r.alternating,
        });
    }
    Ok(out)
}

/// Adds the base/source swap of every FGD and control pair. NPI pairs keep
/// only the orientation whose base takes the NPI.
pub fn symmetrize(pairs: &[MinimalPair]) -> Vec<MinimalPair> {
    let mut out = Vec::with_capacity(pairs.len() * 2);
    for p in pairs {
        out.push(p.clone());
        if p.construction.phenomenon() != Phenomenon::Npi {
            out.push(p.flipped());
        }
    }
    out
}

/// Train, ID-test and OOD-test pairs, before symmetrization.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<MinimalPair>,
    pub id_test: Vec<MinimalPair>,
    pub ood_test: Vec<MinimalPair>,
}

impl DatasetSplit {
    pub fn all(&self) -> impl Iterator<Item = &MinimalPair> {
        self.train.iter().chain(&self.id_test).chain(&self.ood_test)
    }

    pub fn constructions(&self) -> BTreeSet<Construction> {
        self.all().map(|p| p.construction).collect()
    }

    /// Only the pairs of `c`.
    pub fn restrict(&self, c: Construction) -> DatasetSplit {
        let f = |v: &[MinimalPair]| v.iter().filter(|p| p.construction == c).cloned().collect();
        DatasetSplit { train: f(&self.train), id_test: f(&self.id_test), ood_test: f(&self.ood_test) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[derive(Default)]
pub struct GenOptions {
    pub seed: u64,
    pub sizes: SplitSizes,
    pub npi: NpiOutputs,
}


pub fn build_splits(
    constructions: &[Construction],
    id_vocab: &VocabularySet,
    ood_vocab: &VocabularySet,
    opts: &GenOptions,
) -> Result<DatasetSplit> {
    id_vocab.check_disjoint(ood_vocab)?;
    let mut split = DatasetSplit::default();
    for &c in constructions {
        let id_t = template(c, Distribution::Id, &opts.npi);
        let ood_t = template(c, Distribution::Ood, &opts.npi);
        let pool = generate(&id_t, id_vocab, opts.sizes.train + opts.sizes.id_test, opts.seed)?;
        let (train, id_test) = pool.split_at(opts.sizes.train);
        split.train.extend_from_slice(train);
        split.id_test.extend(id_test.iter().cloned().map(|mut p| {
            p.split = Split::Id;
            p
        }));
        split.ood_test.extend(generate(&ood_t, ood_vocab, opts.sizes.ood_test, opts.seed)?);
    }
    Ok(split)
}

// ---- validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Count,
    Duplicate,
    TrainIdOverlap,
    OodVocabulary,
    Orientation,
    Minimality,
    ControlDistance,
    Alignment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub construction: Construction,
    pub kind: ViolationKind,
    pub item: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pairs_checked: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

const NPI_WORDS: [&str; 2] = ["any", "ever"];

fn contains_phrase(words: &[&str], phrase: &[&str]) -> bool {
    !phrase.is_empty() && words.windows(phrase.len()).any(|w| w == phrase)
}

fn check_minimality(p: &MinimalPair) -> core::result::Result<(), String> {
    let b: Vec<&str> = p.base.split_whitespace().collect();
    let s: Vec<&str> = p.source.split_whitespace().collect();
    let alt = p.alignment.get(&p.alternating).ok_or("alternating slot missing from alignment")?;
    let (bs, ss) = (alt.base, alt.source);
    if bs.end > b.len() || ss.end > s.len() || bs.start != ss.start {
        return Err("alternating span out of place".into());
    }
    if b[..bs.start] != s[..ss.start] || b[bs.end..] != s[ss.end..] {
        return Err("words differ outside the alternating slot".into());
    }
    if b[bs.start..bs.end] == s[ss.start..ss.end] {
        return Err("alternating slot is identical on both sides".into());
    }
    for (name, sp) in &p.alignment {
        if name != &p.alternating
            && (sp.base.end > b.len() || sp.source.end > s.len() || b[sp.base.start..sp.base.end] != s[sp.source.start..sp.source.end])
        {
            return Err(format!("slot `{name}` differs between sides"));
        }
    }
    Ok(())
}

/// Checks counts, disjointness, vocabulary separation, NPI orientation,
/// minimality and control distances.
pub fn validate(split: &DatasetSplit, id_vocab: &VocabularySet, sizes: SplitSizes) -> ValidationReport {
    let mut report = ValidationReport { pairs_checked: split.all().count(), violations: Vec::new() };
    let mut flag = |c: Construction, kind: ViolationKind, item: String| report.violations.push(Violation { construction: c, kind, item });

    for c in split.constructions() {
        let counts = [
            ("train", split.train.iter().filter(|p| p.construction == c).count(), sizes.train),
            ("id", split.id_test.iter().filter(|p| p.construction == c).count(), sizes.id_test),
            ("ood", split.ood_test.iter().filter(|p| p.construction == c).count(), sizes.ood_test),
        ];
        for (name, got, want) in counts {
            if got != want {
                flag(c, ViolationKind::Count, format!("{name}: {got} pairs, expected {want}"));
            }
        }
    }

    let mut train_strings: BTreeMap<&str, Construction> = BTreeMap::new();
    let mut seen: BTreeSet<(&str, Split)> = BTreeSet::new();
    for p in &split.train {
        for s in [p.base.as_str(), p.source.as_str()] {
            if !seen.insert((s, Split::Train)) {
                flag(p.construction, ViolationKind::Duplicate, s.to_string());
            }
            train_strings.insert(s, p.construction);
        }
    }
    for (list, tag) in [(&split.id_test, Split::Id), (&split.ood_test, Split::Ood)] {
        for p in list {
            for s in [p.base.as_str(), p.source.as_str()] {
                if !seen.insert((s, tag)) {
                    flag(p.construction, ViolationKind::Duplicate, s.to_string());
                }
                if tag == Split::Id && train_strings.contains_key(s) {
                    flag(p.construction, ViolationKind::TrainIdOverlap, s.to_string());
                }
            }
        }
    }

    let phrases: Vec<Vec<String>> =
        id_vocab.surface_phrases().iter().map(|p| p.split_whitespace().map(String::from).collect()).collect();
    for p in &split.ood_test {
        for sentence in [&p.base, &p.source, &p.y_base, &p.y_source] {
            let words: Vec<&str> = sentence.split_whitespace().collect();
            for ph in &phrases {
                let ph: Vec<&str> = ph.iter().map(String::as_str).collect();
                if contains_phrase(&words, &ph) {
                    flag(p.construction, ViolationKind::OodVocabulary, format!("`{}` in `{sentence}`", ph.join(" ")));
                }
            }
        }
    }

    for p in split.all() {
        if p.construction.phenomenon() == Phenomenon::Npi
            && (!NPI_WORDS.contains(&p.y_base.as_str()) || NPI_WORDS.contains(&p.y_source.as_str()))
        {
            flag(p.construction, ViolationKind::Orientation, format!("{} / {}: y_b={} y_s={}", p.base, p.source, p.y_base, p.y_source));
        }
        if let Err(e) = check_minimality(p) {
            flag(p.construction, ViolationKind::Minimality, format!("{} / {}: {e}", p.base, p.source));
        }
    }

    for ood in [false, true] {
        let in_dist = |p: &&MinimalPair| (p.split == Split::Ood) == ood;
        let fgd: Vec<usize> = split
            .all()
            .filter(in_dist)
            .filter(|p| p.construction.phenomenon() == Phenomenon::Fgd)
            .filter_map(MinimalPair::dependency_distance)
            .collect();
        if fgd.is_empty() {
            continue;
        }
        let mean = fgd.iter().sum::<usize>() as f64 / fgd.len() as f64;
        for p in split.all().filter(in_dist).filter(|p| p.construction == Construction::Ctrl) {
            match p.dependency_distance() {
                Some(d) if libm::fabs(d as f64 - mean) <= 1.0 => {}
                Some(d) => flag(p.construction, ViolationKind::ControlDistance, format!("{}: distance {d}, FGD mean {mean:.2}", p.base)),
                None => flag(p.construction, ViolationKind::Alignment, p.base.clone()),
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Answers each category with the next scripted word.
    fn scripted(words: &[&str]) -> impl FnMut(&str, &[String]) -> usize {
        let mut queue: Vec<String> = words.iter().map(|w| w.to_string()).collect();
        queue.reverse();
        move |label, list| {
            let w = queue.pop().expect("script exhausted");
            list.iter().position(|x| *x == w).unwrap_or_else(|| panic!("{w} not in {label}"))
        }
    }

    #[test]
    fn every_template_has_one_alternating_slot() {
        for c in Construction::ALL {
            for d in [Distribution::Id, Distribution::Ood] {
                template(c, d, &NpiOutputs::default()).alternating_slot().unwrap();
            }
        }
    }

    #[test]
    fn ewhk_row_reproduced() {
        let v = VocabularySet::builtin(Distribution::Id);
        let t = template(Construction::EWhK, Distribution::Id, &NpiOutputs::default());
        let r = t.realize(&v, &mut scripted(&["man", "knows", "teacher", "liked", ".", "her"])).unwrap();
        assert_eq!(r.base.join(" "), "The man knows who the teacher liked");
        assert_eq!(r.source.join(" "), "The man knows that the teacher liked");
        assert_eq!((r.y_base.as_str(), r.y_source.as_str()), (".", "her"));
    }

    #[test]
    fn dneg_row_reproduced() {
        let v = VocabularySet::builtin(Distribution::Id);
        let t = template(Construction::DNeg, Distribution::Id, &NpiOutputs::default());
        let r = t.realize(&v, &mut scripted(&["man", "seen", "any", "some"])).unwrap();
        assert_eq!(r.base.join(" "), "No man have seen");
        assert_eq!(r.source.join(" "), "The man have seen");
        assert_eq!(r.alternating, "licensor");
    }

    #[test]
    fn full_build_validates() {
        let id = VocabularySet::builtin(Distribution::Id);
        let ood = VocabularySet::builtin(Distribution::Ood);
        let split = build_splits(&Construction::ALL, &id, &ood, &GenOptions::default()).unwrap();
        let report = validate(&split, &id, SplitSizes::default());
        let mut kinds = BTreeSet::new();
        for v in &report.violations { kinds.insert((v.construction, v.kind, v.item.split('`').nth(1).unwrap_or("").to_string())); }
        assert!(report.ok(), "{kinds:?}");
        assert_eq!(split.train.len(), 16 * 200);
        let sym = symmetrize(&split.train);
        assert_eq!(sym.len(), 200 * (8 * 2 + 8));
    }

    #[test]
    fn generate_zero_is_empty() {
        let v = VocabularySet::builtin(Distribution::Id);
        let t = template(Construction::DNeg, Distribution::Id, &NpiOutputs::default());
        assert!(generate(&t, &v, 0, 1).unwrap().is_empty());
    }

    #[test]
    fn builtin_vocabularies_are_disjoint() {
        let id = VocabularySet::builtin(Distribution::Id);
        let ood = VocabularySet::builtin(Distribution::Ood);
        id.check_disjoint(&ood).unwrap();
        for cat in ["noun_sg", "noun_pl", "tverb_past", "iverb", "adj"] {
            assert!(id.words(cat).unwrap().len() >= 40, "{cat}");
            assert!(ood.words(cat).unwrap().len() >= 40, "{cat}");
        }
    }
}
