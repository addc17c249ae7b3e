// SPDX-License-Identifier: MIT OR Apache-2.0

//! Causal-effect scores, heatmaps and acceptability scoring.
//!
//! Everything is carried as natural-log probabilities.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hooks::{ActivationCache, Location, Site, SiteKind, TapRequest};
use crate::intervention::{self, HookPoint, Intervention, PositionSpec, Side, Span, TokenizedPair};
use crate::tensor::{self, Scalar, Tensor};
use crate::transformer::{sum_token_logprobs, Model, ModelConfig};

// ---- odds

/// `log p(y_b | x)` and `log p(y_s | x)` for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunLogProbs {
    pub y_base: f64,
    pub y_source: f64,
}

impl RunLogProbs {
    fn swapped(self) -> Self {
        Self { y_base: self.y_source, y_source: self.y_base }
    }
}

/// The four runs behind one pair's score.
///
/// `interv_base` is the base input with activations patched from the
/// source, `interv_source` the reverse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairLogProbs {
    pub clean_base: RunLogProbs,
    pub clean_source: RunLogProbs,
    pub interv_base: RunLogProbs,
    pub interv_source: RunLogProbs,
}

impl PairLogProbs {
    /// The same runs seen from the pair `(s, b, y_s, y_b)`.
    pub fn flipped(&self) -> Self {
        Self {
            clean_base: self.clean_source.swapped(),
            clean_source: self.clean_base.swapped(),
            interv_base: self.interv_source.swapped(),
            interv_source: self.interv_base.swapped(),
        }
    }

    /// Builds from raw probabilities in the order
    /// `p(y_b|b), p(y_b|s), p_interv(y_b|s,b), p_interv(y_b|b,s)`.
    /// The `y_s` fields are left at zero (probability one).
    pub fn from_probs(p_b_b: f64, p_b_s: f64, pi_b_sb: f64, pi_b_bs: f64) -> Result<Self> {
        let run = |p: f64, what| -> Result<RunLogProbs> { Ok(RunLogProbs { y_base: ln_prob(p, what)?, y_source: 0.0 }) };
        Ok(Self {
            clean_base: run(p_b_b, "p(y_b|b)")?,
            clean_source: run(p_b_s, "p(y_b|s)")?,
            interv_source: run(pi_b_sb, "p_interv(y_b|s,b)")?,
            interv_base: run(pi_b_bs, "p_interv(y_b|b,s)")?,
        })
    }

    fn check(&self) -> Result<()> {
        let all = [
            (self.clean_base, "clean base"),
            (self.clean_source, "clean source"),
            (self.interv_base, "intervened base"),
            (self.interv_source, "intervened source"),
        ];
        for (r, what) in all {
            for v in [r.y_base, r.y_source] {
                if !v.is_finite() || v > 1e-12 {
                    return Err(Error::ZeroProbability { what });
                }
            }
        }
        Ok(())
    }
}

pub fn ln_prob(p: f64, what: &'static str) -> Result<f64> {
    if p > 0.0 && p <= 1.0 {
        Ok(libm::log(p))
    } else {
        Err(Error::ZeroProbability { what })
    }
}

/// One pair's contribution to [`odds`].
pub fn odds_term(p: &PairLogProbs) -> Result<f64> {
    p.check()?;
    Ok(p.clean_base.y_base - p.clean_source.y_base + p.interv_source.y_base - p.interv_base.y_base)
}

/// One pair's contribution to [`odds_star`].
pub fn odds_star_term(p: &PairLogProbs) -> Result<f64> {
    p.check()?;
    Ok(p.clean_base.y_base - p.clean_base.y_source + p.interv_base.y_source - p.interv_base.y_base)
}

fn mean_of(set: &[PairLogProbs], term: fn(&PairLogProbs) -> Result<f64>) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Precondition("empty test set".into()));
    }
    let mut total = 0.0;
    for p in set {
        total += term(p)?;
    }
    Ok(total / set.len() as f64)
}

/// Mean over the set of
/// `log[(p(y_b|b)/p(y_b|s)) * (p_interv(y_b|s,b)/p_interv(y_b|b,s))]`.
pub fn odds(set: &[PairLogProbs]) -> Result<f64> {
    mean_of(set, odds_term)
}

/// Mean over the set of
/// `log[(p(y_b|b)/p(y_s|b)) * (p_interv(y_s|b,s)/p_interv(y_b|b,s))]`.
pub fn odds_star(set: &[PairLogProbs]) -> Result<f64> {
    mean_of(set, odds_star_term)
}

// ---- patching runs

fn final_log_probs<T: Scalar>(logits: &Tensor<T>, y_base: u32, y_source: u32) -> Result<RunLogProbs> {
    let lp = tensor::log_softmax(logits.row(logits.rows() - 1))?;
    let get = |y: u32| lp.get(y as usize).map(|v| v.as_f64()).ok_or(Error::TokenOutOfRange { id: y, vocab: lp.len() });
    Ok(RunLogProbs { y_base: get(y_base)?, y_source: get(y_source)? })
}

/// Clean runs of both sides of a pair with the activations a sweep needs.
#[derive(Debug, Clone)]
pub struct CleanRuns<T> {
    pub base: RunLogProbs,
    pub source: RunLogProbs,
    pub base_cache: ActivationCache<T>,
    pub source_cache: ActivationCache<T>,
}

/// How the swapped activation is formed at the hook point.
#[derive(Debug, Clone, Copy)]
pub enum Swap<'a, T> {
    /// Full replacement.
    Patch,
    /// Replace only the component along a unit direction.
    Project(&'a Tensor<T>),
}

/// Two clean forward passes, caching every resolvable hook point.
pub fn clean_runs<T: Scalar>(model: &Model<T>, pair: &TokenizedPair, points: &[HookPoint]) -> Result<CleanRuns<T>> {
    let mut taps = [TapRequest::new(), TapRequest::new()];
    for hp in points {
        hp.validate(model.config())?;
        let pos = (
            intervention::resolve_position(&hp.position, pair, Side::Base),
            intervention::resolve_position(&hp.position, pair, Side::Source),
        );
        if let (Ok(pb), Ok(ps)) = pos {
            taps[0].insert(Location { site: hp.site, position: pb });
            taps[1].insert(Location { site: hp.site, position: ps });
        }
    }
    let (lb, base_cache) = model.forward(&pair.base, &taps[0])?;
    let (ls, source_cache) = model.forward(&pair.source, &taps[1])?;
    Ok(CleanRuns {
        base: final_log_probs(&lb, pair.y_base, pair.y_source)?,
        source: final_log_probs(&ls, pair.y_base, pair.y_source)?,
        base_cache,
        source_cache,
    })
}

/// The two intervened runs at one hook point. `None` when the position
/// does not resolve on this pair.
pub fn interchange<T: Scalar>(
    model: &Model<T>,
    pair: &TokenizedPair,
    clean: &CleanRuns<T>,
    point: &HookPoint,
    swap: Swap<'_, T>,
) -> Result<Option<PairLogProbs>> {
    let pb = intervention::resolve_position(&point.position, pair, Side::Base);
    let ps = intervention::resolve_position(&point.position, pair, Side::Source);
    let (Ok(pb), Ok(ps)) = (pb, ps) else { return Ok(None) };
    let lb = Location { site: point.site, position: pb };
    let ls = Location { site: point.site, position: ps };
    let missing = |l: &Location| Error::Precondition(format!("clean run did not cache {l}"));
    let fb = clean.base_cache.get(&lb).ok_or_else(|| missing(&lb))?;
    let fs = clean.source_cache.get(&ls).ok_or_else(|| missing(&ls))?;
    let make = |loc: Location, donor: &Tensor<T>| match swap {
        Swap::Patch => Intervention::patch(loc, donor.clone()),
        Swap::Project(a) => Intervention::project_swap(loc, a.clone(), donor.clone()),
    };
    let on_base = intervention::run_with(model, &pair.base, &[make(lb, fs)])?;
    let on_source = intervention::run_with(model, &pair.source, &[make(ls, fb)])?;
    Ok(Some(PairLogProbs {
        clean_base: clean.base,
        clean_source: clean.source,
        interv_base: final_log_probs(&on_base, pair.y_base, pair.y_source)?,
        interv_source: final_log_probs(&on_source, pair.y_base, pair.y_source)?,
    }))
}

// ---- heatmaps

/// One sweep unit: a pair at a cell, scored or skipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub row: usize,
    pub column: usize,
    pub pair: usize,
    pub value: Option<f64>,
}

/// Rows are layers; columns are position slots or heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub columns: Vec<String>,
    /// Mean per cell; `None` when every pair was skipped.
    pub mean: Vec<Vec<Option<f64>>>,
    pub count: Vec<Vec<usize>>,
    pub skipped: Vec<Vec<usize>>,
}

impl Heatmap {
    pub fn rows(&self) -> usize {
        self.mean.len()
    }

    pub fn get(&self, row: usize, column: usize) -> Option<f64> {
        self.mean.get(row)?.get(column).copied().flatten()
    }

    /// Count-weighted average of two heatmaps over the same grid.
    pub fn pooled(&self, other: &Heatmap) -> Result<Heatmap> {
        if self.columns != other.columns || self.rows() != other.rows() {
            return Err(Error::Heatmap("grids differ".into()));
        }
        let mut out = self.clone();
        for r in 0..self.rows() {
            for c in 0..self.columns.len() {
                let (n1, n2) = (self.count[r][c], other.count[r][c]);
                let s1 = self.mean[r][c].unwrap_or(0.0) * n1 as f64;
                let s2 = other.mean[r][c].unwrap_or(0.0) * n2 as f64;
                out.count[r][c] = n1 + n2;
                out.skipped[r][c] = self.skipped[r][c] + other.skipped[r][c];
                out.mean[r][c] = if n1 + n2 == 0 { None } else { Some((s1 + s2) / (n1 + n2) as f64) };
            }
        }
        Ok(out)
    }
}

/// Averages sweep results per cell. Every cell must carry exactly one
/// entry for each pair index that appears anywhere in the sweep.
pub fn assemble_heatmap(rows: usize, columns: Vec<String>, results: &[CellResult]) -> Result<Heatmap> {
    if results.is_empty() {
        return Err(Error::Heatmap("empty sweep".into()));
    }
    let ncol = columns.len();
    let mut cells: BTreeMap<(usize, usize), BTreeMap<usize, Option<f64>>> = BTreeMap::new();
    for r in results {
        if r.row >= rows || r.column >= ncol {
            return Err(Error::Heatmap(format!("cell ({}, {}) outside {rows}x{ncol}", r.row, r.column)));
        }
        if let Some(v) = r.value {
            if !v.is_finite() {
                return Err(Error::NonFinite { op: "assemble_heatmap" });
            }
        }
        if cells.entry((r.row, r.column)).or_default().insert(r.pair, r.value).is_some() {
            return Err(Error::Heatmap(format!("pair {} reported twice at ({}, {})", r.pair, r.row, r.column)));
        }
    }
    let pairs: Vec<usize> = cells.values().next().map(|m| m.keys().copied().collect()).unwrap_or_default();
    if cells.len() != rows * ncol || cells.values().any(|m| m.keys().copied().ne(pairs.iter().copied())) {
        return Err(Error::Heatmap("ragged results".into()));
    }
    let mut hm = Heatmap {
        columns,
        mean: vec![vec![None; ncol]; rows],
        count: vec![vec![0; ncol]; rows],
        skipped: vec![vec![0; ncol]; rows],
    };
    for ((r, c), per_pair) in &cells {
        let mut total = 0.0;
        let mut n = 0;
        for v in per_pair.values() {
            match v {
                Some(v) => {
                    total += v;
                    n += 1;
                }
                None => hm.skipped[*r][*c] += 1,
            }
        }
        hm.count[*r][*c] = n;
        hm.mean[*r][*c] = (n > 0).then(|| total / n as f64);
    }
    Ok(hm)
}

/// Hook points laid out as a heatmap; `points[row][column]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HookGrid {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub points: Vec<Vec<HookPoint>>,
}

impl HookGrid {
    pub fn new(rows: Vec<String>, columns: Vec<String>, points: Vec<Vec<HookPoint>>) -> Result<Self> {
        if rows.is_empty() || columns.is_empty() {
            return Err(Error::Heatmap("empty grid".into()));
        }
        if points.len() != rows.len() || points.iter().any(|r| r.len() != columns.len()) {
            return Err(Error::Heatmap("grid points do not match labels".into()));
        }
        Ok(Self { rows, columns, points })
    }

    /// One cell.
    pub fn single(point: HookPoint) -> Self {
        Self { rows: vec![point.site.to_string()], columns: vec![point.position.to_string()], points: vec![vec![point]] }
    }

    /// Layers by positions for a whole-width component.
    pub fn layers_by_position(config: &ModelConfig, kind: SiteKind, positions: &[PositionSpec]) -> Result<Self> {
        let site = |l| match kind {
            SiteKind::ResidOut => Ok(Site::resid(l)),
            SiteKind::AttnOut => Ok(Site::attn(l)),
            SiteKind::MlpOut => Ok(Site::mlp(l)),
            SiteKind::HeadOut => Err(Error::InvalidHook("use layers_by_head for heads".into())),
        };
        let mut points = Vec::with_capacity(config.n_layers);
        for l in 0..config.n_layers {
            let s = site(l)?;
            points.push(positions.iter().map(|p| HookPoint::new(s, p.clone())).collect());
        }
        Self::new(
            (0..config.n_layers).map(|l| l.to_string()).collect(),
            positions.iter().map(|p| p.to_string()).collect(),
            points,
        )
    }

    /// Layers by heads at one position.
    pub fn layers_by_head(config: &ModelConfig, position: PositionSpec) -> Result<Self> {
        let points = (0..config.n_layers)
            .map(|l| (0..config.n_heads).map(|h| HookPoint::new(Site::head(l, h), position.clone())).collect())
            .collect();
        Self::new(
            (0..config.n_layers).map(|l| l.to_string()).collect(),
            (0..config.n_heads).map(|h| h.to_string()).collect(),
            points,
        )
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, &HookPoint)> {
        self.points.iter().enumerate().flat_map(|(r, row)| row.iter().enumerate().map(move |(c, p)| (r, c, p)))
    }

    pub fn len(&self) -> usize {
        self.rows.len() * self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self, config: &ModelConfig) -> Result<()> {
        self.cells().try_for_each(|(_, _, p)| p.validate(config))
    }
}

/// Every grid cell for one pair: two clean passes plus two per resolvable
/// cell. `swap(row, column)` picks the intervention; `None` skips the cell.
pub fn sweep_pair<'a, T: Scalar>(
    model: &Model<T>,
    pair_index: usize,
    pair: &TokenizedPair,
    grid: &HookGrid,
    swap: &dyn Fn(usize, usize) -> Option<Swap<'a, T>>,
) -> Result<Vec<CellResult>> {
    let points: Vec<HookPoint> = grid.cells().map(|(_, _, p)| p.clone()).collect();
    let clean = clean_runs(model, pair, &points)?;
    let mut out = Vec::with_capacity(grid.len());
    for (row, column, point) in grid.cells() {
        let value = match swap(row, column) {
            Some(s) => match interchange(model, pair, &clean, point, s)? {
                Some(p) => Some(odds_term(&p)?),
                None => None,
            },
            None => None,
        };
        out.push(CellResult { row, column, pair: pair_index, value });
    }
    Ok(out)
}

/// Serial sweep over `pairs`, averaged into a heatmap.
pub fn sweep<'a, T: Scalar>(
    model: &Model<T>,
    pairs: &[TokenizedPair],
    grid: &HookGrid,
    swap: &dyn Fn(usize, usize) -> Option<Swap<'a, T>>,
) -> Result<Heatmap> {
    grid.validate(model.config())?;
    let mut results = Vec::with_capacity(pairs.len() * grid.len());
    for (i, pair) in pairs.iter().enumerate() {
        results.extend(sweep_pair(model, i, pair, grid, swap)?);
    }
    assemble_heatmap(grid.rows.len(), grid.columns.clone(), &results)
}

/// Forward passes a sweep performs when every cell resolves.
pub fn sweep_forward_count(pairs: usize, cells: usize) -> usize {
    pairs * (2 + 2 * cells)
}

// ---- acceptability benchmark

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMode {
    Whole,
    Region,
}

/// A grammatical/ungrammatical sentence pair, already tokenized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkPair {
    pub good: Vec<u32>,
    pub bad: Vec<u32>,
    pub region_good: Option<Span>,
    pub region_bad: Option<Span>,
    pub category: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub correct: usize,
    pub total: usize,
    /// Pairs excluded for unequal token counts (whole mode only).
    pub filtered: usize,
}

impl CategoryScore {
    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub overall: CategoryScore,
    pub per_category: BTreeMap<String, CategoryScore>,
}

impl BenchmarkReport {
    pub fn accuracy(&self) -> Option<f64> {
        self.overall.accuracy()
    }
}

fn sentence_score<T: Scalar>(
    model: &Model<T>,
    tokens: &[u32],
    region: Option<Span>,
    mode: ScoreMode,
    interventions: &[Intervention<T>],
) -> Result<T> {
    let (start, end) = match mode {
        ScoreMode::Whole => (1, tokens.len()),
        ScoreMode::Region => {
            let s = region.ok_or_else(|| Error::Precondition("region mode needs a region span".into()))?;
            (s.start, s.end)
        }
    };
    if start == 0 || start >= end || end > tokens.len() {
        return Err(Error::RegionOutOfBounds { start, end, len: tokens.len() });
    }
    let logits = intervention::run_with(model, tokens, interventions)?;
    sum_token_logprobs(&logits, tokens, start, end)
}

/// Fraction of pairs whose grammatical side scores strictly higher. The
/// same interventions are applied to both sentences.
pub fn benchmark_accuracy<T: Scalar>(
    model: &Model<T>,
    pairs: &[BenchmarkPair],
    mode: ScoreMode,
    interventions: &[Intervention<T>],
) -> Result<BenchmarkReport> {
    let mut overall = CategoryScore::default();
    let mut per_category: BTreeMap<String, CategoryScore> = BTreeMap::new();
    for p in pairs {
        let cat = per_category.entry(p.category.clone()).or_default();
        if mode == ScoreMode::Whole && p.good.len() != p.bad.len() {
            cat.filtered += 1;
            overall.filtered += 1;
            continue;
        }
        let good = sentence_score(model, &p.good, p.region_good, mode, interventions)?;
        let bad = sentence_score(model, &p.bad, p.region_bad, mode, interventions)?;
        let win = good > bad;
        for s in [&mut *cat, &mut overall] {
            s.total += 1;
            s.correct += usize::from(win);
        }
    }
    Ok(BenchmarkReport { overall, per_category })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn odds_hand_case() {
        let p = PairLogProbs::from_probs(0.8, 0.2, 0.6, 0.4).unwrap();
        assert!((odds(&[p]).unwrap() - libm::log(6.0)).abs() < 1e-12);
    }

    #[test]
    fn odds_star_hand_case() {
        let p = PairLogProbs {
            clean_base: RunLogProbs { y_base: libm::log(0.8), y_source: libm::log(0.1) },
            clean_source: RunLogProbs { y_base: -1.0, y_source: -1.0 },
            interv_base: RunLogProbs { y_base: libm::log(0.3), y_source: libm::log(0.6) },
            interv_source: RunLogProbs { y_base: -1.0, y_source: -1.0 },
        };
        assert!((odds_star(&[p]).unwrap() - libm::log(16.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_probability_rejected() {
        assert!(PairLogProbs::from_probs(0.0, 0.2, 0.6, 0.4).is_err());
        let mut p = PairLogProbs::from_probs(0.5, 0.2, 0.6, 0.4).unwrap();
        p.interv_base.y_base = f64::NEG_INFINITY;
        assert!(matches!(odds(&[p]), Err(Error::ZeroProbability { .. })));
    }

    #[test]
    fn heatmap_means_and_errors() {
        let cols: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        assert!(assemble_heatmap(2, cols.clone(), &[]).is_err());
        let mut res = Vec::new();
        for row in 0..2 {
            for column in 0..3 {
                res.push(CellResult { row, column, pair: 0, value: Some(1.0) });
                res.push(CellResult { row, column, pair: 1, value: Some(3.0) });
            }
        }
        let hm = assemble_heatmap(2, cols.clone(), &res).unwrap();
        assert_eq!(hm.get(1, 2), Some(2.0));
        assert_eq!(hm.count[0][0], 2);
        res.pop();
        assert!(assemble_heatmap(2, cols, &res).is_err());
    }
}
