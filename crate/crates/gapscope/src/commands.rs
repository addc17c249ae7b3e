// SPDX-License-Identifier: MIT OR Apache-2.0

//! The subcommands, callable as library functions.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gapscope_core::das::{self, ConstructionData, DasDirection, Fold};
use gapscope_core::datagen::{self, Construction, DatasetSplit, Distribution, GenOptions, MinimalPair, Split, ValidationReport, VocabularySet};
use gapscope_core::intervention::{HookPoint, Intervention, PositionSpec, Span, TokenizedPair};
use gapscope_core::metrics::{self, BenchmarkPair, BenchmarkReport, Heatmap, HookGrid, Swap};
use gapscope_core::{DType, Model, Scalar, SiteKind, Tokenizer, WeightLayout};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::archive;
use crate::config::{ExperimentConfig, InterventionSpec};
use crate::error::{Error, Result};
use crate::fixture;
use crate::io;
use crate::manifest::{RunManifest, RunRecorder};
use crate::report;
use crate::runner::{self, SweepOutput};

// ---- shared loading

fn vocab_from(path: Option<&PathBuf>, d: Distribution, rec: &mut Option<&mut RunRecorder>) -> Result<VocabularySet> {
    match path {
        None => Ok(VocabularySet::builtin(d)),
        Some(p) => {
            if !p.is_file() {
                return Err(Error::Usage(format!("vocabulary file {} does not exist", p.display())));
            }
            let v: VocabularySet = io::read_json(p)?;
            if v.distribution != d {
                return Err(Error::Usage(format!("{} holds a {:?} vocabulary", p.display(), v.distribution)));
            }
            if let Some(r) = rec {
                r.input(p)?;
            }
            Ok(v)
        }
    }
}

fn load_tokenizer(cfg: &ExperimentConfig, rec: &mut RunRecorder) -> Result<Tokenizer> {
    let (v, m) = cfg.tokenizer_paths()?;
    cfg.check_inputs_exist(&[&v, &m])?;
    rec.input(&v)?;
    rec.input(&m)?;
    io::read_tokenizer(&v, &m)
}

fn load_model<T: Scalar>(cfg: &ExperimentConfig, rec: &mut RunRecorder) -> Result<Model<T>> {
    let weights = cfg.weights_path()?;
    let config_path = cfg.config_path()?;
    cfg.check_inputs_exist(&[&weights, &config_path])?;
    rec.input(&weights)?;
    rec.input(&config_path)?;
    let layout: Option<WeightLayout> = match &cfg.layout {
        Some(p) => {
            rec.input(p)?;
            Some(io::read_json(p)?)
        }
        None => None,
    };
    archive::load_model(&weights, archive::read_config(&config_path)?, layout.as_ref())
}

fn dataset_file(dir: &Path, c: Construction) -> PathBuf {
    dir.join(format!("{c}.jsonl"))
}

/// Reads `<Construction>.jsonl` files from the data directory.
pub fn load_dataset(cfg: &ExperimentConfig, rec: Option<&mut RunRecorder>) -> Result<DatasetSplit> {
    let dir = cfg.data.as_ref().ok_or_else(|| Error::Usage("no dataset directory given (--data)".into()))?;
    if !dir.is_dir() {
        return Err(Error::Usage(format!("{} is not a directory", dir.display())));
    }
    let explicit = !cfg.constructions.is_empty();
    let mut split = DatasetSplit::default();
    let mut rec = rec;
    for c in cfg.construction_list()? {
        let path = dataset_file(dir, c);
        if !path.is_file() {
            if explicit {
                return Err(Error::Usage(format!("{} does not exist", path.display())));
            }
            continue;
        }
        if let Some(r) = rec.as_deref_mut() {
            r.input(&path)?;
        }
        for p in io::read_jsonl::<MinimalPair>(&path)? {
            if p.construction != c {
                return Err(Error::Usage(format!("{} holds a {} pair", path.display(), p.construction)));
            }
            match p.split {
                Split::Train => split.train.push(p),
                Split::Id => split.id_test.push(p),
                Split::Ood => split.ood_test.push(p),
            }
        }
    }
    if split.all().next().is_none() {
        return Err(Error::Usage(format!("no dataset files in {}", dir.display())));
    }
    Ok(split)
}

/// Symmetrized, tokenized pairs; counts the ones dropped for multi-token outputs.
fn prepare(pairs: &[MinimalPair], tok: &Tokenizer, dropped: &mut u64) -> Result<Vec<TokenizedPair>> {
    let sym = datagen::symmetrize(pairs);
    let out = fixture::tokenize_all(&sym, tok)?;
    *dropped += (sym.len() - out.len()) as u64;
    Ok(out)
}

fn with_dtype<R>(dtype: DType, f32_run: impl FnOnce() -> Result<R>, f64_run: impl FnOnce() -> Result<R>) -> Result<R> {
    match dtype {
        DType::F32 => f32_run(),
        DType::F64 => f64_run(),
    }
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect()
}

fn write_heatmap(rec: &mut RunRecorder, stem: &str, rows: &[String], hm: &Heatmap, meta: serde_json::Value) -> Result<()> {
    rec.write(&format!("{stem}.csv"), report::heatmap_csv(rows, hm).as_bytes())?;
    rec.write_json(&format!("{stem}.json"), &report::heatmap_sidecar(rows, hm, meta))
}

// ---- datagen / validate

/// Generates every requested construction, writes one JSONL file each plus
/// `validation.json`. Violations give [`Error::Validation`] after writing.
pub fn cmd_datagen(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let constructions = cfg.construction_list()?;
    let mut rec = RunRecorder::new("datagen", cfg, &cfg.out);
    let id_vocab = vocab_from(cfg.datagen.id_vocab.as_ref(), Distribution::Id, &mut Some(&mut rec))?;
    let ood_vocab = vocab_from(cfg.datagen.ood_vocab.as_ref(), Distribution::Ood, &mut Some(&mut rec))?;
    let opts = GenOptions { seed: cfg.seed, sizes: cfg.datagen.sizes, npi: cfg.datagen.npi.clone() };
    let split = datagen::build_splits(&constructions, &id_vocab, &ood_vocab, &opts)?;
    let report = datagen::validate(&split, &id_vocab, cfg.datagen.sizes);
    for c in &constructions {
        let part = split.restrict(*c);
        let pairs: Vec<MinimalPair> = part.all().cloned().collect();
        rec.count("pairs", pairs.len() as u64);
        rec.count("pairs_symmetrized", datagen::symmetrize(&pairs).len() as u64);
        rec.write(&format!("{c}.jsonl"), &io::to_jsonl(&pairs))?;
    }
    finish_validation(rec, &report)
}

fn finish_validation(mut rec: RunRecorder, report: &ValidationReport) -> Result<RunManifest> {
    rec.count("violations", report.violations.len() as u64);
    rec.write_json("validation.json", report)?;
    let manifest = rec.finish()?;
    if report.ok() {
        Ok(manifest)
    } else {
        let first = &report.violations[0];
        Err(Error::Validation(format!(
            "{} violations; first: {} {:?} {}",
            report.violations.len(),
            first.construction,
            first.kind,
            first.item
        )))
    }
}

pub fn cmd_validate(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let mut rec = RunRecorder::new("validate", cfg, &cfg.out);
    let id_vocab = vocab_from(cfg.datagen.id_vocab.as_ref(), Distribution::Id, &mut Some(&mut rec))?;
    let split = load_dataset(cfg, Some(&mut rec))?;
    let report = datagen::validate(&split, &id_vocab, cfg.datagen.sizes);
    finish_validation(rec, &report)
}

// ---- sweep

/// Grids for the configured component kinds, keyed by kind name.
pub fn component_grids(cfg: &ExperimentConfig, model: &gapscope_core::ModelConfig) -> Result<Vec<(String, HookGrid)>> {
    let positions: Vec<PositionSpec> = cfg
        .positions
        .iter()
        .map(|p| PositionSpec::parse(p).map_err(|_| Error::Usage(format!("bad position `{p}`"))))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for kind in &cfg.components {
        let grid = match kind.as_str() {
            "resid" => HookGrid::layers_by_position(model, SiteKind::ResidOut, &positions)?,
            "attn" => HookGrid::layers_by_position(model, SiteKind::AttnOut, &positions)?,
            "mlp" => HookGrid::layers_by_position(model, SiteKind::MlpOut, &positions)?,
            "head" => {
                let pos = PositionSpec::parse(&cfg.head_position).map_err(|_| Error::Usage(format!("bad head position `{}`", cfg.head_position)))?;
                HookGrid::layers_by_head(model, pos)?
            }
            other => return Err(Error::Usage(format!("unknown component kind `{other}`"))),
        };
        out.push((kind.clone(), grid));
    }
    Ok(out)
}

pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<RunManifest> {
    with_dtype(cfg.dtype, || sweep_typed::<f32>(cfg), || sweep_typed::<f64>(cfg))
}

fn sweep_typed<T: Scalar>(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let spec = cfg.intervention_spec()?;
    let mut rec = RunRecorder::new("sweep", cfg, &cfg.out);
    let model = load_model::<T>(cfg, &mut rec)?;
    let tok = load_tokenizer(cfg, &mut rec)?;
    let split = load_dataset(cfg, Some(&mut rec))?;
    let pool = runner::pool(cfg.workers)?;
    let mut direction = None;
    let grids = match &spec {
        InterventionSpec::Patch => component_grids(cfg, model.config())?,
        InterventionSpec::Das(path) => {
            cfg.check_inputs_exist(&[path])?;
            rec.input(path)?;
            let d: DasDirection = io::read_json(path)?;
            let hp = d.hook_point()?;
            hp.validate(model.config())?;
            direction = Some(d.tensor::<T>());
            vec![(sanitize(&d.hookpoint), HookGrid::single(hp))]
        }
        InterventionSpec::Scale(_) => return Err(Error::Usage("sweep supports patch and das interventions; use steer for scaling".into())),
    };
    let swap = |_: usize, _: usize| -> Option<Swap<'_, T>> {
        Some(match &direction {
            Some(a) => Swap::Project(a),
            None => Swap::Patch,
        })
    };
    let mut dropped = 0;
    for c in split.constructions() {
        let part = split.restrict(c);
        let id = prepare(&part.id_test, &tok, &mut dropped)?;
        let ood = prepare(&part.ood_test, &tok, &mut dropped)?;
        rec.count("pairs_id", id.len() as u64);
        rec.count("pairs_ood", ood.len() as u64);
        for (kind, grid) in &grids {
            let mut maps: Vec<(&str, SweepOutput)> = Vec::new();
            for (name, pairs) in [("id", &id), ("ood", &ood)] {
                if pairs.is_empty() {
                    continue;
                }
                let out = runner::sweep(&pool, &model, pairs, grid, &swap)?;
                rec.count("forward_passes", out.forward_passes);
                maps.push((name, out));
            }
            let meta = |dist: &str, n: usize| {
                json!({"construction": c, "component": kind, "distribution": dist, "pairs": n, "intervention": cfg.intervention})
            };
            for (name, out) in &maps {
                let n = if *name == "id" { id.len() } else { ood.len() };
                write_heatmap(&mut rec, &format!("sweep/{c}/{kind}.{name}"), &grid.rows, &out.heatmap, meta(name, n))?;
            }
            let pooled = match maps.as_slice() {
                [(_, a), (_, b)] => Some(a.heatmap.pooled(&b.heatmap)?),
                [(_, a)] => Some(a.heatmap.clone()),
                _ => None,
            };
            if let Some(hm) = pooled {
                write_heatmap(&mut rec, &format!("sweep/{c}/{kind}.avg"), &grid.rows, &hm, meta("avg", id.len() + ood.len()))?;
            }
        }
    }
    rec.count("pairs_dropped_multitoken", dropped);
    rec.finish()
}

// ---- das

/// Grid of the configured DAS hook points, or residual layers by position.
pub fn das_grid(cfg: &ExperimentConfig, model: &gapscope_core::ModelConfig) -> Result<HookGrid> {
    if cfg.das_hooks.is_empty() {
        let positions: Vec<PositionSpec> = cfg.positions.iter().map(|p| PositionSpec::parse(p)).collect::<Result<_, _>>()?;
        return Ok(HookGrid::layers_by_position(model, SiteKind::ResidOut, &positions)?);
    }
    let mut points = Vec::new();
    for h in &cfg.das_hooks {
        let hp = HookPoint::parse(h).map_err(|_| Error::Usage(format!("bad hook `{h}`")))?;
        if hp.position == PositionSpec::All {
            return Err(Error::Usage(format!("DAS hook `{h}` needs a position, e.g. `{h}@-1`")));
        }
        hp.validate(model).map_err(|_| Error::Usage(format!("hook `{h}` does not exist in this model")))?;
        points.push(vec![hp]);
    }
    Ok(HookGrid::new(cfg.das_hooks.clone(), vec!["direction".into()], points)?)
}

pub fn cmd_das(cfg: &ExperimentConfig) -> Result<RunManifest> {
    with_dtype(cfg.dtype, || das_typed::<f32>(cfg), || das_typed::<f64>(cfg))
}

fn das_typed<T: Scalar>(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let mut rec = RunRecorder::new("das", cfg, &cfg.out);
    let model = load_model::<T>(cfg, &mut rec)?;
    let tok = load_tokenizer(cfg, &mut rec)?;
    let split = load_dataset(cfg, Some(&mut rec))?;
    let grid = das_grid(cfg, model.config())?;
    let mut dropped = 0;
    let mut data = BTreeMap::new();
    for c in split.constructions() {
        let part = split.restrict(c);
        data.insert(
            c,
            ConstructionData {
                train: prepare(&part.train, &tok, &mut dropped)?,
                id_test: prepare(&part.id_test, &tok, &mut dropped)?,
                ood_test: prepare(&part.ood_test, &tok, &mut dropped)?,
            },
        );
    }
    if data.len() < 2 {
        return Err(Error::Usage(format!("leave-one-out needs at least 2 constructions, found {}", data.len())));
    }
    let pool = runner::pool(cfg.workers)?;
    let held: Vec<Construction> = data.keys().copied().collect();
    let folds: Vec<gapscope_core::Result<Fold>> = pool.install(|| {
        held.par_iter()
            .map(|&h| {
                let train: Vec<Construction> = held.iter().copied().filter(|c| *c != h).collect();
                das::run_fold(&model, &data, &grid, &cfg.das, h, train)
            })
            .collect()
    });
    for fold in folds {
        let fold = fold?;
        let h = fold.held_out;
        for (r, row) in fold.directions.iter().enumerate() {
            for (c, d) in row.iter().enumerate() {
                if let Some(d) = d {
                    rec.count("directions", 1);
                    rec.count("training_steps", d.loss_trace.len() as u64);
                    let name = sanitize(&grid.points[r][c].to_string());
                    rec.write_json(&format!("das/{h}/directions/{name}.json"), d)?;
                }
            }
        }
        let meta = |dist: &str| json!({"held_out": h, "train_constructions": fold.train_constructions, "distribution": dist});
        write_heatmap(&mut rec, &format!("das/{h}/id"), &grid.rows, &fold.id, meta("id"))?;
        write_heatmap(&mut rec, &format!("das/{h}/ood"), &grid.rows, &fold.ood, meta("ood"))?;
    }
    rec.count("pairs_dropped_multitoken", dropped);
    rec.finish()
}

// ---- steer

/// One line of the benchmark file. Region spans are token indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub sentence_good: String,
    pub sentence_bad: String,
    #[serde(default)]
    pub region_good: Option<Span>,
    #[serde(default)]
    pub region_bad: Option<Span>,
    pub category: String,
}

impl BenchmarkRecord {
    pub fn tokenize(&self, tok: &Tokenizer) -> BenchmarkPair {
        BenchmarkPair {
            good: tok.encode(&self.sentence_good),
            bad: tok.encode(&self.sentence_bad),
            region_good: self.region_good,
            region_bad: self.region_bad,
            category: self.category.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringRow {
    pub alpha: f64,
    pub report: BenchmarkReport,
}

pub fn cmd_steer(cfg: &ExperimentConfig) -> Result<RunManifest> {
    with_dtype(cfg.dtype, || steer_typed::<f32>(cfg), || steer_typed::<f64>(cfg))
}

/// Accuracy for each scale factor applied to every target at all positions.
pub fn steering_table<T: Scalar>(
    model: &Model<T>,
    pairs: &[BenchmarkPair],
    targets: &[HookPoint],
    alphas: &[f64],
    mode: metrics::ScoreMode,
) -> Result<Vec<SteeringRow>> {
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let ivs: Vec<Intervention<T>> = targets.iter().map(|h| Intervention::scale(h.site, None, T::from_f64(alpha))).collect();
        rows.push(SteeringRow { alpha, report: metrics::benchmark_accuracy(model, pairs, mode, &ivs)? });
    }
    Ok(rows)
}

fn steer_typed<T: Scalar>(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let mut rec = RunRecorder::new("steer", cfg, &cfg.out);
    let targets = cfg.steering_hooks()?;
    let model = load_model::<T>(cfg, &mut rec)?;
    for (t, raw) in targets.iter().zip(&cfg.steering_targets) {
        t.validate(model.config()).map_err(|_| Error::Usage(format!("steering target `{raw}` does not exist in this model")))?;
        if t.position != PositionSpec::All {
            return Err(Error::Usage(format!("steering target `{raw}` must not name a position")));
        }
    }
    let tok = load_tokenizer(cfg, &mut rec)?;
    let bench = cfg.benchmark.as_ref().ok_or_else(|| Error::Usage("no benchmark file given (--benchmark)".into()))?;
    cfg.check_inputs_exist(&[bench])?;
    rec.input(bench)?;
    let records: Vec<BenchmarkRecord> = io::read_jsonl(bench)?;
    let pairs: Vec<BenchmarkPair> = records.iter().map(|r| r.tokenize(&tok)).collect();
    let rows = steering_table(&model, &pairs, &targets, &cfg.alphas, cfg.score_mode)?;
    rec.count("benchmark_pairs", pairs.len() as u64);
    rec.count("filtered_unequal_length", rows.first().map(|r| r.report.overall.filtered as u64).unwrap_or(0));
    let table: Vec<(f64, BenchmarkReport)> = rows.iter().map(|r| (r.alpha, r.report.clone())).collect();
    rec.write("steer/report.csv", report::steering_csv(&table).as_bytes())?;
    rec.write_json("steer/report.json", &rows)?;
    rec.finish()
}

// ---- fixture

/// Writes a tiny model, its tokenizer, a small dataset and a benchmark
/// file under the output directory.
pub fn cmd_fixture(cfg: &ExperimentConfig, layers: usize, heads: usize, d_model: usize) -> Result<RunManifest> {
    if heads == 0 || !d_model.is_multiple_of(heads) || !(d_model / heads).is_multiple_of(4) || layers == 0 {
        return Err(Error::Usage("need layers >= 1 and d_model divisible by 4 * heads".into()));
    }
    let mut rec = RunRecorder::new("fixture", cfg, &cfg.out);
    let split = fixture::small_split(&Construction::ALL, cfg.seed)?;
    let all: Vec<MinimalPair> = split.all().cloned().collect();
    let (tok, vocab, merges) = fixture::tokenizer_for(&all, 512);
    let config = fixture::tiny_config(layers, heads, d_model, 512, true);
    let model = fixture::random_model::<f64>(&config, cfg.seed);
    let dir = cfg.out.join("model");
    fixture::write_fixture(&dir, &config, &model, &vocab, &merges)?;
    for f in ["model.safetensors", "config.json", "vocab.json", "merges.txt"] {
        let bytes = io::read_bytes(&dir.join(f))?;
        rec.write(&format!("model/{f}"), &bytes)?;
    }
    for c in split.constructions() {
        let pairs: Vec<MinimalPair> = split.restrict(c).all().cloned().collect();
        rec.write(&format!("data/{c}.jsonl"), &io::to_jsonl(&pairs))?;
    }
    let bench: Vec<BenchmarkRecord> = split
        .id_test
        .iter()
        .filter(|p| p.construction.phenomenon() == datagen::Phenomenon::Npi)
        .map(|p| BenchmarkRecord {
            sentence_good: format!("{}{}", p.base, datagen::continuation_text(&p.y_base)),
            sentence_bad: format!("{}{}", p.source, datagen::continuation_text(&p.y_base)),
            region_good: None,
            region_bad: None,
            category: p.construction.to_string(),
        })
        .collect();
    rec.write("benchmark.jsonl", &io::to_jsonl(&bench))?;
    rec.count("vocab", tok.vocab_size() as u64);
    rec.finish()
}
