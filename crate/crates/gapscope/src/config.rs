// SPDX-License-Identifier: MIT OR Apache-2.0

//! The declarative experiment file. Command-line flags override it.

use std::path::{Path, PathBuf};

use gapscope_core::das::DasTrainConfig;
use gapscope_core::datagen::{Construction, NpiOutputs, SplitSizes};
use gapscope_core::intervention::HookPoint;
use gapscope_core::metrics::ScoreMode;
use gapscope_core::DType;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct DatagenParams {
    pub sizes: SplitSizes,
    pub npi: NpiOutputs,
    /// Expanded category JSON; the built-in lists when absent.
    pub id_vocab: Option<PathBuf>,
    pub ood_vocab: Option<PathBuf>,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// A `.safetensors` file or a directory holding `model.safetensors`.
    pub model: Option<PathBuf>,
    /// Defaults to `config.json` next to the weights.
    pub model_config: Option<PathBuf>,
    /// JSON tensor-name mapping; NeoX names when absent.
    pub layout: Option<PathBuf>,
    /// Directory with `vocab.json` and `merges.txt`; defaults to the model directory.
    pub tokenizer: Option<PathBuf>,
    /// Directory of per-construction JSONL files.
    pub data: Option<PathBuf>,
    /// Empty means every construction found.
    pub constructions: Vec<String>,
    pub datagen: DatagenParams,
    /// Any of `resid`, `attn`, `mlp`, `head`.
    pub components: Vec<String>,
    /// Position columns for whole-width components.
    pub positions: Vec<String>,
    /// Position used for head sweeps.
    pub head_position: String,
    /// `patch`, `das:<direction file>` or `scale:<alpha>`.
    pub intervention: String,
    pub steering_targets: Vec<String>,
    pub alphas: Vec<f64>,
    pub score_mode: ScoreMode,
    pub benchmark: Option<PathBuf>,
    pub das: DasTrainConfig,
    /// Hook points trained by `das`; one heatmap row each.
    pub das_hooks: Vec<String>,
    pub out: PathBuf,
    pub seed: u64,
    pub dtype: DType,
    /// Zero means one per core.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: None,
            model_config: None,
            layout: None,
            tokenizer: None,
            data: None,
            constructions: Vec::new(),
            datagen: DatagenParams::default(),
            components: vec!["resid".into(), "attn".into(), "mlp".into(), "head".into()],
            positions: vec!["-1".into()],
            head_position: "-1".into(),
            intervention: "patch".into(),
            steering_targets: vec!["head.7.5".into(), "head.7.6".into(), "head.9.2".into()],
            alphas: vec![0.8, 1.0, 1.2, 1.5],
            score_mode: ScoreMode::Whole,
            benchmark: None,
            das: DasTrainConfig::default(),
            das_hooks: Vec::new(),
            out: PathBuf::from("out"),
            seed: 0,
            dtype: DType::F32,
            workers: 0,
        }
    }
}

/// Parsed `intervention` field.
#[derive(Debug, Clone, PartialEq)]
pub enum InterventionSpec {
    Patch,
    Das(PathBuf),
    Scale(f64),
}

impl InterventionSpec {
    pub fn parse(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "patch" => Ok(Self::Patch),
            Some(("das", path)) if !path.is_empty() => Ok(Self::Das(PathBuf::from(path))),
            Some(("scale", a)) => a
                .parse::<f64>()
                .ok()
                .filter(|a| a.is_finite())
                .map(Self::Scale)
                .ok_or_else(|| Error::Usage(format!("bad scale factor in `{s}`"))),
            _ => Err(Error::Usage(format!("intervention must be patch, das:<file> or scale:<alpha>, got `{s}`"))),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        crate::io::read_json(path)
    }

    pub fn weights_path(&self) -> Result<PathBuf> {
        let m = self.model.as_ref().ok_or_else(|| Error::Usage("no model given (--model)".into()))?;
        Ok(if m.is_dir() { m.join("model.safetensors") } else { m.clone() })
    }

    fn model_dir(&self) -> Result<PathBuf> {
        let w = self.weights_path()?;
        Ok(w.parent().map(Path::to_path_buf).unwrap_or_default())
    }

    pub fn config_path(&self) -> Result<PathBuf> {
        match &self.model_config {
            Some(p) => Ok(p.clone()),
            None => Ok(self.model_dir()?.join("config.json")),
        }
    }

    pub fn tokenizer_paths(&self) -> Result<(PathBuf, PathBuf)> {
        let dir = match &self.tokenizer {
            Some(d) => d.clone(),
            None => self.model_dir()?,
        };
        Ok((dir.join("vocab.json"), dir.join("merges.txt")))
    }

    pub fn construction_list(&self) -> Result<Vec<Construction>> {
        if self.constructions.is_empty() {
            return Ok(Construction::ALL.to_vec());
        }
        self.constructions.iter().map(|c| Construction::parse(c).map_err(|e| Error::Usage(e.to_string()))).collect()
    }

    pub fn steering_hooks(&self) -> Result<Vec<HookPoint>> {
        self.steering_targets.iter().map(|s| HookPoint::parse(s).map_err(|_| Error::Usage(format!("bad hook `{s}`")))).collect()
    }

    pub fn intervention_spec(&self) -> Result<InterventionSpec> {
        InterventionSpec::parse(&self.intervention)
    }

    /// Files the run reads.
    pub fn check_inputs_exist(&self, paths: &[&Path]) -> Result<()> {
        for p in paths {
            if !p.exists() {
                return Err(Error::Usage(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }
}
