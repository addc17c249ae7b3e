// SPDX-License-Identifier: MIT OR Apache-2.0

//! Argument parsing. Flags override the `--config` file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gapscope_core::metrics::ScoreMode;
use gapscope_core::DType;

use crate::config::ExperimentConfig;
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "gapscope", version, about = "Causal interventions on filler-gap and NPI minimal pairs")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DTypeArg {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Whole,
    Region,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment JSON file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Weights file or model directory.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Directory with vocab.json and merges.txt.
    #[arg(long, global = true)]
    pub tokenizer: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub dtype: Option<DTypeArg>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the minimal-pair dataset and validate it.
    Datagen {
        /// Comma-separated construction names.
        #[arg(long, value_delimiter = ',')]
        constructions: Vec<String>,
        #[arg(long)]
        id_vocab: Option<PathBuf>,
        #[arg(long)]
        ood_vocab: Option<PathBuf>,
    },
    /// Activation-patching heatmaps per construction and component.
    Sweep {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        constructions: Vec<String>,
        /// Comma-separated: resid, attn, mlp, head.
        #[arg(long, value_delimiter = ',')]
        components: Vec<String>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        positions: Vec<String>,
        #[arg(long, allow_hyphen_values = true)]
        head_position: Option<String>,
        /// patch | das:<direction file>
        #[arg(long)]
        intervention: Option<String>,
    },
    /// Leave-one-out direction training and evaluation.
    Das {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        constructions: Vec<String>,
        /// Hook points such as `resid.1@-1`.
        #[arg(long = "hook", allow_hyphen_values = true)]
        hooks: Vec<String>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Benchmark accuracy with scaled components.
    Steer {
        #[arg(long)]
        benchmark: Option<PathBuf>,
        /// Hook points such as `head.7.5`.
        #[arg(long, value_delimiter = ',')]
        targets: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        alphas: Vec<f64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Re-check a generated dataset.
    Validate {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Write a seeded tiny model and tokenizer for trying the other commands.
    Fixture {
        #[arg(long, default_value_t = 2)]
        layers: usize,
        #[arg(long, default_value_t = 2)]
        heads: usize,
        #[arg(long, default_value_t = 32)]
        d_model: usize,
    },
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_list<T>(slot: &mut Vec<T>, v: &[T])
where
    T: Clone,
{
    if !v.is_empty() {
        *slot = v.to_vec();
    }
}

impl Cli {
    /// The config file (or defaults) with every given flag applied.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.common.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let g = &self.common;
        if g.model.is_some() {
            c.model = g.model.clone();
        }
        if g.tokenizer.is_some() {
            c.tokenizer = g.tokenizer.clone();
        }
        set(&mut c.out, g.out.clone());
        set(&mut c.seed, g.seed);
        set(&mut c.workers, g.workers);
        set(
            &mut c.dtype,
            g.dtype.map(|d| match d {
                DTypeArg::F32 => DType::F32,
                DTypeArg::F64 => DType::F64,
            }),
        );
        match &self.command {
            Command::Datagen { constructions, id_vocab, ood_vocab } => {
                set_list(&mut c.constructions, constructions);
                if id_vocab.is_some() {
                    c.datagen.id_vocab = id_vocab.clone();
                }
                if ood_vocab.is_some() {
                    c.datagen.ood_vocab = ood_vocab.clone();
                }
            }
            Command::Sweep { data, constructions, components, positions, head_position, intervention } => {
                if data.is_some() {
                    c.data = data.clone();
                }
                set_list(&mut c.constructions, constructions);
                set_list(&mut c.components, components);
                set_list(&mut c.positions, positions);
                set(&mut c.head_position, head_position.clone());
                set(&mut c.intervention, intervention.clone());
            }
            Command::Das { data, constructions, hooks, steps, lr, batch_size } => {
                if data.is_some() {
                    c.data = data.clone();
                }
                set_list(&mut c.constructions, constructions);
                set_list(&mut c.das_hooks, hooks);
                set(&mut c.das.steps, *steps);
                set(&mut c.das.lr, *lr);
                set(&mut c.das.batch_size, *batch_size);
            }
            Command::Steer { benchmark, targets, alphas, mode } => {
                if benchmark.is_some() {
                    c.benchmark = benchmark.clone();
                }
                set_list(&mut c.steering_targets, targets);
                set_list(&mut c.alphas, alphas);
                set(
                    &mut c.score_mode,
                    mode.map(|m| match m {
                        ModeArg::Whole => ScoreMode::Whole,
                        ModeArg::Region => ScoreMode::Region,
                    }),
                );
            }
            Command::Validate { data } => {
                if data.is_some() {
                    c.data = data.clone();
                }
            }
            Command::Fixture { .. } => {}
        }
        c.das.seed = c.seed;
        Ok(c)
    }
}
