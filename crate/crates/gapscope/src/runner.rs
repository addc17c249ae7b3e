// SPDX-License-Identifier: MIT OR Apache-2.0

//! Parallel sweeps with an order-independent reduction.

use gapscope_core::intervention::TokenizedPair;
use gapscope_core::metrics::{self, CellResult, Heatmap, HookGrid, Swap};
use gapscope_core::{Model, Scalar};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| Error::Usage(format!("worker pool: {e}")))
}

/// Heatmap plus the number of forward passes spent.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub heatmap: Heatmap,
    pub forward_passes: u64,
}

/// Runs every pair on the pool. Results are keyed by cell and pair index,
/// so the heatmap does not depend on completion order.
pub fn sweep<'a, T: Scalar>(
    pool: &rayon::ThreadPool,
    model: &Model<T>,
    pairs: &[TokenizedPair],
    grid: &HookGrid,
    swap: &(dyn Fn(usize, usize) -> Option<Swap<'a, T>> + Sync),
) -> Result<SweepOutput> {
    grid.validate(model.config())?;
    if pairs.is_empty() {
        return Err(Error::Usage("empty test set".into()));
    }
    let per_pair: Vec<gapscope_core::Result<Vec<CellResult>>> = pool.install(|| {
        pairs.par_iter().enumerate().map(|(i, p)| metrics::sweep_pair(model, i, p, grid, swap)).collect()
    });
    let mut results = Vec::with_capacity(pairs.len() * grid.len());
    for r in per_pair {
        results.extend(r?);
    }
    let patched = results.iter().filter(|r| r.value.is_some()).count() as u64;
    let heatmap = metrics::assemble_heatmap(grid.rows.len(), grid.columns.clone(), &results)?;
    Ok(SweepOutput { heatmap, forward_passes: 2 * pairs.len() as u64 + 2 * patched })
}
