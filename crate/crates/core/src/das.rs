// SPDX-License-Identifier: MIT OR Apache-2.0

//! One-dimensional distributed alignment search: learn a unit direction
//! whose component, swapped from source to base, moves the prediction to
//! the source label.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::datagen::Construction;
use crate::error::{Error, Result};
use crate::hooks::Location;
use crate::intervention::{self, das_apply_unchecked, HookPoint, Intervention, PositionSpec, Side, TokenizedPair};
use crate::metrics::{self, Heatmap, HookGrid, Swap};
use crate::tape::vjp_seed_gradient;
use crate::tensor::{self, Scalar, Tensor};
use crate::transformer::Model;

const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DasTrainConfig {
    pub lr: f64,
    pub warmup_fraction: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
}

impl Default for DasTrainConfig {
    fn default() -> Self {
        Self { lr: 5e-3, warmup_fraction: 0.1, batch_size: 4, steps: 100, seed: 0 }
    }
}

impl DasTrainConfig {
    fn check(&self) -> Result<()> {
        let ok = self.lr.is_finite()
            && self.lr > 0.0
            && (0.0..=1.0).contains(&self.warmup_fraction)
            && self.batch_size > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad DAS training config {self:?}")))
        }
    }

    /// Learning rate for 0-based step `t`.
    pub fn lr_at(&self, t: usize) -> f64 {
        let warm = libm::ceil(self.warmup_fraction * self.steps as f64) as usize;
        if warm == 0 || t >= warm {
            self.lr
        } else {
            self.lr * (t + 1) as f64 / warm as f64
        }
    }
}

/// A trained direction and how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DasDirection {
    pub hookpoint: String,
    pub vector: Vec<f64>,
    pub norm: f64,
    pub config: DasTrainConfig,
    pub seed: u64,
    pub constructions: Vec<Construction>,
    pub loss_trace: Vec<f64>,
}

impl DasDirection {
    pub fn hook_point(&self) -> Result<HookPoint> {
        HookPoint::parse(&self.hookpoint)
    }

    pub fn tensor<T: Scalar>(&self) -> Tensor<T> {
        Tensor::vector(self.vector.iter().map(|v| T::from_f64(*v)).collect())
    }
}

/// Unit-normalized Gaussian draw.
pub fn initial_direction(width: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..width).map(|_| StandardNormal.sample(&mut rng)).collect();
    normalized(v)
}

fn normalized(mut v: Vec<f64>) -> Result<Vec<f64>> {
    let n = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::NonUnitDirection { norm: n });
    }
    v.iter_mut().for_each(|x| *x /= n);
    Ok(v)
}

fn check_unit<T: Scalar>(a: &Tensor<T>) -> Result<()> {
    let n = libm::sqrt(a.data().iter().map(|x| x.as_f64() * x.as_f64()).sum::<f64>());
    if libm::fabs(n - 1.0) <= UNIT_TOLERANCE {
        Ok(())
    } else {
        Err(Error::NonUnitDirection { norm: n })
    }
}

/// Base and source locations of the hook point on this pair.
fn locations(point: &HookPoint, pair: &TokenizedPair) -> Result<(Location, Location)> {
    if point.position == PositionSpec::All {
        return Err(Error::Precondition(format!("DAS needs a single position, got {point}")));
    }
    let pb = intervention::resolve_position(&point.position, pair, Side::Base)?;
    let ps = intervention::resolve_position(&point.position, pair, Side::Source)?;
    Ok((Location { site: point.site, position: pb }, Location { site: point.site, position: ps }))
}

/// Base and source activations at the hook point.
fn activations<T: Scalar>(model: &Model<T>, point: &HookPoint, pair: &TokenizedPair) -> Result<(Location, Tensor<T>, Tensor<T>)> {
    let (lb, ls) = locations(point, pair)?;
    let fb = intervention::capture(model, &pair.base, &[lb])?;
    let fs = intervention::capture(model, &pair.source, &[ls])?;
    let get = |c: &crate::hooks::ActivationCache<T>, l: &Location| {
        c.get(l).cloned().ok_or_else(|| Error::Precondition(format!("{l} not captured")))
    };
    Ok((lb, get(&fb, &lb)?, get(&fs, &ls)?))
}

/// `-log p(y_s)` at the final position of the base run with the source's
/// component along `a` swapped in.
pub fn das_loss<T: Scalar>(model: &Model<T>, pair: &TokenizedPair, point: &HookPoint, a: &Tensor<T>) -> Result<f64> {
    check_unit(a)?;
    let (lb, _, fs) = activations(model, point, pair)?;
    let logits = intervention::run_with(model, &pair.base, &[Intervention::project_swap(lb, a.clone(), fs)])?;
    let lp = tensor::log_softmax(logits.row(logits.rows() - 1))?;
    lp.get(pair.y_source as usize)
        .map(|v| -v.as_f64())
        .ok_or(Error::TokenOutOfRange { id: pair.y_source, vocab: lp.len() })
}

/// Loss and gradient over `a` for one pair.
pub fn das_loss_and_grad_one<T: Scalar>(
    model: &Model<T>,
    pair: &TokenizedPair,
    point: &HookPoint,
    a: &Tensor<T>,
) -> Result<(f64, Vec<f64>)> {
    check_unit(a)?;
    let (lb, fb, fs) = activations(model, point, pair)?;
    let f_interv = das_apply_unchecked(&fb, &fs, a);
    let (tape, loss) = model.tape_from(&pair.base, point.site, lb.position, f_interv, pair.y_source)?;
    let value = tape.value(&loss).data()[0].as_f64();
    let g = vjp_seed_gradient(&tape, &loss)?;
    let d: Vec<f64> = fs.data().iter().zip(fb.data()).map(|(s, b)| s.as_f64() - b.as_f64()).collect();
    let g: Vec<f64> = g.data().iter().map(|v| v.as_f64()).collect();
    let av: Vec<f64> = a.data().iter().map(|v| v.as_f64()).collect();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let (ga, da) = (dot(&g, &av), dot(&d, &av));
    let grad = d.iter().zip(&g).map(|(di, gi)| ga * di + da * gi).collect();
    Ok((value, grad))
}

/// Mean loss and mean gradient over a batch.
pub fn das_loss_and_grad<T: Scalar>(
    model: &Model<T>,
    batch: &[&TokenizedPair],
    point: &HookPoint,
    a: &Tensor<T>,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Precondition("empty batch".into()));
    }
    let mut loss = 0.0;
    let mut grad = alloc::vec![0.0; a.len()];
    for pair in batch {
        let (l, g) = das_loss_and_grad_one(model, pair, point, a)?;
        loss += l;
        grad.iter_mut().zip(&g).for_each(|(acc, v)| *acc += v);
    }
    let n = batch.len() as f64;
    grad.iter_mut().for_each(|v| *v /= n);
    Ok((loss / n, grad))
}

/// Mean gradient of [`das_loss`] over `a`.
pub fn das_grad<T: Scalar>(model: &Model<T>, batch: &[&TokenizedPair], point: &HookPoint, a: &Tensor<T>) -> Result<Vec<f64>> {
    das_loss_and_grad(model, batch, point, a).map(|r| r.1)
}

/// Mean [`das_loss`] over a set of pairs.
pub fn mean_das_loss<T: Scalar>(model: &Model<T>, pairs: &[TokenizedPair], point: &HookPoint, a: &Tensor<T>) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Precondition("no pairs".into()));
    }
    let mut total = 0.0;
    for p in pairs {
        total += das_loss(model, p, point, a)?;
    }
    Ok(total / pairs.len() as f64)
}

/// Adam on the direction, renormalized after every step.
pub struct DasTrainer<'m, T> {
    model: &'m Model<T>,
    pairs: &'m [TokenizedPair],
    point: HookPoint,
    cfg: DasTrainConfig,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    a: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    step: usize,
    trace: Vec<f64>,
}

impl<'m, T: Scalar> DasTrainer<'m, T> {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(model: &'m Model<T>, pairs: &'m [TokenizedPair], point: HookPoint, cfg: DasTrainConfig) -> Result<Self> {
        cfg.check()?;
        point.validate(model.config())?;
        if pairs.is_empty() {
            return Err(Error::Precondition(format!("no training pairs for {point}")));
        }
        let width = point.site.width(model.config());
        let a = initial_direction(width, cfg.seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1);
        Ok(Self {
            model,
            pairs,
            point,
            cfg,
            rng,
            order: Vec::new(),
            cursor: 0,
            m: alloc::vec![0.0; width],
            v: alloc::vec![0.0; width],
            a,
            step: 0,
            trace: Vec::new(),
        })
    }

    pub fn direction(&self) -> &[f64] {
        &self.a
    }

    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    fn next_batch(&mut self) -> Vec<&'m TokenizedPair> {
        let mut batch = Vec::with_capacity(self.cfg.batch_size);
        while batch.len() < self.cfg.batch_size {
            if self.cursor >= self.order.len() {
                self.order = (0..self.pairs.len()).collect();
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            batch.push(&self.pairs[self.order[self.cursor]]);
            self.cursor += 1;
        }
        batch
    }

    /// One optimizer step; returns the batch loss before the update.
    pub fn step(&mut self) -> Result<f64> {
        let batch = self.next_batch();
        let a: Tensor<T> = Tensor::vector(self.a.iter().map(|x| T::from_f64(*x)).collect());
        let (loss, grad) = das_loss_and_grad(self.model, &batch, &self.point, &a)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { step: self.step });
        }
        self.trace.push(loss);
        let t = self.step as i32 + 1;
        let lr = self.cfg.lr_at(self.step);
        let (c1, c2) = (1.0 - libm::pow(Self::BETA1, t as f64), 1.0 - libm::pow(Self::BETA2, t as f64));
        for i in 0..self.a.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            let update = (self.m[i] / c1) / (libm::sqrt(self.v[i] / c2) + Self::EPS);
            self.a[i] -= lr * update;
        }
        self.a = normalized(core::mem::take(&mut self.a)).map_err(|_| Error::Diverged { step: self.step })?;
        self.step += 1;
        Ok(loss)
    }

    pub fn finish(self, constructions: Vec<Construction>) -> DasDirection {
        let norm = libm::sqrt(self.a.iter().map(|x| x * x).sum::<f64>());
        DasDirection {
            hookpoint: self.point.to_string(),
            vector: self.a,
            norm,
            config: self.cfg,
            seed: self.cfg.seed,
            constructions,
            loss_trace: self.trace,
        }
    }
}

/// Runs `cfg.steps` optimizer steps from the seeded initialization.
pub fn train_direction<T: Scalar>(
    model: &Model<T>,
    pairs: &[TokenizedPair],
    point: &HookPoint,
    cfg: &DasTrainConfig,
    constructions: Vec<Construction>,
) -> Result<DasDirection> {
    let mut trainer = DasTrainer::new(model, pairs, point.clone(), *cfg)?;
    for _ in 0..cfg.steps {
        trainer.step()?;
    }
    Ok(trainer.finish(constructions))
}

/// Tokenized pairs of one construction.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstructionData {
    pub train: Vec<TokenizedPair>,
    pub id_test: Vec<TokenizedPair>,
    pub ood_test: Vec<TokenizedPair>,
}

/// One held-out construction's directions and evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub held_out: Construction,
    pub train_constructions: Vec<Construction>,
    /// `directions[row][column]`; `None` where no training pair resolved.
    pub directions: Vec<Vec<Option<DasDirection>>>,
    pub id: Heatmap,
    pub ood: Heatmap,
}

/// Trains on all constructions but one and evaluates Odds on the held-out
/// construction's ID and OOD test sets, once per construction.
pub fn leave_one_out<T: Scalar>(
    model: &Model<T>,
    data: &BTreeMap<Construction, ConstructionData>,
    grid: &HookGrid,
    cfg: &DasTrainConfig,
) -> Result<Vec<Fold>> {
    if data.len() < 2 {
        return Err(Error::Precondition(format!("leave-one-out needs at least 2 constructions, got {}", data.len())));
    }
    grid.validate(model.config())?;
    let mut folds = Vec::with_capacity(data.len());
    for &held_out in data.keys() {
        let train_constructions: Vec<Construction> = data.keys().copied().filter(|c| *c != held_out).collect();
        folds.push(run_fold(model, data, grid, cfg, held_out, train_constructions)?);
    }
    Ok(folds)
}

/// One fold of [`leave_one_out`].
pub fn run_fold<T: Scalar>(
    model: &Model<T>,
    data: &BTreeMap<Construction, ConstructionData>,
    grid: &HookGrid,
    cfg: &DasTrainConfig,
    held_out: Construction,
    train_constructions: Vec<Construction>,
) -> Result<Fold> {
    let test = data
        .get(&held_out)
        .ok_or_else(|| Error::Precondition(format!("no data for held-out {held_out}")))?;
    let mut directions = Vec::with_capacity(grid.rows.len());
    for row in &grid.points {
        let mut out = Vec::with_capacity(row.len());
        for point in row {
            let usable: Vec<TokenizedPair> = train_constructions
                .iter()
                .filter_map(|c| data.get(c))
                .flat_map(|d| d.train.iter())
                .filter(|p| locations(point, p).is_ok())
                .cloned()
                .collect();
            out.push(if usable.is_empty() {
                None
            } else {
                Some(train_direction(model, &usable, point, cfg, train_constructions.clone())?)
            });
        }
        directions.push(out);
    }
    let tensors: Vec<Vec<Option<Tensor<T>>>> =
        directions.iter().map(|r| r.iter().map(|d| d.as_ref().map(DasDirection::tensor)).collect()).collect();
    let swap = |r: usize, c: usize| tensors[r][c].as_ref().map(Swap::Project);
    let evaluate = |pairs: &[TokenizedPair]| -> Result<Heatmap> {
        if pairs.is_empty() {
            return Err(Error::Precondition(format!("{held_out} has an empty test set")));
        }
        metrics::sweep(model, pairs, grid, &swap)
    };
    Ok(Fold { held_out, train_constructions, directions, id: evaluate(&test.id_test)?, ood: evaluate(&test.ood_test)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warmup_schedule() {
        let cfg = DasTrainConfig::default();
        assert!((cfg.lr_at(0) - 5e-4).abs() < 1e-15);
        assert!((cfg.lr_at(9) - 5e-3).abs() < 1e-15);
        assert_eq!(cfg.lr_at(50), 5e-3);
        let none = DasTrainConfig { warmup_fraction: 0.0, ..cfg };
        assert_eq!(none.lr_at(0), 5e-3);
    }

    #[test]
    fn init_is_unit_and_seeded() {
        let a = initial_direction(16, 3).unwrap();
        let n: f64 = a.iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-12);
        assert_eq!(a, initial_direction(16, 3).unwrap());
        assert_ne!(a, initial_direction(16, 4).unwrap());
    }
}
