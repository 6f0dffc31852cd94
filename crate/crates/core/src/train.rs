//! Minibatch training loop shared by both network families.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::math;
use crate::optim::{Optimizer, OptimizerKind};

/// Batch losses above this abort training.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

/// A model with a flat weight vector and an exact gradient.
pub trait Model {
    type Batch;

    fn weights(&self) -> &[f64];
    fn weights_mut(&mut self) -> &mut [f64];
    fn batch_len(batch: &Self::Batch) -> usize;
    /// Writes the gradient into `grad` and returns the batch loss.
    fn loss_and_grad(&self, batch: &Self::Batch, grad: &mut [f64]) -> Result<f64>;
    /// Weights that form the final linear readout.
    fn readout_ranges(&self) -> Vec<Range<usize>> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Half-cosine decay from the base rate to zero over all steps.
    Cosine,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub schedule: LrSchedule,
    /// Multiplier on the learning rate of the readout weights.
    pub readout_lr_scale: f64,
    pub init_scale: f64,
    pub seed: u64,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 25,
            batch_size: 10_000,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::default(),
            schedule: LrSchedule::Constant,
            readout_lr_scale: 1.0,
            init_scale: 1.0,
            seed: 0,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidInput("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidInput("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidInput(alloc::format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.readout_lr_scale > 0.0 && self.readout_lr_scale.is_finite()) {
            return Err(Error::InvalidInput("readout_lr_scale must be positive".into()));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::InvalidInput("init_scale must be non-negative".into()));
        }
        Ok(())
    }

    fn rate_at(&self, step: usize, total: usize) -> f64 {
        match self.schedule {
            LrSchedule::Constant => self.learning_rate,
            LrSchedule::Cosine => {
                let frac = step as f64 / total.max(1) as f64;
                self.learning_rate * 0.5 * (1.0 + math::cos(core::f64::consts::PI * frac))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    /// Sample-weighted mean batch loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
}

/// Runs `cfg.epochs` epochs; `batches(epoch)` yields that epoch's minibatches.
pub fn train<M, F, I>(
    model: &mut M,
    cfg: &TrainConfig,
    steps_per_epoch: usize,
    mut batches: F,
) -> Result<TrainReport>
where
    M: Model,
    F: FnMut(usize) -> I,
    I: IntoIterator<Item = M::Batch>,
{
    cfg.validate()?;
    let n = model.weights().len();
    let mut scale = vec![1.0; n];
    for r in model.readout_ranges() {
        scale[r].iter_mut().for_each(|s| *s = cfg.readout_lr_scale);
    }
    let mut opt = Optimizer::new(cfg.optimizer, n);
    let mut grad = vec![0.0; n];
    let total = cfg.epochs * steps_per_epoch;
    let mut report = TrainReport::default();
    for epoch in 0..cfg.epochs {
        let mut weighted = 0.0;
        let mut seen = 0usize;
        for batch in batches(epoch) {
            let len = M::batch_len(&batch);
            let loss = model.loss_and_grad(&batch, &mut grad)?;
            if !(loss <= DIVERGENCE_THRESHOLD) {
                return Err(Error::Diverged { epoch, loss });
            }
            let lr = cfg.rate_at(report.steps, total);
            opt.step(model.weights_mut(), &grad, lr, &scale);
            report.steps += 1;
            weighted += loss * len as f64;
            seen += len;
        }
        if seen == 0 {
            return Err(Error::InvalidInput("epoch produced no batches".into()));
        }
        report.epoch_losses.push(weighted / seen as f64);
    }
    Ok(report)
}

/// Epoch-dependent permutation of `0..n`, fixed by `(seed, epoch)`.
pub fn epoch_permutation(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = crate::rng::stream(seed, crate::rng::Domain::Shuffle, epoch as u64);
    idx.shuffle(&mut rng);
    idx
}

/// Consecutive chunks of a permutation; the last chunk may be short.
pub fn batch_ranges(n: usize, batch_size: usize) -> impl Iterator<Item = Range<usize>> {
    (0..n.div_ceil(batch_size)).map(move |b| b * batch_size..((b + 1) * batch_size).min(n))
}
