use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::{bce_loss, Network, Scalar};
use crate::dataset::Dataset;
use crate::rng::{derive_seed, CounterRng};
use crate::{Error, Result};

fn default_batch() -> usize {
    512
}
fn default_lr() -> f64 {
    1e-3
}
fn default_val() -> f64 {
    0.1
}
fn default_patience() -> Option<usize> {
    Some(3)
}
fn default_slice() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    pub seed: u64,
    /// Fraction of records held out for validation loss.
    #[serde(default = "default_val")]
    pub validation_fraction: f64,
    /// Stop after this many epochs without validation improvement; the best
    /// weights are restored.
    #[serde(default = "default_patience")]
    pub patience: Option<usize>,
    /// Records per parallel gradient slice.
    #[serde(default = "default_slice")]
    pub slice: usize,
}

impl TrainConfig {
    pub fn new(epochs: usize, seed: u64) -> Self {
        Self {
            epochs,
            batch_size: default_batch(),
            lr: default_lr(),
            seed,
            validation_fraction: default_val(),
            patience: default_patience(),
            slice: default_slice(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainReport {
    /// CSV with columns `epoch,train_loss,val_loss,seconds`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,seconds\n");
        for e in &self.epochs {
            let val = e.val_loss.map(|v| format!("{v:.6}")).unwrap_or_default();
            let _ = writeln!(s, "{},{:.6},{},{:.3}", e.epoch, e.train_loss, val, e.seconds);
        }
        s
    }
}

fn gather<T: Scalar>(data: &Dataset, idx: &[usize], inputs: &mut Vec<T>, targets: &mut Vec<T>) {
    inputs.clear();
    targets.clear();
    for &i in idx {
        inputs.extend(data.record_phases(i).iter().map(|&v| T::from_f64(v as f64)));
        let bits = data.label(i);
        targets.extend((0..data.classes()).map(|c| if bits >> c & 1 == 1 { T::one() } else { T::zero() }));
    }
}

/// Mean eval-mode loss over the given records.
pub fn evaluate_loss<T: Scalar>(net: &Network<T>, data: &Dataset, idx: &[usize]) -> Result<f64> {
    let classes = net.spec().classes;
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let mut total = 0.0;
    for chunk in idx.chunks(1024) {
        gather(data, chunk, &mut inputs, &mut targets);
        let probs = net.forward(&inputs, chunk.len())?;
        total += probs
            .chunks_exact(classes)
            .zip(targets.chunks_exact(classes))
            .map(|(p, t)| bce_loss(p, t).0.as_f64())
            .sum::<f64>();
    }
    Ok(total / idx.len().max(1) as f64)
}

/// Mini-batch Adam training with dropout. Deterministic for a fixed seed.
pub fn train<T: Scalar>(
    net: &mut Network<T>,
    data: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainReport> {
    let spec = net.spec();
    if data.mics() != spec.mics || data.bins() != spec.bins || data.classes() != spec.classes {
        return Err(Error::shape(format!(
            "dataset is {}x{} with {} classes, model expects {}x{} with {}",
            data.mics(),
            data.bins(),
            data.classes(),
            spec.mics,
            spec.bins,
            spec.classes
        )));
    }
    if data.is_empty() || cfg.batch_size == 0 {
        return Err(Error::invalid("training needs records and a positive batch size"));
    }
    if !(0.0..1.0).contains(&cfg.validation_fraction) {
        return Err(Error::invalid("validation fraction must be in [0, 1)"));
    }
    let mut order = CounterRng::new(derive_seed(cfg.seed, &[0x5b11])).permutation(data.len());
    let n_val = (data.len() as f64 * cfg.validation_fraction).round() as usize;
    let val_idx = order.split_off(data.len() - n_val);
    let mut train_idx = order;
    if train_idx.is_empty() {
        return Err(Error::invalid("validation split leaves no training records"));
    }

    let mut adam = AdamState::new(net.params(), cfg.lr);
    let mut report = TrainReport { epochs: Vec::new(), best_epoch: 0, stopped_early: false };
    let mut best: Option<(f64, Vec<_>)> = None;
    let mut since_best = 0;
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let mut step = 0u64;

    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        CounterRng::new(derive_seed(cfg.seed, &[0xe90c, epoch as u64])).shuffle(&mut train_idx);
        let mut loss_sum = 0.0;
        for batch in train_idx.chunks(cfg.batch_size) {
            gather(data, batch, &mut inputs, &mut targets);
            let seed = derive_seed(cfg.seed, &[0xd809, step]);
            let (loss, mut grads) = net.batch_gradient(&inputs, &targets, batch.len(), Some(seed), cfg.slice)?;
            let scale = T::from_f64(1.0 / batch.len() as f64);
            grads.iter_mut().for_each(|g| g.data_mut().iter_mut().for_each(|v| *v = *v * scale));
            adam_step(net.params_mut(), &grads, &mut adam)?;
            loss_sum += loss;
            step += 1;
        }
        let val_loss = if val_idx.is_empty() { None } else { Some(evaluate_loss(net, data, &val_idx)?) };
        let log = EpochLog {
            epoch,
            train_loss: loss_sum / train_idx.len() as f64,
            val_loss,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&log);
        report.epochs.push(log);

        if let Some(v) = val_loss {
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, net.params().to_vec()));
                report.best_epoch = epoch;
                since_best = 0;
            } else {
                since_best += 1;
                if cfg.patience.is_some_and(|p| since_best >= p) {
                    report.stopped_early = true;
                    break;
                }
            }
        } else {
            report.best_epoch = epoch;
        }
    }
    if let Some((_, params)) = best {
        net.params_mut().clone_from_slice(&params);
    }
    Ok(report)
}
