use std::io::Write;

use ndarray::Array2;
use rand::seq::SliceRandom;

use super::model::{predict, MpnnConfig, MpnnModel, Normalizer};
use crate::error::{Error, Result};
use crate::lift::{lift, majority_labels, voxel_dice, BACKGROUND};
use crate::minor::GraphMinor;
use crate::rng::{rng, substream};
use crate::tensor::LabelMap;

/// A minor with the voxel ground truth of its source volume.
#[derive(Debug, Clone)]
pub struct LabeledMinor {
    pub minor: GraphMinor,
    pub labels: LabelMap,
}

/// Adam with the usual defaults (0.9, 0.999, 1e-8), no weight decay.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(lr: f64, params: &[Array2<f64>]) -> Self {
        let zeros = || params.iter().map(|p| Array2::zeros(p.dim())).collect();
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: zeros(), v: zeros() }
    }

    pub fn step(&mut self, params: &mut [Array2<f64>], grads: &[Array2<f64>]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_dice: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch (1-based) with the best validation Dice; earliest on ties.
    pub best_epoch: usize,
    pub best_val_dice: f64,
    pub stopped_epoch: usize,
    /// Weights of the best epoch, rounded to checkpoint precision.
    pub model: MpnnModel,
}

impl TrainReport {
    /// `epoch,train_loss,val_dice` rows.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "epoch,train_loss,val_dice")?;
        for e in &self.epochs {
            writeln!(out, "{},{},{}", e.epoch, e.train_loss, e.val_dice)?;
        }
        Ok(())
    }
}

struct Prepared<'a> {
    minor: &'a GraphMinor,
    labels: Vec<u16>,
    areas: Vec<f64>,
}

fn prepare<'a>(s: &'a LabeledMinor, classes: usize) -> Result<Prepared<'a>> {
    s.labels.check_classes(classes)?;
    Ok(Prepared {
        minor: &s.minor,
        labels: majority_labels(&s.minor, &s.labels)?,
        areas: s.minor.nodes.iter().map(|n| n.area as f64).collect(),
    })
}

/// Mean lifted Dice of the target class over `val`.
pub fn validation_dice(model: &MpnnModel, val: &[LabeledMinor]) -> Result<f64> {
    let mut total = 0.0;
    for s in val {
        let preds = predict(model, &s.minor)?;
        let out = lift(&s.minor, &preds, BACKGROUND)?;
        total += voxel_dice(&out, &s.labels, model.config.target_class)?;
    }
    Ok(total / val.len() as f64)
}

/// Trains a fresh model. The input normalizer is fitted on the training minors.
/// Each epoch visits the training set in a seeded random order, one Adam step per
/// `batch_size` minors; training stops once validation Dice has not improved for
/// `patience` epochs, and the best epoch's weights are returned.
pub fn train(train: &[LabeledMinor], val: &[LabeledMinor], config: &MpnnConfig) -> Result<TrainReport> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidParams("training and validation sets must be nonempty".into()));
    }
    let refs: Vec<&GraphMinor> = train.iter().map(|s| &s.minor).collect();
    let normalizer = Normalizer::fit(&refs)?;
    let (dx, df) = (train[0].minor.node_features.cols(), train[0].minor.edge_features.cols());
    let mut model = MpnnModel::new(*config, dx, df, normalizer)?;
    let data = train.iter().map(|s| prepare(s, config.classes)).collect::<Result<Vec<_>>>()?;
    let total_area: f64 = data.iter().flat_map(|d| &d.areas).sum();
    if !(total_area > 0.0) {
        return Err(Error::InvalidParams("training minors have no retained supernodes".into()));
    }

    let mut adam = Adam::new(config.learning_rate, model.params());
    let mut shuffle = rng(substream(config.seed, "train-order"));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epochs = Vec::new();
    let mut best: Option<(usize, f64, MpnnModel)> = None;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let batch_area: f64 = batch.iter().flat_map(|&i| &data[i].areas).sum();
            if batch_area == 0.0 {
                continue;
            }
            let mut grads: Option<Vec<Array2<f64>>> = None;
            for &i in batch {
                let d = &data[i];
                let (l, g) = model.loss_and_grad(d.minor, &d.labels, &d.areas, batch_area)?;
                epoch_loss += l * batch_area / total_area;
                match &mut grads {
                    None => grads = Some(g),
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                }
            }
            if !epoch_loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            if let Some(g) = grads {
                adam.step(model.params_mut(), &g);
            }
        }
        if !epoch_loss.is_finite() || model.params().iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::Diverged { epoch });
        }
        let val_dice = validation_dice(&model, val)?;
        epochs.push(EpochRecord { epoch, train_loss: epoch_loss, val_dice });
        if best.as_ref().is_none_or(|b| val_dice > b.1) {
            best = Some((epoch, val_dice, model.clone()));
        }
        let best_epoch = best.as_ref().map_or(epoch, |b| b.0);
        if epoch - best_epoch >= config.patience {
            break;
        }
    }
    let stopped_epoch = epochs.len();
    let (best_epoch, best_val_dice, mut model) = best.ok_or_else(|| Error::InvalidParams("max_epochs is 0".into()))?;
    model.quantize();
    Ok(TrainReport { epochs, best_epoch, best_val_dice, stopped_epoch, model })
}
