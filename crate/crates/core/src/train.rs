//! The epoch loop and frozen-model evaluation.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::loss::{cross_entropy_loss, softmax};
use crate::metrics::{class_scores, confusion, roc, EpochRecord, MetricsReport};
use crate::model::{Model, Optimizer};
use crate::optim::AdamHyper;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamHyper,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            seed: 0,
            adam: AdamHyper::default(),
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        self.adam.validate()
    }
}

/// Eval-mode outputs over a whole dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Sample-weighted mean loss.
    pub loss: f64,
    /// Malignant-class probability per sample.
    pub scores: Vec<f64>,
    pub predictions: Vec<usize>,
    pub labels: Vec<usize>,
}

impl Evaluation {
    pub fn accuracy(&self) -> f64 {
        let hits = self
            .predictions
            .iter()
            .zip(&self.labels)
            .filter(|(p, y)| p == y)
            .count();
        hits as f64 / self.labels.len().max(1) as f64
    }

    pub fn report(&self) -> Result<MetricsReport> {
        let cm = confusion(&self.predictions, &self.labels)?;
        let both = cm.counts[0].iter().sum::<u64>() > 0 && cm.counts[1].iter().sum::<u64>() > 0;
        Ok(MetricsReport {
            confusion: cm,
            scores: class_scores(&cm),
            loss: self.loss,
            roc: if both { Some(roc(&self.scores, &self.labels)?) } else { None },
        })
    }
}

/// Runs `model` in eval mode over `data`. A sample is predicted malignant
/// only when its malignant probability is strictly larger, so exact ties
/// go to benign.
pub fn evaluate(model: &mut Model, data: &Dataset, batch_size: usize) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::InvalidData("cannot evaluate an empty dataset".into()));
    }
    let mut total = 0.0;
    let mut scores = Vec::with_capacity(data.len());
    let mut predictions = Vec::with_capacity(data.len());
    let mut labels = Vec::with_capacity(data.len());
    for batch in data.batches(batch_size, false, 0, 0)? {
        let logits = model.forward_logits(&batch.images, Mode::Eval)?;
        total += cross_entropy_loss(&logits, &batch.labels)?.loss * batch.len() as f64;
        let probs = softmax(&logits)?;
        for row in probs.data().chunks_exact(2) {
            scores.push(row[1] as f64);
            predictions.push(usize::from(row[1] > row[0]));
        }
        labels.extend_from_slice(&batch.labels);
    }
    Ok(Evaluation {
        loss: total / data.len() as f64,
        scores,
        predictions,
        labels,
    })
}

fn diverged(err: Error, epoch: usize, batch: usize) -> Error {
    match err {
        Error::Numeric(_) => Error::Divergence {
            epoch,
            batch,
            loss: f32::NAN,
        },
        other => other,
    }
}

/// Trains for `cfg.epochs` epochs. Each epoch visits the training set in a
/// seeded order, then measures both splits in eval mode. `on_epoch` sees
/// each record as soon as it exists.
pub fn train(
    model: &mut Model,
    train_data: &Dataset,
    val_data: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<Vec<EpochRecord>> {
    cfg.validate()?;
    if train_data.is_empty() || val_data.is_empty() {
        return Err(Error::InvalidData(
            "training and validation sets must both be non-empty".into(),
        ));
    }
    let mut optimizer = Optimizer::new(model, cfg.adam)?;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        model.reseed_dropout(Rng::stream(cfg.seed, "dropout", epoch as u64));
        let stream = train_data.batches(cfg.batch_size, cfg.shuffle, cfg.seed, epoch)?;
        for (b, batch) in stream.enumerate() {
            let loss = model
                .train_step(&batch.images, &batch.labels, &mut optimizer)
                .map_err(|e| diverged(e, epoch, b + 1))?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: b + 1,
                    loss: loss as f32,
                });
            }
        }
        let tr = evaluate(model, train_data, cfg.batch_size).map_err(|e| diverged(e, epoch, 0))?;
        let va = evaluate(model, val_data, cfg.batch_size).map_err(|e| diverged(e, epoch, 0))?;
        let record = EpochRecord {
            epoch,
            train_loss: tr.loss,
            train_accuracy: tr.accuracy(),
            val_loss: va.loss,
            val_accuracy: va.accuracy(),
        };
        on_epoch(&record);
        history.push(record);
    }
    Ok(history)
}
