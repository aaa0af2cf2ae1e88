use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cnn::{argmax, Model};
use super::metrics::Metrics;
use crate::dsp::png_io;
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::songgen::{DatasetManifest, Split};
use crate::tensor::{AdamConfig, AdamState, Graph, Tensor};
use crate::types::{Background, SongClass};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub weight_decay: f32,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 64,
            learning_rate: 1e-3,
            weight_decay: 1e-5,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("epochs and batch size must be at least 1".into()));
        }
        self.adam().validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }
}

/// Input tensors `[C, H, W]` with integer labels and sample ids.
#[derive(Clone, Debug, Default)]
pub struct LabeledSet {
    pub inputs: Vec<Tensor>,
    pub labels: Vec<usize>,
    pub ids: Vec<String>,
    pub clusters: Vec<u32>,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn push(&mut self, input: Tensor, label: usize, id: impl Into<String>, cluster: u32) {
        self.inputs.push(input);
        self.labels.push(label);
        self.ids.push(id.into());
        self.clusters.push(cluster);
    }

    /// Stack the selected samples into `[B, C, H, W]`.
    pub fn batch(&self, indices: &[usize]) -> Result<Tensor> {
        let items: Vec<&Tensor> = indices.iter().map(|&i| &self.inputs[i]).collect();
        Tensor::stack(&items)
    }

    /// Load the PNGs of one split, in manifest order.
    pub fn from_manifest(
        manifest: &DatasetManifest,
        root: &Path,
        split: Split,
        backgrounds: &[Background],
        model: &Model,
    ) -> Result<Self> {
        let records: Vec<_> = manifest.select(Some(split), backgrounds).collect();
        let [_, h, w] = model.input_shape();
        let loaded: Vec<Tensor> = records
            .par_iter()
            .map(|r| {
                let path = root.join(&r.png);
                let (pw, ph, pixels) = png_io::read_gray(&path)?;
                if (ph, pw) != (h, w) {
                    return Err(Error::Png {
                        path,
                        message: format!("image is {ph}x{pw}, model expects {h}x{w}"),
                    });
                }
                Tensor::new(vec![1, h, w], pixels)
            })
            .collect::<Result<_>>()?;
        let mut set = LabeledSet::default();
        for (r, t) in records.iter().zip(loaded) {
            set.push(t, r.class.id(), format!("{}_{}", r.sample_id(), r.background), r.cluster);
        }
        Ok(set)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.train_loss)
    }
}

pub fn train(model: &mut Model, train_set: &LabeledSet, test_set: Option<&LabeledSet>, tc: &TrainConfig) -> Result<TrainHistory> {
    train_from(model, train_set, test_set, tc, None).map(|(h, _)| h)
}

/// Train for `tc.epochs` more epochs, optionally continuing an optimizer
/// state. Returns the history and the final optimizer state.
pub fn train_from(
    model: &mut Model,
    train_set: &LabeledSet,
    test_set: Option<&LabeledSet>,
    tc: &TrainConfig,
    optimizer: Option<AdamState>,
) -> Result<(TrainHistory, AdamState)> {
    tc.validate()?;
    if train_set.is_empty() {
        return Err(Error::Data("training split is empty".into()));
    }
    for class in SongClass::ALL {
        if !train_set.labels.contains(&class.id()) {
            return Err(Error::Data(format!("training split has no {class} samples")));
        }
    }
    if let Some(t) = test_set {
        if t.is_empty() {
            return Err(Error::Data("test split is empty".into()));
        }
    }
    let mut state = match optimizer {
        Some(s) => {
            if s.first_moment.len() != model.net.params().len() {
                return Err(Error::shape("train", "optimizer state does not match model"));
            }
            AdamState {
                config: tc.adam(),
                ..s
            }
        }
        None => AdamState::new(tc.adam(), &model.net.params())?,
    };
    let decay = model.net.decay_mask();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = TrainHistory::default();
    let start_step = state.step_count;
    let steps_per_epoch = train_set.len().div_ceil(tc.batch_size) as u64;
    let first_epoch = (start_step / steps_per_epoch.max(1)) as usize;

    for e in 0..tc.epochs {
        let epoch = first_epoch + e;
        order.sort_unstable();
        order.shuffle(&mut stream(tc.seed, epoch as u64));
        let (mut loss_sum, mut correct) = (0.0f64, 0usize);
        for chunk in order.chunks(tc.batch_size) {
            let (loss, hits, grads) = batch_gradients(model, train_set, chunk)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss at epoch {}", epoch + 1)));
            }
            correct += hits;
            loss_sum += loss * chunk.len() as f64;
            let grad_refs: Vec<&Tensor> = grads.iter().collect();
            state.step(&mut model.net.params_mut(), &grad_refs, &decay)?;
        }
        let n = train_set.len() as f64;
        let test_accuracy = match test_set {
            Some(t) => Some(evaluate(model, t)?.accuracy),
            None => None,
        };
        let stats = EpochStats {
            epoch: epoch + 1,
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            test_accuracy,
        };
        log::info!(
            "epoch {} loss {:.4} train acc {:.4} test acc {}",
            stats.epoch,
            stats.train_loss,
            stats.train_accuracy,
            stats.test_accuracy.map_or("-".to_string(), |a| format!("{a:.4}"))
        );
        history.epochs.push(stats);
    }
    Ok((history, state))
}

/// Samples per forward/backward pass. Larger batches are accumulated in
/// micro-batches so activation buffers stay small enough to be reused.
pub const MICRO_BATCH: usize = 16;
pub const EVAL_BATCH: usize = MICRO_BATCH;

/// Mean loss, correct count and mean-loss gradients over one batch.
fn batch_gradients(model: &Model, set: &LabeledSet, batch: &[usize]) -> Result<(f64, usize, Vec<Tensor>)> {
    let mut total: Option<Vec<Tensor>> = None;
    let (mut loss_sum, mut correct) = (0.0f64, 0usize);
    for micro in batch.chunks(MICRO_BATCH) {
        let x = set.batch(micro)?;
        let labels: Vec<usize> = micro.iter().map(|&i| set.labels[i]).collect();
        let mut g = Graph::new();
        let input = g.leaf(x, false);
        let trace = model.net.trace(&mut g, input, true)?;
        let logits = trace.logits();
        let loss = g.cross_entropy(logits, &labels)?;
        loss_sum += g.value(loss).item() as f64 * micro.len() as f64;
        let out = g.value(logits);
        let k = out.shape()[1];
        correct += labels
            .iter()
            .enumerate()
            .filter(|&(r, &y)| argmax(&out.data()[r * k..(r + 1) * k]) == y)
            .count();
        let mut grads = g.backward(loss)?;
        let weight = micro.len() as f32 / batch.len() as f32;
        let parts = trace.params.iter().map(|&p| grads.take(p).expect("parameter gradient"));
        match &mut total {
            None => {
                total = Some(
                    parts
                        .map(|mut t| {
                            t.data_mut().iter_mut().for_each(|v| *v *= weight);
                            t
                        })
                        .collect(),
                )
            }
            Some(acc) => {
                for (a, t) in acc.iter_mut().zip(parts) {
                    for (x, &v) in a.data_mut().iter_mut().zip(t.data()) {
                        *x += v * weight;
                    }
                }
            }
        }
    }
    Ok((loss_sum / batch.len() as f64, correct, total.unwrap_or_default()))
}

/// Predicted class per sample, batched.
pub fn predict_classes(model: &Model, set: &LabeledSet) -> Result<Vec<usize>> {
    let idx: Vec<usize> = (0..set.len()).collect();
    let mut out = Vec::with_capacity(set.len());
    for chunk in idx.chunks(EVAL_BATCH) {
        let logits = model.logits(&set.batch(chunk)?)?;
        let k = logits.shape()[1];
        out.extend(logits.data().chunks(k).map(argmax));
    }
    Ok(out)
}

pub fn evaluate(model: &Model, set: &LabeledSet) -> Result<Metrics> {
    if set.is_empty() {
        return Err(Error::Data("evaluation split is empty".into()));
    }
    let predicted = predict_classes(model, set)?;
    Metrics::from_predictions(&set.labels, &predicted)
}
