//! The spectrogram CNN: layers, training, metrics and checkpoints.

pub mod archive;
mod checkpoint;
mod cnn;
mod metrics;
pub mod nn;
mod train;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, TensorEntry,
    TrainingMetadata, FORMAT_VERSION, MAGIC,
};
pub use cnn::{argmax, build_model, ActivationCache, Model, ModelConfig, Prediction};
pub use metrics::{Confusion, Metrics};
pub use nn::{softmax, Layer, Sequential, Trace};
pub use train::{
    evaluate, predict_classes, train, train_from, EpochStats, LabeledSet, TrainConfig, TrainHistory,
    EVAL_BATCH,
};
