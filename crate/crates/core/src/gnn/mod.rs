//! Supernode classification by edge-conditioned message passing.

mod model;
mod train;

pub use model::{argmax_rows, loss, param_names, predict, MpnnConfig, MpnnModel, Normalizer};
pub use train::{train, validation_dice, Adam, EpochRecord, LabeledMinor, TrainReport};
