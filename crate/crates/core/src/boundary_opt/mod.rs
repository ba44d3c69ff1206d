//! Few-shot tuning of minor construction parameters against a boundary Dice
//! objective.

mod boundary;
mod smbo;
mod space;
mod surrogate;

pub use boundary::{
    boundary_loss, dice, extract_gt_boundary, extract_minor_boundary, sample_boundary_loss, BoundaryMap,
};
pub(crate) use boundary::dice_masks;
pub use smbo::{few_shot_optimize, write_history_csv, OptimizeResult, SmboConfig, Trial};
pub use space::{Grid, ParamSpace, Point, Scale, DEFAULT_LEVELS, DIMS, PARAM_NAMES};
pub use surrogate::{expected_improvement, ExtraTreesConfig, Surrogate};
