//! Boundary-aligned graph minors for volumetric segmentation.
//!
//! A voxel volume is contracted into a compact graph of supernodes by seed-anchored
//! flood fill ([`minor`]), whose thresholds are tuned on a handful of labeled
//! volumes against a boundary Dice objective ([`boundary_opt`]). Supernodes are
//! classified by an edge-conditioned message-passing network ([`gnn`]) and the
//! predictions are copied back onto every member voxel ([`lift`]).

pub mod boundary_opt;
pub mod corpus;
pub mod error;
pub mod exec;
pub mod features;
pub mod formats;
pub mod gnn;
pub mod lift;
pub mod linalg;
pub mod minor;
pub mod pipeline;
pub mod rng;
pub mod synthetic;
pub mod tensor;

pub use error::{Error, Result};
pub use exec::Exec;
pub use minor::{build_minor, build_minor_with, GraphMinor, MinorParams, NormOrder};
pub use tensor::{Connectivity, ExpandedTensor, Flag, LabelMap, Volume, VolumeDims};
