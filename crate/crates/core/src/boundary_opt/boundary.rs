use crate::corpus::Sample;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::minor::{build_minor, MinorParams};
use crate::tensor::{Connectivity, ExpandedTensor, Flag, LabelMap, VolumeDims};

/// Binary per-voxel mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryMap {
    dims: VolumeDims,
    mask: Vec<bool>,
}

impl BoundaryMap {
    pub fn new(dims: VolumeDims, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != dims.voxels() {
            return Err(Error::DimMismatch(format!("mask of {} for {dims}", mask.len())));
        }
        Ok(Self { dims: dims.with_channels(1), mask })
    }

    pub fn dims(&self) -> VolumeDims {
        self.dims
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn get(&self, voxel: [usize; 3]) -> bool {
        self.mask[self.dims.linear(voxel)]
    }
}

/// Voxels with an in-bounds neighbor of a different class.
pub fn extract_gt_boundary(labels: &LabelMap, conn: Connectivity) -> BoundaryMap {
    let dims = labels.dims();
    let l = labels.labels();
    let mut mask = vec![false; dims.voxels()];
    for p in 0..dims.voxels() {
        let v = dims.coords(p);
        for &delta in conn.forward_offsets() {
            if let Some(q) = dims.offset(v, delta) {
                let q = dims.linear(q);
                if l[p] != l[q] {
                    mask[p] = true;
                    mask[q] = true;
                }
            }
        }
    }
    BoundaryMap { dims, mask }
}

/// Voxels of retained supernodes that carry the boundary flag.
///
/// Voxels of deleted supernodes are excluded, so the retention bounds take part
/// in the boundary objective.
pub fn extract_minor_boundary(tensor: &ExpandedTensor) -> Result<BoundaryMap> {
    let [h, w, d] = tensor.voxel_shape();
    let dims = VolumeDims::spatial(h, w, d)?;
    let mut mask = vec![false; dims.voxels()];
    for (i, m) in mask.iter_mut().enumerate() {
        let f = tensor.node_flags(dims.coords(i));
        if f & Flag::Visited.bit() == 0 {
            return Err(Error::Contract("tensor lacks construction flags (unvisited voxel)".into()));
        }
        *m = f & Flag::Boundary.bit() != 0 && f & Flag::NodeDeleted.bit() == 0;
    }
    Ok(BoundaryMap { dims, mask })
}

/// Dice–Sørensen overlap `2|a∩b| / (|a|+|b|)`; two empty masks score 1.
pub fn dice(a: &BoundaryMap, b: &BoundaryMap) -> Result<f64> {
    if !a.dims.same_spatial(&b.dims) {
        return Err(Error::DimMismatch(format!("{} vs {}", a.dims, b.dims)));
    }
    Ok(dice_masks(&a.mask, &b.mask))
}

pub(crate) fn dice_masks(a: &[bool], b: &[bool]) -> f64 {
    let (mut inter, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        inter += (x && y) as usize;
        na += x as usize;
        nb += y as usize;
    }
    if na + nb == 0 {
        1.0
    } else {
        2.0 * inter as f64 / (na + nb) as f64
    }
}

/// `1 − dice(minor boundary, ground-truth boundary)` for one sample. A sample whose
/// construction fails scores the worst loss, 1.
pub fn sample_boundary_loss(params: &MinorParams, sample: &Sample) -> f64 {
    let gt = extract_gt_boundary(&sample.labels, params.connectivity);
    build_minor(&sample.volume, params)
        .and_then(|(tensor, _)| extract_minor_boundary(&tensor))
        .and_then(|pred| dice(&pred, &gt))
        .map_or(1.0, |d| 1.0 - d)
}

/// Mean boundary loss over a few-shot set.
pub fn boundary_loss(params: &MinorParams, samples: &[Sample], exec: Exec) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidParams("few-shot set is empty".into()));
    }
    let losses = exec.map(samples, |s| sample_boundary_loss(params, s));
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}
