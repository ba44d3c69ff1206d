//! Copying supernode predictions back onto voxels, and voxel-level Dice.

use std::collections::VecDeque;

use crate::boundary_opt::dice_masks;
use crate::error::{Error, Result};
use crate::minor::{GraphMinor, DELETED};
use crate::tensor::{Connectivity, ExpandedTensor, Flag, LabelMap};

/// Class given to voxels of deleted supernodes unless configured otherwise.
pub const BACKGROUND: u16 = 0;

fn check_count(minor: &GraphMinor, preds: &[u16]) -> Result<()> {
    if preds.len() != minor.num_nodes() {
        return Err(Error::DimMismatch(format!(
            "{} predictions for {} supernodes",
            preds.len(),
            minor.num_nodes()
        )));
    }
    Ok(())
}

/// Every member voxel of supernode `u` gets `preds[u]`; voxels of deleted
/// supernodes get `background`.
pub fn lift(minor: &GraphMinor, preds: &[u16], background: u16) -> Result<LabelMap> {
    check_count(minor, preds)?;
    let labels = minor
        .membership
        .iter()
        .map(|&m| if m == DELETED { background } else { preds[m as usize] })
        .collect();
    LabelMap::new(minor.dims.with_channels(1), labels)
}

/// Lift by walking the flag tensor: from each supernode's canonical voxel, spread
/// along contracted edges. Independent of the membership array; 6-connectivity
/// only, because diagonal edges share midpoints in the tensor.
pub fn lift_tensor_walk(
    minor: &GraphMinor,
    preds: &[u16],
    tensor: &ExpandedTensor,
    background: u16,
) -> Result<LabelMap> {
    check_count(minor, preds)?;
    if minor.connectivity != Connectivity::Six {
        return Err(Error::InvalidParams(format!(
            "tensor-walk lift needs 6-connectivity, minor uses {}",
            minor.connectivity
        )));
    }
    let dims = minor.dims.with_channels(1);
    if tensor.voxel_shape() != dims.shape() {
        return Err(Error::DimMismatch(format!("tensor {:?} vs minor {dims}", tensor.voxel_shape())));
    }
    let mut out = vec![background; dims.voxels()];
    let mut seen = vec![false; dims.voxels()];
    let mut queue = VecDeque::new();
    for node in &minor.nodes {
        let label = preds[node.id as usize];
        let start = node.canonical;
        if !dims.contains(start) || tensor.node_flags(start) & Flag::NodeDeleted.bit() != 0 {
            return Err(Error::Contract(format!("canonical voxel {start:?} of supernode {} is not live", node.id)));
        }
        seen[dims.linear(start)] = true;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            out[dims.linear(p)] = label;
            for &delta in Connectivity::Six.offsets() {
                let Some(q) = dims.offset(p, delta) else {
                    continue;
                };
                let qi = dims.linear(q);
                if seen[qi] {
                    continue;
                }
                let mid = [0, 1, 2].map(|a| (2 * p[a] as i64 + i64::from(delta[a])) as usize);
                if tensor.get_flag(mid, Flag::EdgeContracted)? && tensor.node_flags(q) & Flag::NodeDeleted.bit() == 0 {
                    seen[qi] = true;
                    queue.push_back(q);
                }
            }
        }
    }
    LabelMap::new(dims, out)
}

/// Dice of `pred == target` against `gt == target`; 1 when both are empty.
pub fn voxel_dice(pred: &LabelMap, gt: &LabelMap, target: u16) -> Result<f64> {
    if !pred.dims().same_spatial(&gt.dims()) {
        return Err(Error::DimMismatch(format!("prediction {} vs ground truth {}", pred.dims(), gt.dims())));
    }
    let a: Vec<bool> = pred.labels().iter().map(|&l| l == target).collect();
    let b: Vec<bool> = gt.labels().iter().map(|&l| l == target).collect();
    Ok(dice_masks(&a, &b))
}

/// Majority ground-truth class per supernode, ties to the smaller class.
pub fn majority_labels(minor: &GraphMinor, gt: &LabelMap) -> Result<Vec<u16>> {
    if !minor.dims.same_spatial(&gt.dims()) {
        return Err(Error::DimMismatch(format!("minor {} vs labels {}", minor.dims, gt.dims())));
    }
    let k = gt.num_classes().max(1);
    let mut counts = vec![0u64; minor.num_nodes() * k];
    for (&m, &l) in minor.membership.iter().zip(gt.labels()) {
        if m != DELETED {
            counts[m as usize * k + usize::from(l)] += 1;
        }
    }
    Ok(counts
        .chunks(k)
        .map(|c| c.iter().enumerate().fold(0, |best, (i, &n)| if n > c[best] { i } else { best }) as u16)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minor::{build_minor, build_minor_with, MinorParams};
    use crate::tensor::{Volume, VolumeDims};
    use crate::Exec;

    fn dims4() -> VolumeDims {
        VolumeDims::spatial(4, 4, 4).unwrap()
    }

    #[test]
    fn half_split_lift() {
        let vol = Volume::from_fn(dims4(), |v| if v[1] < 2 { 0.0 } else { 100.0 }).unwrap();
        let (t, m) = build_minor(&vol, &MinorParams::new(10.0, 50.0)).unwrap();
        let left = m.membership[0] as usize;
        let mut preds = vec![0u16; 2];
        preds[left] = 1;
        let out = lift(&m, &preds, BACKGROUND).unwrap();
        assert!((0..64).all(|i| out.labels()[i] == u16::from(dims4().coords(i)[1] < 2)));
        assert_eq!(lift_tensor_walk(&m, &preds, &t, BACKGROUND).unwrap(), out);
        assert!(lift(&m, &[1], BACKGROUND).is_err());
    }

    #[test]
    fn all_deleted_is_background() {
        let vol = Volume::filled(dims4(), 5.0).unwrap();
        let p = MinorParams::new(0.0, 1.0).with_area_bounds(100, 200);
        let (t, m) = build_minor(&vol, &p).unwrap();
        assert_eq!(m.num_nodes(), 0);
        let out = lift(&m, &[], 3).unwrap();
        assert!(out.labels().iter().all(|&l| l == 3));
        assert_eq!(lift_tensor_walk(&m, &[], &t, 3).unwrap(), out);
    }

    #[test]
    fn tensor_walk_matches_with_deletions() {
        let dims = VolumeDims::spatial(7, 6, 5).unwrap();
        let vol = Volume::from_fn(dims, |v| ((v[0] * 5 + v[1] * 3 + v[2] * 7) % 6) as f32 * 8.0).unwrap();
        let p = MinorParams::new(10.0, 30.0).with_area_bounds(2, 100);
        let b = build_minor_with(&vol, &p, Exec::Sequential).unwrap();
        assert!(b.stats.deleted_voxels > 0);
        let preds: Vec<u16> = (0..b.minor.num_nodes()).map(|i| (i % 3) as u16).collect();
        assert_eq!(
            lift_tensor_walk(&b.minor, &preds, &b.tensor, 0).unwrap(),
            lift(&b.minor, &preds, 0).unwrap()
        );
    }

    #[test]
    fn tensor_walk_rejects_diagonal_connectivity() {
        let vol = Volume::filled(dims4(), 1.0).unwrap();
        let p = MinorParams::new(0.0, 1.0).with_connectivity(Connectivity::TwentySix);
        let (t, m) = build_minor(&vol, &p).unwrap();
        assert!(lift_tensor_walk(&m, &[0], &t, 0).is_err());
    }

    #[test]
    fn dice_examples() {
        let gt = LabelMap::from_fn(dims4(), |v| u16::from(v[0] < 2)).unwrap();
        assert_eq!(voxel_dice(&gt, &gt, 1).unwrap(), 1.0);
        assert_eq!(voxel_dice(&gt, &gt, 7).unwrap(), 1.0);
        let half = LabelMap::from_fn(dims4(), |v| u16::from(v[0] < 2 && v[1] < 2 || v[0] >= 2 && v[1] >= 2)).unwrap();
        assert_eq!(voxel_dice(&half, &gt, 1).unwrap(), 0.5);
        let other = LabelMap::filled(VolumeDims::spatial(2, 2, 2).unwrap(), 0).unwrap();
        assert!(voxel_dice(&other, &gt, 1).is_err());
    }

    #[test]
    fn majority_round_trip() {
        let dims = VolumeDims::spatial(6, 6, 6).unwrap();
        let vol = Volume::from_fn(dims, |v| ((v[0] / 2) * 30 + (v[1] / 3) * 7) as f32).unwrap();
        let gt = LabelMap::from_fn(dims, |v| u16::from(v[0] + v[2] > 5)).unwrap();
        let (_, m) = build_minor(&vol, &MinorParams::new(3.0, 20.0)).unwrap();
        let maj = majority_labels(&m, &gt).unwrap();
        let lifted = lift(&m, &maj, 0).unwrap();
        assert_eq!(majority_labels(&m, &lifted).unwrap(), maj);
    }

    #[test]
    fn majority_tie_goes_to_smaller_class() {
        let dims = VolumeDims::spatial(1, 1, 2).unwrap();
        let vol = Volume::filled(dims, 1.0).unwrap();
        let gt = LabelMap::new(dims, vec![1, 0]).unwrap();
        let (_, m) = build_minor(&vol, &MinorParams::new(0.0, 1.0)).unwrap();
        assert_eq!(majority_labels(&m, &gt).unwrap(), vec![0]);
    }
}
