use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::minor::DELETED;
use crate::tensor::{Connectivity, ExpandedTensor, Flag, VolumeDims};

/// Region adjacency over surviving grid edges.
///
/// Scans every grid edge once; a pair `(u, v)` of distinct retained supernodes is
/// emitted (once, as `u < v`) when at least one edge between their voxels is not
/// edge-deleted. Edges touching deleted supernodes are skipped.
pub fn extract_edges(
    tensor: &ExpandedTensor,
    membership: &[u32],
    dims: VolumeDims,
    conn: Connectivity,
) -> Result<Vec<(u32, u32)>> {
    if tensor.voxel_shape() != dims.shape() || membership.len() != dims.voxels() {
        return Err(Error::DimMismatch(format!(
            "tensor {:?} / membership {} vs volume {dims}",
            tensor.voxel_shape(),
            membership.len()
        )));
    }
    let mut pairs = BTreeSet::new();
    for p_lin in 0..dims.voxels() {
        let u = membership[p_lin];
        if u == DELETED {
            continue;
        }
        let p = dims.coords(p_lin);
        for &delta in conn.forward_offsets() {
            let Some(q) = dims.offset(p, delta) else {
                continue;
            };
            let v = membership[dims.linear(q)];
            if v == DELETED || v == u {
                continue;
            }
            let mid = [0, 1, 2].map(|a| (2 * p[a] as i64 + i64::from(delta[a])) as usize);
            if tensor.has(tensor.index(mid), Flag::EdgeDeleted) {
                continue;
            }
            pairs.insert((u.min(v), u.max(v)));
        }
    }
    Ok(pairs.into_iter().collect())
}
