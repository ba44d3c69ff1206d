//! Graph minor construction: coprime traversal, seed-anchored contraction,
//! retention-based node deletion, threshold edge deletion, and region adjacency.

mod contract;
mod edges;
mod params;
mod traversal;

use serde::{Deserialize, Serialize};

pub use contract::{ContractionState, FillParams, Region, UNCLAIMED};
pub use edges::extract_edges;
pub use params::{retention_check, MinorParams, NormOrder, Retention};
pub use traversal::{get_coprime, Traversal};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::features::{
    assemble_feature_matrices, compute_edge_features, finalize_node_features, FeatureMatrix, NodeFeatures,
};
use crate::tensor::{Connectivity, ExpandedTensor, Volume, VolumeDims};

/// Membership value of voxels whose supernode was deleted.
pub const DELETED: u32 = u32::MAX;

/// Table entry of a retained supernode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Supernode {
    pub id: u32,
    /// Lexicographically least member voxel.
    pub canonical: [usize; 3],
    pub area: u64,
    pub boundary_len: u64,
}

/// The minor: retained supernodes, their adjacency, features, and the voxel map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMinor {
    pub dims: VolumeDims,
    pub connectivity: Connectivity,
    pub nodes: Vec<Supernode>,
    /// Unordered pairs stored as `(u, v)` with `u < v`, sorted.
    pub edges: Vec<(u32, u32)>,
    pub node_features: FeatureMatrix,
    pub edge_features: FeatureMatrix,
    /// Supernode id per voxel, or [`DELETED`].
    pub membership: Vec<u32>,
}

impl GraphMinor {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn deleted_voxels(&self) -> usize {
        self.membership.iter().filter(|&&m| m == DELETED).count()
    }

    /// Voxels per supernode.
    pub fn reduction_factor(&self) -> f64 {
        self.dims.voxels() as f64 / self.nodes.len().max(1) as f64
    }

    /// Checks the structural invariants: dense ids, live sorted edges without
    /// self-loops or duplicates, matrix shapes, and that membership partitions the
    /// grid consistently with the supernode areas.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id as usize != i || node.area == 0 {
                return Err(Error::Contract(format!("supernode {i} has id {} area {}", node.id, node.area)));
            }
        }
        if self.edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Contract("edge list not strictly sorted".into()));
        }
        if let Some(&(u, v)) = self.edges.iter().find(|&&(u, v)| u >= v || v as usize >= n) {
            return Err(Error::Contract(format!("invalid edge ({u}, {v})")));
        }
        if self.node_features.rows != n || self.edge_features.rows != self.edges.len() {
            return Err(Error::Contract("feature matrix row counts do not match".into()));
        }
        if self.membership.len() != self.dims.voxels() {
            return Err(Error::Contract("membership length mismatch".into()));
        }
        let mut counts = vec![0u64; n];
        for &m in &self.membership {
            if m != DELETED {
                *counts.get_mut(m as usize).ok_or_else(|| Error::Contract(format!("membership id {m} out of range")))? +=
                    1;
            }
        }
        if let Some(i) = (0..n).find(|&i| counts[i] != self.nodes[i].area) {
            return Err(Error::Contract(format!("supernode {i} area {} vs {} members", self.nodes[i].area, counts[i])));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildStats {
    /// Flood-fill pops; equals the voxel count after a full build.
    pub pops: u64,
    pub fills: u64,
    pub deleted_nodes: u64,
    pub deleted_voxels: u64,
}

/// Everything produced by one construction run.
#[derive(Debug, Clone)]
pub struct MinorBuild {
    pub tensor: ExpandedTensor,
    pub minor: GraphMinor,
    pub node_features: Vec<NodeFeatures>,
    pub stats: BuildStats,
}

/// Builds the minor of `volume` under `params`.
pub fn build_minor(volume: &Volume, params: &MinorParams) -> Result<(ExpandedTensor, GraphMinor)> {
    let b = build_minor_with(volume, params, Exec::Sequential)?;
    Ok((b.tensor, b.minor))
}

/// Builds the minor, finalizing supernode and edge features with `exec`.
pub fn build_minor_with(volume: &Volume, params: &MinorParams, exec: Exec) -> Result<MinorBuild> {
    params.validate()?;
    let dims = volume.dims();
    let fill = FillParams {
        psi: params.psi,
        alpha: params.alpha,
        norm: params.norm_order,
        connectivity: params.connectivity,
    };
    let mut state = ContractionState::new(dims)?;
    let traversal = Traversal::new(dims, params.traversal_divisor, params.seed);
    let mut kept = Vec::new();
    let mut stats = BuildStats::default();
    // Provisional fill id -> final supernode id.
    let mut final_id = Vec::new();

    for voxel in traversal.iter() {
        if state.is_visited(voxel) {
            continue;
        }
        let region = state.flood_fill_contract(volume, voxel, &fill)?;
        debug_assert_eq!(region.id as usize, final_id.len());
        match retention_check(region.stats.area(), region.stats.channel_mean(), params) {
            Retention::Keep => {
                final_id.push(kept.len() as u32);
                kept.push(region.stats);
            }
            Retention::Delete => {
                final_id.push(DELETED);
                stats.deleted_nodes += 1;
                stats.deleted_voxels += region.members.len() as u64;
                state.delete_region(&region);
            }
        }
    }
    stats.pops = state.pops;
    stats.fills = u64::from(state.fills());

    let membership: Vec<u32> = state.region.iter().map(|&r| final_id[r as usize]).collect();
    let node_features = exec
        .map_range(kept.len(), |i| finalize_node_features(&kept[i], i as u32, params.epsilon))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let nodes = node_features
        .iter()
        .map(|n| Supernode { id: n.id, canonical: n.canonical, area: n.area, boundary_len: n.boundary_len })
        .collect();

    let tensor = state.tensor;
    let edges = extract_edges(&tensor, &membership, dims, params.connectivity)?;
    let edge_features =
        exec.map(&edges, |&(u, v)| compute_edge_features(&node_features[u as usize], &node_features[v as usize], params.epsilon));
    let (x, f) = assemble_feature_matrices(&node_features, &edge_features, dims);

    let minor = GraphMinor {
        dims,
        connectivity: params.connectivity,
        nodes,
        edges,
        node_features: x,
        edge_features: f,
        membership,
    };
    Ok(MinorBuild { tensor, minor, node_features, stats })
}
