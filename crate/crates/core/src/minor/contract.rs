//! Seed-anchored region growing over the expanded tensor.

use crate::error::{Error, Result};
use crate::features::Accumulator;
use crate::minor::params::NormOrder;
use crate::tensor::{Connectivity, ExpandedTensor, Flag, Volume, VolumeDims};

/// Region id of voxels not yet claimed by any fill.
pub const UNCLAIMED: u32 = u32::MAX;

/// Thresholds used while growing one region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FillParams {
    pub psi: f64,
    pub alpha: f64,
    pub norm: NormOrder,
    pub connectivity: Connectivity,
}

/// Outcome of one flood fill.
#[derive(Debug, Clone)]
pub struct Region {
    /// Provisional id (fill index).
    pub id: u32,
    pub stats: Accumulator,
    /// Linear voxel indices in pop order.
    pub members: Vec<usize>,
}

#[derive(Clone, Copy)]
struct Step {
    delta: [i32; 3],
    voxel: isize,
    node: isize,
    edge: isize,
}

/// Mutable state shared by the sequence of fills over one volume: the flag tensor,
/// the per-voxel claiming region, and the pop counter.
#[derive(Debug, Clone)]
pub struct ContractionState {
    pub tensor: ExpandedTensor,
    pub region: Vec<u32>,
    pub pops: u64,
    fills: u32,
    dims: VolumeDims,
}

impl ContractionState {
    pub fn new(dims: VolumeDims) -> Result<Self> {
        Ok(Self {
            tensor: ExpandedTensor::new(dims)?,
            region: vec![UNCLAIMED; dims.voxels()],
            pops: 0,
            fills: 0,
            dims,
        })
    }

    pub fn fills(&self) -> u32 {
        self.fills
    }

    pub fn is_visited(&self, voxel: [usize; 3]) -> bool {
        self.tensor.node_flags(voxel) & Flag::Visited.bit() != 0
    }

    fn steps(&self, conn: Connectivity) -> Vec<Step> {
        let [_, w, d] = self.dims.shape();
        let [_, ex, ez] = self.tensor.shape();
        conn.offsets()
            .iter()
            .map(|&delta| {
                let [a, b, c] = delta.map(|x| x as isize);
                Step {
                    delta,
                    voxel: (a * w as isize + b) * d as isize + c,
                    node: 2 * ((a * ex as isize + b) * ez as isize + c),
                    edge: (a * ex as isize + b) * ez as isize + c,
                }
            })
            .collect()
    }

    /// Grows one region from `seed`. A neighbor joins when it is unclaimed and its
    /// intensity is within `psi` of the seed's (not of the running region); a
    /// failing neighbor at distance `>= alpha` gets its connecting edge deleted.
    /// Every grid edge leaving the region marks its inner voxel as boundary and
    /// counts once towards the boundary length.
    pub fn flood_fill_contract(&mut self, volume: &Volume, seed: [usize; 3], params: &FillParams) -> Result<Region> {
        if volume.dims().shape() != self.dims.shape() {
            return Err(Error::DimMismatch(format!("volume {} vs state {}", volume.dims(), self.dims)));
        }
        if !self.dims.contains(seed) {
            return Err(Error::OutOfBounds { index: seed, bounds: self.dims.shape() });
        }
        let seed_lin = self.dims.linear(seed);
        let seed_node = self.tensor.index(seed.map(|v| 2 * v));
        if self.tensor.has(seed_node, Flag::Visited) || self.region[seed_lin] != UNCLAIMED {
            return Err(Error::Contract(format!("seed {seed:?} already belongs to a region")));
        }
        let id = self.fills;
        self.fills += 1;

        let steps = self.steps(params.connectivity);
        let shape = self.dims.shape();
        let seed_int: Vec<f64> = volume.at(seed_lin).iter().map(|&v| f64::from(v)).collect();
        let mut stats = Accumulator::new(seed, volume.at(seed_lin));
        let mut members = Vec::new();

        self.tensor.mark(seed_node, Flag::Merged);
        self.region[seed_lin] = id;
        let mut stack = vec![(seed_lin, seed_node, seed)];

        while let Some((p_lin, p_node, p)) = stack.pop() {
            if self.tensor.has(p_node, Flag::Visited) {
                continue;
            }
            self.tensor.mark(p_node, Flag::Visited);
            self.pops += 1;
            members.push(p_lin);
            stats.push(p, volume.at(p_lin));

            for st in &steps {
                let Some(q) = neighbor(p, st.delta, shape) else {
                    continue;
                };
                let q_lin = (p_lin as isize + st.voxel) as usize;
                let q_node = (p_node as isize + st.node) as usize;
                let edge = (p_node as isize + st.edge) as usize;
                if self.tensor.has(q_node, Flag::Merged) {
                    if self.region[q_lin] != id {
                        self.tensor.mark(p_node, Flag::Boundary);
                        stats.expose();
                    }
                    continue;
                }
                let diff = params.norm.distance(&seed_int, volume.at(q_lin));
                if diff <= params.psi {
                    self.tensor.mark(q_node, Flag::Merged);
                    self.tensor.mark(edge, Flag::EdgeContracted);
                    self.region[q_lin] = id;
                    stack.push((q_lin, q_node, q));
                } else {
                    if diff >= params.alpha {
                        self.tensor.mark(edge, Flag::EdgeDeleted);
                    }
                    self.tensor.mark(p_node, Flag::Boundary);
                    stats.expose();
                }
            }
        }
        Ok(Region { id, stats, members })
    }

    /// Flags every member of a rejected region as node-deleted.
    pub fn delete_region(&mut self, region: &Region) {
        for &lin in &region.members {
            let v = self.dims.coords(lin);
            let idx = self.tensor.index(v.map(|x| 2 * x));
            self.tensor.mark(idx, Flag::NodeDeleted);
        }
    }
}

#[inline]
fn neighbor(p: [usize; 3], delta: [i32; 3], shape: [usize; 3]) -> Option<[usize; 3]> {
    let mut q = [0usize; 3];
    for a in 0..3 {
        let v = p[a] as isize + delta[a] as isize;
        if v < 0 || v >= shape[a] as isize {
            return None;
        }
        q[a] = v as usize;
    }
    Some(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fill_params(psi: f64, alpha: f64) -> FillParams {
        FillParams { psi, alpha, norm: NormOrder::L2, connectivity: Connectivity::Six }
    }

    #[test]
    fn uniform_region_takes_everything() {
        let dims = VolumeDims::spatial(4, 3, 2).unwrap();
        let vol = Volume::filled(dims, 7.0).unwrap();
        let mut st = ContractionState::new(dims).unwrap();
        let r = st.flood_fill_contract(&vol, [1, 1, 1], &fill_params(0.0, 100.0)).unwrap();
        assert_eq!(r.members.len(), 24);
        assert_eq!(r.stats.boundary_len(), 0);
        assert_eq!(st.pops, 24);
        assert_eq!(r.stats.canonical(), [0, 0, 0]);
    }

    #[test]
    fn isolated_bright_voxel() {
        let dims = VolumeDims::spatial(3, 3, 3).unwrap();
        let vol = Volume::from_fn(dims, |v| if v == [1, 1, 1] { 100.0 } else { 0.0 }).unwrap();
        let mut st = ContractionState::new(dims).unwrap();
        let r = st.flood_fill_contract(&vol, [1, 1, 1], &fill_params(10.0, 50.0)).unwrap();
        assert_eq!(r.members.len(), 1);
        assert_eq!(r.stats.boundary_len(), 6);
        let center = [2, 2, 2];
        assert!(st.tensor.get_flag(center, Flag::Boundary).unwrap());
        for delta in Connectivity::Six.offsets() {
            let e = st.tensor.edge_position([1, 1, 1], *delta).unwrap().unwrap();
            assert!(st.tensor.get_flag(e, Flag::EdgeDeleted).unwrap());
        }
        // The surrounding fill sees the claimed center as foreign: 6 exposed edges.
        let bg = st.flood_fill_contract(&vol, [0, 0, 0], &fill_params(10.0, 50.0)).unwrap();
        assert_eq!(bg.members.len(), 26);
        assert_eq!(bg.stats.boundary_len(), 6);
    }

    #[test]
    fn anchoring_is_to_the_seed() {
        // A 1D ramp 0,4,8,12,... with psi 5: each step is within 5 of its
        // neighbor but only the first neighbor is within 5 of the seed.
        let dims = VolumeDims::spatial(8, 1, 1).unwrap();
        let vol = Volume::from_fn(dims, |v| 4.0 * v[0] as f32).unwrap();
        let mut st = ContractionState::new(dims).unwrap();
        let r = st.flood_fill_contract(&vol, [0, 0, 0], &fill_params(5.0, 100.0)).unwrap();
        assert_eq!(r.members.len(), 2);
    }

    #[test]
    fn reseeding_a_claimed_voxel_fails() {
        let dims = VolumeDims::spatial(2, 2, 2).unwrap();
        let vol = Volume::filled(dims, 1.0).unwrap();
        let mut st = ContractionState::new(dims).unwrap();
        st.flood_fill_contract(&vol, [0, 0, 0], &fill_params(0.0, 1.0)).unwrap();
        assert!(st.flood_fill_contract(&vol, [1, 1, 1], &fill_params(0.0, 1.0)).is_err());
    }
}
