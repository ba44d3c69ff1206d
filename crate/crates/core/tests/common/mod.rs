#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semir::features::FeatureMatrix;
use semir::minor::Supernode;
use semir::tensor::{Connectivity, Volume, VolumeDims};
use semir::{GraphMinor, MinorParams};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random graph with random features; membership is a dummy one-voxel-per-node grid.
pub fn random_graph(r: &mut ChaCha8Rng, n: usize, edge_prob: f64, dx: usize, df: usize) -> GraphMinor {
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for v in u + 1..n as u32 {
            if r.random_bool(edge_prob) {
                edges.push((u, v));
            }
        }
    }
    let x: Vec<f32> = (0..n * dx).map(|_| r.random_range(-2.0..2.0)).collect();
    let f: Vec<f32> = (0..edges.len() * df).map(|_| r.random_range(-2.0..2.0)).collect();
    let dims = VolumeDims::spatial(n.max(1), 1, 1).unwrap();
    GraphMinor {
        dims,
        connectivity: Connectivity::Six,
        nodes: (0..n as u32)
            .map(|i| Supernode { id: i, canonical: [i as usize, 0, 0], area: 1 + u64::from(i % 5), boundary_len: 1 })
            .collect(),
        edges,
        node_features: FeatureMatrix { rows: n, names: (0..dx).map(|i| format!("x{i}")).collect(), data: x },
        edge_features: FeatureMatrix { rows: 0, names: (0..df).map(|i| format!("f{i}")).collect(), data: f }
            .with_rows(),
        membership: (0..dims.voxels() as u32).map(|i| if (i as usize) < n { i } else { u32::MAX }).collect(),
    }
}

trait WithRows {
    fn with_rows(self) -> Self;
}

impl WithRows for FeatureMatrix {
    fn with_rows(mut self) -> Self {
        self.rows = self.data.len() / self.names.len();
        self
    }
}

/// Piecewise-constant volume: random boxes of random levels plus a little noise.
pub fn random_volume(r: &mut ChaCha8Rng, max_side: usize) -> Volume {
    let dims = VolumeDims::spatial(
        r.random_range(2..=max_side),
        r.random_range(2..=max_side),
        r.random_range(2..=max_side),
    )
    .unwrap();
    let boxes: Vec<([usize; 3], [usize; 3], f32)> = (0..r.random_range(1..6))
        .map(|_| {
            let lo = [0, 1, 2].map(|a| r.random_range(0..dims.shape()[a]));
            let hi = [0, 1, 2].map(|a| r.random_range(lo[a]..dims.shape()[a]) + 1);
            (lo, hi, r.random_range(0.0..100.0f32).round())
        })
        .collect();
    let noise = if r.random_bool(0.5) { 0.0 } else { r.random_range(0.5..5.0f32) };
    let data = (0..dims.voxels())
        .map(|i| {
            let v = dims.coords(i);
            let mut level = 10.0;
            for (lo, hi, l) in &boxes {
                if (0..3).all(|a| lo[a] <= v[a] && v[a] < hi[a]) {
                    level = *l;
                }
            }
            level + noise * r.random_range(-1.0..1.0f32)
        })
        .collect();
    Volume::new(dims, data).unwrap()
}

/// Random valid parameters for `vol`.
pub fn random_params(r: &mut ChaCha8Rng, vol: &Volume, conn: Connectivity) -> MinorParams {
    let psi = r.random_range(0.0..30.0f64);
    let alpha = psi + r.random_range(0.0..60.0f64);
    let n = vol.dims().voxels() as u64;
    let beta_min = if r.random_bool(0.5) { 1 } else { r.random_range(1..=4) };
    let beta_max = if r.random_bool(0.7) { n } else { r.random_range(beta_min..=n) };
    let (m_min, m_max) = if r.random_bool(0.7) { (-1e9, 1e9) } else { (r.random_range(0.0..40.0), r.random_range(40.0..120.0)) };
    MinorParams::new(psi, alpha)
        .with_area_bounds(beta_min, beta_max)
        .with_intensity_bounds(m_min, m_max)
        .with_connectivity(conn)
        .with_seed(r.random())
}
