//! Supernode descriptors and relative edge features.
//!
//! Statistics are accumulated in one streaming pass during flood fill. Sums are
//! taken relative to the seed voxel (coordinates and intensity), which keeps the
//! one-pass variance formula well conditioned for large supernodes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sym3_eigen;
use crate::tensor::VolumeDims;

pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Streaming per-supernode statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    origin: [f64; 3],
    origin_intensity: Vec<f64>,
    area: u64,
    sum_pos: [f64; 3],
    // xx, xy, xz, yy, yz, zz
    sum_pos2: [f64; 6],
    sum_int: Vec<f64>,
    // upper triangle, row-major
    sum_int2: Vec<f64>,
    canonical: [usize; 3],
    boundary_len: u64,
}

impl Accumulator {
    pub fn new(seed: [usize; 3], seed_intensity: &[f32]) -> Self {
        let c = seed_intensity.len();
        Self {
            origin: seed.map(|v| v as f64),
            origin_intensity: seed_intensity.iter().map(|&v| f64::from(v)).collect(),
            area: 0,
            sum_pos: [0.0; 3],
            sum_pos2: [0.0; 6],
            sum_int: vec![0.0; c],
            sum_int2: vec![0.0; c * (c + 1) / 2],
            canonical: seed,
            boundary_len: 0,
        }
    }

    #[inline]
    pub fn push(&mut self, voxel: [usize; 3], intensity: &[f32]) {
        if self.area == 0 || voxel < self.canonical {
            self.canonical = voxel;
        }
        self.area += 1;
        let p = [0, 1, 2].map(|a| voxel[a] as f64 - self.origin[a]);
        for a in 0..3 {
            self.sum_pos[a] += p[a];
        }
        self.sum_pos2[0] += p[0] * p[0];
        self.sum_pos2[1] += p[0] * p[1];
        self.sum_pos2[2] += p[0] * p[2];
        self.sum_pos2[3] += p[1] * p[1];
        self.sum_pos2[4] += p[1] * p[2];
        self.sum_pos2[5] += p[2] * p[2];
        let c = intensity.len();
        let mut t = 0;
        for i in 0..c {
            let xi = f64::from(intensity[i]) - self.origin_intensity[i];
            self.sum_int[i] += xi;
            for j in i..c {
                let xj = f64::from(intensity[j]) - self.origin_intensity[j];
                self.sum_int2[t] += xi * xj;
                t += 1;
            }
        }
    }

    /// Counts one grid edge leaving the supernode.
    #[inline]
    pub fn expose(&mut self) {
        self.boundary_len += 1;
    }

    pub fn area(&self) -> u64 {
        self.area
    }

    pub fn boundary_len(&self) -> u64 {
        self.boundary_len
    }

    pub fn canonical(&self) -> [usize; 3] {
        self.canonical
    }

    pub fn channels(&self) -> usize {
        self.sum_int.len()
    }

    pub fn mean_intensity(&self) -> Vec<f64> {
        let a = self.area.max(1) as f64;
        self.sum_int.iter().zip(&self.origin_intensity).map(|(s, o)| o + s / a).collect()
    }

    /// Channel-averaged mean intensity, the scalar checked by intensity retention.
    pub fn channel_mean(&self) -> f64 {
        let m = self.mean_intensity();
        m.iter().sum::<f64>() / m.len() as f64
    }
}

/// Finalized descriptors of one supernode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFeatures {
    pub id: u32,
    pub area: u64,
    pub boundary_len: u64,
    pub compactness: f64,
    pub std: Vec<f64>,
    /// Full `C × C` intensity covariance, row-major.
    pub covariance: Vec<f64>,
    pub axis: [f64; 3],
    pub elongation: f64,
    pub canonical: [usize; 3],
    pub mean: Vec<f64>,
    pub centroid: [f64; 3],
    /// Spatial covariance eigenvalues, descending.
    pub spatial_eigenvalues: [f64; 3],
}

impl NodeFeatures {
    pub fn channels(&self) -> usize {
        self.mean.len()
    }
}

pub fn compactness(area: u64, boundary_len: u64, epsilon: f64) -> f64 {
    let a = area as f64;
    let b = boundary_len as f64;
    (36.0 * PI * a * a / (b * b * b + epsilon)).min(1.0)
}

pub fn finalize_node_features(acc: &Accumulator, id: u32, epsilon: f64) -> Result<NodeFeatures> {
    if acc.area == 0 {
        return Err(Error::Contract("cannot finalize an empty supernode".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParams(format!("epsilon must be positive, got {epsilon}")));
    }
    let a = acc.area as f64;
    let m = acc.sum_pos.map(|s| s / a);
    let centroid = [0, 1, 2].map(|i| acc.origin[i] + m[i]);
    let s = &acc.sum_pos2;
    let cxx = s[0] / a - m[0] * m[0];
    let cxy = s[1] / a - m[0] * m[1];
    let cxz = s[2] / a - m[0] * m[2];
    let cyy = s[3] / a - m[1] * m[1];
    let cyz = s[4] / a - m[1] * m[2];
    let czz = s[5] / a - m[2] * m[2];
    let eig = sym3_eigen(&[[cxx, cxy, cxz], [cxy, cyy, cyz], [cxz, cyz, czz]]);
    let lambda = eig.values.map(|v| v.max(0.0));
    let elongation = ((lambda[0] + epsilon) / (lambda[1] + epsilon)).sqrt();

    let c = acc.channels();
    let mi: Vec<f64> = acc.sum_int.iter().map(|s| s / a).collect();
    let mut covariance = vec![0.0; c * c];
    let mut t = 0;
    for i in 0..c {
        for j in i..c {
            let v = acc.sum_int2[t] / a - mi[i] * mi[j];
            covariance[i * c + j] = v;
            covariance[j * c + i] = v;
            t += 1;
        }
    }
    for i in 0..c {
        let d = &mut covariance[i * c + i];
        *d = d.max(0.0);
    }
    let std = (0..c).map(|i| covariance[i * c + i].sqrt()).collect();

    Ok(NodeFeatures {
        id,
        area: acc.area,
        boundary_len: acc.boundary_len,
        compactness: compactness(acc.area, acc.boundary_len, epsilon),
        std,
        covariance,
        axis: eig.principal,
        elongation,
        canonical: acc.canonical,
        mean: acc.mean_intensity(),
        centroid,
        spatial_eigenvalues: lambda,
    })
}

/// Relative descriptors of one minor edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeFeatures {
    /// Log-ratios (larger-area endpoint over smaller) of area, boundary length,
    /// compactness and elongation.
    pub log_ratios: [f64; 4],
    pub centroid_delta: [f64; 3],
    pub alignment: f64,
    pub intensity_delta: Vec<f64>,
}

/// Orders the endpoints by area, ties going to the smaller id as the larger one.
fn order_by_area<'a>(u: &'a NodeFeatures, v: &'a NodeFeatures) -> (&'a NodeFeatures, &'a NodeFeatures) {
    if u.area > v.area || (u.area == v.area && u.id <= v.id) {
        (u, v)
    } else {
        (v, u)
    }
}

pub fn compute_edge_features(u: &NodeFeatures, v: &NodeFeatures, epsilon: f64) -> EdgeFeatures {
    let (hi, lo) = order_by_area(u, v);
    let ratio = |g_hi: f64, g_lo: f64| ((g_hi + epsilon) / (g_lo + epsilon)).ln();
    let log_ratios = [
        ratio(hi.area as f64, lo.area as f64),
        ratio(hi.boundary_len as f64, lo.boundary_len as f64),
        ratio(hi.compactness, lo.compactness),
        ratio(hi.elongation, lo.elongation),
    ];
    let spread = (hi.spatial_eigenvalues[0] + lo.spatial_eigenvalues[0] + epsilon).sqrt();
    let centroid_delta = [0, 1, 2].map(|a| (hi.centroid[a] - lo.centroid[a]) / spread);
    let dot: f64 = (0..3).map(|a| hi.axis[a] * lo.axis[a]).sum();
    let alignment = dot.abs().min(1.0);
    let intensity_delta = (0..hi.channels())
        .map(|c| (hi.mean[c] - lo.mean[c]) / (hi.std[c] * hi.std[c] + lo.std[c] * lo.std[c] + epsilon).sqrt())
        .collect();
    EdgeFeatures { log_ratios, centroid_delta, alignment, intensity_delta }
}

/// Row-major real matrix with named columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub names: Vec<String>,
    pub data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, data: Vec<f32>) -> Result<Self> {
        let cols = names.len();
        if cols == 0 || data.len() % cols != 0 {
            return Err(Error::DimMismatch(format!("{} values do not fill {cols} columns", data.len())));
        }
        Ok(Self { rows: data.len() / cols, names, data })
    }

    pub fn empty(names: Vec<String>) -> Self {
        Self { rows: 0, names, data: Vec::new() }
    }

    pub fn cols(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }
}

pub fn node_feature_dim(channels: usize) -> usize {
    10 + 2 * channels + channels * (channels + 1) / 2
}

pub fn edge_feature_dim(channels: usize) -> usize {
    4 + 3 + 1 + channels
}

pub fn node_feature_names(channels: usize) -> Vec<String> {
    let mut names: Vec<String> = ["area", "boundary_len", "compactness", "elongation", "axis_0", "axis_1", "axis_2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend((0..3).map(|a| format!("canonical_{a}")));
    names.extend((0..channels).map(|c| format!("std_{c}")));
    names.extend((0..channels).map(|c| format!("mean_{c}")));
    for i in 0..channels {
        for j in i..channels {
            names.push(format!("cov_{i}_{j}"));
        }
    }
    names
}

pub fn edge_feature_names(channels: usize) -> Vec<String> {
    let mut names: Vec<String> = [
        "log_ratio_area",
        "log_ratio_boundary_len",
        "log_ratio_compactness",
        "log_ratio_elongation",
        "centroid_delta_0",
        "centroid_delta_1",
        "centroid_delta_2",
        "axis_alignment",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    names.extend((0..channels).map(|c| format!("intensity_delta_{c}")));
    names
}

/// One row of `X`; the canonical voxel enters normalized to `[0, 1]³`.
pub fn node_row(n: &NodeFeatures, dims: VolumeDims) -> Vec<f64> {
    let c = n.channels();
    let mut row = Vec::with_capacity(node_feature_dim(c));
    row.extend([n.area as f64, n.boundary_len as f64, n.compactness, n.elongation]);
    row.extend(n.axis);
    for (a, &ext) in dims.shape().iter().enumerate() {
        row.push(if ext > 1 { n.canonical[a] as f64 / (ext - 1) as f64 } else { 0.0 });
    }
    row.extend(&n.std);
    row.extend(&n.mean);
    for i in 0..c {
        for j in i..c {
            row.push(n.covariance[i * c + j]);
        }
    }
    row
}

pub fn edge_row(e: &EdgeFeatures) -> Vec<f64> {
    let mut row = Vec::with_capacity(edge_feature_dim(e.intensity_delta.len()));
    row.extend(e.log_ratios);
    row.extend(e.centroid_delta);
    row.push(e.alignment);
    row.extend(&e.intensity_delta);
    row
}

/// Stacks node and edge rows into `X` (`|V| × d_x`) and `F` (`|E| × d_f`).
pub fn assemble_feature_matrices(
    nodes: &[NodeFeatures],
    edges: &[EdgeFeatures],
    dims: VolumeDims,
) -> (FeatureMatrix, FeatureMatrix) {
    let c = dims.c;
    let x: Vec<f32> = nodes.iter().flat_map(|n| node_row(n, dims)).map(|v| v as f32).collect();
    let f: Vec<f32> = edges.iter().flat_map(edge_row).map(|v| v as f32).collect();
    (
        FeatureMatrix { rows: nodes.len(), names: node_feature_names(c), data: x },
        FeatureMatrix { rows: edges.len(), names: edge_feature_names(c), data: f },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn accumulate(voxels: &[[usize; 3]], intensity: impl Fn([usize; 3]) -> Vec<f32>, boundary_len: u64) -> Accumulator {
        let mut acc = Accumulator::new(voxels[0], &intensity(voxels[0]));
        for &v in voxels {
            acc.push(v, &intensity(v));
        }
        for _ in 0..boundary_len {
            acc.expose();
        }
        acc
    }

    #[test]
    fn single_voxel() {
        let acc = accumulate(&[[3, 3, 3]], |_| vec![5.0], 6);
        let n = finalize_node_features(&acc, 0, DEFAULT_EPSILON).unwrap();
        assert_eq!(n.area, 1);
        assert_eq!(n.boundary_len, 6);
        assert_relative_eq!(n.compactness, 36.0 * PI / (216.0 + 1e-6), max_relative = 1e-12);
        assert_relative_eq!(n.compactness, 0.5236, epsilon = 1e-4);
        assert_eq!(n.std, vec![0.0]);
        assert_relative_eq!(n.elongation, 1.0);
        assert_eq!(n.canonical, [3, 3, 3]);
    }

    #[test]
    fn cube_2x2x2() {
        let mut vox = Vec::new();
        for j in 1..3 {
            for k in 1..3 {
                for l in 1..3 {
                    vox.push([j, k, l]);
                }
            }
        }
        let acc = accumulate(&vox, |_| vec![1.0], 24);
        let n = finalize_node_features(&acc, 0, DEFAULT_EPSILON).unwrap();
        assert_relative_eq!(n.compactness, PI / 6.0, max_relative = 1e-9);
        for l in n.spatial_eigenvalues {
            assert_relative_eq!(l, 0.25, epsilon = 1e-12);
        }
        assert_relative_eq!(n.elongation, 1.0, epsilon = 1e-9);
        assert_eq!(n.canonical, [1, 1, 1]);
        assert_eq!(n.centroid, [1.5, 1.5, 1.5]);
    }

    #[test]
    fn depth_line() {
        let vox: Vec<_> = (0..4).map(|l| [2, 2, l]).collect();
        let acc = accumulate(&vox, |v| vec![v[2] as f32], 18);
        let n = finalize_node_features(&acc, 0, DEFAULT_EPSILON).unwrap();
        assert_relative_eq!(n.spatial_eigenvalues[0], 1.25, epsilon = 1e-12);
        assert!(n.spatial_eigenvalues[1].abs() < 1e-12);
        assert_relative_eq!(n.elongation, ((1.25 + 1e-6) / 1e-6f64).sqrt(), max_relative = 1e-9);
        assert_relative_eq!(n.elongation, 1118.03, epsilon = 0.01);
        assert_eq!(n.axis, [0.0, 0.0, 1.0]);
        assert_relative_eq!(n.std[0], 1.25f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn compactness_is_clamped() {
        assert_eq!(compactness(100, 0, DEFAULT_EPSILON), 1.0);
        assert!(compactness(1, 1000, DEFAULT_EPSILON) > 0.0);
    }

    #[test]
    fn empty_accumulator_is_a_contract_violation() {
        let acc = Accumulator::new([0, 0, 0], &[0.0]);
        assert!(finalize_node_features(&acc, 0, DEFAULT_EPSILON).is_err());
    }

    fn node(id: u32, area: u64) -> NodeFeatures {
        NodeFeatures {
            id,
            area,
            boundary_len: 4 * area,
            compactness: 0.5,
            std: vec![1.0],
            covariance: vec![1.0],
            axis: [1.0, 0.0, 0.0],
            elongation: 2.0,
            canonical: [0, 0, 0],
            mean: vec![10.0 * id as f64],
            centroid: [id as f64, 0.0, 0.0],
            spatial_eigenvalues: [1.0, 0.5, 0.1],
        }
    }

    #[test]
    fn area_log_ratio() {
        let e = compute_edge_features(&node(0, 2), &node(1, 8), DEFAULT_EPSILON);
        assert_relative_eq!(e.log_ratios[0], (8.000001f64 / 2.000001).ln(), max_relative = 1e-12);
        assert_relative_eq!(e.log_ratios[0], 1.38629, epsilon = 1e-5);
    }

    #[test]
    fn identical_nodes() {
        let a = node(0, 5);
        let mut b = a.clone();
        b.id = 1;
        let e = compute_edge_features(&a, &b, DEFAULT_EPSILON);
        assert_eq!(e.log_ratios, [0.0; 4]);
        assert_eq!(e.centroid_delta, [0.0; 3]);
        assert_eq!(e.intensity_delta, vec![0.0]);
        assert_eq!(e.alignment, 1.0);
    }

    #[test]
    fn orthogonal_axes() {
        let a = node(0, 5);
        let mut b = node(1, 3);
        b.axis = [0.0, 1.0, 0.0];
        assert_eq!(compute_edge_features(&a, &b, DEFAULT_EPSILON).alignment, 0.0);
    }

    #[test]
    fn edge_features_commute() {
        for (au, av) in [(3, 9), (9, 3), (4, 4)] {
            let u = node(2, au);
            let v = node(5, av);
            assert_eq!(compute_edge_features(&u, &v, 1e-6), compute_edge_features(&v, &u, 1e-6));
        }
    }

    #[test]
    fn column_counts() {
        assert_eq!(node_feature_dim(1), 13);
        assert_eq!(edge_feature_dim(1), 9);
        assert_eq!(node_feature_names(1).len(), 13);
        assert_eq!(node_feature_names(3).len(), node_feature_dim(3));
        assert_eq!(edge_feature_names(2).len(), edge_feature_dim(2));
        let dims = VolumeDims::spatial(4, 4, 4).unwrap();
        let (x, f) = assemble_feature_matrices(&[], &[], dims);
        assert_eq!((x.rows, x.cols(), f.rows, f.cols()), (0, 13, 0, 9));
        let a = node(0, 4);
        let b = node(1, 2);
        let e = compute_edge_features(&a, &b, 1e-6);
        let (x, f) = assemble_feature_matrices(&[a, b], &[e], dims);
        assert_eq!((x.rows, f.rows), (2, 1));
        assert_eq!(x.row(1).len(), 13);
    }
}
