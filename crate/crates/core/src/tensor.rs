//! Voxel volumes and the expanded node/edge flag tensor.
//!
//! A volume of `h × w × d` voxels is mirrored by a byte tensor of shape
//! `(2h−1) × (2w−1) × (2d−1)`. Positions whose indices are all even hold the state
//! of voxel `(j, k, l) = (y/2, x/2, z/2)`; positions with at least one odd index hold
//! the state of the grid edge whose endpoints straddle that position.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial extent plus channel count of a volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VolumeDims {
    pub h: usize,
    pub w: usize,
    pub d: usize,
    pub c: usize,
}

impl VolumeDims {
    pub fn new(h: usize, w: usize, d: usize, c: usize) -> Result<Self> {
        let dims = Self { h, w, d, c };
        dims.validate()?;
        Ok(dims)
    }

    /// Single-channel dims, the shape of label maps.
    pub fn spatial(h: usize, w: usize, d: usize) -> Result<Self> {
        Self::new(h, w, d, 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.h == 0 || self.w == 0 || self.d == 0 || self.c == 0 {
            return Err(Error::InvalidDims(format!("{self} has a zero extent")));
        }
        let expanded = [self.h, self.w, self.d]
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(2 * n - 1));
        let channels = self.voxels_checked().and_then(|v| v.checked_mul(self.c));
        if expanded.is_none() || channels.is_none() || self.voxels_checked() > Some(u32::MAX as usize - 1) {
            return Err(Error::InvalidDims(format!("{self} exceeds the addressable range")));
        }
        Ok(())
    }

    fn voxels_checked(&self) -> Option<usize> {
        self.h.checked_mul(self.w)?.checked_mul(self.d)
    }

    pub fn voxels(&self) -> usize {
        self.h * self.w * self.d
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.h, self.w, self.d]
    }

    pub fn same_spatial(&self, other: &VolumeDims) -> bool {
        self.shape() == other.shape()
    }

    pub fn with_channels(&self, c: usize) -> Self {
        Self { c, ..*self }
    }

    #[inline]
    pub fn linear(&self, [j, k, l]: [usize; 3]) -> usize {
        (j * self.w + k) * self.d + l
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let l = idx % self.d;
        let rest = idx / self.d;
        [rest / self.w, rest % self.w, l]
    }

    #[inline]
    pub fn contains(&self, [j, k, l]: [usize; 3]) -> bool {
        j < self.h && k < self.w && l < self.d
    }

    /// The neighbor `voxel + delta`, or `None` if it falls outside the grid.
    #[inline]
    pub fn offset(&self, voxel: [usize; 3], delta: [i32; 3]) -> Option<[usize; 3]> {
        let shape = self.shape();
        let mut out = [0usize; 3];
        for a in 0..3 {
            let v = voxel[a] as i64 + i64::from(delta[a]);
            if v < 0 || v >= shape[a] as i64 {
                return None;
            }
            out[a] = v as usize;
        }
        Some(out)
    }
}

impl fmt::Display for VolumeDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}x{}", self.h, self.w, self.d, self.c)
    }
}

/// Dense intensity volume, row-major over `(j, k, l)` with channels last.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: VolumeDims,
    data: Vec<f32>,
}

impl Volume {
    pub fn new(dims: VolumeDims, data: Vec<f32>) -> Result<Self> {
        dims.validate()?;
        if data.len() != dims.voxels() * dims.c {
            return Err(Error::DimMismatch(format!(
                "volume {dims} needs {} values, got {}",
                dims.voxels() * dims.c,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("non-finite intensity at value index {i}")));
        }
        Ok(Self { dims, data })
    }

    pub fn filled(dims: VolumeDims, value: f32) -> Result<Self> {
        Self::new(dims, vec![value; dims.voxels() * dims.c])
    }

    /// Builds a single-channel volume from a function of the voxel coordinate.
    pub fn from_fn(dims: VolumeDims, mut f: impl FnMut([usize; 3]) -> f32) -> Result<Self> {
        if dims.c != 1 {
            return Err(Error::InvalidDims("from_fn builds single-channel volumes".into()));
        }
        let data = (0..dims.voxels()).map(|i| f(dims.coords(i))).collect();
        Self::new(dims, data)
    }

    pub fn dims(&self) -> VolumeDims {
        self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Intensity vector of the voxel with linear index `idx`.
    #[inline]
    pub fn at(&self, idx: usize) -> &[f32] {
        let c = self.dims.c;
        &self.data[idx * c..(idx + 1) * c]
    }

    pub fn voxel(&self, voxel: [usize; 3]) -> &[f32] {
        self.at(self.dims.linear(voxel))
    }

    /// (min, max) over all intensities.
    pub fn range(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Integer class per voxel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    dims: VolumeDims,
    labels: Vec<u16>,
}

impl LabelMap {
    pub fn new(dims: VolumeDims, labels: Vec<u16>) -> Result<Self> {
        let dims = dims.with_channels(1);
        dims.validate()?;
        if labels.len() != dims.voxels() {
            return Err(Error::DimMismatch(format!(
                "label map {dims} needs {} labels, got {}",
                dims.voxels(),
                labels.len()
            )));
        }
        Ok(Self { dims, labels })
    }

    pub fn filled(dims: VolumeDims, label: u16) -> Result<Self> {
        Self::new(dims, vec![label; dims.voxels()])
    }

    pub fn from_fn(dims: VolumeDims, mut f: impl FnMut([usize; 3]) -> u16) -> Result<Self> {
        let labels = (0..dims.voxels()).map(|i| f(dims.coords(i))).collect();
        Self::new(dims, labels)
    }

    pub fn dims(&self) -> VolumeDims {
        self.dims
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [u16] {
        &mut self.labels
    }

    pub fn get(&self, voxel: [usize; 3]) -> u16 {
        self.labels[self.dims.linear(voxel)]
    }

    /// Number of classes implied by the largest label.
    pub fn num_classes(&self) -> usize {
        self.labels.iter().copied().max().map_or(1, |m| m as usize + 1)
    }

    /// Checks every label is below `k`.
    pub fn check_classes(&self, k: usize) -> Result<()> {
        match self.labels.iter().position(|&l| l as usize >= k) {
            Some(i) => Err(Error::Contract(format!("label {} at voxel {i} is not < {k}", self.labels[i]))),
            None => Ok(()),
        }
    }
}

const fn build_offsets<const N: usize>(max_nonzero: u32) -> [[i32; 3]; N] {
    let mut out = [[0i32; 3]; N];
    let mut n = 0;
    let mut a = -1;
    while a <= 1 {
        let mut b = -1;
        while b <= 1 {
            let mut c = -1;
            while c <= 1 {
                let nz = (a != 0) as u32 + (b != 0) as u32 + (c != 0) as u32;
                if nz > 0 && nz <= max_nonzero {
                    out[n] = [a, b, c];
                    n += 1;
                }
                c += 1;
            }
            b += 1;
        }
        a += 1;
    }
    out
}

static OFFSETS_6: [[i32; 3]; 6] = build_offsets::<6>(1);
static OFFSETS_18: [[i32; 3]; 18] = build_offsets::<18>(2);
static OFFSETS_26: [[i32; 3]; 26] = build_offsets::<26>(3);

/// Voxel adjacency: faces (6), faces and edges (18), or faces, edges and corners (26).
///
/// 2D data is represented as `d = 1`; offsets leaving the single slice fail the bounds
/// check, so 6 and 18 behave as 4- and 8-connectivity there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Connectivity {
    #[default]
    Six,
    Eighteen,
    TwentySix,
}

impl Connectivity {
    pub fn n(self) -> u32 {
        match self {
            Connectivity::Six => 6,
            Connectivity::Eighteen => 18,
            Connectivity::TwentySix => 26,
        }
    }

    /// Neighbor offsets in lexicographic order of `(δj, δk, δl)`.
    pub fn offsets(self) -> &'static [[i32; 3]] {
        match self {
            Connectivity::Six => &OFFSETS_6,
            Connectivity::Eighteen => &OFFSETS_18,
            Connectivity::TwentySix => &OFFSETS_26,
        }
    }

    /// The lexicographically positive half of [`offsets`](Self::offsets); visiting
    /// these from every voxel enumerates each grid edge exactly once.
    pub fn forward_offsets(self) -> &'static [[i32; 3]] {
        let all = self.offsets();
        &all[all.len() / 2..]
    }

    /// Largest number of odd indices an edge position may carry.
    pub fn max_odd_axes(self) -> usize {
        match self {
            Connectivity::Six => 1,
            Connectivity::Eighteen => 2,
            Connectivity::TwentySix => 3,
        }
    }
}

impl TryFrom<u32> for Connectivity {
    type Error = Error;

    fn try_from(n: u32) -> Result<Self> {
        match n {
            6 => Ok(Connectivity::Six),
            18 => Ok(Connectivity::Eighteen),
            26 => Ok(Connectivity::TwentySix),
            other => Err(Error::UnsupportedConnectivity(other)),
        }
    }
}

impl From<Connectivity> for u32 {
    fn from(c: Connectivity) -> u32 {
        c.n()
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.n())
    }
}

/// Whether a flag lives on voxels or on edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlagKind {
    Node,
    Edge,
}

/// State bits stored in the expanded tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Flag {
    /// Voxel popped by a flood fill.
    Visited = 1 << 0,
    /// Voxel claimed by a supernode.
    Merged = 1 << 1,
    /// Edge severed across a strong intensity difference.
    EdgeDeleted = 1 << 2,
    /// Voxel with at least one grid edge leaving its supernode.
    Boundary = 1 << 3,
    /// Voxel whose supernode failed the retention bounds.
    NodeDeleted = 1 << 4,
    /// Edge along which a voxel was claimed during contraction.
    EdgeContracted = 1 << 5,
}

impl Flag {
    pub const ALL: [Flag; 6] = [
        Flag::Visited,
        Flag::Merged,
        Flag::EdgeDeleted,
        Flag::Boundary,
        Flag::NodeDeleted,
        Flag::EdgeContracted,
    ];

    #[inline]
    pub const fn bit(self) -> u8 {
        self as u8
    }

    pub const fn kind(self) -> FlagKind {
        match self {
            Flag::EdgeDeleted | Flag::EdgeContracted => FlagKind::Edge,
            _ => FlagKind::Node,
        }
    }

    pub const NODE_MASK: u8 = Flag::Visited.bit() | Flag::Merged.bit() | Flag::Boundary.bit() | Flag::NodeDeleted.bit();
    pub const EDGE_MASK: u8 = Flag::EdgeDeleted.bit() | Flag::EdgeContracted.bit();
}

/// Expanded node/edge tensor; one flag byte per position, zero meaning
/// unvisited, unmerged and not deleted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpandedTensor {
    shape: [usize; 3],
    flags: Vec<u8>,
}

/// `(2h−1, 2w−1, 2d−1)`.
pub fn expanded_dims(dims: VolumeDims) -> [usize; 3] {
    [2 * dims.h - 1, 2 * dims.w - 1, 2 * dims.d - 1]
}

impl ExpandedTensor {
    pub fn new(dims: VolumeDims) -> Result<Self> {
        dims.validate()?;
        let shape = expanded_dims(dims);
        Ok(Self { shape, flags: vec![0; shape.iter().product()] })
    }

    pub fn from_raw(shape: [usize; 3], flags: Vec<u8>) -> Result<Self> {
        if shape.iter().any(|&n| n == 0 || n % 2 == 0) {
            return Err(Error::InvalidDims(format!("expanded shape {shape:?} must be odd and nonzero")));
        }
        if flags.len() != shape.iter().product::<usize>() {
            return Err(Error::DimMismatch(format!("expanded shape {shape:?} vs {} flag bytes", flags.len())));
        }
        Ok(Self { shape, flags })
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    /// Spatial voxel extent `(h, w, d)` this tensor mirrors.
    pub fn voxel_shape(&self) -> [usize; 3] {
        self.shape.map(|n| n.div_ceil(2))
    }

    pub fn flags(&self) -> &[u8] {
        &self.flags
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    #[inline]
    pub fn index(&self, [y, x, z]: [usize; 3]) -> usize {
        (y * self.shape[1] + x) * self.shape[2] + z
    }

    fn check_bounds(&self, pos: [usize; 3]) -> Result<()> {
        if (0..3).all(|a| pos[a] < self.shape[a]) {
            Ok(())
        } else {
            Err(Error::OutOfBounds { index: pos, bounds: self.shape })
        }
    }

    pub fn node_position(&self, voxel: [usize; 3]) -> Result<[usize; 3]> {
        let vs = self.voxel_shape();
        if (0..3).all(|a| voxel[a] < vs[a]) {
            Ok(voxel.map(|v| 2 * v))
        } else {
            Err(Error::OutOfBounds { index: voxel, bounds: vs })
        }
    }

    /// Midpoint of the edge from `voxel` to `voxel + delta`; `Ok(None)` when the
    /// neighbor is outside the grid.
    pub fn edge_position(&self, voxel: [usize; 3], delta: [i32; 3]) -> Result<Option<[usize; 3]>> {
        if delta == [0, 0, 0] || delta.iter().any(|d| d.abs() > 1) {
            return Err(Error::Contract(format!("{delta:?} is not a neighbor offset")));
        }
        let node = self.node_position(voxel)?;
        let vs = self.voxel_shape();
        let mut pos = [0usize; 3];
        for a in 0..3 {
            let n = voxel[a] as i64 + i64::from(delta[a]);
            if n < 0 || n >= vs[a] as i64 {
                return Ok(None);
            }
            pos[a] = (node[a] as i64 + i64::from(delta[a])) as usize;
        }
        Ok(Some(pos))
    }

    pub fn is_node_position(pos: [usize; 3]) -> bool {
        pos.iter().all(|p| p % 2 == 0)
    }

    fn check_parity(&self, pos: [usize; 3], flag: Flag) -> Result<()> {
        self.check_bounds(pos)?;
        let node = Self::is_node_position(pos);
        match (flag.kind(), node) {
            (FlagKind::Node, true) | (FlagKind::Edge, false) => Ok(()),
            _ => Err(Error::Contract(format!("{flag:?} is not valid at position {pos:?}"))),
        }
    }

    pub fn get_flag(&self, pos: [usize; 3], flag: Flag) -> Result<bool> {
        self.check_parity(pos, flag)?;
        Ok(self.flags[self.index(pos)] & flag.bit() != 0)
    }

    pub fn set_flag(&mut self, pos: [usize; 3], flag: Flag) -> Result<()> {
        self.check_parity(pos, flag)?;
        let i = self.index(pos);
        self.flags[i] |= flag.bit();
        Ok(())
    }

    #[inline]
    pub(crate) fn has(&self, index: usize, flag: Flag) -> bool {
        self.flags[index] & flag.bit() != 0
    }

    #[inline]
    pub(crate) fn mark(&mut self, index: usize, flag: Flag) {
        self.flags[index] |= flag.bit();
    }

    /// Flag byte of the node position of `voxel` (no parity check).
    #[inline]
    pub fn node_flags(&self, voxel: [usize; 3]) -> u8 {
        self.flags[self.index(voxel.map(|v| 2 * v))]
    }

    /// Checks parity soundness over the whole tensor: node bits only at all-even
    /// positions, edge bits only at edge positions valid for `conn`.
    pub fn validate(&self, conn: Connectivity) -> Result<()> {
        let [_, ex, ez] = self.shape;
        for (i, &b) in self.flags.iter().enumerate() {
            if b == 0 {
                continue;
            }
            let pos = [i / (ex * ez), (i / ez) % ex, i % ez];
            let odd = pos.iter().filter(|&&p| p % 2 == 1).count();
            let bad = if odd == 0 {
                b & !Flag::NODE_MASK
            } else if odd > conn.max_odd_axes() {
                b
            } else {
                b & !Flag::EDGE_MASK
            };
            if bad != 0 {
                return Err(Error::Contract(format!("flags {b:#010b} invalid at {pos:?} under {conn}-connectivity")));
            }
        }
        Ok(())
    }
}
