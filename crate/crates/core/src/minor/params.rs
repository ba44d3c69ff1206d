use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::DEFAULT_EPSILON;
use crate::rng::DEFAULT_SEED;
use crate::tensor::{Connectivity, VolumeDims};

/// Norm used for intensity-vector distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormOrder {
    L1,
    #[default]
    L2,
    Linf,
}

impl NormOrder {
    #[inline]
    pub fn distance(self, a: &[f64], b: &[f32]) -> f64 {
        if a.len() == 1 {
            return (a[0] - f64::from(b[0])).abs();
        }
        let diffs = a.iter().zip(b).map(|(x, &y)| (x - f64::from(y)).abs());
        match self {
            NormOrder::L1 => diffs.sum(),
            NormOrder::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            NormOrder::Linf => diffs.fold(0.0, f64::max),
        }
    }
}

fn default_divisor() -> u32 {
    3
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_m_min() -> f64 {
    f64::MIN
}

fn default_m_max() -> f64 {
    f64::MAX
}

fn default_beta_max() -> u64 {
    u64::from(u32::MAX)
}

/// Minor construction parameters: contraction threshold `psi`, edge-deletion
/// threshold `alpha`, and retention bounds on area and mean intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinorParams {
    pub psi: f64,
    pub alpha: f64,
    #[serde(default = "one")]
    pub beta_min: u64,
    #[serde(default = "default_beta_max")]
    pub beta_max: u64,
    #[serde(default = "default_m_min")]
    pub m_min: f64,
    #[serde(default = "default_m_max")]
    pub m_max: f64,
    #[serde(default)]
    pub norm_order: NormOrder,
    #[serde(default)]
    pub connectivity: Connectivity,
    #[serde(default = "default_divisor")]
    pub traversal_divisor: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn one() -> u64 {
    1
}

impl MinorParams {
    /// Thresholds with permissive retention bounds (nothing deleted).
    pub fn new(psi: f64, alpha: f64) -> Self {
        Self {
            psi,
            alpha,
            beta_min: 1,
            beta_max: default_beta_max(),
            m_min: default_m_min(),
            m_max: default_m_max(),
            norm_order: NormOrder::default(),
            connectivity: Connectivity::default(),
            traversal_divisor: default_divisor(),
            seed: DEFAULT_SEED,
            epsilon: DEFAULT_EPSILON,
        }
    }

    /// `beta_min = 1`, `beta_max = ⌊voxels / 3⌋`.
    pub fn with_default_area_bounds(self, dims: VolumeDims) -> Self {
        self.with_area_bounds(1, (dims.voxels() as u64 / 3).max(1))
    }

    pub fn with_area_bounds(mut self, beta_min: u64, beta_max: u64) -> Self {
        self.beta_min = beta_min;
        self.beta_max = beta_max;
        self
    }

    pub fn with_intensity_bounds(mut self, m_min: f64, m_max: f64) -> Self {
        self.m_min = m_min;
        self.m_max = m_max;
        self
    }

    pub fn with_connectivity(mut self, connectivity: Connectivity) -> Self {
        self.connectivity = connectivity;
        self
    }

    pub fn with_norm(mut self, norm: NormOrder) -> Self {
        self.norm_order = norm;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.psi.is_finite() && self.alpha.is_finite()) {
            return bad(format!("thresholds must be finite (psi {}, alpha {})", self.psi, self.alpha));
        }
        if !(0.0 <= self.psi && self.psi <= self.alpha) {
            return bad(format!("need 0 <= psi <= alpha, got psi {} alpha {}", self.psi, self.alpha));
        }
        if !(1 <= self.beta_min && self.beta_min <= self.beta_max) {
            return bad(format!("need 1 <= beta_min <= beta_max, got {} {}", self.beta_min, self.beta_max));
        }
        if self.m_min.is_nan() || self.m_max.is_nan() || self.m_min > self.m_max {
            return bad(format!("need m_min <= m_max, got {} {}", self.m_min, self.m_max));
        }
        if self.traversal_divisor == 0 {
            return bad("traversal_divisor must be positive".into());
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        Ok(())
    }
}

/// Retention decision for one contracted region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Retention {
    Keep,
    Delete,
}

/// Keeps a region iff `beta_min <= area <= beta_max` and
/// `m_min <= mean <= m_max` (both inclusive).
pub fn retention_check(area: u64, mean_intensity: f64, params: &MinorParams) -> Retention {
    let area_ok = params.beta_min <= area && area <= params.beta_max;
    let mean_ok = params.m_min <= mean_intensity && mean_intensity <= params.m_max;
    if area_ok && mean_ok {
        Retention::Keep
    } else {
        Retention::Delete
    }
}
