use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::Sample;
use crate::error::{Error, Result};
use crate::features::DEFAULT_EPSILON;
use crate::minor::{MinorParams, NormOrder};
use crate::rng::{Rng, DEFAULT_SEED};
use crate::tensor::Connectivity;

/// Number of searched parameters: psi, alpha, beta_min, beta_max, m_min, m_max.
pub const DIMS: usize = 6;

pub const PARAM_NAMES: [&str; DIMS] = ["psi", "alpha", "beta_min", "beta_max", "m_min", "m_max"];

/// A point of the search space as grid-level indices, one per parameter.
pub type Point = [usize; DIMS];

const MAX_REJECTIONS: usize = 100_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

/// `levels` quantized values from `lo` to `hi`, both included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub levels: usize,
    #[serde(default)]
    pub scale: Scale,
}

impl Grid {
    pub fn linear(lo: f64, hi: f64, levels: usize) -> Self {
        Self { lo, hi, levels, scale: Scale::Linear }
    }

    pub fn log(lo: f64, hi: f64, levels: usize) -> Self {
        Self { lo, hi, levels, scale: Scale::Log }
    }

    pub fn value(&self, level: usize) -> f64 {
        if self.levels <= 1 {
            return self.lo;
        }
        let t = level.min(self.levels - 1) as f64 / (self.levels - 1) as f64;
        match self.scale {
            Scale::Linear => self.lo + t * (self.hi - self.lo),
            Scale::Log => self.lo * (self.hi / self.lo).powf(t),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let bad = |why: &str| Err(Error::Config(format!("grid `{name}`: {why}")));
        if self.levels == 0 {
            return bad("needs at least one level");
        }
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo > self.hi {
            return bad("needs finite lo <= hi");
        }
        if self.scale == Scale::Log && self.lo <= 0.0 {
            return bad("log scale needs lo > 0");
        }
        Ok(())
    }
}

fn default_divisor() -> u32 {
    3
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

/// Discrete search space over the six tunable parameters. Norm, connectivity and
/// traversal settings are fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub psi: Grid,
    pub alpha: Grid,
    pub beta_min: Grid,
    pub beta_max: Grid,
    pub m_min: Grid,
    pub m_max: Grid,
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

pub const DEFAULT_LEVELS: usize = 64;

impl ParamSpace {
    /// Default space for a sample set: thresholds on 64 linear levels over
    /// `[0, intensity range]`, area bounds on 64 log levels over `[1, voxels]`,
    /// mean-intensity bounds on 64 linear levels over the observed intensities.
    pub fn for_samples(samples: &[Sample], norm: NormOrder, connectivity: Connectivity) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::InvalidParams("few-shot set is empty".into()))?;
        let channels = first.volume.dims().c;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut voxels = 1usize;
        for s in samples {
            let (a, b) = s.volume.range();
            lo = lo.min(f64::from(a));
            hi = hi.max(f64::from(b));
            voxels = voxels.max(s.volume.dims().voxels());
        }
        let c = channels as f64;
        let range = (hi - lo)
            * match norm {
                NormOrder::L1 => c,
                NormOrder::L2 => c.sqrt(),
                NormOrder::Linf => 1.0,
            };
        let thresholds = Grid::linear(0.0, range, DEFAULT_LEVELS);
        let areas = Grid::log(1.0, voxels as f64, DEFAULT_LEVELS);
        let means = Grid::linear(lo, hi, DEFAULT_LEVELS);
        Ok(Self {
            psi: thresholds,
            alpha: thresholds,
            beta_min: areas,
            beta_max: areas,
            m_min: means,
            m_max: means,
            norm_order: norm,
            connectivity,
            traversal_divisor: default_divisor(),
            seed: DEFAULT_SEED,
            epsilon: DEFAULT_EPSILON,
        })
    }

    pub fn grids(&self) -> [&Grid; DIMS] {
        [&self.psi, &self.alpha, &self.beta_min, &self.beta_max, &self.m_min, &self.m_max]
    }

    pub fn validate(&self) -> Result<()> {
        for (g, name) in self.grids().into_iter().zip(PARAM_NAMES) {
            g.validate(name)?;
        }
        if self.beta_min.lo < 1.0 {
            return Err(Error::Config("grid `beta_min` must start at 1 or above".into()));
        }
        if self.psi.lo > self.alpha.hi
            || self.beta_min.lo.round() > self.beta_max.hi.round()
            || self.m_min.lo > self.m_max.hi
        {
            return Err(Error::Config("parameter space has no valid point".into()));
        }
        if self.traversal_divisor == 0 || !(self.epsilon > 0.0) {
            return Err(Error::Config("traversal_divisor and epsilon must be positive".into()));
        }
        Ok(())
    }

    /// Concrete parameters at `point`. Area bounds are rounded to integers.
    pub fn decode(&self, point: &Point) -> MinorParams {
        let v: Vec<f64> = self.grids().iter().zip(point).map(|(g, &l)| g.value(l)).collect();
        MinorParams {
            psi: v[0],
            alpha: v[1],
            beta_min: v[2].round().max(1.0) as u64,
            beta_max: v[3].round().max(1.0) as u64,
            m_min: v[4],
            m_max: v[5],
            norm_order: self.norm_order,
            connectivity: self.connectivity,
            traversal_divisor: self.traversal_divisor,
            seed: self.seed,
            epsilon: self.epsilon,
        }
    }

    pub fn is_valid(&self, point: &Point) -> bool {
        point.iter().zip(self.grids()).all(|(&l, g)| l < g.levels) && self.decode(point).validate().is_ok()
    }

    /// Uniform grid sample, rejection-resampled until the decoded parameters are
    /// valid (`psi <= alpha`, ordered bounds).
    pub fn sample(&self, rng: &mut Rng) -> Result<Point> {
        for _ in 0..MAX_REJECTIONS {
            let mut p = [0usize; DIMS];
            for (l, g) in p.iter_mut().zip(self.grids()) {
                *l = rng.random_range(0..g.levels);
            }
            if self.is_valid(&p) {
                return Ok(p);
            }
        }
        Err(Error::Config("could not sample a valid point from the parameter space".into()))
    }

    /// Point scaled to `[0, 1]` per dimension, the surrogate's input.
    pub fn normalize(&self, point: &Point) -> [f64; DIMS] {
        let g = self.grids();
        std::array::from_fn(|i| if g[i].levels <= 1 { 0.0 } else { point[i] as f64 / (g[i].levels - 1) as f64 })
    }
}
