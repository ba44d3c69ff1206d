//! Seeded synthetic volumes with known labels.
//!
//! A volume is a target structure (label 1) over a background tiled into Voronoi
//! cells, each at its own constant level, plus additive Gaussian noise.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::Sample;
use crate::error::{Error, Result};
use crate::rng::{child, rng, substream};
use crate::tensor::{LabelMap, Volume, VolumeDims};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Geometry {
    /// Ball of `radius` voxels around a jittered center.
    Blob { radius: f64 },
    /// Slab `width` voxels thick across the first axis.
    Stripe { width: usize },
    /// Spherical shell `inner <= r < outer`.
    Shell { inner: f64, outer: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub dims: [usize; 3],
    /// Target plus background cells; at least 2.
    pub regions: usize,
    pub foreground: f32,
    pub background: f32,
    /// Background cell `i` sits at `background + i * level_step`.
    pub level_step: f32,
    pub noise_std: f32,
    pub geometry: Geometry,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        VolumeDims::spatial(self.dims[0], self.dims[1], self.dims[2])?;
        if self.regions < 2 {
            return Err(Error::InvalidParams(format!("need at least 2 regions, got {}", self.regions)));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidParams(format!("noise std must be >= 0, got {}", self.noise_std)));
        }
        match self.geometry {
            Geometry::Blob { radius } if !(radius > 0.0) => Err(Error::InvalidParams("blob radius must be positive".into())),
            Geometry::Stripe { width: 0 } => Err(Error::InvalidParams("stripe width must be positive".into())),
            Geometry::Shell { inner, outer } if !(0.0 <= inner && inner < outer) => {
                Err(Error::InvalidParams("shell needs 0 <= inner < outer".into()))
            }
            _ => Ok(()),
        }
    }
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

/// Generates one volume and its labels; identical specs give identical output.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Sample> {
    spec.validate()?;
    let dims = VolumeDims::spatial(spec.dims[0], spec.dims[1], spec.dims[2])?;
    let shape = dims.shape().map(|x| x as f64);
    let mut geo = rng(substream(spec.seed, "geometry"));
    let center: [f64; 3] = std::array::from_fn(|a| {
        let half = (shape[a] - 1.0) / 2.0;
        half + geo.random_range(-1.0..=1.0) * shape[a] / 8.0
    });
    let offset = geo.random_range(0..spec.dims[0]);
    let sites: Vec<[f64; 3]> =
        (1..spec.regions).map(|_| std::array::from_fn(|a| geo.random_range(0.0..shape[a]))).collect();

    let labels: Vec<u16> = (0..dims.voxels())
        .map(|i| {
            let v = dims.coords(i);
            let p = v.map(|x| x as f64);
            let inside = match spec.geometry {
                Geometry::Blob { radius } => dist2(p, center) <= radius * radius,
                Geometry::Stripe { width } => {
                    let start = offset.min(spec.dims[0].saturating_sub(width));
                    (start..start + width).contains(&v[0])
                }
                Geometry::Shell { inner, outer } => {
                    let r = dist2(p, center).sqrt();
                    inner <= r && r < outer
                }
            };
            u16::from(inside)
        })
        .collect();

    let mut noise = rng(substream(spec.seed, "noise"));
    let normal = Normal::new(0.0f32, spec.noise_std).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let data = (0..dims.voxels())
        .map(|i| {
            let level = if labels[i] == 1 {
                spec.foreground
            } else {
                let p = dims.coords(i).map(|x| x as f64);
                let cell = (0..sites.len())
                    .min_by(|&a, &b| dist2(p, sites[a]).total_cmp(&dist2(p, sites[b])))
                    .unwrap_or(0);
                spec.background + cell as f32 * spec.level_step
            };
            if spec.noise_std > 0.0 {
                level + normal.sample(&mut noise)
            } else {
                level
            }
        })
        .collect();
    Sample::new(Volume::new(dims, data)?, LabelMap::new(dims, labels)?)
}

/// Named corpus recipes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Five 32³ blobs at contrast 100 over four background cells, noise std 2.
    /// Blob radii vary between 5 and 10 voxels in every preset.
    SharpContrast,
    /// A hundred 32³ blobs: foreground 150, background 50, noise std 10.
    Separable,
    /// Piecewise-constant 64³ volumes with 50 regions and no noise.
    Piecewise,
}

impl Preset {
    pub fn default_count(self) -> usize {
        match self {
            Preset::SharpContrast => 5,
            Preset::Separable => 100,
            Preset::Piecewise => 4,
        }
    }

    /// Spec of the `index`-th sample under root `seed`.
    pub fn spec(self, index: usize, seed: u64) -> SyntheticSpec {
        let s = child(substream(seed, "synthetic"), index as u64);
        let radius = 5.0 + (s % 1001) as f64 / 200.0;
        match self {
            Preset::SharpContrast => SyntheticSpec {
                dims: [32; 3],
                regions: 5,
                foreground: 100.0,
                background: 0.0,
                level_step: 5.0,
                noise_std: 2.0,
                geometry: Geometry::Blob { radius },
                seed: s,
            },
            Preset::Separable => SyntheticSpec {
                dims: [32; 3],
                regions: 2,
                foreground: 150.0,
                background: 50.0,
                level_step: 0.0,
                noise_std: 10.0,
                geometry: Geometry::Blob { radius },
                seed: s,
            },
            Preset::Piecewise => SyntheticSpec {
                dims: [64; 3],
                regions: 50,
                foreground: 200.0,
                background: 0.0,
                level_step: 3.0,
                noise_std: 0.0,
                geometry: Geometry::Blob { radius: 2.0 * radius },
                seed: s,
            },
        }
    }

    pub fn generate(self, count: usize, seed: u64) -> Result<Vec<Sample>> {
        (0..count).map(|i| generate_synthetic(&self.spec(i, seed))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn blob(radius: f64, noise: f32) -> SyntheticSpec {
        SyntheticSpec {
            dims: [32; 3],
            regions: 2,
            foreground: 150.0,
            background: 50.0,
            level_step: 0.0,
            noise_std: noise,
            geometry: Geometry::Blob { radius },
            seed: 42,
        }
    }

    #[test]
    fn two_regions_two_values() {
        let s = generate_synthetic(&blob(7.0, 0.0)).unwrap();
        let values: BTreeSet<u32> = s.volume.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(values.len(), 2);
    }

    #[test]
    fn deterministic() {
        let a = generate_synthetic(&blob(7.0, 10.0)).unwrap();
        let b = generate_synthetic(&blob(7.0, 10.0)).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&SyntheticSpec { seed: 43, ..blob(7.0, 10.0) }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn blob_volume_is_close_to_ball() {
        for r in [4.0, 6.0, 9.0] {
            let s = generate_synthetic(&blob(r, 0.0)).unwrap();
            let count = s.labels.labels().iter().filter(|&&l| l == 1).count() as f64;
            let ball = 4.0 / 3.0 * std::f64::consts::PI * r * r * r;
            assert!((count - ball).abs() <= 0.15 * ball, "r {r}: {count} vs {ball}");
        }
    }

    #[test]
    fn background_cells_and_shapes() {
        let spec = SyntheticSpec { regions: 6, level_step: 10.0, ..blob(5.0, 0.0) };
        let s = generate_synthetic(&spec).unwrap();
        let values: BTreeSet<u32> = s.volume.data().iter().map(|v| v.to_bits()).collect();
        assert!(values.len() <= 6 && values.len() >= 3);

        let stripe = SyntheticSpec { geometry: Geometry::Stripe { width: 4 }, ..blob(1.0, 0.0) };
        let s = generate_synthetic(&stripe).unwrap();
        assert_eq!(s.labels.labels().iter().filter(|&&l| l == 1).count(), 4 * 32 * 32);

        let shell = SyntheticSpec { geometry: Geometry::Shell { inner: 4.0, outer: 8.0 }, ..blob(1.0, 0.0) };
        let s = generate_synthetic(&shell).unwrap();
        let c = s.labels.labels().iter().filter(|&&l| l == 1).count() as f64;
        let expect = 4.0 / 3.0 * std::f64::consts::PI * (512.0 - 64.0);
        assert!((c - expect).abs() < 0.15 * expect);
    }

    #[test]
    fn invalid_specs() {
        assert!(generate_synthetic(&SyntheticSpec { regions: 1, ..blob(5.0, 0.0) }).is_err());
        assert!(generate_synthetic(&SyntheticSpec { noise_std: -1.0, ..blob(5.0, 0.0) }).is_err());
        assert!(generate_synthetic(&blob(0.0, 0.0)).is_err());
    }
}
