//! Pseudo-random coprime traversal of the voxel grid.

use rand::Rng as _;

use crate::rng;
use crate::tensor::VolumeDims;

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// A step coprime to `n`, searched upward then downward from `n / d`.
pub fn get_coprime(n: usize, d: usize) -> usize {
    if n <= 2 {
        return 1;
    }
    let s = (n / d.max(1)).clamp(1, n - 1);
    (s..n)
        .chain((1..s).rev())
        .find(|&i| gcd(n, i) == 1)
        .unwrap_or(1)
}

/// Visit order `((r₀ + i·s_h) mod H, (c₀ + j·s_w) mod W, (l₀ + k·s_d) mod D)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Traversal {
    pub shape: [usize; 3],
    pub start: [usize; 3],
    pub steps: [usize; 3],
}

impl Traversal {
    pub fn new(dims: VolumeDims, divisor: u32, seed: u64) -> Self {
        let shape = dims.shape();
        let mut rng = rng::rng(seed);
        let start = shape.map(|n| rng.random_range(0..n));
        let steps = shape.map(|n| get_coprime(n, divisor as usize));
        Self { shape, start, steps }
    }

    /// Coordinate along `axis` at iteration `i`.
    #[inline]
    pub fn axis(&self, axis: usize, i: usize) -> usize {
        (self.start[axis] + i * self.steps[axis]) % self.shape[axis]
    }

    pub fn iter(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let [h, w, d] = self.shape;
        (0..h).flat_map(move |i| {
            (0..w).flat_map(move |j| (0..d).map(move |k| [self.axis(0, i), self.axis(1, j), self.axis(2, k)]))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coprime_examples() {
        assert_eq!(get_coprime(10, 3), 3);
        assert_eq!(get_coprime(2, 1), 1);
        assert_eq!(get_coprime(12, 2), 7);
        assert_eq!(get_coprime(1, 0), 1);
        assert_eq!(get_coprime(7, 0), 6);
    }

    #[test]
    fn coprime_contract() {
        for n in 1..200 {
            for d in 0..12 {
                let s = get_coprime(n, d);
                assert!(s >= 1 && s <= (n - 1).max(1));
                assert_eq!(gcd(n, s), 1);
            }
        }
    }

    #[test]
    fn traversal_covers_every_voxel_once() {
        for (h, w, d, div) in [(7, 5, 3, 3), (12, 10, 1, 2), (1, 1, 1, 1), (9, 4, 6, 5)] {
            let dims = VolumeDims::spatial(h, w, d).unwrap();
            let t = Traversal::new(dims, div, 7);
            let mut seen = vec![false; dims.voxels()];
            for v in t.iter() {
                let i = dims.linear(v);
                assert!(!seen[i]);
                seen[i] = true;
            }
            assert!(seen.into_iter().all(|s| s));
        }
    }
}
