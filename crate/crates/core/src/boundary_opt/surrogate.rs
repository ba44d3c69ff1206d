//! Extremely randomized regression trees.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::rng::{child, rng, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtraTreesConfig {
    pub trees: usize,
    pub min_leaf: usize,
    /// Candidate features drawn per split; `None` uses all features.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for ExtraTreesConfig {
    fn default() -> Self {
        Self { trees: 100, min_leaf: 1, max_features: None, seed: crate::rng::DEFAULT_SEED }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

fn mean(ys: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| ys[i]).sum::<f64>() / idx.len() as f64
}

fn sse(ys: &[f64], idx: &[usize]) -> f64 {
    let m = mean(ys, idx);
    idx.iter().map(|&i| (ys[i] - m).powi(2)).sum()
}

struct Builder<'a> {
    xs: &'a [Vec<f64>],
    ys: &'a [f64],
    cfg: &'a ExtraTreesConfig,
    rng: Rng,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn grow(&mut self, idx: Vec<usize>) -> usize {
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf(mean(self.ys, &idx)));
        if idx.len() < 2 * self.cfg.min_leaf.max(1) || sse(self.ys, &idx) == 0.0 {
            return at;
        }
        let dims = self.xs[0].len();
        // Features that are not constant within this node.
        let mut live: Vec<(usize, f64, f64)> = (0..dims)
            .filter_map(|f| {
                let (lo, hi) = idx
                    .iter()
                    .map(|&i| self.xs[i][f])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
                (lo < hi).then_some((f, lo, hi))
            })
            .collect();
        let k = self.cfg.max_features.unwrap_or(dims).clamp(1, dims);
        let mut best: Option<(f64, usize, f64, Vec<usize>, Vec<usize>)> = None;
        let mut tried = 0;
        while tried < k && !live.is_empty() {
            let (f, lo, hi) = live.swap_remove(self.rng.random_range(0..live.len()));
            tried += 1;
            let thr = self.rng.random_range(lo..hi);
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.xs[i][f] <= thr);
            if l.len() < self.cfg.min_leaf || r.len() < self.cfg.min_leaf {
                continue;
            }
            let score = sse(self.ys, &l) + sse(self.ys, &r);
            if best.as_ref().is_none_or(|b| score < b.0) {
                best = Some((score, f, thr, l, r));
            }
        }
        let Some((_, feature, threshold, l, r)) = best else {
            return at;
        };
        let left = self.grow(l);
        let right = self.grow(r);
        self.nodes[at] = Node::Split { feature, threshold, left, right };
        at
    }
}

/// Ensemble of extremely randomized regression trees fitted on the optimization
/// history. Each split draws `max_features` non-constant features with a threshold
/// uniform on the node's observed range and keeps the one with the lowest squared
/// error.
#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    trees: Vec<Tree>,
    dims: usize,
}

impl Surrogate {
    pub fn fit(xs: &[Vec<f64>], ys: &[f64], cfg: &ExtraTreesConfig, exec: Exec) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::InvalidParams(format!("surrogate needs matching nonempty data ({} x, {} y)", xs.len(), ys.len())));
        }
        let dims = xs[0].len();
        if dims == 0 || xs.iter().any(|x| x.len() != dims) || cfg.trees == 0 {
            return Err(Error::InvalidParams("surrogate inputs must share a nonzero width; trees > 0".into()));
        }
        let trees = exec.map_range(cfg.trees, |t| {
            let mut b = Builder { xs, ys, cfg, rng: rng(child(cfg.seed, t as u64)), nodes: Vec::new() };
            b.grow((0..xs.len()).collect());
            Tree { nodes: b.nodes }
        });
        Ok(Self { trees, dims })
    }

    /// Ensemble mean and (population) standard deviation of per-tree predictions.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        debug_assert_eq!(x.len(), self.dims);
        let n = self.trees.len() as f64;
        let preds: Vec<f64> = self.trees.iter().map(|t| t.predict(x)).collect();
        let m = preds.iter().sum::<f64>() / n;
        let var = preds.iter().map(|p| (p - m).powi(2)).sum::<f64>() / n;
        (m, var.max(0.0).sqrt())
    }

    pub fn expected_improvement(&self, x: &[f64], best_loss: f64) -> f64 {
        let (m, s) = self.predict(x);
        expected_improvement(m, s, best_loss)
    }
}

/// Expected improvement below `best` of a normal prediction `(mean, std)`.
pub fn expected_improvement(mean: f64, std: f64, best: f64) -> f64 {
    let gain = best - mean;
    if std < 1e-12 {
        return gain.max(0.0);
    }
    let z = gain / std;
    let cdf = 0.5 * libm::erfc(-z / std::f64::consts::SQRT_2);
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (gain * cdf + std * pdf).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ei_examples() {
        assert_eq!(expected_improvement(0.5, 0.0, 0.5), 0.0);
        assert_abs_diff_eq!(expected_improvement(0.4, 0.0, 0.5), 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(expected_improvement(0.5, 1.0, 0.5), 0.398_942_280_4, epsilon = 1e-9);
        assert_eq!(expected_improvement(0.7, 0.0, 0.5), 0.0);
    }

    #[test]
    fn ei_against_quadrature() {
        // EI = ∫ max(best - y, 0) N(y; m, s) dy by the midpoint rule.
        for &(m, s, best) in &[(0.3, 0.2, 0.5), (0.9, 0.5, 0.2), (0.0, 2.0, 0.0)] {
            let n = 200_000;
            let (lo, hi) = (m - 12.0 * s, m + 12.0 * s);
            let h = (hi - lo) / n as f64;
            let q: f64 = (0..n)
                .map(|i| {
                    let y = lo + (i as f64 + 0.5) * h;
                    let pdf = (-0.5 * ((y - m) / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
                    (best - y).max(0.0) * pdf * h
                })
                .sum();
            assert_abs_diff_eq!(expected_improvement(m, s, best), q, epsilon = 1e-6);
        }
    }

    fn toy() -> (Vec<Vec<f64>>, Vec<f64>) {
        let xs: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 39.0, ((i * 7) % 40) as f64 / 39.0]).collect();
        let ys = xs.iter().map(|x| (x[0] * 6.0).sin() + 0.3 * x[1]).collect();
        (xs, ys)
    }

    #[test]
    fn fits_training_data() {
        let (xs, ys) = toy();
        let s = Surrogate::fit(&xs, &ys, &ExtraTreesConfig::default(), Exec::Sequential).unwrap();
        let m = ys.iter().sum::<f64>() / ys.len() as f64;
        let var = ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / ys.len() as f64;
        let mse = xs.iter().zip(&ys).map(|(x, y)| (s.predict(x).0 - y).powi(2)).sum::<f64>() / ys.len() as f64;
        assert!(mse < 1e-12 && mse < var, "mse {mse} var {var}");
        assert!(xs.iter().all(|x| s.predict(x).1 >= 0.0));
    }

    #[test]
    fn deterministic_and_exec_independent() {
        let (xs, ys) = toy();
        let cfg = ExtraTreesConfig { trees: 20, max_features: Some(1), ..Default::default() };
        let a = Surrogate::fit(&xs, &ys, &cfg, Exec::Sequential).unwrap();
        let b = Surrogate::fit(&xs, &ys, &cfg, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        let other = Surrogate::fit(&xs, &ys, &ExtraTreesConfig { seed: 1, ..cfg }, Exec::Sequential).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn constant_targets_give_zero_spread() {
        let xs = vec![vec![0.0], vec![0.5], vec![1.0]];
        let s = Surrogate::fit(&xs, &[0.3; 3], &ExtraTreesConfig::default(), Exec::Sequential).unwrap();
        let (m, sd) = s.predict(&[0.7]);
        assert_abs_diff_eq!(m, 0.3, epsilon = 1e-12);
        assert!(sd < 1e-12);
    }

    #[test]
    fn rejects_bad_data() {
        let cfg = ExtraTreesConfig::default();
        assert!(Surrogate::fit(&[], &[], &cfg, Exec::Sequential).is_err());
        assert!(Surrogate::fit(&[vec![1.0]], &[1.0, 2.0], &cfg, Exec::Sequential).is_err());
    }
}
