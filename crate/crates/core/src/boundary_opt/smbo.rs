use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::boundary::boundary_loss;
use super::space::{ParamSpace, Point, PARAM_NAMES};
use super::surrogate::{ExtraTreesConfig, Surrogate};
use crate::corpus::Sample;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::minor::MinorParams;
use crate::rng::{rng, substream, DEFAULT_SEED};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmboConfig {
    pub n_init: usize,
    pub n_iter: usize,
    /// Random grid candidates scored by expected improvement per round.
    pub n_candidates: usize,
    pub surrogate: ExtraTreesConfig,
    pub seed: u64,
}

impl Default for SmboConfig {
    fn default() -> Self {
        Self {
            n_init: 10,
            n_iter: 50,
            n_candidates: 1000,
            surrogate: ExtraTreesConfig::default(),
            seed: DEFAULT_SEED,
        }
    }
}

impl SmboConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_init < 2 {
            return Err(Error::InvalidParams(format!("n_init must be >= 2, got {}", self.n_init)));
        }
        if self.n_candidates == 0 {
            return Err(Error::InvalidParams("n_candidates must be positive".into()));
        }
        Ok(())
    }
}

/// One evaluated point of the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub iteration: usize,
    /// True for the initial uniform samples.
    pub initial: bool,
    pub point: Point,
    pub params: MinorParams,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub best: MinorParams,
    pub best_loss: f64,
    pub best_iteration: usize,
    pub history: Vec<Trial>,
}

impl OptimizeResult {
    pub fn best_initial_loss(&self) -> f64 {
        self.history.iter().filter(|t| t.initial).map(|t| t.loss).fold(f64::INFINITY, f64::min)
    }
}

/// Minimizes the mean boundary loss over `space`: `n_init` uniform samples, then
/// `n_iter` rounds of surrogate fit and expected-improvement acquisition. Ties in
/// loss keep the earliest trial.
pub fn few_shot_optimize(
    space: &ParamSpace,
    samples: &[Sample],
    config: &SmboConfig,
    exec: Exec,
) -> Result<OptimizeResult> {
    if samples.is_empty() {
        return Err(Error::InvalidParams("few-shot set is empty".into()));
    }
    config.validate()?;
    space.validate()?;
    let mut rng = rng(substream(config.seed, "smbo"));
    let mut history: Vec<Trial> = Vec::with_capacity(config.n_init + config.n_iter);
    let mut seen: HashMap<Point, f64> = HashMap::new();

    let mut evaluate = |point: Point, initial: bool, history: &mut Vec<Trial>| -> Result<()> {
        let params = space.decode(&point);
        let loss = match seen.get(&point) {
            Some(&l) => l,
            None => {
                let l = boundary_loss(&params, samples, exec)?;
                seen.insert(point, l);
                l
            }
        };
        history.push(Trial { iteration: history.len(), initial, point, params, loss });
        Ok(())
    };

    for _ in 0..config.n_init {
        let p = space.sample(&mut rng)?;
        evaluate(p, true, &mut history)?;
    }

    for round in 0..config.n_iter {
        let xs: Vec<Vec<f64>> = history.iter().map(|t| space.normalize(&t.point).to_vec()).collect();
        let ys: Vec<f64> = history.iter().map(|t| t.loss).collect();
        let best = ys.iter().copied().fold(f64::INFINITY, f64::min);
        let tree_cfg = ExtraTreesConfig {
            seed: crate::rng::child(substream(config.seed, "surrogate"), round as u64),
            ..config.surrogate
        };
        let surrogate = Surrogate::fit(&xs, &ys, &tree_cfg, exec)?;
        let candidates = (0..config.n_candidates)
            .map(|_| space.sample(&mut rng))
            .collect::<Result<Vec<_>>>()?;
        let scores = exec.map(&candidates, |p| {
            if history.iter().any(|t| t.point == *p) {
                f64::NEG_INFINITY
            } else {
                surrogate.expected_improvement(&space.normalize(p), best)
            }
        });
        // First maximum wins, so the choice does not depend on float ties.
        let pick = scores
            .iter()
            .enumerate()
            .fold(0, |bi, (i, &s)| if s > scores[bi] { i } else { bi });
        evaluate(candidates[pick], false, &mut history)?;
    }

    let best = history
        .iter()
        .fold(&history[0], |b, t| if t.loss < b.loss { t } else { b });
    Ok(OptimizeResult { best: best.params, best_loss: best.loss, best_iteration: best.iteration, history })
}

/// History as CSV: `iteration,initial,psi,alpha,beta_min,beta_max,m_min,m_max,loss`.
pub fn write_history_csv(history: &[Trial], mut out: impl Write) -> Result<()> {
    writeln!(out, "iteration,initial,{},loss", PARAM_NAMES.join(","))?;
    for t in history {
        let p = &t.params;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            t.iteration,
            u8::from(t.initial),
            p.psi,
            p.alpha,
            p.beta_min,
            p.beta_max,
            p.m_min,
            p.m_max,
            t.loss
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minor::NormOrder;
    use crate::tensor::{Connectivity, LabelMap, Volume, VolumeDims};

    fn samples() -> Vec<Sample> {
        let dims = VolumeDims::spatial(6, 6, 6).unwrap();
        (0..2)
            .map(|s| {
                let cut = 2 + s;
                let vol = Volume::from_fn(dims, |v| if v[0] < cut { 10.0 } else { 90.0 }).unwrap();
                let lab = LabelMap::from_fn(dims, |v| u16::from(v[0] >= cut)).unwrap();
                Sample::new(vol, lab).unwrap()
            })
            .collect()
    }

    fn space(s: &[Sample]) -> ParamSpace {
        ParamSpace::for_samples(s, NormOrder::L2, Connectivity::Six).unwrap()
    }

    #[test]
    fn no_iterations_returns_best_initial() {
        let s = samples();
        let cfg = SmboConfig { n_init: 6, n_iter: 0, ..Default::default() };
        let r = few_shot_optimize(&space(&s), &s, &cfg, Exec::Sequential).unwrap();
        assert_eq!(r.history.len(), 6);
        assert_eq!(r.best_loss, r.best_initial_loss());
    }

    #[test]
    fn search_improves_and_is_deterministic() {
        let s = samples();
        let cfg = SmboConfig { n_init: 5, n_iter: 25, n_candidates: 200, ..Default::default() };
        let a = few_shot_optimize(&space(&s), &s, &cfg, Exec::Sequential).unwrap();
        let b = few_shot_optimize(&space(&s), &s, &cfg, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.history.len(), 30);
        assert!(a.best_loss <= a.best_initial_loss());
        assert_eq!(a.best_loss, a.history.iter().map(|t| t.loss).fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn longer_runs_never_do_worse() {
        let s = samples();
        let mut prev = f64::INFINITY;
        for n_iter in [0, 3, 8] {
            let cfg = SmboConfig { n_init: 4, n_iter, n_candidates: 100, ..Default::default() };
            let r = few_shot_optimize(&space(&s), &s, &cfg, Exec::Sequential).unwrap();
            assert!(r.best_loss <= prev);
            prev = r.best_loss;
        }
    }

    #[test]
    fn preconditions() {
        let s = samples();
        let sp = space(&s);
        assert!(few_shot_optimize(&sp, &[], &SmboConfig::default(), Exec::Sequential).is_err());
        let cfg = SmboConfig { n_init: 1, ..Default::default() };
        assert!(few_shot_optimize(&sp, &s, &cfg, Exec::Sequential).is_err());
    }

    #[test]
    fn history_csv_shape() {
        let s = samples();
        let cfg = SmboConfig { n_init: 3, n_iter: 1, n_candidates: 10, ..Default::default() };
        let r = few_shot_optimize(&space(&s), &s, &cfg, Exec::Sequential).unwrap();
        let mut buf = Vec::new();
        write_history_csv(&r.history, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("iteration,initial,psi,alpha,beta_min,beta_max,m_min,m_max,loss\n"));
    }
}
