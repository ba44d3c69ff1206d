//! End-to-end run: optimize → build minors → train → predict → lift → evaluate.
//!
//! Configuration is JSON; relative paths resolve against the config file's
//! directory. Outputs in `out/`:
//!
//! | file | content |
//! |------|---------|
//! | `params.json` | chosen construction parameters |
//! | `history.csv` | optimization history |
//! | `minors/sample_NNN.smin` | one minor per corpus sample |
//! | `model.smdl` | trained model |
//! | `train_metrics.csv` | per-epoch loss and validation Dice |
//! | `predictions/sample_NNN.sprd` | supernode classes (val and test samples) |
//! | `segmentations/sample_NNN.svol` | lifted voxel labels (val and test samples) |
//! | `metrics.csv` | per-sample minor size, reduction factor and Dice |
//! | `summary.json` | aggregate metrics |
//! | `timings.csv` | per-stage wall time (the only nondeterministic output) |

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::boundary_opt::{few_shot_optimize, write_history_csv, ParamSpace, SmboConfig};
use crate::corpus::{load_corpus, Sample};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::formats::{sexp, smdl, smin, sprd};
use crate::formats::svol::write_prediction_file;
use crate::gnn::{predict, train, LabeledMinor, MpnnConfig};
use crate::lift::{lift, voxel_dice};
use crate::minor::{build_minor_with, MinorBuild, MinorParams, NormOrder};
use crate::tensor::{Connectivity, Volume, VolumeDims};

pub const METRICS_VERSION: u32 = 1;

fn default_true() -> bool {
    true
}

fn default_seed() -> u64 {
    crate::rng::DEFAULT_SEED
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub n_init: usize,
    pub n_iter: usize,
    pub n_candidates: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        let d = SmboConfig::default();
        Self { n_init: d.n_init, n_iter: d.n_iter, n_candidates: d.n_candidates }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Corpus directory containing `manifest.json`.
    pub corpus: PathBuf,
    pub out: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Sample indices used only to tune construction parameters.
    pub few_shot: Vec<usize>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    /// Held-out evaluation samples; the validation split is reported if empty.
    #[serde(default)]
    pub test: Vec<usize>,
    /// Fixed parameters; skips optimization when set.
    #[serde(default)]
    pub params: Option<MinorParams>,
    /// Search space; derived from the few-shot samples when absent.
    #[serde(default)]
    pub space: Option<ParamSpace>,
    #[serde(default)]
    pub search: SearchBudget,
    #[serde(default)]
    pub norm_order: NormOrder,
    #[serde(default)]
    pub connectivity: Connectivity,
    #[serde(default)]
    pub model: MpnnConfig,
    #[serde(default)]
    pub background: u16,
    /// Also write each expanded tensor as `minors/sample_NNN.sexp`.
    #[serde(default)]
    pub write_tensors: bool,
    /// Build and predict volumes in parallel.
    #[serde(default = "default_true")]
    pub parallel: bool,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.corpus = base.join(&cfg.corpus);
        cfg.out = base.join(&cfg.out);
        Ok(cfg)
    }

    /// Checks splits against a corpus of `n` samples: in range, nonempty train and
    /// validation, and train/val/test mutually disjoint.
    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.train.is_empty() || self.val.is_empty() {
            return bad("train and val splits must be nonempty".into());
        }
        if self.params.is_none() && self.few_shot.is_empty() {
            return bad("few_shot split is empty and no fixed params are given".into());
        }
        for (name, split) in [("few_shot", &self.few_shot), ("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            if let Some(&i) = split.iter().find(|&&i| i >= n) {
                return bad(format!("{name} index {i} outside corpus of {n} samples"));
            }
            if split.iter().collect::<BTreeSet<_>>().len() != split.len() {
                return bad(format!("{name} split repeats an index"));
            }
        }
        let sets = [&self.train, &self.val, &self.test].map(|s| s.iter().copied().collect::<BTreeSet<_>>());
        if !sets[0].is_disjoint(&sets[1]) || !sets[0].is_disjoint(&sets[2]) || !sets[1].is_disjoint(&sets[2]) {
            return bad("train, val and test splits must be disjoint".into());
        }
        self.model.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Config over a corpus of `n` samples with default splits: the first
    /// `min(5, n / 4)` samples are few-shot, the rest split 60/20/20 into train,
    /// val and test.
    pub fn with_default_splits(corpus: PathBuf, out: PathBuf, n: usize) -> Self {
        let few = (n / 4).min(5);
        let rest = n - few;
        let train = (rest * 3).div_ceil(5);
        let val = (rest - train).div_ceil(2);
        Self {
            corpus,
            out,
            seed: default_seed(),
            few_shot: (0..few).collect(),
            train: (few..few + train).collect(),
            val: (few + train..few + train + val).collect(),
            test: (few + train + val..n).collect(),
            params: None,
            space: None,
            search: SearchBudget::default(),
            norm_order: NormOrder::default(),
            connectivity: Connectivity::default(),
            model: MpnnConfig::default(),
            background: 0,
            write_tensors: false,
            parallel: true,
        }
    }

    fn exec(&self) -> Exec {
        if self.parallel {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

/// Aggregates written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub metrics_version: u32,
    pub params: MinorParams,
    pub boundary_loss: Option<f64>,
    pub mean_supernodes: f64,
    pub mean_reduction_factor: f64,
    pub min_reduction_factor: f64,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub best_val_dice: f64,
    /// Split the reported Dice is measured on.
    pub eval_split: String,
    pub dice: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Timings {
    pub stages: Vec<(&'static str, Duration)>,
}

impl Timings {
    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f().map_err(|e| e.in_stage(stage));
        self.stages.push((stage, t.elapsed()));
        out
    }

    pub fn total(&self) -> Duration {
        self.stages.iter().map(|s| s.1).sum()
    }
}

struct SampleRow {
    split: &'static str,
    index: usize,
    voxels: usize,
    supernodes: usize,
    edges: usize,
    deleted_voxels: usize,
    reduction: f64,
    dice: Option<f64>,
}

fn sample_name(i: usize) -> String {
    format!("sample_{i:03}")
}

/// Runs every stage and writes the artifacts listed in the module docs.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<(Summary, Timings)> {
    let mut timings = Timings::default();
    let exec = cfg.exec();
    let samples = load_corpus(&cfg.corpus).map_err(|e| e.in_stage("load"))?;
    cfg.validate(samples.len())?;
    let out = &cfg.out;
    fs::create_dir_all(out.join("minors"))?;

    let (params, boundary_loss) = timings.time("optimize", || optimize_stage(cfg, &samples, exec))?;
    fs::write(out.join("params.json"), serde_json::to_string_pretty(&params)?)?;

    let builds: Vec<MinorBuild> = timings.time("build", || {
        let built = exec.map(&samples, |s| build_minor_with(&s.volume, &params, Exec::Sequential));
        built.into_iter().collect::<Result<Vec<_>>>()
    })?;
    timings.time("write-minors", || {
        for (i, b) in builds.iter().enumerate() {
            smin::write_minor_file(&out.join("minors").join(format!("{}.smin", sample_name(i))), &b.minor)?;
            if cfg.write_tensors {
                sexp::write_tensor_file(&out.join("minors").join(format!("{}.sexp", sample_name(i))), &b.tensor)?;
            }
        }
        Ok(())
    })?;

    let labeled = |idx: &[usize]| -> Vec<LabeledMinor> {
        idx.iter().map(|&i| LabeledMinor { minor: builds[i].minor.clone(), labels: samples[i].labels.clone() }).collect()
    };
    let model_cfg = MpnnConfig { seed: cfg.seed, ..cfg.model };
    let report = timings.time("train", || train(&labeled(&cfg.train), &labeled(&cfg.val), &model_cfg))?;
    smdl::write_model_file(&out.join("model.smdl"), &report.model)?;
    report.write_csv(fs::File::create(out.join("train_metrics.csv"))?)?;

    let eval_idx: Vec<usize> = cfg.val.iter().chain(&cfg.test).copied().collect();
    let dices: Vec<(usize, f64)> = timings.time("predict-lift-eval", || {
        let per = exec.map(&eval_idx, |&i| -> Result<(usize, f64)> {
            let minor = &builds[i].minor;
            let preds = predict(&report.model, minor)?;
            let seg = lift(minor, &preds, cfg.background)?;
            let name = sample_name(i);
            let p8 = preds.iter().map(|&c| c as u8).collect();
            sprd::write_predictions_file(
                &out.join("predictions").join(format!("{name}.sprd")),
                &sprd::NodePredictions::new(model_cfg.classes, p8)?,
            )?;
            write_prediction_file(&out.join("segmentations").join(format!("{name}.svol")), &seg)?;
            Ok((i, voxel_dice(&seg, &samples[i].labels, model_cfg.target_class)?))
        });
        per.into_iter().collect()
    })?;

    let split_of = |i: usize| -> &'static str {
        if cfg.train.contains(&i) {
            "train"
        } else if cfg.val.contains(&i) {
            "val"
        } else if cfg.test.contains(&i) {
            "test"
        } else if cfg.few_shot.contains(&i) {
            "few_shot"
        } else {
            "unused"
        }
    };
    let rows: Vec<SampleRow> = builds
        .iter()
        .enumerate()
        .map(|(i, b)| SampleRow {
            split: split_of(i),
            index: i,
            voxels: b.minor.dims.voxels(),
            supernodes: b.minor.num_nodes(),
            edges: b.minor.num_edges(),
            deleted_voxels: b.minor.deleted_voxels(),
            reduction: b.minor.reduction_factor(),
            dice: dices.iter().find(|d| d.0 == i).map(|d| d.1),
        })
        .collect();
    write_metrics(&out.join("metrics.csv"), &rows)?;

    let (eval_split, eval_set) = if cfg.test.is_empty() { ("val", &cfg.val) } else { ("test", &cfg.test) };
    let eval: Vec<f64> = dices.iter().filter(|d| eval_set.contains(&d.0)).map(|d| d.1).collect();
    let n = rows.len() as f64;
    let summary = Summary {
        metrics_version: METRICS_VERSION,
        params,
        boundary_loss,
        mean_supernodes: rows.iter().map(|r| r.supernodes as f64).sum::<f64>() / n,
        mean_reduction_factor: rows.iter().map(|r| r.reduction).sum::<f64>() / n,
        min_reduction_factor: rows.iter().map(|r| r.reduction).fold(f64::INFINITY, f64::min),
        best_epoch: report.best_epoch,
        stopped_epoch: report.stopped_epoch,
        best_val_dice: report.best_val_dice,
        eval_split: eval_split.into(),
        dice: eval.iter().sum::<f64>() / eval.len() as f64,
    };
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    write_timings(&out.join("timings.csv"), &timings)?;
    Ok((summary, timings))
}

fn optimize_stage(cfg: &PipelineConfig, samples: &[Sample], exec: Exec) -> Result<(MinorParams, Option<f64>)> {
    if let Some(p) = cfg.params {
        p.validate()?;
        return Ok((p, None));
    }
    let few: Vec<Sample> = cfg.few_shot.iter().map(|&i| samples[i].clone()).collect();
    let mut space = match &cfg.space {
        Some(s) => s.clone(),
        None => ParamSpace::for_samples(&few, cfg.norm_order, cfg.connectivity)?,
    };
    space.seed = cfg.seed;
    let smbo = SmboConfig {
        n_init: cfg.search.n_init,
        n_iter: cfg.search.n_iter,
        n_candidates: cfg.search.n_candidates,
        seed: cfg.seed,
        ..Default::default()
    };
    let result = few_shot_optimize(&space, &few, &smbo, exec)?;
    write_history_csv(&result.history, fs::File::create(cfg.out.join("history.csv"))?)?;
    Ok((result.best, Some(result.best_loss)))
}

fn write_metrics(path: &Path, rows: &[SampleRow]) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "split,sample,voxels,supernodes,edges,deleted_voxels,reduction_factor,dice")?;
    for r in rows {
        let dice = r.dice.map_or(String::new(), |d| format!("{d:.6}"));
        writeln!(
            w,
            "{},{},{},{},{},{},{:.3},{}",
            r.split, r.index, r.voxels, r.supernodes, r.edges, r.deleted_voxels, r.reduction, dice
        )?;
    }
    Ok(w.flush()?)
}

fn write_timings(path: &Path, t: &Timings) -> Result<()> {
    let mut w = fs::File::create(path)?;
    writeln!(w, "stage,seconds")?;
    for (s, d) in &t.stages {
        writeln!(w, "{s},{:.6}", d.as_secs_f64())?;
    }
    writeln!(w, "total,{:.6}", t.total().as_secs_f64())?;
    Ok(())
}

/// One size of a scaling benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub voxels: usize,
    /// Median wall time of minor construction.
    pub seconds: f64,
    pub pops: u64,
    pub supernodes: usize,
}

/// Times minor construction on `make(dims)` for each size, `repeats` times each.
pub fn bench_scaling(
    sizes: &[VolumeDims],
    make: impl Fn(VolumeDims) -> Result<Volume>,
    params: &MinorParams,
    repeats: usize,
) -> Result<Vec<BenchRow>> {
    if sizes.len() < 2 || repeats == 0 {
        return Err(Error::InvalidParams("bench needs at least 2 sizes and 1 repeat".into()));
    }
    sizes
        .iter()
        .map(|&dims| {
            let vol = make(dims)?;
            let mut times = Vec::with_capacity(repeats);
            let mut last = None;
            for _ in 0..repeats {
                let t = Instant::now();
                let b = build_minor_with(&vol, params, Exec::Sequential)?;
                times.push(t.elapsed().as_secs_f64());
                last = Some(b);
            }
            times.sort_by(f64::total_cmp);
            let b = last.expect("repeats > 0");
            Ok(BenchRow {
                voxels: dims.voxels(),
                seconds: times[times.len() / 2],
                pops: b.stats.pops,
                supernodes: b.minor.num_nodes(),
            })
        })
        .collect()
}

pub fn write_bench_csv(rows: &[BenchRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "voxels,seconds,pops,supernodes")?;
    for r in rows {
        writeln!(out, "{},{:.6},{},{}", r.voxels, r.seconds, r.pops, r.supernodes)?;
    }
    Ok(())
}
