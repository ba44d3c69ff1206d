use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use semir::boundary_opt::{few_shot_optimize, write_history_csv, ParamSpace, SmboConfig};
use semir::corpus::{load_corpus, write_corpus};
use semir::formats::{sexp, smdl, smin, sprd, svol};
use semir::gnn::{predict, train, LabeledMinor, MpnnConfig};
use semir::lift::{lift, lift_tensor_walk, voxel_dice};
use semir::pipeline::{bench_scaling, run_pipeline, write_bench_csv, PipelineConfig};
use semir::synthetic::{generate_synthetic, Preset};
use semir::{build_minor_with, Connectivity, Error, Exec, MinorParams, NormOrder, Result, VolumeDims};

#[derive(Parser)]
#[command(name = "semir", version, about = "Boundary-aligned graph minors for volumetric segmentation")]
struct Cli {
    /// Root seed; overrides seeds in parameter and config files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for volume-level parallelism (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    SharpContrast,
    Separable,
    Piecewise,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::SharpContrast => Preset::SharpContrast,
            PresetArg::Separable => Preset::Separable,
            PresetArg::Piecewise => Preset::Piecewise,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    L1,
    L2,
    Linf,
}

impl From<NormArg> for NormOrder {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::L1 => NormOrder::L1,
            NormArg::L2 => NormOrder::L2,
            NormArg::Linf => NormOrder::Linf,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic corpus (SVOL volumes and labels plus manifest.json).
    GenSynthetic {
        #[arg(long, value_enum)]
        preset: PresetArg,
        #[arg(long)]
        out: PathBuf,
        /// Number of samples (preset default when omitted).
        #[arg(long)]
        count: Option<usize>,
        /// Also write a pipeline config with default splits.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Tune construction parameters on a few-shot corpus.
    Optimize {
        #[arg(long)]
        few_shot: PathBuf,
        /// ParamSpace JSON; derived from the data when omitted.
        #[arg(long)]
        space: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        n_init: usize,
        #[arg(long, default_value_t = 50)]
        n_iter: usize,
        #[arg(long, default_value_t = 1000)]
        n_candidates: usize,
        #[arg(long, value_enum, default_value = "l2")]
        norm: NormArg,
        #[arg(long, default_value_t = 6)]
        connectivity: u32,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Build the graph minor of one volume.
    BuildMinor {
        #[arg(long)]
        volume: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the minor as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Also write the expanded flag tensor (SEXP).
        #[arg(long)]
        tensor: Option<PathBuf>,
    },
    /// Train the supernode classifier on minors built from two corpora.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// MpnnConfig JSON; defaults otherwise.
        #[arg(long)]
        model_config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Classify the supernodes of a minor (writes SPRD).
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        minor: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Copy supernode predictions onto voxels (writes u8 SVOL).
    Lift {
        #[arg(long)]
        minor: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        background: u16,
        /// Walk this SEXP tensor instead of using the membership array.
        #[arg(long)]
        tensor: Option<PathBuf>,
    },
    /// Voxel Dice of a segmentation against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 1)]
        class: u16,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the full pipeline from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Time minor construction across cube sizes.
    Bench {
        /// Cube side lengths.
        #[arg(long, value_delimiter = ',', default_value = "32,64")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Parameters JSON; psi 10, alpha 50 otherwise.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(fs::write(path, serde_json::to_string_pretty(value)?)?)
}

fn load_params(path: &Path, seed: Option<u64>) -> Result<MinorParams> {
    let mut p: MinorParams = read_json(path)?;
    if let Some(s) = seed {
        p.seed = s;
    }
    p.validate()?;
    Ok(p)
}

fn labeled(dir: &Path, params: &MinorParams) -> Result<Vec<LabeledMinor>> {
    let samples = load_corpus(dir)?;
    let built = Exec::Parallel.map(&samples, |s| build_minor_with(&s.volume, params, Exec::Sequential));
    samples
        .into_iter()
        .zip(built)
        .map(|(s, b)| Ok(LabeledMinor { minor: b?.minor, labels: s.labels }))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.cmd {
        Cmd::GenSynthetic { preset, out, count, config } => {
            let preset = Preset::from(preset);
            let n = count.unwrap_or(preset.default_count());
            let samples = (0..n)
                .map(|i| generate_synthetic(&preset.spec(i, seed.unwrap_or(semir::rng::DEFAULT_SEED))))
                .collect::<Result<Vec<_>>>()?;
            write_corpus(&out, &samples)?;
            if let Some(path) = config {
                let base = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
                let rel = |p: &Path| pathdiff(p, base);
                let mut cfg = PipelineConfig::with_default_splits(rel(&out), PathBuf::from("run"), n);
                cfg.seed = seed.unwrap_or(cfg.seed);
                write_json(&path, &cfg)?;
            }
            println!("wrote {n} samples to {}", out.display());
        }
        Cmd::Optimize { few_shot, space, n_init, n_iter, n_candidates, norm, connectivity, out, history } => {
            let samples = load_corpus(&few_shot)?;
            let conn = Connectivity::try_from(connectivity)?;
            let mut space = match space {
                Some(p) => read_json::<ParamSpace>(&p)?,
                None => ParamSpace::for_samples(&samples, norm.into(), conn)?,
            };
            let mut cfg = SmboConfig { n_init, n_iter, n_candidates, ..Default::default() };
            if let Some(s) = seed {
                cfg.seed = s;
                space.seed = s;
            }
            let r = few_shot_optimize(&space, &samples, &cfg, Exec::Parallel)?;
            write_json(&out, &r.best)?;
            if let Some(h) = history {
                write_history_csv(&r.history, fs::File::create(h)?)?;
            }
            println!("best boundary loss {:.6} (dice {:.6}) at iteration {}", r.best_loss, 1.0 - r.best_loss, r.best_iteration);
        }
        Cmd::BuildMinor { volume, params, out, json, tensor } => {
            let vol = svol::read_volume_file(&volume)?;
            let p = load_params(&params, seed)?;
            let b = build_minor_with(&vol, &p, Exec::Parallel)?;
            smin::write_minor_file(&out, &b.minor)?;
            if let Some(j) = json {
                smin::write_minor_json(&j, &b.minor)?;
            }
            if let Some(t) = tensor {
                sexp::write_tensor_file(&t, &b.tensor)?;
            }
            println!(
                "{} supernodes, {} edges, {} deleted voxels, reduction {:.1}x",
                b.minor.num_nodes(),
                b.minor.num_edges(),
                b.minor.deleted_voxels(),
                b.minor.reduction_factor()
            );
        }
        Cmd::Train { train: train_dir, val, params, out, metrics, model_config, epochs, batch_size } => {
            let p = load_params(&params, seed)?;
            let mut cfg = match model_config {
                Some(path) => read_json::<MpnnConfig>(&path)?,
                None => MpnnConfig::default(),
            };
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.max_epochs = epochs.unwrap_or(cfg.max_epochs);
            cfg.batch_size = batch_size.unwrap_or(cfg.batch_size);
            cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
            let report = train(&labeled(&train_dir, &p)?, &labeled(&val, &p)?, &cfg)?;
            smdl::write_model_file(&out, &report.model)?;
            if let Some(m) = metrics {
                report.write_csv(fs::File::create(m)?)?;
            }
            println!(
                "best validation dice {:.6} at epoch {} (stopped after {})",
                report.best_val_dice, report.best_epoch, report.stopped_epoch
            );
        }
        Cmd::Predict { model, minor, out } => {
            let model = smdl::read_model_file(&model)?;
            let minor = smin::read_minor_file(&minor)?;
            let preds = predict(&model, &minor)?;
            let labels = preds.iter().map(|&c| c as u8).collect();
            sprd::write_predictions_file(&out, &sprd::NodePredictions::new(model.config.classes, labels)?)?;
        }
        Cmd::Lift { minor, pred, out, background, tensor } => {
            let minor = smin::read_minor_file(&minor)?;
            let preds: Vec<u16> = sprd::read_predictions_file(&pred)?.labels.into_iter().map(u16::from).collect();
            let seg = match tensor {
                Some(t) => lift_tensor_walk(&minor, &preds, &sexp::read_tensor_file(&t)?, background)?,
                None => lift(&minor, &preds, background)?,
            };
            svol::write_prediction_file(&out, &seg)?;
        }
        Cmd::Eval { pred, gt, class, report } => {
            let p = svol::read_labels_file(&pred)?;
            let g = svol::read_labels_file(&gt)?;
            let dice = voxel_dice(&p, &g, class)?;
            if let Some(r) = report {
                write_json(&r, &serde_json::json!({ "class": class, "dice": dice, "voxels": g.dims().voxels() }))?;
            }
            println!("dice {dice:.6}");
        }
        Cmd::Run { config } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let (summary, timings) = run_pipeline(&cfg)?;
            println!(
                "dice {:.6} on {} split, mean reduction {:.1}x, {:.2}s",
                summary.dice,
                summary.eval_split,
                summary.mean_reduction_factor,
                timings.total().as_secs_f64()
            );
        }
        Cmd::Bench { sizes, repeats, params, out } => {
            let p = match params {
                Some(path) => load_params(&path, seed)?,
                None => MinorParams::new(10.0, 50.0),
            };
            let dims = sizes.iter().map(|&s| VolumeDims::spatial(s, s, s)).collect::<Result<Vec<_>>>()?;
            let make = |d: VolumeDims| {
                let spec = semir::synthetic::SyntheticSpec { dims: d.shape(), ..Preset::Piecewise.spec(0, seed.unwrap_or(42)) };
                generate_synthetic(&spec).map(|s| s.volume)
            };
            let rows = bench_scaling(&dims, make, &p, repeats)?;
            match out {
                Some(path) => write_bench_csv(&rows, fs::File::create(path)?)?,
                None => write_bench_csv(&rows, std::io::stdout().lock())?,
            }
        }
    }
    Ok(())
}

/// `path` relative to `base` when `path` lies under it, else unchanged.
fn pathdiff(path: &Path, base: &Path) -> PathBuf {
    let abs = |p: &Path| fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    let (p, b) = (abs(path), abs(base));
    p.strip_prefix(&b).map(Path::to_path_buf).unwrap_or(p)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
