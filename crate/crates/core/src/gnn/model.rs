use ndarray::{Array2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minor::GraphMinor;
use crate::rng::{rng, substream, DEFAULT_SEED};

fn d_layers() -> usize {
    3
}
fn d_hidden() -> usize {
    128
}
fn d_classes() -> usize {
    2
}
fn d_lr() -> f64 {
    1e-3
}
fn d_epochs() -> usize {
    200
}
fn d_patience() -> usize {
    10
}
fn d_seed() -> u64 {
    DEFAULT_SEED
}
fn d_batch() -> usize {
    1
}
fn d_target() -> u16 {
    1
}

/// Architecture and optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpnnConfig {
    #[serde(default = "d_layers")]
    pub layers: usize,
    #[serde(default = "d_hidden")]
    pub hidden: usize,
    #[serde(default = "d_classes")]
    pub classes: usize,
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default = "d_epochs")]
    pub max_epochs: usize,
    #[serde(default = "d_patience")]
    pub patience: usize,
    #[serde(default = "d_seed")]
    pub seed: u64,
    /// Minors per gradient step.
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    /// Class whose lifted Dice drives early stopping.
    #[serde(default = "d_target")]
    pub target_class: u16,
}

impl Default for MpnnConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl MpnnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.into()));
        if self.layers == 0 || self.hidden == 0 {
            return bad("layers and hidden width must be positive");
        }
        if self.classes < 2 || self.classes > 256 {
            return bad("classes must be in 2..=256");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.patience == 0 || self.batch_size == 0 {
            return bad("patience and batch size must be positive");
        }
        if usize::from(self.target_class) >= self.classes {
            return bad("target class must be below the class count");
        }
        Ok(())
    }
}

/// Per-column standardization of node and edge features, fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub node_mean: Vec<f64>,
    pub node_std: Vec<f64>,
    pub edge_mean: Vec<f64>,
    pub edge_std: Vec<f64>,
}

fn column_stats(cols: usize, rows: impl Iterator<Item = Vec<f64>>) -> (Vec<f64>, Vec<f64>) {
    let mut n = 0usize;
    let mut sum = vec![0.0; cols];
    let mut sq = vec![0.0; cols];
    for r in rows {
        n += 1;
        for (j, v) in r.into_iter().enumerate() {
            sum[j] += v;
            sq[j] += v * v;
        }
    }
    if n == 0 {
        return (vec![0.0; cols], vec![1.0; cols]);
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    let std = sq
        .iter()
        .zip(&mean)
        .map(|(s, m)| {
            let v = (s / n as f64 - m * m).max(0.0).sqrt();
            if v > 1e-12 {
                v
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

impl Normalizer {
    pub fn identity(node_dim: usize, edge_dim: usize) -> Self {
        Self {
            node_mean: vec![0.0; node_dim],
            node_std: vec![1.0; node_dim],
            edge_mean: vec![0.0; edge_dim],
            edge_std: vec![1.0; edge_dim],
        }
    }

    pub fn fit(minors: &[&GraphMinor]) -> Result<Self> {
        let first = minors.first().ok_or_else(|| Error::InvalidParams("no minors to fit a normalizer".into()))?;
        let (dx, df) = (first.node_features.cols(), first.edge_features.cols());
        if minors.iter().any(|m| m.node_features.cols() != dx || m.edge_features.cols() != df) {
            return Err(Error::DimMismatch("minors disagree on feature widths".into()));
        }
        let rows = |pick: fn(&GraphMinor) -> &crate::features::FeatureMatrix| {
            minors
                .iter()
                .flat_map(move |m| {
                    let fm = pick(m);
                    (0..fm.rows).map(move |i| fm.row(i).iter().map(|&v| f64::from(v)).collect())
                })
                .collect::<Vec<Vec<f64>>>()
        };
        let (node_mean, node_std) = column_stats(dx, rows(|m| &m.node_features).into_iter());
        let (edge_mean, edge_std) = column_stats(df, rows(|m| &m.edge_features).into_iter());
        Ok(Self { node_mean, node_std, edge_mean, edge_std })
    }

    fn apply(data: &[f32], rows: usize, mean: &[f64], std: &[f64]) -> Array2<f64> {
        let cols = mean.len();
        Array2::from_shape_fn((rows, cols), |(i, j)| (f64::from(data[i * cols + j]) - mean[j]) / std[j])
    }
}

pub(crate) const PER_LAYER: usize = 7;

/// Edge-conditioned message-passing classifier (GIN with edge features).
///
/// Parameters, in order: node encoder `(w, b)`; per layer edge encoder `(w, b)`,
/// self weight `eps`, MLP `(w1, b1, w2, b2)`; output `(w, b)`. Biases are `1 × n`
/// rows and `eps` is `1 × 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MpnnModel {
    pub config: MpnnConfig,
    pub node_dim: usize,
    pub edge_dim: usize,
    pub normalizer: Normalizer,
    pub(crate) params: Vec<Array2<f64>>,
}

pub fn param_names(layers: usize) -> Vec<String> {
    let mut names = vec!["node_enc.w".to_string(), "node_enc.b".to_string()];
    for l in 0..layers {
        for p in ["edge_enc.w", "edge_enc.b", "eps", "mlp1.w", "mlp1.b", "mlp2.w", "mlp2.b"] {
            names.push(format!("layer{l}.{p}"));
        }
    }
    names.extend(["out.w".to_string(), "out.b".to_string()]);
    names
}

pub(crate) fn param_shapes(c: &MpnnConfig, dx: usize, df: usize) -> Vec<(usize, usize)> {
    let d = c.hidden;
    let mut s = vec![(dx, d), (1, d)];
    for _ in 0..c.layers {
        s.extend([(df, d), (1, d), (1, 1), (d, d), (1, d), (d, d), (1, d)]);
    }
    s.extend([(d, c.classes), (1, c.classes)]);
    s
}

/// Cached activations of one layer.
struct LayerTape {
    h: Array2<f64>,
    e: Array2<f64>,
    /// `h_v + e_uv` for the message into `u` (row per edge), and the reverse.
    pre_in_u: Array2<f64>,
    pre_in_v: Array2<f64>,
    z: Array2<f64>,
    a: Array2<f64>,
}

struct Tape {
    x: Array2<f64>,
    f: Array2<f64>,
    layers: Vec<LayerTape>,
    h_last: Array2<f64>,
    logits: Array2<f64>,
}

fn relu(a: &Array2<f64>) -> Array2<f64> {
    a.mapv(|v| v.max(0.0))
}

fn affine(x: &Array2<f64>, w: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    x.dot(w) + b
}

impl MpnnModel {
    /// Fresh model with uniform `±1/√fan_in` weights, zero biases and `eps = 0`.
    pub fn new(config: MpnnConfig, node_dim: usize, edge_dim: usize, normalizer: Normalizer) -> Result<Self> {
        config.validate()?;
        if normalizer.node_mean.len() != node_dim || normalizer.edge_mean.len() != edge_dim {
            return Err(Error::DimMismatch("normalizer width does not match feature widths".into()));
        }
        let mut r = rng(substream(config.seed, "model-init"));
        let names = param_names(config.layers);
        let params = param_shapes(&config, node_dim, edge_dim)
            .into_iter()
            .zip(&names)
            .map(|((rows, cols), name)| {
                if name.ends_with(".w") {
                    let bound = 1.0 / (rows.max(1) as f64).sqrt();
                    Array2::from_shape_simple_fn((rows, cols), || r.random_range(-bound..bound))
                } else {
                    Array2::zeros((rows, cols))
                }
            })
            .collect();
        Ok(Self { config, node_dim, edge_dim, normalizer, params })
    }

    /// Rebuilds a model from named parameter tensors (checkpoint loading).
    pub fn from_params(
        config: MpnnConfig,
        node_dim: usize,
        edge_dim: usize,
        normalizer: Normalizer,
        params: Vec<Array2<f64>>,
    ) -> Result<Self> {
        config.validate()?;
        let shapes = param_shapes(&config, node_dim, edge_dim);
        if params.len() != shapes.len() || params.iter().zip(&shapes).any(|(p, &s)| p.dim() != s) {
            return Err(Error::DimMismatch("parameter shapes do not match the configuration".into()));
        }
        if params.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::Contract("non-finite parameter".into()));
        }
        Ok(Self { config, node_dim, edge_dim, normalizer, params })
    }

    pub fn params(&self) -> &[Array2<f64>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.params
    }

    pub fn param_names(&self) -> Vec<String> {
        param_names(self.config.layers)
    }

    /// Rounds every parameter to `f32` precision, the checkpoint precision.
    pub fn quantize(&mut self) {
        for p in &mut self.params {
            p.mapv_inplace(|v| f64::from(v as f32));
        }
    }

    fn inputs(&self, m: &GraphMinor) -> Result<(Array2<f64>, Array2<f64>)> {
        if m.node_features.cols() != self.node_dim || m.edge_features.cols() != self.edge_dim {
            return Err(Error::DimMismatch(format!(
                "minor features {}x{} vs model {}x{}",
                m.node_features.cols(),
                m.edge_features.cols(),
                self.node_dim,
                self.edge_dim
            )));
        }
        let n = &self.normalizer;
        Ok((
            Normalizer::apply(&m.node_features.data, m.node_features.rows, &n.node_mean, &n.node_std),
            Normalizer::apply(&m.edge_features.data, m.edge_features.rows, &n.edge_mean, &n.edge_std),
        ))
    }

    fn run(&self, x: Array2<f64>, f: Array2<f64>, edges: &[(u32, u32)]) -> Tape {
        let p = &self.params;
        let mut h = affine(&x, &p[0], &p[1]);
        let mut layers = Vec::with_capacity(self.config.layers);
        for l in 0..self.config.layers {
            let i = 2 + PER_LAYER * l;
            let e = affine(&f, &p[i], &p[i + 1]);
            let eps = p[i + 2][[0, 0]];
            let d = h.ncols();
            let mut pre_in_u = Array2::zeros((edges.len(), d));
            let mut pre_in_v = Array2::zeros((edges.len(), d));
            let mut agg = Array2::<f64>::zeros(h.dim());
            for (k, &(u, v)) in edges.iter().enumerate() {
                let (u, v) = (u as usize, v as usize);
                for c in 0..d {
                    let into_u = h[[v, c]] + e[[k, c]];
                    let into_v = h[[u, c]] + e[[k, c]];
                    pre_in_u[[k, c]] = into_u;
                    pre_in_v[[k, c]] = into_v;
                    agg[[u, c]] += into_u.max(0.0);
                    agg[[v, c]] += into_v.max(0.0);
                }
            }
            let z = &h * (1.0 + eps) + &agg;
            let a = affine(&z, &p[i + 3], &p[i + 4]);
            let next = affine(&relu(&a), &p[i + 5], &p[i + 6]);
            layers.push(LayerTape { h, e, pre_in_u, pre_in_v, z, a });
            h = next;
        }
        let n = p.len();
        let logits = affine(&h, &p[n - 2], &p[n - 1]);
        Tape { x, f, layers, h_last: h, logits }
    }

    /// Class logits, one row per supernode.
    pub fn forward(&self, m: &GraphMinor) -> Result<Array2<f64>> {
        let (x, f) = self.inputs(m)?;
        Ok(self.run(x, f, &m.edges).logits)
    }

    /// Area-weighted cross-entropy of one minor, normalized by `total_weight`
    /// instead of the minor's own area so that batches sum correctly, and its
    /// gradient with respect to every parameter.
    pub fn loss_and_grad(
        &self,
        m: &GraphMinor,
        labels: &[u16],
        weights: &[f64],
        total_weight: f64,
    ) -> Result<(f64, Vec<Array2<f64>>)> {
        let (x, f) = self.inputs(m)?;
        let tape = self.run(x, f, &m.edges);
        let (loss, dlogits) = weighted_ce(&tape.logits, labels, weights, total_weight)?;
        Ok((loss, self.backward(&tape, &m.edges, dlogits)))
    }

    fn backward(&self, tape: &Tape, edges: &[(u32, u32)], dlogits: Array2<f64>) -> Vec<Array2<f64>> {
        let p = &self.params;
        let n = p.len();
        let mut g: Vec<Array2<f64>> = p.iter().map(|t| Array2::zeros(t.dim())).collect();
        g[n - 2] = tape.h_last.t().dot(&dlogits);
        g[n - 1] = dlogits.sum_axis(Axis(0)).insert_axis(Axis(0));
        let mut dh = dlogits.dot(&p[n - 2].t());

        for l in (0..self.config.layers).rev() {
            let i = 2 + PER_LAYER * l;
            let t = &tape.layers[l];
            let r = relu(&t.a);
            g[i + 5] = r.t().dot(&dh);
            g[i + 6] = dh.sum_axis(Axis(0)).insert_axis(Axis(0));
            let mut da = dh.dot(&p[i + 5].t());
            da.zip_mut_with(&t.a, |d, &a| {
                if a <= 0.0 {
                    *d = 0.0
                }
            });
            g[i + 3] = t.z.t().dot(&da);
            g[i + 4] = da.sum_axis(Axis(0)).insert_axis(Axis(0));
            let dz = da.dot(&p[i + 3].t());

            let eps = p[i + 2][[0, 0]];
            g[i + 2][[0, 0]] = (&dz * &t.h).sum();
            let mut dh_in = &dz * (1.0 + eps);
            let d = dz.ncols();
            let mut de = Array2::<f64>::zeros(t.e.dim());
            for (k, &(u, v)) in edges.iter().enumerate() {
                let (u, v) = (u as usize, v as usize);
                for c in 0..d {
                    if t.pre_in_u[[k, c]] > 0.0 {
                        let gz = dz[[u, c]];
                        dh_in[[v, c]] += gz;
                        de[[k, c]] += gz;
                    }
                    if t.pre_in_v[[k, c]] > 0.0 {
                        let gz = dz[[v, c]];
                        dh_in[[u, c]] += gz;
                        de[[k, c]] += gz;
                    }
                }
            }
            g[i] = tape.f.t().dot(&de);
            g[i + 1] = de.sum_axis(Axis(0)).insert_axis(Axis(0));
            dh = dh_in;
        }
        g[0] = tape.x.t().dot(&dh);
        g[1] = dh.sum_axis(Axis(0)).insert_axis(Axis(0));
        g
    }
}

/// `Σ w_u CE(logits_u, y_u) / total` and its gradient with respect to the logits.
fn weighted_ce(logits: &Array2<f64>, labels: &[u16], weights: &[f64], total: f64) -> Result<(f64, Array2<f64>)> {
    let (n, k) = logits.dim();
    if labels.len() != n || weights.len() != n {
        return Err(Error::DimMismatch(format!("{n} logit rows, {} labels, {} weights", labels.len(), weights.len())));
    }
    if let Some(&y) = labels.iter().find(|&&y| usize::from(y) >= k) {
        return Err(Error::InvalidParams(format!("label {y} >= {k} classes")));
    }
    let mut grad = Array2::zeros((n, k));
    let mut loss = 0.0;
    for u in 0..n {
        let row = logits.row(u);
        let mx = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = mx + row.iter().map(|&v| (v - mx).exp()).sum::<f64>().ln();
        let y = usize::from(labels[u]);
        let w = weights[u] / total;
        loss += w * (lse - row[y]);
        for c in 0..k {
            grad[[u, c]] = w * ((row[c] - lse).exp() - f64::from(u8::from(c == y)));
        }
    }
    Ok((loss, grad))
}

/// Area-weighted cross-entropy `Σ a_u CE_u / Σ a_u`.
pub fn loss(logits: &Array2<f64>, labels: &[u16], areas: &[f64]) -> Result<f64> {
    let total: f64 = areas.iter().sum();
    if logits.nrows() == 0 {
        return Ok(0.0);
    }
    if !(total > 0.0) {
        return Err(Error::InvalidParams("total area must be positive".into()));
    }
    Ok(weighted_ce(logits, labels, areas, total)?.0)
}

/// Row-wise argmax, ties to the smaller class.
pub fn argmax_rows(logits: &Array2<f64>) -> Vec<u16> {
    logits
        .rows()
        .into_iter()
        .map(|r| r.iter().enumerate().fold(0, |b, (i, &v)| if v > r[b] { i } else { b }) as u16)
        .collect()
}

pub fn predict(model: &MpnnModel, m: &GraphMinor) -> Result<Vec<u16>> {
    Ok(argmax_rows(&model.forward(m)?))
}
