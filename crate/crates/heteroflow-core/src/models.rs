//! Trainable graph classifiers/regressors in three families.
//!
//! - `gcn`: standard graph convolution `H <- rho(Asl H W_l)` on the
//!   self-loop-augmented operator, unconstrained per-layer weights.
//! - `gf_gcn`: discretized gradient flow `H <- H + tau Ahat H W` with one
//!   shared symmetric `W` (re-symmetrized after every optimizer step) and a
//!   linear input embedding; identity activation keeps the flow linear.
//! - `adaptive_mix`: three filter channels per layer (low-pass `Ahat`,
//!   high-pass `I - Ahat`, identity) mixed by a learned softmax over
//!   per-layer logits.
//!
//! All gradients are analytic reverse-mode over the fixed computation graph;
//! Adam is the standard bias-corrected update. Readout is mean pooling, the
//! head is a linear map to one output. Per-graph forward/backward passes run
//! in parallel across a batch and reduce in index order.

use crate::datagen::{synthetic_regression_target, SyntheticGraphRecord};
use crate::graph::{FeatureMatrix, Graph};
use crate::par;
use crate::rng::stream_rng;
use crate::spectral::{normalized_adjacency, normalized_adjacency_self_loops};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("prediction and target shapes differ: {0} vs {1}")]
    ShapeMismatch(usize, usize),
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "gcn")]
    Gcn,
    #[serde(rename = "gf_gcn")]
    GfGcn,
    #[serde(rename = "adaptive_mix")]
    AdaptiveMix,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Gcn, Family::GfGcn, Family::AdaptiveMix];

    pub fn name(self) -> &'static str {
        match self {
            Family::Gcn => "gcn",
            Family::GfGcn => "gf_gcn",
            Family::AdaptiveMix => "adaptive_mix",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.name() == s)
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    #[serde(rename = "relu")]
    Relu,
    #[serde(rename = "identity")]
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub family: Family,
    pub layers: usize,
    pub input_dim: usize,
    pub hidden: usize,
    /// Step size of one gf_gcn layer.
    pub gf_tau: f64,
    pub activation: Activation,
}

impl ModelConfig {
    /// Default architecture: 4 layers, widths chosen so the three families
    /// land at comparable parameter counts.
    pub fn standard(family: Family, input_dim: usize) -> Self {
        let (hidden, activation) = match family {
            Family::Gcn => (16, Activation::Relu),
            Family::GfGcn => (26, Activation::Identity),
            Family::AdaptiveMix => (9, Activation::Relu),
        };
        Self {
            family,
            layers: 4,
            input_dim,
            hidden,
            gf_tau: 0.2,
            activation,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.layers < 1 || self.input_dim < 1 || self.hidden < 1 {
            return Err(ModelError::InvalidConfig(
                "layers, input_dim, hidden must be >= 1".into(),
            ));
        }
        if self.family == Family::GfGcn {
            if self.gf_tau <= 0.0 {
                return Err(ModelError::InvalidConfig("gf_tau must be positive".into()));
            }
            if self.activation != Activation::Identity {
                return Err(ModelError::InvalidConfig(
                    "gf_gcn uses the identity activation".into(),
                ));
            }
        }
        Ok(())
    }

    /// Per-layer matrix dimensions: input_dim -> hidden -> ... -> hidden.
    fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim];
        d.extend(std::iter::repeat(self.hidden).take(self.layers));
        d
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct TensorSpec {
    name: String,
    rows: usize,
    cols: usize,
    #[serde(skip)]
    offset: usize,
}

fn build_layout(config: &ModelConfig) -> (Vec<TensorSpec>, usize) {
    let dims = config.dims();
    let mut specs: Vec<TensorSpec> = Vec::new();
    let push = |name: String, rows: usize, cols: usize, specs: &mut Vec<TensorSpec>| {
        specs.push(TensorSpec {
            name,
            rows,
            cols,
            offset: 0,
        });
    };
    match config.family {
        Family::Gcn => {
            for l in 0..config.layers {
                push(format!("w{l}"), dims[l], dims[l + 1], &mut specs);
            }
        }
        Family::GfGcn => {
            push("embed".into(), config.input_dim, config.hidden, &mut specs);
            push("w_shared".into(), config.hidden, config.hidden, &mut specs);
        }
        Family::AdaptiveMix => {
            for l in 0..config.layers {
                push(format!("low{l}"), dims[l], dims[l + 1], &mut specs);
                push(format!("high{l}"), dims[l], dims[l + 1], &mut specs);
                push(format!("id{l}"), dims[l], dims[l + 1], &mut specs);
                push(format!("alpha{l}"), 1, 3, &mut specs);
            }
        }
    }
    push("head_w".into(), config.hidden, 1, &mut specs);
    push("head_b".into(), 1, 1, &mut specs);
    let mut offset = 0;
    for s in &mut specs {
        s.offset = offset;
        offset += s.rows * s.cols;
    }
    (specs, offset)
}

/// Trainable parameters stored as one flat vector with a named-tensor layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    layout: Vec<TensorSpec>,
    flat: Vec<f64>,
}

impl ModelParams {
    /// Gaussian initialization scaled by `1/sqrt(fan_in)`; mixing logits and
    /// the head bias start at zero. Each tensor draws from its own stream.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let (layout, total) = build_layout(&config);
        let mut flat = vec![0.0; total];
        for (idx, spec) in layout.iter().enumerate() {
            if spec.name.starts_with("alpha") || spec.name == "head_b" {
                continue;
            }
            let mut rng = stream_rng(seed, idx as u64);
            let scale = 1.0 / (spec.rows as f64).sqrt();
            for k in 0..spec.rows * spec.cols {
                let z: f64 = rng.sample(StandardNormal);
                flat[spec.offset + k] = scale * z;
            }
        }
        let mut params = Self {
            config,
            layout,
            flat,
        };
        if config.family == Family::GfGcn {
            params.symmetrize_shared();
        }
        Ok(params)
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    /// Raw parameter vector (layout order).
    pub fn flat(&self) -> &[f64] {
        &self.flat
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.flat
    }

    fn spec(&self, name: &str) -> &TensorSpec {
        self.layout
            .iter()
            .find(|s| s.name == name)
            .unwrap_or_else(|| panic!("unknown tensor {name}"))
    }

    pub fn tensor(&self, name: &str) -> ndarray::ArrayView2<'_, f64> {
        let s = self.spec(name);
        ndarray::ArrayView2::from_shape(
            (s.rows, s.cols),
            &self.flat[s.offset..s.offset + s.rows * s.cols],
        )
        .expect("layout shape")
    }

    pub fn set_tensor(&mut self, name: &str, value: &Array2<f64>) {
        let s = self.spec(name).clone();
        assert_eq!((s.rows, s.cols), value.dim(), "tensor {name} shape");
        for (k, &x) in value.iter().enumerate() {
            self.flat[s.offset + k] = x;
        }
    }

    /// `(W + W^T) / 2` on the shared gf_gcn weight.
    fn symmetrize_shared(&mut self) {
        let s = self.spec("w_shared").clone();
        let h = s.rows;
        for i in 0..h {
            for j in (i + 1)..h {
                let a = self.flat[s.offset + i * h + j];
                let b = self.flat[s.offset + j * h + i];
                let avg = 0.5 * (a + b);
                self.flat[s.offset + i * h + j] = avg;
                self.flat[s.offset + j * h + i] = avg;
            }
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let tensors: Vec<serde_json::Value> = self
            .layout
            .iter()
            .map(|s| {
                serde_json::json!({
                    "name": s.name,
                    "rows": s.rows,
                    "cols": s.cols,
                    "data": &self.flat[s.offset..s.offset + s.rows * s.cols],
                })
            })
            .collect();
        serde_json::json!({ "config": self.config, "tensors": tensors })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, ModelError> {
        let config: ModelConfig = serde_json::from_value(value["config"].clone())
            .map_err(|e| ModelError::BadCheckpoint(e.to_string()))?;
        let (layout, total) = build_layout(&config);
        let mut flat = vec![0.0; total];
        let tensors = value["tensors"]
            .as_array()
            .ok_or_else(|| ModelError::BadCheckpoint("missing tensors".into()))?;
        if tensors.len() != layout.len() {
            return Err(ModelError::BadCheckpoint(format!(
                "expected {} tensors, got {}",
                layout.len(),
                tensors.len()
            )));
        }
        for (spec, t) in layout.iter().zip(tensors) {
            let name = t["name"].as_str().unwrap_or_default();
            if name != spec.name {
                return Err(ModelError::BadCheckpoint(format!(
                    "tensor {} out of order (expected {})",
                    name, spec.name
                )));
            }
            let data: Vec<f64> = serde_json::from_value(t["data"].clone())
                .map_err(|e| ModelError::BadCheckpoint(e.to_string()))?;
            if data.len() != spec.rows * spec.cols {
                return Err(ModelError::BadCheckpoint(format!(
                    "tensor {} has {} values, expected {}",
                    spec.name,
                    data.len(),
                    spec.rows * spec.cols
                )));
            }
            flat[spec.offset..spec.offset + data.len()].copy_from_slice(&data);
        }
        Ok(Self {
            config,
            layout,
            flat,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "binary_classification")]
    BinaryClassification,
    #[serde(rename = "regression")]
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    #[serde(rename = "logistic")]
    Logistic,
    #[serde(rename = "mse")]
    Mse,
}

impl Task {
    pub fn loss_kind(self) -> LossKind {
        match self {
            Task::BinaryClassification => LossKind::Logistic,
            Task::Regression => LossKind::Mse,
        }
    }
}

/// `ln(1 + exp(-t))`, stable for large |t|.
fn log1p_exp_neg(t: f64) -> f64 {
    if t >= 0.0 {
        (-t).exp().ln_1p()
    } else {
        -t + t.exp().ln_1p()
    }
}

fn per_example_loss(pred: f64, target: f64, kind: LossKind) -> f64 {
    match kind {
        // targets in the {-1, +1} convention
        LossKind::Logistic => log1p_exp_neg(pred * target),
        LossKind::Mse => (pred - target) * (pred - target),
    }
}

fn per_example_dloss(pred: f64, target: f64, kind: LossKind) -> f64 {
    match kind {
        LossKind::Logistic => -target / (1.0 + (pred * target).exp()),
        LossKind::Mse => 2.0 * (pred - target),
    }
}

/// Mean loss over a batch of predictions.
pub fn loss(predictions: &[f64], targets: &[f64], kind: LossKind) -> Result<f64, ModelError> {
    if predictions.len() != targets.len() {
        return Err(ModelError::ShapeMismatch(predictions.len(), targets.len()));
    }
    if predictions.is_empty() {
        return Err(ModelError::ShapeMismatch(0, 0));
    }
    let total: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(&p, &t)| per_example_loss(p, t, kind))
        .sum();
    Ok(total / predictions.len() as f64)
}

/// One graph prepared for a model family: propagation operator, input
/// features, and training target.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    pub op: Array2<f64>,
    pub features: Array2<f64>,
    pub target: f64,
}

/// Build the family-specific operator: self-loop-augmented for `gcn`,
/// self-loop-free for `gf_gcn` and `adaptive_mix`.
pub fn prepare_graph(
    family: Family,
    g: &Graph,
    f0: &FeatureMatrix,
    target: f64,
) -> PreparedGraph {
    let op = match family {
        Family::Gcn => normalized_adjacency_self_loops(g),
        Family::GfGcn | Family::AdaptiveMix => normalized_adjacency(g),
    };
    PreparedGraph {
        op,
        features: f0.values().clone(),
        target,
    }
}

/// Classification target in the (-1, +1) convention.
pub fn classification_target(record: &SyntheticGraphRecord) -> f64 {
    2.0 * record.graph_label as f64 - 1.0
}

/// Prepare the records selected by `indices` for a family and task.
pub fn prepare_synthetic(
    records: &[SyntheticGraphRecord],
    indices: &[usize],
    family: Family,
    task: Task,
) -> Vec<PreparedGraph> {
    let prepared = par::map_slice(indices, |&i| {
        let r = &records[i];
        let target = match task {
            Task::BinaryClassification => classification_target(r),
            Task::Regression => synthetic_regression_target(r),
        };
        prepare_graph(family, &r.graph, &r.features, target)
    });
    prepared
}

fn softmax3(a: [f64; 3]) -> [f64; 3] {
    let m = a[0].max(a[1]).max(a[2]);
    let e = [(a[0] - m).exp(), (a[1] - m).exp(), (a[2] - m).exp()];
    let s = e[0] + e[1] + e[2];
    [e[0] / s, e[1] / s, e[2] / s]
}

fn relu(z: &Array2<f64>) -> Array2<f64> {
    z.mapv(|x| x.max(0.0))
}

struct LayerCache {
    h: Array2<f64>,
    /// `op * h`
    prop: Array2<f64>,
    /// pre-activation
    z: Array2<f64>,
    /// adaptive channels (C1, C2, C3) and softmax mix
    channels: Option<([Array2<f64>; 3], [f64; 3])>,
}

struct ForwardPass {
    layers: Vec<LayerCache>,
    /// final node embeddings H_L
    out: Array2<f64>,
    /// mean-pooled embedding
    pooled: Array1<f64>,
    prediction: f64,
}

fn apply_activation(cfg: &ModelConfig, z: Array2<f64>) -> Array2<f64> {
    match cfg.activation {
        Activation::Relu => relu(&z),
        Activation::Identity => z,
    }
}

fn run_forward(params: &ModelParams, item: &PreparedGraph) -> ForwardPass {
    let cfg = &params.config;
    let op = &item.op;
    let mut layers = Vec::with_capacity(cfg.layers);
    let mut h = match cfg.family {
        Family::GfGcn => item.features.dot(&params.tensor("embed")),
        _ => item.features.clone(),
    };
    for l in 0..cfg.layers {
        let prop = op.dot(&h);
        let (z, channels) = match cfg.family {
            Family::Gcn => (prop.dot(&params.tensor(&format!("w{l}"))), None),
            Family::GfGcn => {
                let w = params.tensor("w_shared");
                (&h + &(prop.dot(&w) * cfg.gf_tau), None)
            }
            Family::AdaptiveMix => {
                let wl = params.tensor(&format!("low{l}"));
                let wh = params.tensor(&format!("high{l}"));
                let wi = params.tensor(&format!("id{l}"));
                let alpha = params.tensor(&format!("alpha{l}"));
                let m = softmax3([alpha[(0, 0)], alpha[(0, 1)], alpha[(0, 2)]]);
                let c1 = prop.dot(&wl);
                let c2 = (&h - &prop).dot(&wh);
                let c3 = h.dot(&wi);
                let z = &(&c1 * m[0]) + &(&c2 * m[1]) + &(c3.clone() * m[2]);
                (z, Some(([c1, c2, c3], m)))
            }
        };
        let next = match cfg.family {
            // the gradient-flow family is linear by construction
            Family::GfGcn => z.clone(),
            _ => apply_activation(cfg, z.clone()),
        };
        layers.push(LayerCache {
            h,
            prop,
            z,
            channels,
        });
        h = next;
    }
    let n = h.nrows() as f64;
    let pooled = h.t().dot(&Array1::from_elem(h.nrows(), 1.0 / n));
    let head_w = params.tensor("head_w");
    let mut prediction = params.tensor("head_b")[(0, 0)];
    for (c, &v) in pooled.iter().enumerate() {
        prediction += v * head_w[(c, 0)];
    }
    ForwardPass {
        layers,
        out: h,
        pooled,
        prediction,
    }
}

/// Forward evaluation: node embeddings, pooled graph embedding, prediction.
pub struct ForwardResult {
    pub node_embeddings: Array2<f64>,
    pub graph_embedding: Vec<f64>,
    pub prediction: f64,
}

pub fn forward(
    params: &ModelParams,
    g: &Graph,
    f0: &FeatureMatrix,
) -> Result<ForwardResult, ModelError> {
    if f0.n() != g.n() {
        return Err(ModelError::DimensionMismatch(format!(
            "features have {} rows, graph has {} nodes",
            f0.n(),
            g.n()
        )));
    }
    if f0.dim() != params.config.input_dim {
        return Err(ModelError::DimensionMismatch(format!(
            "feature width {} != input_dim {}",
            f0.dim(),
            params.config.input_dim
        )));
    }
    let item = prepare_graph(params.config.family, g, f0, 0.0);
    let pass = run_forward(params, &item);
    Ok(ForwardResult {
        node_embeddings: pass.out,
        graph_embedding: pass.pooled.to_vec(),
        prediction: pass.prediction,
    })
}

fn relu_mask_mul(dz: &mut Array2<f64>, z: &Array2<f64>) {
    for (d, &zv) in dz.iter_mut().zip(z.iter()) {
        if zv <= 0.0 {
            *d = 0.0;
        }
    }
}

/// Per-graph loss and gradient (flat layout), reverse-mode.
fn grad_single(
    params: &ModelParams,
    item: &PreparedGraph,
    kind: LossKind,
) -> (f64, f64, Vec<f64>) {
    let cfg = &params.config;
    let pass = run_forward(params, item);
    let loss = per_example_loss(pass.prediction, item.target, kind);
    let dy = per_example_dloss(pass.prediction, item.target, kind);

    let mut grad = vec![0.0; params.len()];
    let write = |name: &str, value: &Array2<f64>, grad: &mut Vec<f64>| {
        let s = params.spec(name);
        debug_assert_eq!((s.rows, s.cols), value.dim());
        for (k, &x) in value.iter().enumerate() {
            grad[s.offset + k] += x;
        }
    };

    // head
    let n = pass.out.nrows() as f64;
    let head_w = params.tensor("head_w").to_owned();
    let dhead_w =
        Array2::from_shape_fn((cfg.hidden, 1), |(c, _)| dy * pass.pooled[c]);
    write("head_w", &dhead_w, &mut grad);
    write("head_b", &Array2::from_elem((1, 1), dy), &mut grad);
    // dH_L: every row gets dy * head_w / n
    let mut dh = Array2::from_shape_fn(pass.out.dim(), |(_, c)| dy * head_w[(c, 0)] / n);

    let op = &item.op;
    for l in (0..cfg.layers).rev() {
        let cache = &pass.layers[l];
        match cfg.family {
            Family::Gcn => {
                let mut dz = dh;
                if cfg.activation == Activation::Relu {
                    relu_mask_mul(&mut dz, &cache.z);
                }
                let w = params.tensor(&format!("w{l}"));
                write(&format!("w{l}"), &cache.prop.t().dot(&dz), &mut grad);
                dh = op.dot(&dz.dot(&w.t()));
            }
            Family::GfGcn => {
                let w = params.tensor("w_shared");
                write(
                    "w_shared",
                    &(cache.prop.t().dot(&dh) * cfg.gf_tau),
                    &mut grad,
                );
                let back = op.dot(&dh.dot(&w.t())) * cfg.gf_tau;
                dh = &dh + &back;
            }
            Family::AdaptiveMix => {
                let mut dz = dh;
                if cfg.activation == Activation::Relu {
                    relu_mask_mul(&mut dz, &cache.z);
                }
                let ([c1, c2, c3], m) = cache.channels.as_ref().expect("adaptive cache");
                let s = [
                    c1.iter().zip(dz.iter()).map(|(a, b)| a * b).sum::<f64>(),
                    c2.iter().zip(dz.iter()).map(|(a, b)| a * b).sum::<f64>(),
                    c3.iter().zip(dz.iter()).map(|(a, b)| a * b).sum::<f64>(),
                ];
                let dot = m[0] * s[0] + m[1] * s[1] + m[2] * s[2];
                let dalpha = Array2::from_shape_fn((1, 3), |(_, k)| m[k] * (s[k] - dot));
                write(&format!("alpha{l}"), &dalpha, &mut grad);

                let wl = params.tensor(&format!("low{l}"));
                let wh = params.tensor(&format!("high{l}"));
                let wi = params.tensor(&format!("id{l}"));
                let high_in = &cache.h - &cache.prop;
                write(
                    &format!("low{l}"),
                    &(cache.prop.t().dot(&dz) * m[0]),
                    &mut grad,
                );
                write(&format!("high{l}"), &(high_in.t().dot(&dz) * m[1]), &mut grad);
                write(&format!("id{l}"), &(cache.h.t().dot(&dz) * m[2]), &mut grad);

                let low_back = op.dot(&dz.dot(&wl.t())) * m[0];
                let dzwh = dz.dot(&wh.t());
                let high_back = (&dzwh - &op.dot(&dzwh)) * m[1];
                let id_back = dz.dot(&wi.t()) * m[2];
                dh = &(&low_back + &high_back) + &id_back;
            }
        }
    }
    if cfg.family == Family::GfGcn {
        write("embed", &item.features.t().dot(&dh), &mut grad);
    }
    (loss, pass.prediction, grad)
}

/// Mean loss and mean gradient over a batch; parallel across graphs with an
/// index-order reduction.
pub fn grad(
    params: &ModelParams,
    batch: &[PreparedGraph],
    kind: LossKind,
) -> Result<(f64, Vec<f64>), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::ShapeMismatch(0, 0));
    }
    let parts = par::map_slice(batch, |item| grad_single(params, item, kind));
    let scale = 1.0 / batch.len() as f64;
    let mut total_loss = 0.0;
    let mut total_grad = vec![0.0; params.len()];
    for (l, _, g) in &parts {
        total_loss += l;
        for (acc, x) in total_grad.iter_mut().zip(g) {
            *acc += x;
        }
    }
    total_loss *= scale;
    for x in &mut total_grad {
        *x *= scale;
    }
    Ok((total_loss, total_grad))
}

/// Adam moment estimates (one slot per parameter) and step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// Bias-corrected Adam update; gf_gcn's shared weight is re-symmetrized
/// afterwards so its symmetry invariant survives every step.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
) -> Result<(), ModelError> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(ModelError::ShapeMismatch(grads.len(), params.len()));
    }
    state.t += 1;
    let t = state.t as f64;
    let bc1 = 1.0 - ADAM_BETA1.powf(t);
    let bc2 = 1.0 - ADAM_BETA2.powf(t);
    for i in 0..grads.len() {
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * grads[i];
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * grads[i] * grads[i];
        let mhat = state.m[i] / bc1;
        let vhat = state.v[i] / bc2;
        params.flat_mut()[i] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
    }
    if params.config.family == Family::GfGcn {
        params.symmetrize_shared();
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub task: Task,
}

impl TrainConfig {
    /// Synthetic-task defaults: lr 0.01, Adam, logistic loss.
    pub fn synthetic(seed: u64) -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 300,
            seed,
            task: Task::BinaryClassification,
        }
    }

    /// Real-world-style regression defaults: lr 0.001, MSE.
    pub fn regression(seed: u64) -> Self {
        Self {
            learning_rate: 0.001,
            epochs: 300,
            seed,
            task: Task::Regression,
        }
    }
}

/// Prepared dataset splits for one training run.
pub struct TrainData {
    pub train: Vec<PreparedGraph>,
    pub val: Vec<PreparedGraph>,
    pub test: Vec<PreparedGraph>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub family: Family,
    pub seed: u64,
    pub task: Task,
    /// Loss on the training set at the start of each epoch.
    pub train_loss: Vec<f64>,
    /// Validation loss before training and after each epoch.
    pub val_loss: Vec<f64>,
    /// Index into `val_loss` of the selected model (0 = initialization).
    pub selected_epoch: usize,
    /// Accuracy for classification, MSE for regression, on the test set.
    pub test_metric: f64,
    pub test_predictions: Vec<f64>,
    pub test_embeddings: Vec<Vec<f64>>,
}

fn evaluate(params: &ModelParams, items: &[PreparedGraph]) -> Vec<(f64, Vec<f64>)> {
    par::map_slice(items, |item| {
        let pass = run_forward(params, item);
        (pass.prediction, pass.pooled.to_vec())
    })
}

fn eval_loss(params: &ModelParams, items: &[PreparedGraph], kind: LossKind) -> f64 {
    let outs = evaluate(params, items);
    let total: f64 = outs
        .iter()
        .zip(items)
        .map(|((p, _), item)| per_example_loss(*p, item.target, kind))
        .sum();
    total / items.len() as f64
}

/// Full-batch training with best-validation-epoch selection.
///
/// Deterministic for a fixed config: initialization comes from the seed, the
/// epoch loop is sequential, and batch reductions are index-ordered.
pub fn train(
    model: ModelConfig,
    data: &TrainData,
    cfg: &TrainConfig,
) -> Result<(TrainReport, ModelParams), ModelError> {
    if data.train.is_empty() || data.val.is_empty() || data.test.is_empty() {
        return Err(ModelError::InvalidConfig("empty split".into()));
    }
    if !(cfg.learning_rate >= 0.0) {
        return Err(ModelError::InvalidConfig(
            "learning rate must be nonnegative".into(),
        ));
    }
    let kind = cfg.task.loss_kind();
    let mut params = ModelParams::init(model, cfg.seed)?;
    let mut adam = AdamState::new(params.len());

    let mut report = TrainReport {
        family: model.family,
        seed: cfg.seed,
        task: cfg.task,
        train_loss: Vec::with_capacity(cfg.epochs),
        val_loss: Vec::with_capacity(cfg.epochs + 1),
        selected_epoch: 0,
        test_metric: 0.0,
        test_predictions: vec![],
        test_embeddings: vec![],
    };

    let initial_val = eval_loss(&params, &data.val, kind);
    if !initial_val.is_finite() {
        return Err(ModelError::NonFiniteLoss { epoch: 0 });
    }
    report.val_loss.push(initial_val);
    let mut best = (initial_val, params.clone(), 0usize);

    for epoch in 1..=cfg.epochs {
        let (train_loss, g) = grad(&params, &data.train, kind)?;
        if !train_loss.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch });
        }
        report.train_loss.push(train_loss);
        adam_step(&mut params, &g, &mut adam, cfg.learning_rate)?;
        let val = eval_loss(&params, &data.val, kind);
        if !val.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch });
        }
        report.val_loss.push(val);
        if val < best.0 {
            best = (val, params.clone(), epoch);
        }
    }

    let (_, best_params, selected) = best;
    report.selected_epoch = selected;
    let test_out = evaluate(&best_params, &data.test);
    report.test_predictions = test_out.iter().map(|(p, _)| *p).collect();
    report.test_embeddings = test_out.into_iter().map(|(_, e)| e).collect();
    report.test_metric = match cfg.task {
        Task::BinaryClassification => {
            let correct = report
                .test_predictions
                .iter()
                .zip(&data.test)
                .filter(|(&p, item)| (p >= 0.0) == (item.target >= 0.0))
                .count();
            correct as f64 / data.test.len() as f64
        }
        Task::Regression => {
            let targets: Vec<f64> = data.test.iter().map(|i| i.target).collect();
            loss(&report.test_predictions, &targets, LossKind::Mse)?
        }
    };
    Ok((report, best_params))
}

/// Graph embeddings for prepared graphs, in order.
pub fn embed_graphs(params: &ModelParams, items: &[PreparedGraph]) -> Vec<Vec<f64>> {
    evaluate(params, items).into_iter().map(|(_, e)| e).collect()
}

/// Graph embeddings straight from records.
pub fn embed_records(
    params: &ModelParams,
    records: &[SyntheticGraphRecord],
) -> Vec<Vec<f64>> {
    let items = par::map_slice(records, |r| {
        prepare_graph(params.config.family, &r.graph, &r.features, 0.0)
    });
    embed_graphs(params, &items)
}

/// Max relative error between analytic and central-finite-difference
/// gradients at the given coordinates.
pub fn gradient_check(
    params: &ModelParams,
    item: &PreparedGraph,
    kind: LossKind,
    coords: &[usize],
    step: f64,
) -> f64 {
    let (_, _, analytic) = grad_single(params, item, kind);
    let mut worst = 0.0f64;
    for &c in coords {
        let mut plus = params.clone();
        plus.flat_mut()[c] += step;
        let (lp, _, _) = grad_single(&plus, item, kind);
        let mut minus = params.clone();
        minus.flat_mut()[c] -= step;
        let (lm, _, _) = grad_single(&minus, item, kind);
        let fd = (lp - lm) / (2.0 * step);
        let a = analytic[c];
        let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1.0);
        worst = worst.max(rel);
    }
    worst
}
