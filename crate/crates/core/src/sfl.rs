//! The gated fusion network and its trainer.
//!
//! Architecture, per row with embedding `x` (D-dim) and structure features
//! `s` (4-dim):
//!
//! ```text
//! G = sigmoid(W_g s + b_g)          gate, D-dim, each component in (0,1)
//! F = x ⊙ G                         Hadamard modulation of the embedding
//! p = sigmoid(w_c · F + b_c)        P(Class 1)
//! ```
//!
//! Training minimizes mean binary cross-entropy with analytic gradients and
//! Adam. With `δ = p − y` the per-row gradients are `δ` for the head bias,
//! `δ·F` for the head weights, and `t = δ·(w_c ⊙ x ⊙ G ⊙ (1−G))` for the
//! gate path (`t` outer `s` for the gate weights, `t` for the gate bias).
//!
//! Batch reductions use compensated accumulation ([`crate::accum`]), so the
//! full-batch gradient is invariant to row order. Everything is f64 and
//! seeded; equal config and data give bit-identical results.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::accum::Sum2;
use crate::features::{ScalerParams, STRUCT_DIM};

/// Probability clip applied inside the training loss only.
pub const LOSS_CLIP: f64 = 1e-12;
/// Magic bytes of the model blob format.
pub const MODEL_MAGIC: &[u8; 4] = b"SFLM";

#[derive(Debug, Error)]
pub enum SflError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("training requires both classes in the training data")]
    SingleClass,
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed model file: {message}")]
    MalformedModel { path: PathBuf, message: String },
    #[error("{path}: sidecar error: {message}")]
    Sidecar { path: PathBuf, message: String },
}

/// Trainable state of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct SflParams {
    /// W_g, D×4.
    pub gate_weights: Array2<f64>,
    /// b_g, D.
    pub gate_bias: Array1<f64>,
    /// w_c, D.
    pub head_weights: Array1<f64>,
    /// b_c.
    pub head_bias: f64,
}

impl SflParams {
    /// All-zero parameters (gate 0.5 everywhere, output 0.5 everywhere).
    pub fn zeros(d: usize) -> Self {
        Self {
            gate_weights: Array2::zeros((d, STRUCT_DIM)),
            gate_bias: Array1::zeros(d),
            head_weights: Array1::zeros(d),
            head_bias: 0.0,
        }
    }

    /// Glorot-uniform weights, zero biases. Draw order is fixed: gate
    /// weights row-major, then head weights.
    pub fn glorot_init(d: usize, rng: &mut impl Rng) -> Self {
        let mut params = Self::zeros(d);
        let gate_limit = (6.0 / (STRUCT_DIM + d) as f64).sqrt();
        for w in params.gate_weights.iter_mut() {
            *w = rng.random_range(-gate_limit..=gate_limit);
        }
        let head_limit = (6.0 / (d + 1) as f64).sqrt();
        for w in params.head_weights.iter_mut() {
            *w = rng.random_range(-head_limit..=head_limit);
        }
        params
    }

    pub fn deep_dim(&self) -> usize {
        self.head_weights.len()
    }
}

/// Gradients; shapes mirror [`SflParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct SflGradients {
    pub gate_weights: Array2<f64>,
    pub gate_bias: Array1<f64>,
    pub head_weights: Array1<f64>,
    pub head_bias: f64,
}

/// Training hyperparameters. Defaults: Adam(0.9, 0.999, 1e-8), learning
/// rate 1e-3, batch 256, up to 50 epochs, patience 5 on a 10% validation
/// carve-out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop once validation loss has failed to improve for more than this
    /// many consecutive epochs.
    pub early_stop_patience: usize,
    /// Fraction of training rows carved out for early stopping; 0 monitors
    /// the training loss instead.
    pub validation_fraction: f64,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 256,
            max_epochs: 50,
            early_stop_patience: 5,
            validation_fraction: 0.1,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub(crate) fn validate(&self) -> Result<(), SflError> {
        let bad = |msg: String| Err(SflError::InvalidConfig(msg));
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return bad(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!(
                "validation_fraction must lie in [0,1), got {}",
                self.validation_fraction
            ));
        }
        for (name, beta) in [
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
        ] {
            if !(0.0..1.0).contains(&beta) {
                return bad(format!("{name} must lie in [0,1), got {beta}"));
            }
        }
        if !self.adam_epsilon.is_finite() || self.adam_epsilon <= 0.0 {
            return bad(format!(
                "adam_epsilon must be positive, got {}",
                self.adam_epsilon
            ));
        }
        Ok(())
    }
}

/// Loss history of one training run. Epoch indices are 0-based. When
/// validation_fraction is 0, `val_losses` records the monitored training
/// loss so the two series always have equal length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub train_losses: Vec<f64>,
    pub val_losses: Vec<f64>,
    pub epochs_run: usize,
    pub best_epoch: usize,
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// G = sigmoid(W_g s + b_g). Panics if dimensions disagree.
pub fn gate(params: &SflParams, f_struct: ArrayView1<'_, f64>) -> Array1<f64> {
    assert_eq!(
        f_struct.len(),
        STRUCT_DIM,
        "gate input must have {STRUCT_DIM} features"
    );
    let mut g = params.gate_weights.dot(&f_struct);
    g += &params.gate_bias;
    g.mapv_inplace(sigmoid);
    g
}

/// Hadamard product of the embedding and the gate.
pub fn fuse(f_deep: ArrayView1<'_, f64>, g: ArrayView1<'_, f64>) -> Result<Array1<f64>, SflError> {
    if f_deep.len() != g.len() {
        return Err(SflError::DimensionMismatch {
            expected: f_deep.len(),
            found: g.len(),
        });
    }
    Ok(&f_deep * &g)
}

/// Full forward pass for one row: P(Class 1).
pub fn forward(
    params: &SflParams,
    f_deep: ArrayView1<'_, f64>,
    f_struct: ArrayView1<'_, f64>,
) -> f64 {
    let g = gate(params, f_struct);
    let fused = fuse(f_deep, g.view()).expect("gate length equals deep dimension");
    sigmoid(params.head_weights.dot(&fused) + params.head_bias)
}

/// Mean binary cross-entropy; probabilities are clipped to
/// [[`LOSS_CLIP`], 1−[`LOSS_CLIP`]] inside the loss only.
///
/// Panics if lengths differ or the batch is empty.
pub fn loss(probs: &[f64], labels: &[u8]) -> f64 {
    assert_eq!(probs.len(), labels.len(), "probs and labels must align");
    assert!(!probs.is_empty(), "loss requires a nonempty batch");
    let mut acc = Sum2::new();
    for (&p, &y) in probs.iter().zip(labels) {
        let p = p.clamp(LOSS_CLIP, 1.0 - LOSS_CLIP);
        acc.add(if y == 1 { -p.ln() } else { -(1.0 - p).ln() });
    }
    acc.value() / probs.len() as f64
}

/// Analytic gradient of the mean BCE over a batch.
///
/// Per-row contributions for each parameter are brought into a canonical
/// (sorted) order and folded with compensated accumulation, so the result is
/// bit-identical under any permutation of the rows. Panics on an empty
/// batch or mismatched shapes.
pub fn backward(
    params: &SflParams,
    deep: ArrayView2<'_, f64>,
    aux: ArrayView2<'_, f64>,
    labels: &[u8],
) -> SflGradients {
    let n = deep.nrows();
    let d = params.deep_dim();
    assert!(n > 0, "backward requires a nonempty batch");
    assert_eq!(aux.nrows(), n, "aux rows must match deep rows");
    assert_eq!(labels.len(), n, "labels must match deep rows");
    assert_eq!(deep.ncols(), d, "deep columns must match parameter D");
    assert_eq!(
        aux.ncols(),
        STRUCT_DIM,
        "aux must have {STRUCT_DIM} columns"
    );

    // Parameter-major contribution table: flat order is gate weights
    // row-major, gate bias, head weights, head bias.
    let gb_off = d * STRUCT_DIM;
    let hw_off = gb_off + d;
    let hb_off = hw_off + d;
    let mut contrib = vec![0.0f64; (hb_off + 1) * n];

    for (r, (x, s)) in deep.rows().into_iter().zip(aux.rows()).enumerate() {
        let g = gate(params, s);
        let fused = &x * &g;
        let p = sigmoid(params.head_weights.dot(&fused) + params.head_bias);
        let delta = p - labels[r] as f64;

        contrib[hb_off * n + r] = delta;
        for j in 0..d {
            contrib[(hw_off + j) * n + r] = delta * fused[j];
            let t = delta * params.head_weights[j] * x[j] * g[j] * (1.0 - g[j]);
            contrib[(gb_off + j) * n + r] = t;
            for k in 0..STRUCT_DIM {
                contrib[(j * STRUCT_DIM + k) * n + r] = t * s[k];
            }
        }
    }

    let mut flat = Vec::with_capacity(hb_off + 1);
    for rows in contrib.chunks_exact_mut(n) {
        rows.sort_unstable_by(f64::total_cmp);
        let mut acc = Sum2::new();
        for &v in rows.iter() {
            acc.add(v);
        }
        flat.push(acc.value() / n as f64);
    }

    SflGradients {
        gate_weights: Array2::from_shape_vec((d, STRUCT_DIM), flat[..gb_off].to_vec())
            .expect("shape matches contribution layout"),
        gate_bias: Array1::from_vec(flat[gb_off..hw_off].to_vec()),
        head_weights: Array1::from_vec(flat[hw_off..hb_off].to_vec()),
        head_bias: flat[hb_off],
    }
}

/// Forward pass over many rows; order-preserving.
pub fn predict_proba(
    params: &SflParams,
    deep: ArrayView2<'_, f64>,
    aux: ArrayView2<'_, f64>,
) -> Vec<f64> {
    deep.rows()
        .into_iter()
        .zip(aux.rows())
        .map(|(x, s)| forward(params, x, s))
        .collect()
}

struct AdamState {
    m_gate_w: Array2<f64>,
    v_gate_w: Array2<f64>,
    m_gate_b: Array1<f64>,
    v_gate_b: Array1<f64>,
    m_head_w: Array1<f64>,
    v_head_w: Array1<f64>,
    m_head_b: f64,
    v_head_b: f64,
    t: u32,
}

impl AdamState {
    fn new(d: usize) -> Self {
        Self {
            m_gate_w: Array2::zeros((d, STRUCT_DIM)),
            v_gate_w: Array2::zeros((d, STRUCT_DIM)),
            m_gate_b: Array1::zeros(d),
            v_gate_b: Array1::zeros(d),
            m_head_w: Array1::zeros(d),
            v_head_w: Array1::zeros(d),
            m_head_b: 0.0,
            v_head_b: 0.0,
            t: 0,
        }
    }

    fn step(&mut self, params: &mut SflParams, grads: &SflGradients, cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.adam_beta1.powi(self.t as i32);
        let c2 = 1.0 - cfg.adam_beta2.powi(self.t as i32);
        let update = |theta: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = cfg.adam_beta1 * *m + (1.0 - cfg.adam_beta1) * g;
            *v = cfg.adam_beta2 * *v + (1.0 - cfg.adam_beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *theta -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_epsilon);
        };
        for ((theta, m), (v, g)) in params
            .gate_weights
            .iter_mut()
            .zip(self.m_gate_w.iter_mut())
            .zip(self.v_gate_w.iter_mut().zip(grads.gate_weights.iter()))
        {
            update(theta, m, v, *g);
        }
        for ((theta, m), (v, g)) in params
            .gate_bias
            .iter_mut()
            .zip(self.m_gate_b.iter_mut())
            .zip(self.v_gate_b.iter_mut().zip(grads.gate_bias.iter()))
        {
            update(theta, m, v, *g);
        }
        for ((theta, m), (v, g)) in params
            .head_weights
            .iter_mut()
            .zip(self.m_head_w.iter_mut())
            .zip(self.v_head_w.iter_mut().zip(grads.head_weights.iter()))
        {
            update(theta, m, v, *g);
        }
        update(
            &mut params.head_bias,
            &mut self.m_head_b,
            &mut self.v_head_b,
            grads.head_bias,
        );
    }
}

/// Trains the network on the given rows.
///
/// A `validation_fraction` carve-out of the rows is held back and monitored
/// for early stopping; the parameters from the best monitored epoch are
/// returned. Deterministic for fixed config and data: initialization, the
/// carve-out and every epoch's shuffle all derive from `config.seed`.
pub fn train(
    deep: ArrayView2<'_, f64>,
    aux: ArrayView2<'_, f64>,
    labels: &[u8],
    config: &TrainConfig,
) -> Result<(SflParams, TrainTrace), SflError> {
    config.validate()?;
    let n = deep.nrows();
    if aux.nrows() != n || labels.len() != n {
        return Err(SflError::DimensionMismatch {
            expected: n,
            found: aux.nrows().min(labels.len()),
        });
    }
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(SflError::SingleClass);
    }
    let d = deep.ncols();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = SflParams::glorot_init(d, &mut rng);

    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    let val_n = (config.validation_fraction * n as f64).floor() as usize;
    let mut val_idx: Vec<usize> = indices[..val_n].to_vec();
    let mut train_idx: Vec<usize> = indices[val_n..].to_vec();
    val_idx.sort_unstable();
    // Evaluation happens in sorted order; the epoch shuffle below works on
    // its own copy.
    let eval_train_idx = {
        let mut v = train_idx.clone();
        v.sort_unstable();
        v
    };

    let gather = |idx: &[usize]| -> (Array2<f64>, Array2<f64>, Vec<u8>) {
        (
            deep.select(ndarray::Axis(0), idx),
            aux.select(ndarray::Axis(0), idx),
            idx.iter().map(|&i| labels[i]).collect(),
        )
    };
    let (val_deep, val_aux, val_labels) = gather(&val_idx);

    let mut adam = AdamState::new(d);
    let mut trace = TrainTrace {
        train_losses: Vec::new(),
        val_losses: Vec::new(),
        epochs_run: 0,
        best_epoch: 0,
    };
    let mut best_params = params.clone();
    let mut best_loss = f64::INFINITY;
    let mut stale_epochs = 0usize;

    for epoch in 0..config.max_epochs {
        train_idx.shuffle(&mut rng);
        let mut epoch_loss = Sum2::new();
        for batch in train_idx.chunks(config.batch_size) {
            let (b_deep, b_aux, b_labels) = gather(batch);
            let probs = predict_proba(&params, b_deep.view(), b_aux.view());
            epoch_loss.add(loss(&probs, &b_labels) * batch.len() as f64);
            let grads = backward(&params, b_deep.view(), b_aux.view(), &b_labels);
            adam.step(&mut params, &grads, config);
        }
        let train_loss = epoch_loss.value() / train_idx.len() as f64;

        let monitored = if val_n > 0 {
            let probs = predict_proba(&params, val_deep.view(), val_aux.view());
            loss(&probs, &val_labels)
        } else {
            let (t_deep, t_aux, t_labels) = gather(&eval_train_idx);
            let probs = predict_proba(&params, t_deep.view(), t_aux.view());
            loss(&probs, &t_labels)
        };

        trace.train_losses.push(train_loss);
        trace.val_losses.push(monitored);
        trace.epochs_run = epoch + 1;

        if monitored < best_loss {
            best_loss = monitored;
            best_params = params.clone();
            trace.best_epoch = epoch;
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs > config.early_stop_patience {
                break;
            }
        }
    }

    Ok((best_params, trace))
}

/// Auxiliary data persisted next to the model blob.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelSidecar {
    pub train_config: TrainConfig,
    /// SHA-256 hex digests of the training inputs, keyed by a short name.
    pub data_checksums: BTreeMap<String, String>,
    /// Standardization applied to the embedding columns, when any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deep_scaler: Option<ScalerParams>,
    /// Standardization applied to the structure columns, when any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux_scaler: Option<ScalerParams>,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".json");
    path.with_file_name(name)
}

/// Writes the model blob (magic `"SFLM"`, u32 LE dimension, then gate
/// weights row-major, gate bias, head weights and head bias as LE f64) plus
/// a `<file>.json` sidecar.
pub fn save_model(path: &Path, params: &SflParams, sidecar: &ModelSidecar) -> Result<(), SflError> {
    let d = params.deep_dim();
    let io = |source| SflError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut bytes = Vec::with_capacity(8 + 8 * (d * STRUCT_DIM + 2 * d + 1));
    bytes.extend_from_slice(MODEL_MAGIC);
    bytes.extend_from_slice(
        &u32::try_from(d)
            .map_err(|_| SflError::InvalidConfig("dimension exceeds u32".into()))?
            .to_le_bytes(),
    );
    let mut push = |v: f64| bytes.extend_from_slice(&v.to_le_bytes());
    for &w in params.gate_weights.iter() {
        push(w);
    }
    for &w in params.gate_bias.iter() {
        push(w);
    }
    for &w in params.head_weights.iter() {
        push(w);
    }
    push(params.head_bias);
    std::fs::write(path, bytes).map_err(io)?;

    let json = serde_json::to_string_pretty(sidecar).map_err(|e| SflError::Sidecar {
        path: sidecar_path(path),
        message: e.to_string(),
    })?;
    std::fs::write(sidecar_path(path), json).map_err(|source| SflError::Io {
        path: sidecar_path(path),
        source,
    })
}

/// Reads a model blob and, when present, its JSON sidecar.
pub fn load_model(path: &Path) -> Result<(SflParams, Option<ModelSidecar>), SflError> {
    let io = |source| SflError::Io {
        path: path.to_path_buf(),
        source,
    };
    let malformed = |message: String| SflError::MalformedModel {
        path: path.to_path_buf(),
        message,
    };
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(io)?
        .read_to_end(&mut bytes)
        .map_err(|source| SflError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    if bytes.len() < 8 || &bytes[..4] != MODEL_MAGIC {
        return Err(malformed("missing SFLM magic".into()));
    }
    let d = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let expected = 8 + 8 * (d * STRUCT_DIM + 2 * d + 1);
    if bytes.len() != expected {
        return Err(malformed(format!(
            "expected {expected} bytes for D={d}, found {}",
            bytes.len()
        )));
    }
    let mut values = bytes[8..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut take = |count: usize| -> Vec<f64> { values.by_ref().take(count).collect() };
    let params = SflParams {
        gate_weights: Array2::from_shape_vec((d, STRUCT_DIM), take(d * STRUCT_DIM))
            .expect("length checked above"),
        gate_bias: Array1::from_vec(take(d)),
        head_weights: Array1::from_vec(take(d)),
        head_bias: take(1)[0],
    };

    let sidecar = match std::fs::read_to_string(sidecar_path(path)) {
        Ok(json) => Some(serde_json::from_str(&json).map_err(|e| SflError::Sidecar {
            path: sidecar_path(path),
            message: e.to_string(),
        })?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(source) => {
            return Err(SflError::Io {
                path: sidecar_path(path),
                source,
            })
        }
    };
    Ok((params, sidecar))
}
