//! One-hidden-layer scoring network with hand-derived gradients.
//!
//! `score = σ(w2 · tanh(W1 x + b1) + b2)`. Low scores mean churn, so with the
//! regret loss a customer is targeted when the score falls below their
//! midpoint.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decision::{sigmoid, smooth_regret, smooth_regret_grad, CampaignParams, Label};
use crate::domain::{CustomerRecord, Dataset};
use crate::error::{Error, Result};
use crate::models::adam::{adam_step, AdamConfig, AdamState};
use crate::models::Scorer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Sigmoid-relaxed regret of the targeting decision.
    SmoothRegret,
    /// Binary cross-entropy against the label (1 = non-churner).
    CrossEntropy,
}

/// Network weights. Serialized as flat arrays; `w1` is row-major
/// `hidden_dim × input_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub activation: Activation,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub seed: u64,
}

/// Hidden size used when none is configured: half the input width, rounded up.
pub fn default_hidden_dim(input_dim: usize) -> usize {
    input_dim.div_ceil(2).max(1)
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn init(input_dim: usize, hidden_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::InvalidParameter("network dimensions must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lim1 = (6.0 / (input_dim + hidden_dim) as f64).sqrt();
        let lim2 = (6.0 / (hidden_dim + 1) as f64).sqrt();
        let w1 = (0..hidden_dim * input_dim).map(|_| rng.random_range(-lim1..lim1)).collect();
        let w2 = (0..hidden_dim).map(|_| rng.random_range(-lim2..lim2)).collect();
        Ok(Mlp {
            input_dim,
            hidden_dim,
            activation: Activation::Tanh,
            w1,
            b1: vec![0.0; hidden_dim],
            w2,
            b2: 0.0,
            seed,
        })
    }

    pub fn n_params(&self) -> usize {
        self.hidden_dim * self.input_dim + 2 * self.hidden_dim + 1
    }

    /// Parameters in the order `w1, b1, w2, b2`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.push(self.b2);
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params());
        let (w1, rest) = flat.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.hidden_dim);
        let (w2, rest) = rest.split_at(self.hidden_dim);
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2 = rest[0];
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Writes hidden activations into `hidden` and returns the output logit.
    fn logit_into(&self, x: &[f64], hidden: &mut [f64]) -> f64 {
        let mut out = self.b2;
        for (j, h) in hidden.iter_mut().enumerate() {
            let row = &self.w1[j * self.input_dim..(j + 1) * self.input_dim];
            let a = self.b1[j] + dot(row, x);
            *h = fast_tanh(a);
            out += self.w2[j] * *h;
        }
        out
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let mut hidden = vec![0.0; self.hidden_dim];
        Ok(sigmoid(self.logit_into(x, &mut hidden)))
    }

    /// Mean loss over `batch` and its gradient with respect to
    /// [`Mlp::to_flat`].
    pub fn loss_and_grad(
        &self,
        batch: &[&CustomerRecord],
        loss: LossKind,
        params: &CampaignParams,
    ) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.n_params()];
        let mut hidden = vec![0.0; self.hidden_dim];
        let nw1 = self.w1.len();
        let (ob1, ow2, ob2) = (nw1, nw1 + self.hidden_dim, nw1 + 2 * self.hidden_dim);
        let mut total = 0.0;
        for r in batch {
            self.check_dim(&r.features)?;
            let logit = self.logit_into(&r.features, &mut hidden);
            let score = sigmoid(logit);
            let (value, d_logit) = loss_at(loss, r.label, logit, score, params, r.clv);
            total += value;
            grad[ob2] += d_logit;
            for j in 0..self.hidden_dim {
                let h = hidden[j];
                grad[ow2 + j] += d_logit * h;
                let da = d_logit * self.w2[j] * (1.0 - h * h);
                grad[ob1 + j] += da;
                let g_row = &mut grad[j * self.input_dim..(j + 1) * self.input_dim];
                for (g, v) in g_row.iter_mut().zip(&r.features) {
                    *g += da * v;
                }
            }
        }
        let n = batch.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((total / n, grad))
    }

    /// Mean loss over `batch` without gradients.
    pub fn loss(&self, batch: &[&CustomerRecord], loss: LossKind, params: &CampaignParams) -> Result<f64> {
        let mut hidden = vec![0.0; self.hidden_dim];
        let mut total = 0.0;
        for r in batch {
            self.check_dim(&r.features)?;
            let logit = self.logit_into(&r.features, &mut hidden);
            total += loss_at(loss, r.label, logit, sigmoid(logit), params, r.clv).0;
        }
        Ok(total / batch.len().max(1) as f64)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string_pretty(self)?;
        std::fs::write(path, s).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&s)?)
    }
}

impl Scorer for Mlp {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        let mut hidden = vec![0.0; self.hidden_dim];
        sigmoid(self.logit_into(x, &mut hidden))
    }
}

/// `tanh` through a single `exp`; absolute error around 1e-16, about three
/// times faster than the libm routine.
#[inline]
fn fast_tanh(x: f64) -> f64 {
    if x.abs() > 20.0 {
        return x.signum();
    }
    1.0 - 2.0 / ((2.0 * x).exp() + 1.0)
}

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `log(1 + e^x)` without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Per-customer loss and its derivative with respect to the output logit.
#[inline]
fn loss_at(loss: LossKind, y: Label, logit: f64, score: f64, params: &CampaignParams, clv: f64) -> (f64, f64) {
    match loss {
        LossKind::SmoothRegret => {
            let value = smooth_regret(y, score, params, clv);
            let d_score = smooth_regret_grad(y, score, params, clv);
            (value, d_score * score * (1.0 - score))
        }
        LossKind::CrossEntropy => {
            let t = y.as_f64();
            (softplus(logit) - t * logit, score - t)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// `None` picks full-batch for up to 1024 customers, else 128.
    pub batch_size: Option<usize>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub loss: LossKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            learning_rate: 0.01,
            epochs: 100,
            batch_size: None,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            loss: LossKind::SmoothRegret,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == Some(0) {
            return bad("batch size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("Adam epsilon must be positive");
        }
        Ok(())
    }

    pub fn effective_batch_size(&self, n: usize) -> usize {
        match self.batch_size {
            Some(b) => b.min(n),
            None if n <= 1024 => n,
            None => 128,
        }
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Shuffled mini-batch Adam. Deterministic for a given `cfg.seed`.
pub fn train(model: Mlp, data: &Dataset, params: &CampaignParams, cfg: &TrainConfig) -> Result<(Mlp, TrainLog)> {
    train_with_checkpoints(model, data, params, cfg, |_, _| Ok(()))
}

/// [`train`], calling `on_epoch(epoch, model)` after every completed epoch
/// (counted from 1). The model seen after epoch `e` is exactly the model a
/// run with `cfg.epochs = e` would return.
pub fn train_with_checkpoints<F>(
    mut model: Mlp,
    data: &Dataset,
    params: &CampaignParams,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<(Mlp, TrainLog)>
where
    F: FnMut(usize, &Mlp) -> Result<()>,
{
    cfg.validate()?;
    params.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidDataset("cannot train on an empty dataset".into()));
    }
    if data.width() != model.input_dim {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim,
            got: data.width(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let adam = cfg.adam();
    let mut state = AdamState::new(model.n_params());
    let mut flat = model.to_flat();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let bs = cfg.effective_batch_size(data.len());
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        for (b, chunk) in order.chunks(bs).enumerate() {
            let batch: Vec<&CustomerRecord> = chunk.iter().map(|&i| &data.records[i]).collect();
            let (loss, grad) = model.loss_and_grad(&batch, cfg.loss, params)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            epoch_total += loss * batch.len() as f64;
            adam_step(&mut flat, &grad, &mut state, &adam);
            model.set_flat(&flat);
        }
        epoch_losses.push(epoch_total / data.len() as f64);
        on_epoch(epoch + 1, &model)?;
    }
    Ok((model, TrainLog { epoch_losses }))
}
