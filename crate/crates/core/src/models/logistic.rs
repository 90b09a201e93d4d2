use serde::{Deserialize, Serialize};

use crate::decision::sigmoid;
use crate::domain::Dataset;
use crate::error::{Error, Result};
use crate::models::Scorer;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    /// L2 penalty on the weights (not the intercept).
    pub l2: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            learning_rate: 0.5,
            iterations: 500,
            l2: 0.0,
        }
    }
}

/// Linear scorer `σ(w·x + b)`, the modelled probability of not churning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Scorer for LogisticModel {
    fn input_dim(&self) -> usize {
        self.weights.len()
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        sigmoid(self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
    }
}

/// Full-batch gradient descent on mean cross-entropy.
pub fn fit_logistic(train: &Dataset, cfg: &LogisticConfig) -> Result<LogisticModel> {
    if !(cfg.learning_rate > 0.0) || cfg.l2 < 0.0 {
        return Err(Error::InvalidParameter("logistic learning rate must be > 0 and l2 >= 0".into()));
    }
    let n = train.len() as f64;
    let mut model = LogisticModel {
        weights: vec![0.0; train.width()],
        bias: 0.0,
    };
    let mut gw = vec![0.0; train.width()];
    for it in 0..cfg.iterations {
        gw.iter_mut().for_each(|g| *g = 0.0);
        let mut gb = 0.0;
        let mut loss = 0.0;
        for r in &train.records {
            let p = model.score_unchecked(&r.features);
            let t = r.label.as_f64();
            let err = p - t;
            loss -= t * p.max(1e-300).ln() + (1.0 - t) * (1.0 - p).max(1e-300).ln();
            gb += err;
            for (g, v) in gw.iter_mut().zip(&r.features) {
                *g += err * v;
            }
        }
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch: it, batch: 0 });
        }
        for (w, g) in model.weights.iter_mut().zip(&gw) {
            *w -= cfg.learning_rate * (g / n + cfg.l2 * *w);
        }
        model.bias -= cfg.learning_rate * gb / n;
    }
    Ok(model)
}
