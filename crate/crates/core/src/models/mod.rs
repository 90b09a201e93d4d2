//! Trainable scorers. Every scorer maps a feature vector to a score where low
//! values indicate churn.

pub mod adam;
pub mod cart;
pub mod gradcheck;
pub mod knn;
pub mod logistic;
pub mod mlp;

use crate::domain::Dataset;
use crate::error::{Error, Result};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use cart::{fit_cart, CartConfig, CartTree};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use knn::{knn_score, KnnModel};
pub use logistic::{fit_logistic, LogisticConfig, LogisticModel};
pub use mlp::{default_hidden_dim, train, train_with_checkpoints, Activation, LossKind, Mlp, TrainConfig, TrainLog};

pub trait Scorer {
    fn input_dim(&self) -> usize;

    /// Score for a feature vector already known to have `input_dim` entries.
    fn score_unchecked(&self, x: &[f64]) -> f64;

    fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(self.score_unchecked(x))
    }

    fn score_dataset(&self, ds: &Dataset) -> Result<Vec<f64>> {
        if ds.width() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: ds.width(),
            });
        }
        Ok(ds.records.iter().map(|r| self.score_unchecked(&r.features)).collect())
    }
}
