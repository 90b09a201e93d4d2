use crate::decision::Label;
use crate::domain::Dataset;
use crate::error::{Error, Result};
use crate::models::Scorer;

/// k-nearest-neighbour scorer over a stored training set.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    features: Vec<Vec<f64>>,
    labels: Vec<Label>,
    k: usize,
}

impl KnnModel {
    pub fn fit(train: &Dataset, k: usize) -> Result<Self> {
        if k == 0 || k > train.len() {
            return Err(Error::InvalidParameter(format!(
                "k = {k} must lie in [1, {}]",
                train.len()
            )));
        }
        Ok(KnnModel {
            features: train.records.iter().map(|r| r.features.clone()).collect(),
            labels: train.labels(),
            k,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl Scorer for KnnModel {
    fn input_dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Share of non-churners among the `k` nearest training points. Equal
    /// distances are ordered by training index.
    fn score_unchecked(&self, x: &[f64]) -> f64 {
        let mut dist: Vec<(f64, usize)> = self
            .features
            .iter()
            .enumerate()
            .map(|(i, f)| (squared_distance(f, x), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, cmp);
        }
        let non_churners = dist[..self.k]
            .iter()
            .filter(|(_, i)| !self.labels[*i].is_churner())
            .count();
        non_churners as f64 / self.k as f64
    }
}

pub fn knn_score(train: &Dataset, x: &[f64], k: usize) -> Result<f64> {
    KnnModel::fit(train, k)?.score(x)
}
