//! SMOTE oversampling of the minority class.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{CustomerRecord, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    /// Desired minority:majority ratio after balancing, in (0, 1].
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig {
            k_neighbors: 5,
            target_ratio: 1.0,
            seed: 0,
        }
    }
}

/// `a + u·(b − a)`.
pub fn interpolate(a: &[f64], b: &[f64], u: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + u * (y - x)).collect()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices (into `points`) of the `k` nearest other points, nearest first,
/// equal distances ordered by index.
pub fn nearest_neighbors(points: &[&[f64]], i: usize, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(j, p)| (squared_distance(points[i], p), j))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Appends synthetic minority customers until the minority:majority ratio
/// reaches `cfg.target_ratio` (rounded to the nearest record).
///
/// Each synthetic customer interpolates a random minority customer toward one
/// of its `k` nearest minority neighbours; the CLV is interpolated with the
/// same weight. Original records keep their order and come first.
pub fn smote_balance(train: &Dataset, cfg: &SmoteConfig) -> Result<Dataset> {
    if cfg.k_neighbors == 0 {
        return Err(Error::InvalidParameter("SMOTE needs k >= 1".into()));
    }
    if !(cfg.target_ratio > 0.0 && cfg.target_ratio <= 1.0) {
        return Err(Error::InvalidParameter("SMOTE target ratio must lie in (0, 1]".into()));
    }
    train.require_both_classes()?;
    let (churners, non_churners) = train.class_counts();
    let minority_label = if churners <= non_churners {
        crate::decision::Label::Churner
    } else {
        crate::decision::Label::NonChurner
    };
    let (minority, majority) = (churners.min(non_churners), churners.max(non_churners));
    if minority < 2 {
        return Err(Error::InvalidDataset(
            "SMOTE needs at least two minority-class records".into(),
        ));
    }
    let target = (cfg.target_ratio * majority as f64).round() as usize;
    if minority >= target {
        return Ok(train.clone());
    }

    let members: Vec<&CustomerRecord> = train.records.iter().filter(|r| r.label == minority_label).collect();
    let points: Vec<&[f64]> = members.iter().map(|r| r.features.as_slice()).collect();
    let k = cfg.k_neighbors.min(minority - 1);
    let neighbors: Vec<Vec<usize>> = (0..members.len()).map(|i| nearest_neighbors(&points, i, k)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = train.records.clone();
    records.reserve(target - minority);
    for _ in minority..target {
        let base = rng.random_range(0..members.len());
        let nn = neighbors[base][rng.random_range(0..k)];
        let u: f64 = rng.random_range(0.0..1.0);
        let (a, b) = (members[base], members[nn]);
        records.push(CustomerRecord {
            features: interpolate(&a.features, &b.features, u),
            label: minority_label,
            clv: a.clv + u * (b.clv - a.clv),
        });
    }
    Dataset::new(train.name.clone(), train.schema.clone(), records)
}
