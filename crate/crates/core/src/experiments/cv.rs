//! Monte Carlo cross-validation of the learning rate and epoch budget.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decision::CampaignParams;
use crate::domain::{CustomerRecord, Dataset};
use crate::error::{Error, Result};
use crate::experiments::seed::child_seed;
use crate::models::mlp::{train_with_checkpoints, LossKind, Mlp, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub splits: usize,
    /// Share of the training set used for fitting in each split.
    pub train_fraction: f64,
    /// Network initializations averaged per split.
    pub seeds: usize,
    pub learning_rates: Vec<f64>,
    pub epochs: Vec<usize>,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            splits: 5,
            train_fraction: 0.8,
            seeds: 10,
            learning_rates: vec![0.0001, 0.001, 0.01],
            epochs: vec![10, 50, 100],
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rates.is_empty() || self.epochs.is_empty() {
            return Err(Error::InvalidParameter("CV grid is empty".into()));
        }
        if self.splits == 0 || self.seeds == 0 {
            return Err(Error::InvalidParameter("CV needs at least one split and one seed".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "CV train fraction {} must lie in (0, 1)",
                self.train_fraction
            )));
        }
        Ok(())
    }

    /// Grid cells ordered by learning rate, then epochs.
    pub fn grid(&self) -> Vec<(f64, usize)> {
        let mut lrs = self.learning_rates.clone();
        lrs.sort_by(f64::total_cmp);
        lrs.dedup();
        let mut eps = self.epochs.clone();
        eps.sort_unstable();
        eps.dedup();
        lrs.iter()
            .flat_map(|&lr| eps.iter().map(move |&e| (lr, e)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Mean held-out smooth regret over the successful runs; `inf` if none.
    pub mean_loss: f64,
    pub runs: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub best: TrainConfig,
    pub cells: Vec<CvCell>,
}

impl CvOutcome {
    pub fn failures(&self) -> usize {
        self.cells.iter().map(|c| c.failures).sum()
    }
}

fn random_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let held = idx.split_off(cut);
    (idx, held)
}

/// Picks the `(learning rate, epochs)` cell with the lowest mean held-out
/// smooth regret. Every cell sees the same splits and initial weights, and
/// the epoch budgets of one learning rate share a single training run per
/// split and seed. Ties go to the smaller learning rate, then to fewer epochs.
///
/// Failed runs are counted per cell; a cell is only usable if at least one of
/// its runs succeeds.
pub fn monte_carlo_cv(
    data: &Dataset,
    cv: &CvConfig,
    base: &TrainConfig,
    hidden_dim: usize,
    params: &CampaignParams,
    seed: u64,
) -> Result<CvOutcome> {
    cv.validate()?;
    if data.len() < 2 {
        return Err(Error::InvalidDataset("cross-validation needs at least two records".into()));
    }
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..cv.splits)
        .map(|s| random_split(data.len(), cv.train_fraction, child_seed(seed, s as u64)))
        .collect();
    let fits: Vec<Dataset> = splits
        .iter()
        .map(|(fit, _)| data.subset(fit))
        .collect::<Result<_>>()?;
    let grid = cv.grid();
    let lrs: Vec<f64> = grid.iter().map(|g| g.0).fold(Vec::new(), |mut v, lr| {
        if v.last() != Some(&lr) {
            v.push(lr);
        }
        v
    });
    let epochs: Vec<usize> = grid.iter().filter(|g| g.0 == lrs[0]).map(|g| g.1).collect();
    let max_epochs = *epochs.last().expect("grid is nonempty");

    // One run per (learning rate, split, seed), scored at every epoch budget
    // of the grid on the way to the largest one.
    let jobs: Vec<(usize, usize, usize)> = (0..lrs.len())
        .flat_map(|l| (0..cv.splits).flat_map(move |s| (0..cv.seeds).map(move |r| (l, s, r))))
        .collect();
    let results: Vec<Vec<std::result::Result<f64, String>>> = jobs
        .par_iter()
        .map(|&(l, s, r)| {
            let run_seed = child_seed(child_seed(seed, 1_000 + s as u64), r as u64);
            let cfg = TrainConfig {
                learning_rate: lrs[l],
                epochs: max_epochs,
                loss: LossKind::SmoothRegret,
                seed: run_seed,
                ..*base
            };
            let held: Vec<&CustomerRecord> = splits[s].1.iter().map(|&i| &data.records[i]).collect();
            let mut scored = Vec::with_capacity(epochs.len());
            let outcome = Mlp::init(data.width(), hidden_dim, run_seed).and_then(|net| {
                train_with_checkpoints(net, &fits[s], params, &cfg, |e, net| {
                    if epochs.contains(&e) {
                        let loss = net.loss(&held, LossKind::SmoothRegret, params)?;
                        if !loss.is_finite() {
                            return Err(Error::NonFiniteLoss { epoch: e, batch: 0 });
                        }
                        scored.push(Ok(loss));
                    }
                    Ok(())
                })
            });
            if let Err(e) = outcome {
                let msg = e.to_string();
                scored.resize(epochs.len(), Err(msg));
            }
            scored
        })
        .collect();

    let per_lr = cv.splits * cv.seeds;
    let cells: Vec<CvCell> = grid
        .iter()
        .map(|&(lr, e)| {
            let l = lrs.iter().position(|&x| x == lr).expect("lr from grid");
            let k = epochs.iter().position(|&x| x == e).expect("epochs from grid");
            let runs: Vec<&std::result::Result<f64, String>> =
                results[l * per_lr..(l + 1) * per_lr].iter().map(|r| &r[k]).collect();
            let ok: Vec<f64> = runs.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
            for msg in runs.iter().filter_map(|r| r.as_ref().err()) {
                log::warn!("CV run failed (lr = {lr}, epochs = {e}): {msg}");
            }
            CvCell {
                learning_rate: lr,
                epochs: e,
                mean_loss: if ok.is_empty() {
                    f64::INFINITY
                } else {
                    ok.iter().sum::<f64>() / ok.len() as f64
                },
                runs: runs.len(),
                failures: runs.len() - ok.len(),
            }
        })
        .collect();

    // Grid order already encodes the tie rule, so the first minimum wins.
    let best = cells
        .iter()
        .filter(|c| c.failures < c.runs)
        .fold(None::<&CvCell>, |acc, c| match acc {
            Some(b) if b.mean_loss <= c.mean_loss => Some(b),
            _ => Some(c),
        })
        .ok_or_else(|| Error::InvalidParameter("every cross-validation run failed".into()))?;
    Ok(CvOutcome {
        best: TrainConfig {
            learning_rate: best.learning_rate,
            epochs: best.epochs,
            loss: LossKind::SmoothRegret,
            ..*base
        },
        cells,
    })
}
