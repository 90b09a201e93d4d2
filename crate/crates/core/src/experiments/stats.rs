//! Rank-based comparison of several methods over several datasets: average
//! ranks, the Friedman statistic with the Iman-Davenport F correction, Nemenyi
//! z statistics against the best-ranked method, and Holm thresholds.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Methods × datasets profit matrix with per-dataset ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    /// `profits[method][dataset]`.
    pub profits: Vec<Vec<f64>>,
    /// `ranks[method][dataset]`; 1 is the highest profit, ties share the mean rank.
    pub ranks: Vec<Vec<f64>>,
}

impl RankTable {
    pub fn n_methods(&self) -> usize {
        self.methods.len()
    }

    pub fn n_datasets(&self) -> usize {
        self.datasets.len()
    }

    pub fn average_ranks(&self) -> Vec<f64> {
        self.ranks
            .iter()
            .map(|r| r.iter().sum::<f64>() / r.len() as f64)
            .collect()
    }

    pub fn average_profits(&self) -> Vec<f64> {
        self.profits
            .iter()
            .map(|p| p.iter().sum::<f64>() / p.len() as f64)
            .collect()
    }
}

/// Ranks `values` in descending order, averaging the ranks of ties.
pub fn descending_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j share ranks i+1..=j+1
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = mean;
        }
        i = j + 1;
    }
    ranks
}

pub fn rank_methods(methods: Vec<String>, datasets: Vec<String>, profits: Vec<Vec<f64>>) -> Result<RankTable> {
    if methods.is_empty() || datasets.is_empty() {
        return Err(Error::Statistics("profit matrix is empty".into()));
    }
    if profits.len() != methods.len() {
        return Err(Error::Statistics(format!(
            "{} methods named but {} profit rows given",
            methods.len(),
            profits.len()
        )));
    }
    for (m, row) in methods.iter().zip(&profits) {
        if row.len() != datasets.len() {
            return Err(Error::Statistics(format!(
                "method `{m}` has {} profits for {} datasets",
                row.len(),
                datasets.len()
            )));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Statistics(format!(
                "missing profit for method `{m}` on dataset `{}`",
                datasets[j]
            )));
        }
    }
    let mut ranks = vec![vec![0.0; datasets.len()]; methods.len()];
    for j in 0..datasets.len() {
        let column: Vec<f64> = profits.iter().map(|row| row[j]).collect();
        for (i, r) in descending_ranks(&column).into_iter().enumerate() {
            ranks[i][j] = r;
        }
    }
    Ok(RankTable {
        methods,
        datasets,
        profits,
        ranks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub chi_square: f64,
    /// Iman-Davenport statistic, F-distributed under the null.
    pub f_stat: f64,
    pub df1: f64,
    pub df2: f64,
    pub p_value: f64,
}

/// Friedman test from average ranks over `n_datasets` datasets.
pub fn friedman_iman_davenport(avg_ranks: &[f64], n_datasets: usize) -> Result<FriedmanResult> {
    let k = avg_ranks.len();
    if k < 3 {
        return Err(Error::Statistics(format!(
            "Friedman test needs at least 3 methods, got {k}"
        )));
    }
    if n_datasets < 2 {
        return Err(Error::Statistics(format!(
            "Friedman test needs at least 2 datasets, got {n_datasets}"
        )));
    }
    let (n, kf) = (n_datasets as f64, k as f64);
    let sum_sq: f64 = avg_ranks.iter().map(|r| r * r).sum();
    let chi_square = 12.0 * n / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0) * (kf + 1.0) / 4.0);
    let denom = n * (kf - 1.0) - chi_square;
    if denom <= 0.0 {
        return Err(Error::Statistics(
            "Iman-Davenport statistic undefined: rankings agree perfectly".into(),
        ));
    }
    let f_stat = (n - 1.0) * chi_square / denom;
    let (df1, df2) = (kf - 1.0, (kf - 1.0) * (n - 1.0));
    let dist = FisherSnedecor::new(df1, df2).map_err(|e| Error::Statistics(e.to_string()))?;
    let p_value = if f_stat <= 0.0 { 1.0 } else { dist.sf(f_stat) };
    Ok(FriedmanResult {
        chi_square,
        f_stat,
        df1,
        df2,
        p_value,
    })
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Nemenyi z statistic of method `j` against the best-ranked method, with its
/// two-sided normal p-value.
pub fn nemenyi_z(r_best: f64, r_j: f64, n_datasets: usize, k: usize) -> (f64, f64) {
    let (n, kf) = (n_datasets as f64, k as f64);
    let se = (kf * (kf + 1.0) / (6.0 * n)).sqrt();
    let z = (r_j - r_best) / se;
    let p = erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0);
    (z, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolmStep {
    /// Position `j` of the comparison, starting at 2 for the runner-up.
    pub position: usize,
    pub p_value: f64,
    /// `α / (j − 1)`.
    pub threshold: f64,
    pub reject: bool,
}

/// Holm thresholds for p-values listed in rank order (runner-up first).
/// Each comparison is judged against its own threshold.
pub fn holm(p_values: &[f64], alpha: f64) -> Result<Vec<HolmStep>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Statistics(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    Ok(p_values
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let threshold = alpha / (i + 1) as f64;
            HolmStep {
                position: i + 2,
                p_value: p,
                threshold,
                reject: p < threshold,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolmRow {
    pub method: String,
    pub avg_rank: f64,
    pub z: f64,
    pub p_value: f64,
    pub threshold: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolmReport {
    pub best_method: String,
    pub best_avg_rank: f64,
    pub alpha: f64,
    pub rows: Vec<HolmRow>,
}

/// Compares every method with the best-ranked one. Methods are ordered by
/// average rank; equal ranks keep their input order.
pub fn holm_vs_best(methods: &[String], avg_ranks: &[f64], n_datasets: usize, alpha: f64) -> Result<HolmReport> {
    if methods.len() != avg_ranks.len() || methods.len() < 2 {
        return Err(Error::Statistics("need at least two methods with one rank each".into()));
    }
    let k = methods.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| avg_ranks[a].total_cmp(&avg_ranks[b]));
    let best = order[0];
    let tests: Vec<(f64, f64)> = order[1..]
        .iter()
        .map(|&j| nemenyi_z(avg_ranks[best], avg_ranks[j], n_datasets, k))
        .collect();
    let p: Vec<f64> = tests.iter().map(|t| t.1).collect();
    let steps = holm(&p, alpha)?;
    let rows = order[1..]
        .iter()
        .zip(tests)
        .zip(steps)
        .map(|((&j, (z, p)), step)| HolmRow {
            method: methods[j].clone(),
            avg_rank: avg_ranks[j],
            z,
            p_value: p,
            threshold: step.threshold,
            reject: step.reject,
        })
        .collect();
    Ok(HolmReport {
        best_method: methods[best].clone(),
        best_avg_rank: avg_ranks[best],
        alpha,
        rows,
    })
}
