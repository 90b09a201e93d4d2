//! Profit, gap and targeting curves over the incentive grid.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experiments::benchmark::{run_benchmark, BenchmarkConfig, BenchmarkDataset, BenchmarkReport};
use crate::experiments::report::write_csv_rows;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanProfitRow {
    pub d_spec: String,
    pub method: String,
    pub mean_profit: f64,
    pub datasets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanGapRow {
    pub d_spec: String,
    pub method: String,
    pub mean_gap: f64,
    pub datasets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetingRow {
    pub dataset: String,
    pub d_spec: String,
    pub d: f64,
    pub method: String,
    pub eta: f64,
    pub profit: f64,
    pub optimal_profit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalRow {
    pub dataset: String,
    pub d_spec: String,
    pub d: f64,
    pub optimal_profit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTables {
    /// Mean test profit per method and incentive.
    pub profit_vs_d: Vec<MeanProfitRow>,
    /// Mean normalized gap per method and incentive.
    pub gap_vs_d: Vec<MeanGapRow>,
    /// Targeted fraction and profit per dataset, method and incentive.
    pub targeting: Vec<TargetingRow>,
    pub optimal: Vec<OptimalRow>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Builds the curve tables from a finished benchmark. Failed cells are left
/// out of the means; a (method, incentive) pair with no successful cell is
/// omitted.
pub fn sweep_tables(report: &BenchmarkReport) -> SweepTables {
    let mut profit_vs_d = Vec::new();
    let mut gap_vs_d = Vec::new();
    for d in &report.incentives {
        for m in &report.methods {
            let ok: Vec<_> = report
                .cells
                .iter()
                .filter(|c| &c.d_spec == d && &c.method == m)
                .filter_map(|c| c.metrics.as_ref().ok())
                .collect();
            if ok.is_empty() {
                continue;
            }
            let profits: Vec<f64> = ok.iter().map(|x| x.profit).collect();
            profit_vs_d.push(MeanProfitRow {
                d_spec: d.clone(),
                method: m.clone(),
                mean_profit: mean(&profits),
                datasets: profits.len(),
            });
            let gaps: Vec<f64> = ok.iter().filter_map(|x| x.gap).collect();
            if !gaps.is_empty() {
                gap_vs_d.push(MeanGapRow {
                    d_spec: d.clone(),
                    method: m.clone(),
                    mean_gap: mean(&gaps),
                    datasets: gaps.len(),
                });
            }
        }
    }
    let targeting = report
        .cells
        .iter()
        .filter_map(|c| {
            c.metrics.as_ref().ok().map(|x| TargetingRow {
                dataset: c.dataset.clone(),
                d_spec: c.d_spec.clone(),
                d: c.d,
                method: c.method.clone(),
                eta: x.eta,
                profit: x.profit,
                optimal_profit: c.optimal_profit,
            })
        })
        .collect();
    let mut optimal = Vec::new();
    for ds in &report.datasets {
        for d in &report.incentives {
            if let Some(c) = report
                .cells
                .iter()
                .find(|c| &c.dataset == ds && &c.d_spec == d && c.optimal_profit.is_finite())
            {
                optimal.push(OptimalRow {
                    dataset: ds.clone(),
                    d_spec: d.clone(),
                    d: c.d,
                    optimal_profit: c.optimal_profit,
                });
            }
        }
    }
    SweepTables {
        profit_vs_d,
        gap_vs_d,
        targeting,
        optimal,
    }
}

/// Datasets whose optimal profit rises somewhere along increasing `d`.
pub fn optimal_profit_violations(tables: &SweepTables) -> Vec<String> {
    let mut names: Vec<&String> = tables.optimal.iter().map(|r| &r.dataset).collect();
    names.dedup();
    names
        .into_iter()
        .filter(|ds| {
            let mut rows: Vec<&OptimalRow> = tables.optimal.iter().filter(|r| &r.dataset == *ds).collect();
            rows.sort_by(|a, b| a.d.total_cmp(&b.d));
            rows.windows(2).any(|w| w[1].optimal_profit > w[0].optimal_profit)
        })
        .cloned()
        .collect()
}

pub const PROFIT_FILE: &str = "profit_vs_d.csv";
pub const GAP_FILE: &str = "gap_vs_d.csv";
pub const TARGETING_FILE: &str = "targeting_vs_d.csv";
pub const OPTIMAL_FILE: &str = "optimal_vs_d.csv";

pub fn write_sweep_tables(tables: &SweepTables, dir: &Path) -> Result<Vec<PathBuf>> {
    let paths = [PROFIT_FILE, GAP_FILE, TARGETING_FILE, OPTIMAL_FILE].map(|f| dir.join(f));
    write_csv_rows(&paths[0], &tables.profit_vs_d)?;
    write_csv_rows(&paths[1], &tables.gap_vs_d)?;
    write_csv_rows(&paths[2], &tables.targeting)?;
    write_csv_rows(&paths[3], &tables.optimal)?;
    Ok(paths.to_vec())
}

/// Runs the benchmark over the configured incentive grid and derives the
/// curve tables. A rising optimal profit along `d` is logged as a warning.
pub fn sensitivity_sweep(
    datasets: &[BenchmarkDataset],
    cfg: &BenchmarkConfig,
) -> Result<(BenchmarkReport, SweepTables)> {
    let report = run_benchmark(datasets, cfg)?;
    let tables = sweep_tables(&report);
    for ds in optimal_profit_violations(&tables) {
        log::warn!("optimal profit increases with d on dataset {ds}");
    }
    Ok((report, tables))
}
