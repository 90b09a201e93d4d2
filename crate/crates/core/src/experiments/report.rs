//! CSV and JSON output of benchmark results, and the rank analysis that
//! turns a profit matrix into the summary.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::benchmark::BenchmarkReport;
use crate::experiments::stats::{friedman_iman_davenport, holm_vs_best, rank_methods, FriedmanResult, HolmReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRank {
    pub method: String,
    pub avg_rank: f64,
    pub avg_profit: f64,
}

/// Ranks, Friedman test and Holm comparisons for one profit matrix. Tests
/// that cannot be run leave their field empty and explain why in `notes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixAnalysis {
    pub n_datasets: usize,
    pub ranks: Vec<MethodRank>,
    pub friedman: Option<FriedmanResult>,
    pub holm: Option<HolmReport>,
    pub notes: Vec<String>,
}

pub fn analyze_profit_matrix(
    methods: &[String],
    datasets: &[String],
    profits: Vec<Vec<f64>>,
    alpha: f64,
) -> Result<MatrixAnalysis> {
    let table = rank_methods(methods.to_vec(), datasets.to_vec(), profits)?;
    let avg = table.average_ranks();
    let ranks = methods
        .iter()
        .zip(&avg)
        .zip(table.average_profits())
        .map(|((m, &r), p)| MethodRank {
            method: m.clone(),
            avg_rank: r,
            avg_profit: p,
        })
        .collect();
    let mut notes = Vec::new();
    let friedman = match friedman_iman_davenport(&avg, table.n_datasets()) {
        Ok(f) => Some(f),
        Err(e) => {
            notes.push(e.to_string());
            None
        }
    };
    let holm = match holm_vs_best(methods, &avg, table.n_datasets(), alpha) {
        Ok(h) => Some(h),
        Err(e) => {
            notes.push(e.to_string());
            None
        }
    };
    Ok(MatrixAnalysis {
        n_datasets: table.n_datasets(),
        ranks,
        friedman,
        holm,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncentiveSummary {
    pub d_spec: String,
    pub analysis: Option<MatrixAnalysis>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub total_cells: usize,
    pub failed_cells: Vec<String>,
    pub incentives: Vec<IncentiveSummary>,
}

pub fn summarize(report: &BenchmarkReport, alpha: f64) -> BenchmarkSummary {
    let incentives = report
        .incentives
        .iter()
        .map(|d| match analyze_profit_matrix(&report.methods, &report.datasets, report.profit_matrix(d), alpha) {
            Ok(a) => IncentiveSummary {
                d_spec: d.clone(),
                analysis: Some(a),
                error: None,
            },
            Err(e) => IncentiveSummary {
                d_spec: d.clone(),
                analysis: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    BenchmarkSummary {
        total_cells: report.cells.len(),
        failed_cells: report
            .failed()
            .map(|c| format!("{}/{}/{}: {}", c.dataset, c.d_spec, c.method, c.metrics.as_ref().unwrap_err()))
            .collect(),
        incentives,
    }
}

#[derive(Debug, Serialize)]
struct CellRow<'a> {
    dataset: &'a str,
    d_spec: &'a str,
    d: f64,
    method: &'a str,
    status: &'a str,
    profit: Option<f64>,
    accuracy: Option<f64>,
    gap: Option<f64>,
    eta: Option<f64>,
    optimal_profit: f64,
    error: Option<&'a str>,
}

fn create(path: &Path) -> Result<File> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes serializable rows as CSV with a header line.
pub fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// One CSV row per cell: dataset, incentive, method, status and metrics.
pub fn write_cells_csv(path: &Path, report: &BenchmarkReport) -> Result<()> {
    let rows: Vec<CellRow> = report
        .cells
        .iter()
        .map(|c| {
            let m = c.metrics.as_ref().ok();
            CellRow {
                dataset: &c.dataset,
                d_spec: &c.d_spec,
                d: c.d,
                method: &c.method,
                status: if m.is_some() { "ok" } else { "failed" },
                profit: m.map(|m| m.profit),
                accuracy: m.map(|m| m.accuracy),
                gap: m.and_then(|m| m.gap),
                eta: m.map(|m| m.eta),
                optimal_profit: c.optimal_profit,
                error: c.metrics.as_ref().err().map(String::as_str),
            }
        })
        .collect();
    write_csv_rows(path, &rows)
}

/// Methods × datasets profit matrix as read from a wide CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitMatrix {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    pub profits: Vec<Vec<f64>>,
}

/// Reads a CSV whose header is `method,<dataset>,...` and whose rows hold
/// one method's profits.
pub fn read_profit_matrix<R: std::io::Read>(reader: R) -> Result<ProfitMatrix> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = r.headers()?.clone();
    if header.len() < 2 {
        return Err(Error::Statistics("profit matrix needs a method column and at least one dataset".into()));
    }
    let datasets: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let (mut methods, mut profits) = (Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() != header.len() {
            return Err(Error::InvalidRow {
                row,
                message: format!("expected {} fields, got {}", header.len(), rec.len()),
            });
        }
        let values = rec
            .iter()
            .skip(1)
            .map(|v| {
                v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| Error::InvalidRow {
                    row,
                    message: format!("`{v}` is not a finite number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        methods.push(rec[0].to_string());
        profits.push(values);
    }
    if methods.is_empty() {
        return Err(Error::Statistics("profit matrix has no methods".into()));
    }
    Ok(ProfitMatrix {
        methods,
        datasets,
        profits,
    })
}
