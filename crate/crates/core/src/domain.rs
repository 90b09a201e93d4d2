//! Customer records, CSV ingestion and the train-side preprocessing steps.
//!
//! CSV layout: a header row naming every feature column followed by `clv` and
//! `label`. Labels use 0 for churners and 1 for non-churners. CLV is a positive
//! amount in euros.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decision::Label;
use crate::error::{Error, Result};

pub const CLV_COLUMN: &str = "clv";
pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerRecord {
    pub features: Vec<f64>,
    pub label: Label,
    pub clv: f64,
}

impl CustomerRecord {
    pub fn new(features: Vec<f64>, label: Label, clv: f64) -> Result<Self> {
        if !(clv.is_finite() && clv > 0.0) {
            return Err(Error::InvalidDataset(format!("clv must be positive, got {clv}")));
        }
        Ok(CustomerRecord { features, label, clv })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub schema: Vec<String>,
    pub records: Vec<CustomerRecord>,
}

impl Dataset {
    /// Builds a dataset, checking that it is nonempty and every record matches
    /// the schema width.
    pub fn new(name: impl Into<String>, schema: Vec<String>, records: Vec<CustomerRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidDataset("dataset has no records".into()));
        }
        for (i, r) in records.iter().enumerate() {
            if r.features.len() != schema.len() {
                return Err(Error::InvalidRow {
                    row: i + 1,
                    message: format!("expected {} features, got {}", schema.len(), r.features.len()),
                });
            }
            if !(r.clv.is_finite() && r.clv > 0.0) {
                return Err(Error::InvalidRow {
                    row: i + 1,
                    message: format!("clv must be positive, got {}", r.clv),
                });
            }
        }
        Ok(Dataset {
            name: name.into(),
            schema,
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn width(&self) -> usize {
        self.schema.len()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn clvs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.clv).collect()
    }

    pub fn mean_clv(&self) -> f64 {
        self.records.iter().map(|r| r.clv).sum::<f64>() / self.len() as f64
    }

    /// Number of (churners, non-churners).
    pub fn class_counts(&self) -> (usize, usize) {
        let churners = self.records.iter().filter(|r| r.label.is_churner()).count();
        (churners, self.len() - churners)
    }

    pub fn churn_rate(&self) -> f64 {
        self.class_counts().0 as f64 / self.len() as f64
    }

    /// Errors unless both classes are present.
    pub fn require_both_classes(&self) -> Result<()> {
        let (c, n) = self.class_counts();
        if c == 0 || n == 0 {
            return Err(Error::InvalidDataset(format!(
                "dataset `{}` needs both classes (churners: {c}, non-churners: {n})",
                self.name
            )));
        }
        Ok(())
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let records = indices.iter().map(|&i| self.records[i].clone()).collect();
        Dataset::new(self.name.clone(), self.schema.clone(), records)
    }

    /// Drops customers whose CLV does not exceed `min_clv`.
    pub fn retain_clv_above(&self, min_clv: f64) -> Result<Dataset> {
        let records = self.records.iter().filter(|r| r.clv > min_clv).cloned().collect();
        Dataset::new(self.name.clone(), self.schema.clone(), records)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.schema.iter().map(String::as_str).collect();
        header.push(CLV_COLUMN);
        header.push(LABEL_COLUMN);
        w.write_record(&header)?;
        let mut row = Vec::with_capacity(header.len());
        for r in &self.records {
            row.clear();
            row.extend(r.features.iter().map(|v| v.to_string()));
            row.push(r.clv.to_string());
            row.push(r.label.value().to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Loads a dataset from a CSV file.
///
/// `schema` lists the expected feature columns in order; an empty slice takes
/// every column other than `clv` and `label` as a feature. Columns not named in
/// the schema are ignored.
pub fn load_dataset(path: &Path, schema: &[String]) -> Result<Dataset> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    read_dataset(file, name, schema)
}

pub fn read_dataset<R: Read>(reader: R, name: impl Into<String>, schema: &[String]) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |col: &str| {
        header
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| Error::MissingColumn(col.to_string()))
    };
    let clv_idx = find(CLV_COLUMN)?;
    let label_idx = find(LABEL_COLUMN)?;
    let schema: Vec<String> = if schema.is_empty() {
        header
            .iter()
            .filter(|h| *h != CLV_COLUMN && *h != LABEL_COLUMN)
            .cloned()
            .collect()
    } else {
        schema.to_vec()
    };
    let feature_idx = schema.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let row = row?;
        let cell = |idx: usize, col: &str| -> Result<f64> {
            let raw = row.get(idx).unwrap_or("").trim();
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidRow {
                    row: row_no,
                    message: format!("column `{col}`: `{raw}` is not a finite number"),
                })
        };
        let features = feature_idx
            .iter()
            .zip(&schema)
            .map(|(&idx, col)| cell(idx, col))
            .collect::<Result<Vec<_>>>()?;
        let clv = cell(clv_idx, CLV_COLUMN)?;
        if clv <= 0.0 {
            return Err(Error::InvalidRow {
                row: row_no,
                message: format!("clv must be positive, got {clv}"),
            });
        }
        let raw_label = row.get(label_idx).unwrap_or("").trim();
        let label = match raw_label {
            "0" => Label::Churner,
            "1" => Label::NonChurner,
            other => {
                return Err(Error::InvalidRow {
                    row: row_no,
                    message: format!("label must be 0 (churner) or 1 (non-churner), got `{other}`"),
                })
            }
        };
        records.push(CustomerRecord { features, label, clv });
    }
    Dataset::new(name, schema, records)
}

/// Per-feature z-score statistics fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Columns with zero variance; they map to constant 0.
    pub degenerate: Vec<usize>,
}

impl Standardizer {
    pub fn fit(train: &Dataset) -> Self {
        let n = train.len() as f64;
        let width = train.width();
        let mut means = vec![0.0; width];
        for r in &train.records {
            for (m, v) in means.iter_mut().zip(&r.features) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut stds = vec![0.0; width];
        for r in &train.records {
            for ((s, v), m) in stds.iter_mut().zip(&r.features).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        stds.iter_mut().for_each(|s| *s = (*s / n).sqrt());
        let degenerate: Vec<usize> = stds
            .iter()
            .enumerate()
            .filter(|(_, &s)| s <= f64::EPSILON * 16.0)
            .map(|(j, _)| j)
            .collect();
        for &j in &degenerate {
            log::warn!(
                "feature `{}` of `{}` has zero variance; mapped to 0",
                train.schema[j],
                train.name
            );
        }
        Standardizer { means, stds, degenerate }
    }

    pub fn transform_row(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, v)| {
                if self.degenerate.contains(&j) {
                    0.0
                } else {
                    (v - self.means[j]) / self.stds[j]
                }
            })
            .collect()
    }

    pub fn transform(&self, ds: &Dataset) -> Dataset {
        let records = ds
            .records
            .iter()
            .map(|r| CustomerRecord {
                features: self.transform_row(&r.features),
                label: r.label,
                clv: r.clv,
            })
            .collect();
        Dataset {
            name: ds.name.clone(),
            schema: ds.schema.clone(),
            records,
        }
    }
}

/// Standardizes both splits with statistics computed on `train` only.
pub fn standardize(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset, Standardizer)> {
    if train.is_empty() {
        return Err(Error::InvalidDataset("cannot standardize an empty training set".into()));
    }
    if train.width() != test.width() {
        return Err(Error::DimensionMismatch {
            expected: train.width(),
            got: test.width(),
        });
    }
    let st = Standardizer::fit(train);
    Ok((st.transform(train), st.transform(test), st))
}

/// Partition of customers into CLV quantile groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentAssignment {
    pub q: usize,
    pub segment_of: Vec<usize>,
    /// Largest CLV in each segment, ascending.
    pub upper_clv: Vec<f64>,
}

impl SegmentAssignment {
    pub fn members(&self, segment: usize) -> Vec<usize> {
        self.segment_of
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == segment)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.q];
        for &s in &self.segment_of {
            sizes[s] += 1;
        }
        sizes
    }

    /// Segment for a customer not in the fitted set: the first segment whose
    /// largest CLV is at least `clv`, else the top segment.
    pub fn segment_for_clv(&self, clv: f64) -> usize {
        self.upper_clv
            .iter()
            .position(|&u| clv <= u)
            .unwrap_or(self.q - 1)
    }
}

/// Splits customers into `q` contiguous CLV groups of near-equal size.
///
/// Customers are ordered by CLV with ties broken by record index. Segment `k`
/// takes sorted positions `[k·n/q, (k+1)·n/q)` (integer division), so when `q`
/// does not divide `n` the larger segments sit toward the high-CLV end.
pub fn segment_by_clv(clvs: &[f64], q: usize) -> Result<SegmentAssignment> {
    let n = clvs.len();
    if q == 0 || q > n {
        return Err(Error::InvalidParameter(format!(
            "segment count q = {q} must lie in [1, {n}]"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| clvs[a].total_cmp(&clvs[b]).then(a.cmp(&b)));
    let mut segment_of = vec![0; n];
    let mut upper_clv = Vec::with_capacity(q);
    for k in 0..q {
        let (lo, hi) = (k * n / q, (k + 1) * n / q);
        for &i in &order[lo..hi] {
            segment_of[i] = k;
        }
        upper_clv.push(clvs[order[hi - 1]]);
    }
    Ok(SegmentAssignment { q, segment_of, upper_clv })
}
