//! Run configuration files.
//!
//! A config is a TOML document with an optional top-level `out_dir`, a
//! `[data]` table naming the datasets and a `[benchmark]` table whose keys
//! mirror `BenchmarkConfig`. Relative paths are resolved against the
//! directory holding the config file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use churn_core::domain::load_dataset;
use churn_core::experiments::{generate_synthetic, BenchmarkConfig, BenchmarkDataset, SyntheticSpec};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// The twelve monthly synthetic datasets.
    Monthly,
    January,
}

impl Preset {
    pub fn specs(self) -> Vec<SyntheticSpec> {
        match self {
            Preset::Monthly => SyntheticSpec::monthly_presets(),
            Preset::January => vec![SyntheticSpec::january()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFiles {
    pub name: String,
    pub train: PathBuf,
    pub test: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub preset: Option<Preset>,
    /// Inline synthetic specs.
    pub synthetic: Vec<SyntheticSpec>,
    /// Train/test CSV pairs.
    pub files: Vec<DatasetFiles>,
    /// Feature columns to read from CSV files; all non-label, non-CLV columns
    /// when empty.
    pub features: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: Option<PathBuf>,
    pub data: DataSection,
    pub benchmark: BenchmarkConfig,
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<RunConfig> {
        let mut cfg: RunConfig = toml::from_str(text)?;
        for f in &mut cfg.data.files {
            f.train = base_dir.join(&f.train);
            f.test = base_dir.join(&f.test);
            for p in [&f.train, &f.test] {
                if !p.is_file() {
                    bail!("dataset `{}`: file {} does not exist", f.name, p.display());
                }
            }
        }
        if let Some(out) = &cfg.out_dir {
            cfg.out_dir = Some(base_dir.join(out));
        }
        if cfg.data.preset.is_none() && cfg.data.synthetic.is_empty() && cfg.data.files.is_empty() {
            bail!("config names no datasets; set data.preset, [[data.synthetic]] or [[data.files]]");
        }
        for s in &cfg.data.synthetic {
            s.validate()?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::parse(&text, base).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Generates or reads every dataset, in the order preset, inline specs,
    /// files.
    pub fn datasets(&self) -> Result<Vec<BenchmarkDataset>> {
        let mut specs = self.data.preset.map(Preset::specs).unwrap_or_default();
        specs.extend(self.data.synthetic.iter().cloned());
        let mut out = Vec::new();
        for s in specs {
            let (train, test) = generate_synthetic(&s)?;
            out.push(BenchmarkDataset {
                name: s.name,
                train,
                test,
            });
        }
        for f in &self.data.files {
            let train = load_dataset(&f.train, &self.data.features)?;
            let test = load_dataset(&f.test, &self.data.features)?;
            out.push(BenchmarkDataset {
                name: f.name.clone(),
                train,
                test,
            });
        }
        let mut names: Vec<&str> = out.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            bail!("dataset name `{}` appears twice", w[0]);
        }
        Ok(out)
    }
}

/// Synthetic spec file for `churn generate`: a list of `[[datasets]]` tables,
/// optionally preceded by `preset = "monthly"`.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpecFile {
    pub preset: Option<Preset>,
    pub datasets: Vec<SyntheticSpec>,
}

impl SpecFile {
    pub fn load(path: &Path) -> Result<Vec<SyntheticSpec>> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read spec {}", path.display()))?;
        let file: SpecFile = toml::from_str(&text).with_context(|| format!("invalid spec {}", path.display()))?;
        let mut specs = file.preset.map(Preset::specs).unwrap_or_default();
        specs.extend(file.datasets);
        if specs.is_empty() {
            bail!("spec {} defines no datasets", path.display());
        }
        for s in &specs {
            s.validate()?;
        }
        Ok(specs)
    }
}
