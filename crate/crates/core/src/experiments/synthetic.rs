//! Synthetic churn datasets with heterogeneous customer lifetime values.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::decision::Label;
use crate::domain::{CustomerRecord, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub name: String,
    pub n_train: usize,
    pub n_test: usize,
    pub n_features: usize,
    pub churn_rate: f64,
    /// Mean CLV in euros over train and test together.
    pub mean_clv: f64,
    /// Standard deviation of log-CLV.
    pub clv_dispersion: f64,
    /// Mahalanobis distance between the class means of the features.
    pub signal_strength: f64,
    /// Correlation between the churn indicator and log-CLV. Positive values
    /// give churners higher CLVs.
    pub clv_churn_correlation: f64,
    pub seed: u64,
}

pub const PAPER_FEATURES: usize = 24;

const MONTHS: [&str; 12] = [
    "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
];
const TRAIN_SIZES: [usize; 12] = [786, 792, 792, 818, 844, 889, 924, 930, 938, 961, 972, 962];
const TEST_SIZES: [usize; 12] = [197, 198, 198, 205, 211, 223, 231, 233, 235, 241, 244, 241];
const CHURN_RATES: [f64; 12] = [
    0.1699, 0.1697, 0.1717, 0.1632, 0.1725, 0.1835, 0.1974, 0.1823, 0.1935, 0.2038, 0.2146, 0.1787,
];
const MEAN_CLVS: [f64; 12] = [85.0, 85.0, 88.2, 88.4, 86.8, 91.2, 91.0, 92.2, 90.6, 87.4, 87.2, 89.4];

impl SyntheticSpec {
    /// Twelve monthly datasets with the sizes, churn rates and mean CLVs of
    /// the 2017 customer bases, 24 features each.
    pub fn monthly_presets() -> Vec<SyntheticSpec> {
        (0..12)
            .map(|i| SyntheticSpec {
                name: MONTHS[i].to_string(),
                n_train: TRAIN_SIZES[i],
                n_test: TEST_SIZES[i],
                n_features: PAPER_FEATURES,
                churn_rate: CHURN_RATES[i],
                mean_clv: MEAN_CLVS[i],
                clv_dispersion: 0.8,
                signal_strength: 1.5,
                clv_churn_correlation: -0.3,
                seed: 2017 * 100 + i as u64 + 1,
            })
            .collect()
    }

    pub fn january() -> SyntheticSpec {
        Self::monthly_presets().swap_remove(0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(format!("synthetic spec `{}`: {msg}", self.name)));
        if self.n_train < 10 || self.n_test < 10 {
            return bad(format!("sizes {}/{} must be at least 10", self.n_train, self.n_test));
        }
        if self.n_features == 0 {
            return bad("needs at least one feature".into());
        }
        if !(self.churn_rate > 0.0 && self.churn_rate < 1.0) {
            return bad(format!("churn rate {} must lie in (0, 1)", self.churn_rate));
        }
        if !(self.mean_clv.is_finite() && self.mean_clv > 0.0) {
            return bad(format!("mean CLV {} must be positive", self.mean_clv));
        }
        if !(self.clv_dispersion.is_finite() && self.clv_dispersion >= 0.0) {
            return bad(format!("CLV dispersion {} must be non-negative", self.clv_dispersion));
        }
        if !(self.signal_strength.is_finite() && self.signal_strength >= 0.0) {
            return bad(format!("signal strength {} must be non-negative", self.signal_strength));
        }
        if !(self.clv_churn_correlation > -1.0 && self.clv_churn_correlation < 1.0) {
            return bad(format!(
                "CLV-churn correlation {} must lie in (-1, 1)",
                self.clv_churn_correlation
            ));
        }
        for (split, n) in [("train", self.n_train), ("test", self.n_test)] {
            let c = churner_count(n, self.churn_rate);
            if c == 0 || c == n {
                return bad(format!("{split} split of {n} would contain a single class"));
            }
        }
        Ok(())
    }

    /// Number of features whose mean depends on the class.
    pub fn informative_features(&self) -> usize {
        self.n_features.div_ceil(3)
    }

    pub fn schema(&self) -> Vec<String> {
        (0..self.n_features).map(|j| format!("x{j}")).collect()
    }
}

fn churner_count(n: usize, rate: f64) -> usize {
    (rate * n as f64).round() as usize
}

fn stratified_labels(n: usize, rate: f64, rng: &mut ChaCha8Rng) -> Vec<Label> {
    let c = churner_count(n, rate);
    let mut labels: Vec<Label> = (0..n)
        .map(|i| if i < c { Label::Churner } else { Label::NonChurner })
        .collect();
    labels.shuffle(rng);
    labels
}

/// Draws the train and test splits.
///
/// Each split holds exactly `round(rate · n)` churners at shuffled positions.
/// Informative features are unit-variance Gaussians whose means sit at
/// `∓ signal / (2·sqrt(informative))` for churners and non-churners; the rest
/// are pure noise. Log-CLV is Gaussian with the requested dispersion and
/// correlation with the standardized churn indicator, and the realized CLVs
/// are rescaled so their overall mean equals `mean_clv` exactly.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut labels = stratified_labels(spec.n_train, spec.churn_rate, &mut rng);
    labels.extend(stratified_labels(spec.n_test, spec.churn_rate, &mut rng));

    let p = spec.churn_rate;
    let sd = (p * (1.0 - p)).sqrt();
    let rho = spec.clv_churn_correlation;
    let sigma = spec.clv_dispersion;
    let informative = spec.informative_features();
    let shift = spec.signal_strength / (2.0 * (informative as f64).sqrt());

    let mut features = Vec::with_capacity(labels.len());
    let mut clvs = Vec::with_capacity(labels.len());
    for &y in &labels {
        let sign = if y.is_churner() { -1.0 } else { 1.0 };
        let x: Vec<f64> = (0..spec.n_features)
            .map(|j| {
                let noise: f64 = StandardNormal.sample(&mut rng);
                if j < informative { noise + sign * shift } else { noise }
            })
            .collect();
        let indicator = if y.is_churner() { 1.0 } else { 0.0 };
        let u = (indicator - p) / sd;
        let eps: f64 = StandardNormal.sample(&mut rng);
        let z = rho * u + (1.0 - rho * rho).sqrt() * eps;
        features.push(x);
        clvs.push((sigma * z).exp());
    }
    let scale = spec.mean_clv * clvs.len() as f64 / clvs.iter().sum::<f64>();

    let mut records: Vec<CustomerRecord> = features
        .into_iter()
        .zip(labels)
        .zip(clvs)
        .map(|((x, y), c)| CustomerRecord::new(x, y, c * scale))
        .collect::<Result<_>>()?;
    let test = records.split_off(spec.n_train);
    Ok((
        Dataset::new(format!("{}_train", spec.name), spec.schema(), records)?,
        Dataset::new(format!("{}_test", spec.name), spec.schema(), test)?,
    ))
}
