//! The dataset × incentive × method benchmark.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decision::{
    break_even_clv, normalized_gap, optimal_total_profit, prescribe_all, total_profit, CampaignParams, Decision,
};
use crate::domain::{standardize, Dataset};
use crate::error::{Error, Result};
use crate::experiments::cv::{monte_carlo_cv, CvConfig};
use crate::experiments::seed::{child_seed, derive_seed};
use crate::models::{
    default_hidden_dim, fit_cart, fit_logistic, train, CartConfig, KnnModel, LogisticConfig, LossKind, Mlp, Scorer,
    TrainConfig,
};
use crate::profit::{accuracy, decision_accuracy, msp, targeted_fraction, threshold_decisions};
use crate::resampling::{smote_balance, SmoteConfig};

/// Retention incentive, either in euros or as a fraction of the training
/// set's mean CLV. Written `4.25` or `1/20`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Incentive {
    Absolute(f64),
    ClvFraction { numerator: f64, denominator: f64 },
}

impl Incentive {
    /// `CLV/20, CLV/15, CLV/10, CLV/5, CLV/3`.
    pub fn paper_grid() -> Vec<Incentive> {
        [20.0, 15.0, 10.0, 5.0, 3.0]
            .into_iter()
            .map(|denominator| Incentive::ClvFraction {
                numerator: 1.0,
                denominator,
            })
            .collect()
    }

    pub fn resolve(&self, mean_clv: f64) -> f64 {
        match *self {
            Incentive::Absolute(d) => d,
            Incentive::ClvFraction {
                numerator,
                denominator,
            } => mean_clv * numerator / denominator,
        }
    }
}

impl fmt::Display for Incentive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Incentive::Absolute(d) => write!(f, "{d}"),
            Incentive::ClvFraction {
                numerator,
                denominator,
            } => write!(f, "{numerator}/{denominator}"),
        }
    }
}

impl FromStr for Incentive {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("cannot read incentive `{s}`; use e.g. `4.25` or `1/20`"));
        let s = s.trim();
        let inc = match s.split_once('/') {
            Some((a, b)) => Incentive::ClvFraction {
                numerator: a.trim().parse().map_err(|_| bad())?,
                denominator: b.trim().parse().map_err(|_| bad())?,
            },
            None => Incentive::Absolute(s.parse().map_err(|_| bad())?),
        };
        let ok = match inc {
            Incentive::Absolute(d) => d.is_finite() && d > 0.0,
            Incentive::ClvFraction {
                numerator,
                denominator,
            } => numerator.is_finite() && denominator.is_finite() && numerator > 0.0 && denominator > 0.0,
        };
        if ok {
            Ok(inc)
        } else {
            Err(bad())
        }
    }
}

impl TryFrom<String> for Incentive {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Incentive> for String {
    fn from(i: Incentive) -> String {
        i.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    /// Network trained on smooth regret, per-customer midpoint prescriptions.
    Pno,
    /// Same network trained on cross-entropy, targeting scores at or below
    /// the class threshold.
    MlpCrossEntropy,
    Logistic,
    Knn,
    Cart,
    MspLogistic,
    MspKnn,
    MspCart,
    /// Scores equal to the true labels.
    Oracle,
    /// The same score for every customer.
    Constant(f64),
}

impl Method {
    pub fn paper_set() -> Vec<Method> {
        vec![
            Method::Pno,
            Method::Logistic,
            Method::Knn,
            Method::Cart,
            Method::MspLogistic,
            Method::MspKnn,
            Method::MspCart,
        ]
    }

    fn uses_smote(self) -> bool {
        matches!(
            self,
            Method::Logistic | Method::Knn | Method::Cart | Method::MspLogistic | Method::MspKnn | Method::MspCart
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Pno => f.write_str("pno"),
            Method::MlpCrossEntropy => f.write_str("mlp_ce"),
            Method::Logistic => f.write_str("logistic"),
            Method::Knn => f.write_str("knn"),
            Method::Cart => f.write_str("cart"),
            Method::MspLogistic => f.write_str("msp_logistic"),
            Method::MspKnn => f.write_str("msp_knn"),
            Method::MspCart => f.write_str("msp_cart"),
            Method::Oracle => f.write_str("oracle"),
            Method::Constant(c) => write!(f, "constant:{c}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "pno" => Method::Pno,
            "mlp_ce" => Method::MlpCrossEntropy,
            "logistic" => Method::Logistic,
            "knn" => Method::Knn,
            "cart" => Method::Cart,
            "msp_logistic" => Method::MspLogistic,
            "msp_knn" => Method::MspKnn,
            "msp_cart" => Method::MspCart,
            "oracle" => Method::Oracle,
            other => match other.strip_prefix("constant:").map(str::parse::<f64>) {
                Some(Ok(c)) if c.is_finite() => Method::Constant(c),
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "unknown method `{other}`; expected one of pno, mlp_ce, logistic, knn, cart, \
                         msp_logistic, msp_knn, msp_cart, oracle, constant:<score>"
                    )))
                }
            },
        })
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

/// How accuracy is measured for the regret-trained network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PnoAccuracy {
    /// Scores at or below the class threshold count as predicted churners.
    ClassThreshold,
    /// Targeted customers count as predicted churners.
    Decisions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoteSettings {
    pub enabled: bool,
    pub k_neighbors: usize,
    pub target_ratio: f64,
}

impl Default for SmoteSettings {
    fn default() -> Self {
        let d = SmoteConfig::default();
        SmoteSettings {
            enabled: true,
            k_neighbors: d.k_neighbors,
            target_ratio: d.target_ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub contact_cost: f64,
    pub acceptance: f64,
    pub slope: f64,
    pub incentives: Vec<Incentive>,
    pub methods: Vec<Method>,
    /// CLV segments for the MSP methods.
    pub segments: usize,
    /// Hidden width of the networks; half the input width when absent.
    pub hidden_dim: Option<usize>,
    /// Base training settings. With `tune` on, the learning rate and epochs
    /// of the regret-trained network come from cross-validation.
    pub train: TrainConfig,
    pub tune: bool,
    pub cv: CvConfig,
    pub smote: SmoteSettings,
    pub knn_k: usize,
    pub cart: CartConfig,
    pub logistic: LogisticConfig,
    pub class_threshold: f64,
    pub pno_accuracy: PnoAccuracy,
    /// Drop customers whose CLV is at or below break-even for the cell's
    /// incentive from both splits. They can never be profitably targeted.
    pub drop_below_break_even: bool,
    pub alpha: f64,
    pub master_seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            contact_cost: 1.36,
            acceptance: 0.3,
            slope: crate::decision::DEFAULT_SLOPE,
            incentives: Incentive::paper_grid(),
            methods: Method::paper_set(),
            segments: 2,
            hidden_dim: None,
            // Full-batch Adam barely moves in 100 epochs at these learning
            // rates, so the benchmark trains on minibatches of 32.
            train: TrainConfig {
                batch_size: Some(32),
                ..TrainConfig::default()
            },
            tune: true,
            cv: CvConfig::default(),
            smote: SmoteSettings::default(),
            knn_k: 5,
            cart: CartConfig::default(),
            logistic: LogisticConfig::default(),
            class_threshold: 0.5,
            pno_accuracy: PnoAccuracy::ClassThreshold,
            drop_below_break_even: false,
            alpha: 0.05,
            master_seed: 42,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        // Incentive only matters once resolved; any positive value checks the rest.
        CampaignParams::new(self.contact_cost, 1.0, self.acceptance, self.slope)?;
        self.train.validate()?;
        if self.tune && self.methods.contains(&Method::Pno) {
            self.cv.validate()?;
        }
        if self.incentives.is_empty() || self.methods.is_empty() {
            return Err(Error::InvalidParameter("benchmark needs at least one incentive and one method".into()));
        }
        if self.segments == 0 || self.knn_k == 0 || self.hidden_dim == Some(0) {
            return Err(Error::InvalidParameter("segments, knn_k and hidden_dim must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        Ok(())
    }
}

/// One train/test pair entering the benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkDataset {
    pub name: String,
    pub train: Dataset,
    pub test: Dataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub profit: f64,
    pub accuracy: f64,
    /// Absent when the optimal campaign has zero cost.
    pub gap: Option<f64>,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub dataset: String,
    pub d_spec: String,
    /// Incentive in euros.
    pub d: f64,
    pub method: String,
    pub optimal_profit: f64,
    pub metrics: std::result::Result<CellMetrics, String>,
}

impl CellReport {
    pub fn is_ok(&self) -> bool {
        self.metrics.is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub datasets: Vec<String>,
    pub incentives: Vec<String>,
    pub methods: Vec<String>,
    /// Ordered by dataset, then incentive, then method.
    pub cells: Vec<CellReport>,
}

impl BenchmarkReport {
    pub fn failed(&self) -> impl Iterator<Item = &CellReport> {
        self.cells.iter().filter(|c| !c.is_ok())
    }

    pub fn n_failed(&self) -> usize {
        self.failed().count()
    }

    /// Profits for one incentive as a methods × datasets matrix, `NaN` where
    /// the cell failed.
    pub fn profit_matrix(&self, d_spec: &str) -> Vec<Vec<f64>> {
        let mut m = vec![vec![f64::NAN; self.datasets.len()]; self.methods.len()];
        for c in self.cells.iter().filter(|c| c.d_spec == d_spec) {
            let (Some(i), Some(j)) = (
                self.methods.iter().position(|x| *x == c.method),
                self.datasets.iter().position(|x| *x == c.dataset),
            ) else {
                continue;
            };
            if let Ok(metrics) = &c.metrics {
                m[i][j] = metrics.profit;
            }
        }
        m
    }
}

struct Prepared<'a> {
    name: &'a str,
    train: Dataset,
    test: Dataset,
    mean_clv: f64,
}

fn evaluate(decisions: &[Decision], accuracy: f64, test: &Dataset, params: &CampaignParams) -> Result<CellMetrics> {
    let labels = test.labels();
    let clvs = test.clvs();
    let profit = total_profit(decisions, &labels, params, &clvs)?;
    let optimal = optimal_total_profit(&labels, params, &clvs)?;
    Ok(CellMetrics {
        profit,
        accuracy,
        gap: normalized_gap(-optimal, -profit).ok(),
        eta: targeted_fraction(decisions)?,
    })
}

fn fit_baseline(method: Method, train: &Dataset, cfg: &BenchmarkConfig) -> Result<Box<dyn Scorer>> {
    Ok(match method {
        Method::Logistic | Method::MspLogistic => Box::new(fit_logistic(train, &cfg.logistic)?),
        Method::Knn | Method::MspKnn => Box::new(KnnModel::fit(train, cfg.knn_k.min(train.len()))?),
        Method::Cart | Method::MspCart => Box::new(fit_cart(train, &cfg.cart)),
        other => return Err(Error::InvalidParameter(format!("`{other}` is not a baseline classifier"))),
    })
}

fn hidden_dim(cfg: &BenchmarkConfig, width: usize) -> usize {
    cfg.hidden_dim.unwrap_or_else(|| default_hidden_dim(width))
}

fn run_cell(data: &Prepared, method: Method, params: &CampaignParams, cfg: &BenchmarkConfig, seed: u64) -> Result<CellMetrics> {
    let test = &data.test;
    let labels = test.labels();
    let clvs = test.clvs();
    match method {
        Method::Pno => {
            let hidden = hidden_dim(cfg, data.train.width());
            let mut tc = TrainConfig {
                loss: LossKind::SmoothRegret,
                ..cfg.train
            };
            if cfg.tune {
                tc = monte_carlo_cv(&data.train, &cfg.cv, &tc, hidden, params, child_seed(seed, 1))?.best;
            }
            tc.seed = child_seed(seed, 2);
            let net = Mlp::init(data.train.width(), hidden, tc.seed)?;
            let (net, _) = train(net, &data.train, params, &tc)?;
            let scores = net.score_dataset(test)?;
            let decisions = prescribe_all(&scores, &clvs, params)?;
            let acc = match cfg.pno_accuracy {
                PnoAccuracy::ClassThreshold => accuracy(&scores, &labels, cfg.class_threshold)?,
                PnoAccuracy::Decisions => decision_accuracy(&decisions, &labels)?,
            };
            evaluate(&decisions, acc, test, params)
        }
        Method::MlpCrossEntropy => {
            let tc = TrainConfig {
                loss: LossKind::CrossEntropy,
                seed: child_seed(seed, 2),
                ..cfg.train
            };
            let net = Mlp::init(data.train.width(), hidden_dim(cfg, data.train.width()), tc.seed)?;
            let (net, _) = train(net, &data.train, params, &tc)?;
            let scores = net.score_dataset(test)?;
            let decisions = threshold_decisions(&scores, cfg.class_threshold);
            evaluate(&decisions, accuracy(&scores, &labels, cfg.class_threshold)?, test, params)
        }
        Method::Oracle => {
            let scores: Vec<f64> = labels.iter().map(|y| y.as_f64()).collect();
            let decisions = prescribe_all(&scores, &clvs, params)?;
            evaluate(&decisions, accuracy(&scores, &labels, cfg.class_threshold)?, test, params)
        }
        Method::Constant(c) => {
            let scores = vec![c; test.len()];
            let decisions = threshold_decisions(&scores, cfg.class_threshold);
            evaluate(&decisions, accuracy(&scores, &labels, cfg.class_threshold)?, test, params)
        }
        Method::Logistic | Method::Knn | Method::Cart | Method::MspLogistic | Method::MspKnn | Method::MspCart => {
            let fit_on = if cfg.smote.enabled && method.uses_smote() {
                smote_balance(
                    &data.train,
                    &SmoteConfig {
                        k_neighbors: cfg.smote.k_neighbors,
                        target_ratio: cfg.smote.target_ratio,
                        seed: child_seed(seed, 3),
                    },
                )?
            } else {
                data.train.clone()
            };
            let model = fit_baseline(method, &fit_on, cfg)?;
            let scores = model.score_dataset(test)?;
            if matches!(method, Method::Logistic | Method::Knn | Method::Cart) {
                let decisions = threshold_decisions(&scores, cfg.class_threshold);
                return evaluate(&decisions, accuracy(&scores, &labels, cfg.class_threshold)?, test, params);
            }
            // Segment thresholds come from the original training customers.
            let train_scores = model.score_dataset(&data.train)?;
            let fitted = msp(
                &train_scores,
                &data.train.labels(),
                &data.train.clvs(),
                cfg.segments,
                params,
            )?;
            let decisions = fitted.decisions(&scores, &clvs)?;
            evaluate(&decisions, decision_accuracy(&decisions, &labels)?, test, params)
        }
    }
}

/// Runs every (dataset, incentive, method) cell.
///
/// Features are standardized with training-split statistics. Incentives given
/// as CLV fractions use the training split's mean CLV. Each cell draws its
/// randomness from a seed derived from the master seed and the cell's
/// identity, so the report does not depend on scheduling. A failing cell is
/// recorded with its error message and the others continue.
pub fn run_benchmark(datasets: &[BenchmarkDataset], cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    if datasets.is_empty() {
        return Err(Error::InvalidParameter("benchmark needs at least one dataset".into()));
    }
    let prepared: Vec<Prepared> = datasets
        .iter()
        .map(|d| {
            let (train, test, _) = standardize(&d.train, &d.test)?;
            Ok(Prepared {
                name: &d.name,
                mean_clv: train.mean_clv(),
                train,
                test,
            })
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize, usize)> = (0..prepared.len())
        .flat_map(|i| {
            (0..cfg.incentives.len()).flat_map(move |j| (0..cfg.methods.len()).map(move |k| (i, j, k)))
        })
        .collect();

    let cells: Vec<CellReport> = jobs
        .par_iter()
        .map(|&(i, j, k)| {
            let data = &prepared[i];
            let incentive = cfg.incentives[j];
            let method = cfg.methods[k];
            let d = incentive.resolve(data.mean_clv);
            let id = format!("{}/{}/{}", data.name, incentive, method);
            let outcome = CampaignParams::new(cfg.contact_cost, d, cfg.acceptance, cfg.slope).and_then(|params| {
                let filtered;
                let data = if cfg.drop_below_break_even {
                    let be = break_even_clv(&params);
                    filtered = Prepared {
                        name: data.name,
                        train: data.train.retain_clv_above(be)?,
                        test: data.test.retain_clv_above(be)?,
                        mean_clv: data.mean_clv,
                    };
                    &filtered
                } else {
                    data
                };
                let optimal = optimal_total_profit(&data.test.labels(), &params, &data.test.clvs())?;
                let metrics = run_cell(data, method, &params, cfg, derive_seed(cfg.master_seed, &id));
                Ok((optimal, metrics))
            });
            let (optimal_profit, metrics) = match outcome {
                Ok((o, m)) => (o, m),
                Err(e) => (f64::NAN, Err(e)),
            };
            if let Err(e) = &metrics {
                log::warn!("cell {id} failed: {e}");
            } else {
                log::info!("cell {id} done");
            }
            CellReport {
                dataset: data.name.to_string(),
                d_spec: incentive.to_string(),
                d,
                method: method.to_string(),
                optimal_profit,
                metrics: metrics.map_err(|e| e.to_string()),
            }
        })
        .collect();

    Ok(BenchmarkReport {
        datasets: prepared.iter().map(|p| p.name.to_string()).collect(),
        incentives: cfg.incentives.iter().map(Incentive::to_string).collect(),
        methods: cfg.methods.iter().map(Method::to_string).collect(),
        cells,
    })
}
