//! Profit-driven churn prediction: a cost model for retention campaigns, a
//! small neural network trained to minimize campaign regret, classical
//! baselines with profit-maximizing thresholds, and the experiment harness
//! that compares them.

pub mod decision;
pub mod domain;
pub mod error;
pub mod experiments;
pub mod models;
pub mod profit;
pub mod resampling;

pub use decision::{CampaignParams, Decision, Label};
pub use domain::{CustomerRecord, Dataset};
pub use error::{Error, Result};
