//! Shared fixtures for the criterion benchmarks.

use churn_core::experiments::{generate_synthetic, SyntheticSpec};
use churn_core::Dataset;

/// January-sized synthetic train/test pair.
pub fn january() -> (Dataset, Dataset) {
    generate_synthetic(&SyntheticSpec::january()).expect("preset spec is valid")
}
