//! Experiment harness: synthetic data, cross-validation, the benchmark
//! protocol, rank statistics and sensitivity sweeps.

pub mod benchmark;
pub mod cv;
pub mod report;
pub mod seed;
pub mod stats;
pub mod sweep;
pub mod synthetic;

pub use benchmark::{
    run_benchmark, BenchmarkConfig, BenchmarkDataset, BenchmarkReport, CellMetrics, CellReport, Incentive, Method,
    PnoAccuracy, SmoteSettings,
};
pub use cv::{monte_carlo_cv, CvConfig, CvOutcome};
pub use report::{analyze_profit_matrix, read_profit_matrix, summarize, BenchmarkSummary, MatrixAnalysis, ProfitMatrix};
pub use stats::{friedman_iman_davenport, holm, holm_vs_best, nemenyi_z, rank_methods, HolmReport, RankTable};
pub use sweep::{sensitivity_sweep, sweep_tables, SweepTables};
pub use synthetic::{generate_synthetic, SyntheticSpec};
