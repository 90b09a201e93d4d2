//! `churn`: generate synthetic churn data, run the profit-driven benchmark
//! and its rank statistics.

mod config;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use churn_core::experiments::report::{write_cells_csv, write_csv_rows, write_json};
use churn_core::experiments::sweep::write_sweep_tables;
use churn_core::experiments::{
    analyze_profit_matrix, friedman_iman_davenport, generate_synthetic, read_profit_matrix, run_benchmark,
    sensitivity_sweep, summarize, BenchmarkReport, BenchmarkSummary, Incentive, MatrixAnalysis, Method,
};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{Preset, RunConfig, SpecFile};

#[derive(Debug, Parser)]
#[command(name = "churn", version, about = "Profit-driven churn prevention benchmark")]
struct Cli {
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write train/test CSVs for synthetic datasets.
    Generate(GenerateArgs),
    /// Run every dataset × incentive × method cell and the rank statistics.
    Benchmark(RunArgs),
    /// Train and evaluate one method on one dataset at one incentive.
    Train(TrainArgs),
    /// Recompute ranks, the Friedman test and Holm comparisons from a profit CSV.
    Stats(StatsArgs),
    /// Run the benchmark over the incentive grid and write the curve tables.
    Sweep(RunArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// TOML file with `[[datasets]]` tables and an optional `preset`.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    spec: Option<PathBuf>,
    /// Built-in spec set: `monthly` or `january`.
    #[arg(long, value_parser = parse_preset)]
    preset: Option<Preset>,
    /// Output directory.
    #[arg(long, env = "CHURN_OUT_DIR", default_value = "results")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Overrides {
    /// Master seed; overrides `benchmark.master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated methods, e.g. `pno,logistic,msp_cart`.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Comma-separated incentives: euros (`4.25`) or CLV fractions (`1/20`).
    #[arg(long, value_delimiter = ',')]
    incentives: Option<Vec<Incentive>>,
    /// Skip cross-validation and train with `benchmark.train` as given.
    #[arg(long)]
    no_tune: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `out_dir` from the config, then `results`.
    #[arg(long, env = "CHURN_OUT_DIR")]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Dataset name; the first configured dataset when absent.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long, default_value = "pno")]
    method: Method,
    /// Incentive; the first configured one when absent.
    #[arg(long)]
    incentive: Option<Incentive>,
    #[arg(long)]
    seed: Option<u64>,
    /// Skip cross-validation.
    #[arg(long)]
    no_tune: bool,
}

#[derive(Debug, Args)]
struct StatsArgs {
    /// CSV with header `method,<dataset>,...` and one row of profits per method.
    #[arg(long)]
    profits: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Also write the analysis as JSON to this file.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn parse_preset(s: &str) -> std::result::Result<Preset, String> {
    match s {
        "monthly" => Ok(Preset::Monthly),
        "january" => Ok(Preset::January),
        _ => Err(format!("unknown preset `{s}`; expected `monthly` or `january`")),
    }
}

/// Failures that should map to exit code 2 rather than 1.
#[derive(Debug)]
struct PartialFailure(usize);

impl std::fmt::Display for PartialFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} cell(s) failed; see the report for details", self.0)
    }
}

impl std::error::Error for PartialFailure {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global() {
        eprintln!("error: cannot start worker pool: {e}");
        return ExitCode::from(1);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<PartialFailure>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate(a) => cmd_generate(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Train(a) => cmd_train(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let specs = match (&a.spec, a.preset) {
        (Some(path), _) => SpecFile::load(path)?,
        (None, Some(p)) => p.specs(),
        (None, None) => bail!("pass --spec or --preset"),
    };
    std::fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    for s in &specs {
        let (train, test) = generate_synthetic(s)?;
        for (part, ds) in [("train", &train), ("test", &test)] {
            let path = a.out.join(format!("{}_{part}.csv", s.name));
            ds.save(&path)?;
            println!("{} ({} rows)", path.display(), ds.len());
        }
    }
    Ok(())
}

fn load_run(config: &Path, o: &Overrides) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(config)?;
    let b = &mut cfg.benchmark;
    if let Some(seed) = o.seed {
        b.master_seed = seed;
    }
    if let Some(m) = &o.methods {
        b.methods = m.clone();
    }
    if let Some(d) = &o.incentives {
        b.incentives = d.clone();
    }
    if o.no_tune {
        b.tune = false;
    }
    b.validate()
        .with_context(|| format!("invalid benchmark settings in {}", config.display()))?;
    Ok(cfg)
}

fn out_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("results"))
}

/// Holm table for one incentive, flattened for CSV.
#[derive(Debug, Serialize)]
struct RankRow<'a> {
    d_spec: &'a str,
    method: &'a str,
    avg_rank: f64,
    avg_profit: f64,
    z: Option<f64>,
    p_value: Option<f64>,
    threshold: Option<f64>,
    reject: Option<bool>,
}

fn rank_rows<'a>(d_spec: &'a str, a: &'a MatrixAnalysis) -> Vec<RankRow<'a>> {
    let mut rows: Vec<RankRow> = a
        .ranks
        .iter()
        .map(|r| {
            let h = a
                .holm
                .as_ref()
                .and_then(|h| h.rows.iter().find(|row| row.method == r.method));
            RankRow {
                d_spec,
                method: &r.method,
                avg_rank: r.avg_rank,
                avg_profit: r.avg_profit,
                z: h.map(|h| h.z),
                p_value: h.map(|h| h.p_value),
                threshold: h.map(|h| h.threshold),
                reject: h.map(|h| h.reject),
            }
        })
        .collect();
    rows.sort_by(|x, y| x.avg_rank.total_cmp(&y.avg_rank));
    rows
}

fn write_reports(dir: &Path, report: &BenchmarkReport, summary: &BenchmarkSummary) -> Result<()> {
    write_cells_csv(&dir.join("cells.csv"), report)?;
    let ranks: Vec<RankRow> = summary
        .incentives
        .iter()
        .filter_map(|s| s.analysis.as_ref().map(|a| rank_rows(&s.d_spec, a)))
        .flatten()
        .collect();
    write_csv_rows(&dir.join("ranks.csv"), &ranks)?;
    write_json(&dir.join("summary.json"), summary)?;
    write_json(&dir.join("report.json"), report)?;
    Ok(())
}

fn print_summary(summary: &BenchmarkSummary) {
    let mut out = std::io::stdout().lock();
    for s in &summary.incentives {
        let _ = writeln!(out, "d = {}", s.d_spec);
        match (&s.analysis, &s.error) {
            (Some(a), _) => print_analysis(&mut out, a),
            (None, Some(e)) => {
                let _ = writeln!(out, "  statistics unavailable: {e}");
            }
            (None, None) => {}
        }
    }
}

fn print_analysis(out: &mut impl std::io::Write, a: &MatrixAnalysis) {
    if let Some(f) = &a.friedman {
        let _ = writeln!(
            out,
            "  Friedman chi2 = {:.4}, Iman-Davenport F = {:.4} (df {} / {}), p = {:.4}",
            f.chi_square, f.f_stat, f.df1, f.df2, f.p_value
        );
    }
    let _ = writeln!(
        out,
        "  {:<16} {:>9} {:>11} {:>8} {:>8} {:>9}  reject",
        "method", "avg rank", "avg profit", "z", "p", "alpha/i"
    );
    for r in rank_rows("", a) {
        match (r.z, r.p_value, r.threshold, r.reject) {
            (Some(z), Some(p), Some(t), Some(rej)) => {
                let _ = writeln!(
                    out,
                    "  {:<16} {:>9.4} {:>11.2} {:>8.4} {:>8.4} {:>9.4}  {}",
                    r.method,
                    r.avg_rank,
                    r.avg_profit,
                    z,
                    p,
                    t,
                    if rej { "yes" } else { "no" }
                );
            }
            _ => {
                let _ = writeln!(out, "  {:<16} {:>9.4} {:>11.2}  (best)", r.method, r.avg_rank, r.avg_profit);
            }
        }
    }
    for n in &a.notes {
        let _ = writeln!(out, "  note: {n}");
    }
}

fn cmd_benchmark(a: RunArgs) -> Result<()> {
    let cfg = load_run(&a.config, &a.overrides)?;
    let datasets = cfg.datasets()?;
    let dir = out_dir(a.out, &cfg);
    let report = run_benchmark(&datasets, &cfg.benchmark)?;
    let summary = summarize(&report, cfg.benchmark.alpha);
    write_reports(&dir, &report, &summary)?;
    print_summary(&summary);
    println!("{} cells written to {}", report.cells.len(), dir.display());
    match report.n_failed() {
        0 => Ok(()),
        n => Err(PartialFailure(n).into()),
    }
}

fn cmd_sweep(a: RunArgs) -> Result<()> {
    let cfg = load_run(&a.config, &a.overrides)?;
    let datasets = cfg.datasets()?;
    let dir = out_dir(a.out, &cfg);
    let (report, tables) = sensitivity_sweep(&datasets, &cfg.benchmark)?;
    let summary = summarize(&report, cfg.benchmark.alpha);
    write_reports(&dir, &report, &summary)?;
    for p in write_sweep_tables(&tables, &dir)? {
        println!("{}", p.display());
    }
    match report.n_failed() {
        0 => Ok(()),
        n => Err(PartialFailure(n).into()),
    }
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    let b = &mut cfg.benchmark;
    b.methods = vec![a.method];
    if let Some(d) = a.incentive {
        b.incentives = vec![d];
    }
    b.incentives.truncate(1);
    if let Some(seed) = a.seed {
        b.master_seed = seed;
    }
    if a.no_tune {
        b.tune = false;
    }
    b.validate()?;
    let mut datasets = cfg.datasets()?;
    let idx = match &a.dataset {
        Some(name) => datasets
            .iter()
            .position(|d| &d.name == name)
            .with_context(|| format!("no dataset named `{name}` in {}", a.config.display()))?,
        None => 0,
    };
    let ds = datasets.swap_remove(idx);
    let report = run_benchmark(std::slice::from_ref(&ds), &cfg.benchmark)?;
    let cell = &report.cells[0];
    println!("{}", serde_json::to_string_pretty(cell)?);
    match &cell.metrics {
        Ok(_) => Ok(()),
        Err(_) => Err(PartialFailure(1).into()),
    }
}

fn cmd_stats(a: StatsArgs) -> Result<()> {
    let file = std::fs::File::open(&a.profits).with_context(|| format!("cannot open {}", a.profits.display()))?;
    let m = read_profit_matrix(file).with_context(|| format!("malformed profit matrix {}", a.profits.display()))?;
    if m.methods.len() < 3 {
        bail!(
            "the Friedman test compares at least 3 methods; {} has {}",
            a.profits.display(),
            m.methods.len()
        );
    }
    let analysis = analyze_profit_matrix(&m.methods, &m.datasets, m.profits, a.alpha)?;
    if analysis.friedman.is_none() {
        // Surface the underlying reason (e.g. too few datasets) as an error.
        let avg: Vec<f64> = analysis.ranks.iter().map(|r| r.avg_rank).collect();
        friedman_iman_davenport(&avg, analysis.n_datasets)?;
    }
    print_analysis(&mut std::io::stdout().lock(), &analysis);
    if let Some(path) = &a.json {
        write_json(path, &analysis)?;
    }
    Ok(())
}
