//! Acceptance suite. Runs each criterion in turn, prints one PASS/FAIL line
//! per criterion and exits nonzero if any failed.
//!
//! Criteria run sequentially so their wall-clock budgets are measured
//! without interference from each other.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use churn_core::decision::{
    break_even_clv, midpoint, optimal_total_profit, regret, smooth_regret, smooth_regret_grad, total_profit,
    CampaignParams, Decision, Label,
};
use churn_core::domain::{CustomerRecord, Dataset};
use churn_core::experiments::report::{write_cells_csv, write_json};
use churn_core::experiments::sweep::{write_sweep_tables, GAP_FILE, OPTIMAL_FILE, PROFIT_FILE, TARGETING_FILE};
use churn_core::experiments::{
    friedman_iman_davenport, generate_synthetic, holm_vs_best, nemenyi_z, run_benchmark, sensitivity_sweep,
    summarize, BenchmarkConfig, BenchmarkDataset, Incentive, Method, SyntheticSpec,
};
use churn_core::models::gradcheck::gradient_check;
use churn_core::models::mlp::{LossKind, Mlp, TrainConfig};
use churn_core::profit::{mp, msp, msp_over_q, profit_at_threshold};
use churn_core::resampling::{nearest_neighbors, smote_balance, SmoteConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < budget, || format!("took {t:.2?}, budget {budget:?}"))
}

fn paper_params() -> CampaignParams {
    CampaignParams::new(1.36, 4.25, 0.3, 10.0).unwrap()
}

fn label(churner: bool) -> Label {
    if churner {
        Label::Churner
    } else {
        Label::NonChurner
    }
}

// Published average ranks over N = 12 datasets, best first, with the
// published p-values and reject column of the comparison with the best.
const TABLE: [(&str, f64, f64, bool); 12] = [
    ("PnO", 2.7917, f64::NAN, false),
    ("ProfLogit", 4.4167, 0.2696, false),
    ("MSP_SVM", 5.0833, 0.1195, false),
    ("MSP_RF", 5.4583, 0.0700, false),
    ("MSP_log", 5.5000, 0.0658, false),
    ("MSP_KNN", 6.7500, 0.0072, true),
    ("SVM", 6.7917, 0.0066, true),
    ("Logistic", 7.7083, 0.0008, true),
    ("RF", 7.8750, 0.0006, true),
    ("MSP_CART", 8.1250, 0.0003, true),
    ("KNN", 8.3333, 0.0002, true),
    ("CART", 9.1667, 0.0000, true),
];

fn statistics() -> Outcome {
    let start = Instant::now();
    let methods: Vec<String> = TABLE.iter().map(|r| r.0.to_string()).collect();
    let ranks: Vec<f64> = TABLE.iter().map(|r| r.1).collect();
    let f = friedman_iman_davenport(&ranks, 12).map_err(|e| e.to_string())?;
    ensure((f.f_stat - 4.1018).abs() <= 0.06, || format!("F_F = {:.4}", f.f_stat))?;
    let (_, p_prof) = nemenyi_z(ranks[0], ranks[1], 12, 12);
    let (_, p_svm) = nemenyi_z(ranks[0], ranks[2], 12, 12);
    ensure((p_prof - 0.2696).abs() <= 0.003, || format!("ProfLogit p = {p_prof:.4}"))?;
    ensure((p_svm - 0.1195).abs() <= 0.003, || format!("MSP_SVM p = {p_svm:.4}"))?;
    let holm = holm_vs_best(&methods, &ranks, 12, 0.05).map_err(|e| e.to_string())?;
    ensure(holm.best_method == "PnO", || format!("best is {}", holm.best_method))?;
    for (row, expected) in holm.rows.iter().zip(&TABLE[1..]) {
        ensure(row.method == expected.0, || format!("order: {} vs {}", row.method, expected.0))?;
        ensure(row.reject == expected.3, || format!("{}: reject = {}", row.method, row.reject))?;
    }
    within_budget(start, Duration::from_secs(1))?;
    Ok(format!("F_F = {:.4}, p = {p_prof:.4} / {p_svm:.4}, Holm column matches", f.f_stat))
}

fn decision_analytics() -> Outcome {
    let p = paper_params();
    let clv = 85.0;
    let m = midpoint(&p, clv).map_err(|e| e.to_string())?;
    ensure((m - 0.80298).abs() <= 1e-4, || format!("m = {m}"))?;
    // A churner scored above m is skipped; a non-churner scored below m is targeted.
    let missed = regret(Label::Churner, 0.95, &p, clv);
    let wasted = regret(Label::NonChurner, 0.1, &p, clv);
    ensure((missed - 22.865).abs() <= 1e-6, || format!("missed churner regret = {missed}"))?;
    ensure((wasted - 5.61).abs() <= 1e-9, || format!("wrong target regret = {wasted}"))?;
    let be = break_even_clv(&p);
    ensure((be - 8.7833).abs() <= 1e-4, || format!("break-even = {be}"))?;
    Ok(format!("m = {m:.5}, regrets {missed:.3} / {wasted:.2}, break-even {be:.4}"))
}

fn record(rng: &mut ChaCha8Rng, width: usize) -> CustomerRecord {
    let x = (0..width).map(|_| rng.random_range(-2.0..2.0)).collect();
    CustomerRecord::new(x, label(rng.random_bool(0.4)), rng.random_range(5.0..300.0)).unwrap()
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let p = CampaignParams::new(
            rng.random_range(0.5..3.0),
            rng.random_range(1.0..20.0),
            rng.random_range(0.1..0.9),
            rng.random_range(1.0..20.0),
        )
        .unwrap();
        let y = label(rng.random_bool(0.5));
        let (s, clv) = (rng.random_range(0.0..1.0), rng.random_range(5.0..300.0));
        let a = smooth_regret_grad(y, s, &p, clv);
        // Fourth-order central stencil: gradients far from the midpoint are
        // tiny, and a two-point difference there is dominated by rounding.
        let f = |x: f64| smooth_regret(y, x, &p, clv);
        let e = 1e-3;
        let n = (f(s - 2.0 * e) - 8.0 * f(s - e) + 8.0 * f(s + e) - f(s + 2.0 * e)) / (12.0 * e);
        let scale = a.abs().max(n.abs());
        if scale > 1e-6 {
            worst = worst.max((a - n).abs() / scale);
        }
    }
    ensure(worst < 1e-5, || format!("smooth regret gradient rel. error {worst:.2e}"))?;
    let mut net_worst: f64 = 0.0;
    for draw in 0..200 {
        let loss = if draw % 2 == 0 { LossKind::SmoothRegret } else { LossKind::CrossEntropy };
        let width = rng.random_range(1..8);
        let hidden = rng.random_range(1..6);
        let net = Mlp::init(width, hidden, rng.random()).map_err(|e| e.to_string())?;
        let records: Vec<CustomerRecord> = (0..rng.random_range(1..16)).map(|_| record(&mut rng, width)).collect();
        let batch: Vec<&CustomerRecord> = records.iter().collect();
        // Step balancing truncation against rounding for these weights.
        let r = gradient_check(&net, loss, &batch, &paper_params(), 1e-5).map_err(|e| e.to_string())?;
        net_worst = net_worst.max(r.max_rel_error);
    }
    ensure(net_worst < 1e-5, || format!("network gradient rel. error {net_worst:.2e}"))?;
    within_budget(start, Duration::from_secs(10))?;
    Ok(format!("max rel. error {worst:.1e} (loss), {net_worst:.1e} (network, both losses)"))
}

fn oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = paper_params();
    for inst in 0..100 {
        let n = rng.random_range(1..40);
        // Coarse scores so ties occur.
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..10u8)) / 10.0).collect();
        let labels: Vec<Label> = (0..n).map(|_| label(rng.random_bool(0.3))).collect();
        let clv = rng.random_range(5.0..200.0);
        let fast = mp(&scores, &labels, &p, clv).map_err(|e| e.to_string())?;
        let mut brute = 0.0f64;
        for &t in &scores {
            let e = profit_at_threshold(&scores, &labels, t, &p, clv).map_err(|e| e.to_string())?;
            brute = brute.max(e.profit);
        }
        ensure((fast.value - brute).abs() <= 1e-9, || {
            format!("instance {inst}: mp {} vs enumeration {brute}", fast.value)
        })?;
        let at = profit_at_threshold(&scores, &labels, fast.threshold, &p, clv).map_err(|e| e.to_string())?;
        ensure((at.profit - fast.value).abs() <= 1e-9, || format!("instance {inst}: threshold does not attain mp"))?;
    }
    for inst in 0..100 {
        let n = rng.random_range(1..=12);
        let labels: Vec<Label> = (0..n).map(|_| label(rng.random_bool(0.4))).collect();
        let clvs: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..40.0)).collect();
        let best = optimal_total_profit(&labels, &p, &clvs).map_err(|e| e.to_string())?;
        let mut brute = f64::NEG_INFINITY;
        for mask in 0u32..(1 << n) {
            let z: Vec<Decision> = (0..n).map(|i| Decision::from_bool(mask >> i & 1 == 1)).collect();
            brute = brute.max(total_profit(&z, &labels, &p, &clvs).map_err(|e| e.to_string())?);
        }
        ensure((best - brute).abs() <= 1e-9, || format!("instance {inst}: optimal {best} vs brute force {brute}"))?;
    }
    within_budget(start, Duration::from_secs(30))?;
    Ok("mp and optimal profit agree with exhaustive search on 100 + 100 instances".into())
}

fn msp_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = paper_params();
    let mut fixed_q_below = 0;
    for inst in 0..100 {
        let n = 2 * rng.random_range(2..40);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let labels: Vec<Label> = (0..n).map(|_| label(rng.random_bool(0.3))).collect();
        let clvs: Vec<f64> = (0..n).map(|_| rng.random_range(5.0..300.0)).collect();
        let mean = clvs.iter().sum::<f64>() / n as f64;
        let whole = mp(&scores, &labels, &p, mean).map_err(|e| e.to_string())?;
        let single = msp(&scores, &labels, &clvs, 1, &p).map_err(|e| e.to_string())?;
        ensure(single.value == whole.value && single.thresholds[0] == whole.threshold, || {
            format!("instance {inst}: MSP(q=1) = {} but MP = {}", single.value, whole.value)
        })?;

        // The criterion maximizes over the thresholds and over q, here q <= 2
        // with equal-size halves.
        let best = msp_over_q(&scores, &labels, &clvs, 2, &p).map_err(|e| e.to_string())?;
        ensure(best.segments.sizes().iter().all(|&s| s == n / best.q), || {
            format!("instance {inst}: unequal segments {:?}", best.segments.sizes())
        })?;
        ensure(best.value >= whole.value, || {
            format!("instance {inst}: MSP {} below MP {}", best.value, whole.value)
        })?;

        // At q = 2 alone, each segment maximum still dominates that segment's
        // profit at the shared MP threshold valued at the segment's own CLV.
        let two = msp(&scores, &labels, &clvs, 2, &p).map_err(|e| e.to_string())?;
        let mut shared = 0.0;
        for (k, &clv_k) in two.segment_clv.iter().enumerate() {
            let idx = two.segments.members(k);
            let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
            let y: Vec<Label> = idx.iter().map(|&i| labels[i]).collect();
            shared += profit_at_threshold(&s, &y, whole.threshold, &p, clv_k).map_err(|e| e.to_string())?.profit / 2.0;
        }
        ensure(two.value >= shared - 1e-12, || {
            format!("instance {inst}: MSP(q=2) {} below shared-threshold profit {shared}", two.value)
        })?;
        // Revaluing targeted churners at segment CLVs instead of the overall
        // mean can lower the total, so q = 2 alone may fall below MP.
        fixed_q_below += usize::from(two.value < whole.value);
    }
    Ok(format!(
        "MSP(q=1) = MP exactly; max over q <= 2 >= MP on 100 instances \
         (q = 2 alone is below MP on {fixed_q_below} of them)"
    ))
}

fn sanity_spec(signal: f64, rho: f64, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        name: format!("sanity{seed}"),
        n_train: 600,
        n_test: 400,
        n_features: 8,
        churn_rate: 0.3,
        mean_clv: 85.0,
        clv_dispersion: 1.0,
        signal_strength: signal,
        clv_churn_correlation: rho,
        seed,
    }
}

/// Profits of the listed methods on one dataset, in method order.
fn profits(spec: SyntheticSpec, incentive: &str, methods: Vec<Method>, seed: u64) -> Result<(Vec<f64>, f64), String> {
    // A fixed training budget keeps this check fast; tuning is exercised by
    // the full benchmark.
    let cfg = BenchmarkConfig {
        incentives: vec![incentive.parse().map_err(|e: churn_core::Error| e.to_string())?],
        methods,
        tune: false,
        train: TrainConfig {
            batch_size: Some(32),
            learning_rate: 0.01,
            epochs: 150,
            ..TrainConfig::default()
        },
        master_seed: seed,
        ..BenchmarkConfig::default()
    };
    let ds = small_dataset(&spec.name.clone(), spec);
    let report = run_benchmark(&[ds], &cfg).map_err(|e| e.to_string())?;
    let p = report
        .cells
        .iter()
        .map(|c| c.metrics.as_ref().map(|m| m.profit).map_err(Clone::clone))
        .collect::<Result<Vec<f64>, String>>()?;
    Ok((p, report.cells[0].optimal_profit))
}

fn learning_sanity() -> Outcome {
    let start = Instant::now();
    let (p, optimal) = profits(sanity_spec(8.0, 0.0, 1000), "4.25", vec![Method::Pno], 0)?;
    let share = p[0] / optimal;
    ensure(share >= 0.95, || format!("separable data: PnO reaches {:.1}% of optimal", 100.0 * share))?;
    // Churners have lower CLVs, and at d = CLV/5 many of them cost more to
    // retain than they are worth.
    let mut wins = 0;
    let mut detail = Vec::new();
    for seed in 0..10 {
        let (p, _) = profits(
            sanity_spec(2.0, -0.6, 1000 + seed),
            "1/5",
            vec![Method::Pno, Method::MlpCrossEntropy],
            seed,
        )?;
        wins += usize::from(p[0] > p[1]);
        detail.push(format!("{:.0}/{:.0}", p[0], p[1]));
    }
    ensure(wins >= 8, || format!("PnO beat cross-entropy in {wins} of 10 seeds: {}", detail.join(" ")))?;
    within_budget(start, Duration::from_secs(300))?;
    Ok(format!("{:.1}% of optimal when separable; PnO wins {wins}/10 when anticorrelated", 100.0 * share))
}

fn small_dataset(name: &str, spec: SyntheticSpec) -> BenchmarkDataset {
    let (train, test) = generate_synthetic(&spec).unwrap();
    BenchmarkDataset {
        name: name.into(),
        train,
        test,
    }
}

fn monthly() -> Vec<BenchmarkDataset> {
    SyntheticSpec::monthly_presets()
        .into_iter()
        .map(|s| small_dataset(&s.name.clone(), s))
        .collect()
}

fn monotone_sensitivity() -> Outcome {
    let datasets = monthly();
    let p = paper_params();
    for ds in &datasets {
        for part in [&ds.train, &ds.test] {
            let mut prev = f64::INFINITY;
            for inc in Incentive::paper_grid() {
                let d = inc.resolve(ds.train.mean_clv());
                let v = optimal_total_profit(&part.labels(), &p.with_incentive(d).unwrap(), &part.clvs())
                    .map_err(|e| e.to_string())?;
                ensure(v <= prev, || format!("{}: optimal profit rises at d = {d}", part.name))?;
                prev = v;
            }
        }
    }
    let cfg = BenchmarkConfig {
        methods: vec![Method::Pno, Method::Logistic, Method::MspCart, Method::Oracle],
        tune: false,
        train: TrainConfig {
            batch_size: Some(32),
            epochs: 20,
            ..TrainConfig::default()
        },
        ..BenchmarkConfig::default()
    };
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut bytes = Vec::new();
    for run in ["a", "b"] {
        let (_, tables) = sensitivity_sweep(&datasets, &cfg).map_err(|e| e.to_string())?;
        let dir = tmp.path().join(run);
        write_sweep_tables(&tables, &dir).map_err(|e| e.to_string())?;
        let files: Vec<Vec<u8>> = [PROFIT_FILE, GAP_FILE, TARGETING_FILE, OPTIMAL_FILE]
            .iter()
            .map(|f| std::fs::read(dir.join(f)).unwrap())
            .collect();
        bytes.push(files);
    }
    ensure(bytes[0] == bytes[1], || "curve tables differ between reruns".into())?;
    Ok(format!("optimal profit non-increasing on {} datasets; tables byte-identical", datasets.len()))
}

fn smote_properties() -> Outcome {
    let datasets: Vec<Dataset> = monthly().into_iter().take(3).map(|d| d.train).collect();
    for ds in &datasets {
        for (k, ratio) in [(5, 1.0), (3, 0.6), (1, 0.8)] {
            let cfg = SmoteConfig {
                k_neighbors: k,
                target_ratio: ratio,
                seed: 11,
            };
            let out = smote_balance(ds, &cfg).map_err(|e| e.to_string())?;
            let minority: Vec<&CustomerRecord> = ds.records.iter().filter(|r| r.label == Label::Churner).collect();
            let majority = ds.len() - minority.len();
            let points: Vec<&[f64]> = minority.iter().map(|r| r.features.as_slice()).collect();
            let neighbours: Vec<Vec<usize>> = (0..points.len()).map(|i| nearest_neighbors(&points, i, k)).collect();
            ensure(out.records[..ds.len()] == ds.records[..], || "original records changed".into())?;
            for (n, s) in out.records[ds.len()..].iter().enumerate() {
                ensure(s.label == Label::Churner, || format!("synthetic #{n} has the majority label"))?;
                let on_segment = (0..points.len()).any(|a| {
                    neighbours[a].iter().any(|&b| on_segment(&s.features, points[a], points[b]))
                });
                ensure(on_segment, || format!("{}: synthetic #{n} is off every neighbour segment", ds.name))?;
            }
            let churners = out.class_counts().0 as f64;
            let target = ratio * majority as f64;
            ensure((churners - target).abs() <= 1.0, || format!("{} churners for target {target}", churners))?;
            let again = smote_balance(ds, &cfg).map_err(|e| e.to_string())?;
            ensure(again == out, || "same seed gave different samples".into())?;
            let other = smote_balance(ds, &SmoteConfig { seed: 12, ..cfg }).map_err(|e| e.to_string())?;
            ensure(other != out, || "different seeds gave identical samples".into())?;
        }
    }
    Ok(format!("segment, ratio and determinism hold on {} datasets x 3 settings", datasets.len()))
}

/// Whether `x = a + u·(b − a)` for some `u` in `[0, 1]`.
fn on_segment(x: &[f64], a: &[f64], b: &[f64]) -> bool {
    let (mut num, mut den) = (0.0, 0.0);
    for ((xi, ai), bi) in x.iter().zip(a).zip(b) {
        num += (xi - ai) * (bi - ai);
        den += (bi - ai) * (bi - ai);
    }
    let u = if den > 0.0 { num / den } else { 0.0 };
    (-1e-9..=1.0 + 1e-9).contains(&u)
        && x.iter()
            .zip(a)
            .zip(b)
            .all(|((xi, ai), bi)| (xi - (ai + u * (bi - ai))).abs() <= 1e-9 * (1.0 + ai.abs() + bi.abs()))
}

fn full_benchmark() -> Outcome {
    let start = Instant::now();
    let datasets = monthly();
    let cfg = BenchmarkConfig::default();
    let report = run_benchmark(&datasets, &cfg).map_err(|e| e.to_string())?;
    let expected = 12 * cfg.incentives.len() * cfg.methods.len();
    ensure(report.cells.len() == expected, || format!("{} cells, expected {expected}", report.cells.len()))?;
    ensure(report.n_failed() == 0, || {
        let first = report.failed().next().unwrap();
        format!("{} failed cells, first {}/{}/{}", report.n_failed(), first.dataset, first.d_spec, first.method)
    })?;
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cells = tmp.path().join("cells.csv");
    write_cells_csv(&cells, &report).map_err(|e| e.to_string())?;
    write_json(&tmp.path().join("summary.json"), &summarize(&report, cfg.alpha)).map_err(|e| e.to_string())?;
    let rows = std::fs::read_to_string(&cells).map_err(|e| e.to_string())?.lines().count() - 1;
    ensure(rows == expected, || format!("cells.csv has {rows} rows"))?;
    ensure(Path::new(&tmp.path().join("summary.json")).is_file(), || "summary.json missing".into())?;
    within_budget(start, Duration::from_secs(600))?;
    Ok(format!(
        "{expected} cells ({} datasets x {} incentives x {} methods), 0 failed, {:.0?}",
        12,
        cfg.incentives.len(),
        cfg.methods.len(),
        start.elapsed()
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("statistical machinery", statistics),
        ("decision-core analytics", decision_analytics),
        ("gradient correctness", gradients),
        ("oracle equivalence", oracles),
        ("MSP properties", msp_properties),
        ("end-to-end learning sanity", learning_sanity),
        ("monotone sensitivity", monotone_sensitivity),
        ("SMOTE properties", smote_properties),
        ("full bundled benchmark", full_benchmark),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let t = start.elapsed();
        match result {
            Ok(detail) => println!("criterion {}: PASS {name} [{t:.1?}] {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name} [{t:.1?}] {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
