use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn churn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_churn"))
        .args(args)
        .env_remove("CHURN_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn data_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"
[[data.synthetic]]
name = "small"
n_train = 120
n_test = 60
n_features = 4
churn_rate = 0.3
mean_clv = 85.0
clv_dispersion = 0.8
signal_strength = 1.5
clv_churn_correlation = 0.0
seed = 5

[benchmark]
incentives = ["1/20"]
methods = ["logistic"]
tune = false
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn generate_january_sizes_and_repeatability() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = churn(&["generate", "--preset", "january", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(rows(&a.join("jan_train.csv")), 786);
    assert_eq!(rows(&a.join("jan_test.csv")), 197);
    for f in ["jan_train.csv", "jan_test.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
}

#[test]
fn generate_from_spec_file() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("spec.toml");
    let body = SMALL.split("[benchmark]").next().unwrap().replace("[[data.synthetic]]", "[[datasets]]");
    std::fs::write(&spec, body).unwrap();
    let out = tmp.path().join("out");
    let o = churn(&["generate", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(rows(&out.join("small_train.csv")), 120);
    assert_eq!(rows(&out.join("small_test.csv")), 60);
}

#[test]
fn invalid_spec_fails_with_message() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("bad.toml");
    let body = SMALL
        .split("[benchmark]")
        .next()
        .unwrap()
        .replace("[[data.synthetic]]", "[[datasets]]")
        .replace("churn_rate = 0.3", "churn_rate = 1.5");
    std::fs::write(&spec, body).unwrap();
    let o = churn(&["generate", "--spec", spec.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("churn"), "{}", stderr(&o));
}

#[test]
fn single_cell_benchmark_writes_one_row_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let mut outputs = Vec::new();
    for run in ["r1", "r2"] {
        let out = tmp.path().join(run);
        let o = churn(&["benchmark", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(rows(&out.join("cells.csv")), 1);
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["total_cells"], 1);
        outputs.push(out);
    }
    for f in ["cells.csv", "summary.json", "report.json", "ranks.csv"] {
        assert_eq!(
            std::fs::read(outputs[0].join(f)).unwrap(),
            std::fs::read(outputs[1].join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("o");
    let o = churn(&[
        "benchmark",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--methods",
        "oracle,constant:1,logistic",
        "--incentives",
        "1/20,4.25",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(rows(&out.join("cells.csv")), 6);
}

#[test]
fn out_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("env_out");
    let o = Command::new(env!("CARGO_BIN_EXE_churn"))
        .args(["benchmark", "--config", cfg.to_str().unwrap()])
        .env("CHURN_OUT_DIR", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("cells.csv").is_file());
}

#[test]
fn failed_cell_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL.replace("methods = [\"logistic\"]", "methods = [\"logistic\", \"msp_cart\"]\nsegments = 500");
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("o");
    let o = churn(&["benchmark", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let cells = std::fs::read_to_string(out.join("cells.csv")).unwrap();
    assert_eq!(cells.lines().filter(|l| l.contains(",failed,")).count(), 1);
    assert_eq!(cells.lines().filter(|l| l.contains(",ok,")).count(), 1);
}

#[test]
fn missing_dataset_path_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[[data.files]]\nname = \"x\"\ntrain = \"missing_train.csv\"\ntest = \"missing_test.csv\"\n",
    );
    let o = churn(&["benchmark", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("does not exist"), "{}", stderr(&o));
}

#[test]
fn config_errors_report_line_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL}unknown_key = 3\n"));
    let o = churn(&["benchmark", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
}

#[test]
fn train_command_prints_one_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let o = churn(&["train", "--config", cfg.to_str().unwrap(), "--method", "knn", "--incentive", "4.25"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cell: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(cell["method"], "knn");
    assert_eq!(cell["d"], 4.25);
    assert!(cell["metrics"]["Ok"]["profit"].is_number());
}

/// Published average ranks, in the order of the profit table rows.
const PUBLISHED_RANKS: [(&str, f64); 12] = [
    ("PnO", 2.7917),
    ("ProfLogit", 4.4167),
    ("MSP_KNN", 6.7500),
    ("MSP_log", 5.5000),
    ("MSP_RF", 5.4583),
    ("MSP_CART", 8.1250),
    ("MSP_SVM", 5.0833),
    ("KNN", 8.3333),
    ("Logistic", 7.7083),
    ("RF", 7.8750),
    ("CART", 9.1667),
    ("SVM", 6.7917),
];

#[test]
fn stats_recovers_published_ranks() {
    let tmp = tempfile::tempdir().unwrap();
    let json = tmp.path().join("stats.json");
    let o = churn(&[
        "stats",
        "--profits",
        data_file("table4_profits.csv").to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    let ranks = a["ranks"].as_array().unwrap();
    assert_eq!(ranks.len(), 12);
    for (r, (name, published)) in ranks.iter().zip(PUBLISHED_RANKS) {
        assert_eq!(r["method"], name);
        let got = r["avg_rank"].as_f64().unwrap();
        assert!((got - published).abs() <= 0.05, "{name}: {got} vs {published}");
    }
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("Iman-Davenport"));
    assert!(stdout.contains("PnO"));
}

#[test]
fn stats_refuses_two_methods() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("two.csv");
    std::fs::write(&p, "method,a,b,c\nx,1,2,3\ny,3,2,1\n").unwrap();
    let o = churn(&["stats", "--profits", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("at least 3 methods"), "{}", stderr(&o));
}

#[test]
fn stats_identical_methods_reject_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("same.csv");
    std::fs::write(&p, "method,a,b,c,d\nx,1,2,3,4\ny,1,2,3,4\nz,1,2,3,4\n").unwrap();
    let json = tmp.path().join("s.json");
    let o = churn(&["stats", "--profits", p.to_str().unwrap(), "--json", json.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    let rows = a["holm"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r["reject"] == false));
}

#[test]
fn stats_rejects_malformed_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("bad.csv");
    std::fs::write(&p, "method,a,b\nx,1,oops\ny,1,2\nz,2,1\n").unwrap();
    let o = churn(&["stats", "--profits", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("oops"), "{}", stderr(&o));
}

#[test]
fn help_documents_flags() {
    let expected: [(&str, &[&str]); 5] = [
        ("generate", &["--spec", "--preset", "--out"]),
        ("benchmark", &["--config", "--out", "--seed", "--methods", "--incentives", "--no-tune", "--workers"]),
        ("train", &["--config", "--dataset", "--method", "--incentive", "--seed", "--no-tune"]),
        ("stats", &["--profits", "--alpha", "--json"]),
        ("sweep", &["--config", "--out", "--seed"]),
    ];
    for (cmd, flags) in expected {
        let o = churn(&[cmd, "--help"]);
        assert!(o.status.success());
        let text = String::from_utf8_lossy(&o.stdout);
        for f in flags {
            assert!(text.contains(f), "`{cmd} --help` lacks {f}");
        }
    }
    assert!(churn(&["--help"]).status.success());
}

#[test]
fn unknown_flag_fails_fast() {
    let o = churn(&["stats", "--profits", "x.csv", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--bogus"));
    assert_eq!(churn(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn sweep_writes_identical_curves_on_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL.replace("incentives = [\"1/20\"]", "incentives = [\"1/20\", \"1/10\", \"1/3\"]");
    let cfg = write_config(tmp.path(), &text);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = churn(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["profit_vs_d.csv", "gap_vs_d.csv", "targeting_vs_d.csv", "optimal_vs_d.csv"] {
        let bytes = std::fs::read(a.join(f)).unwrap();
        assert!(!bytes.is_empty());
        assert_eq!(bytes, std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    assert_eq!(rows(&a.join("optimal_vs_d.csv")), 3);
}
