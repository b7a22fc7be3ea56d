use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aoce_cli::ExperimentConfig;
use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn aoce(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aoce"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

/// Runs a subcommand on a config into `dir/out` and returns the run dir.
fn run_into(dir: &TempDir, command: &str, config: &str, out: &str, extra: &[&str]) -> (Output, PathBuf) {
    let out = dir.path().join(out);
    let mut args = vec![command, "--config", config, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    (aoce(&args), out)
}

/// Data rows of a CSV written by the tool, after its digest comment.
fn csv_rows(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let (comment, body) = text.split_once('\n').unwrap();
    let rows = body.lines().map(|l| l.split(',').map(String::from).collect()).collect();
    (comment.to_string(), rows)
}

const PRIORITIZED: &str = r#"
[significance]
weight = 1
missed_alarm = { kind = "exponential", rate = 0.3 }
false_alarm = { kind = "logarithmic", base = 10.0, offset = 1.0 }
other = { kind = "constant", value = 1.0 }
"#;

const ASYMMETRIC: &str = r#"
[source]
matrix = [
  [0.7, 0.1, 0.1, 0.1],
  [0.05, 0.7, 0.15, 0.1],
  [0.1, 0.1, 0.6, 0.2],
  [0.05, 0.1, 0.05, 0.8],
]
"#;

#[test]
fn example_configs_round_trip() {
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let c = ExperimentConfig::load(&path).unwrap();
        let again = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c, again, "{}", path.display());
    }
}

#[test]
fn check_reports_ratio_and_bound() {
    let cfg = configs().join("behavioral.toml");
    let o = aoce(&["check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("1.3499") && out.contains("14.2857"), "{out}");
}

#[test]
fn check_fails_on_fast_growth() {
    let cfg = configs().join("violating.toml");
    let o = aoce(&["check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("20.0855"), "{}", stdout(&o));
}

#[test]
fn perfect_channel_always_passes() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(configs().join("violating.toml"))
        .unwrap()
        .replace("p_success = 0.9", "p_success = 1");
    let cfg = write(&dir, "perfect.toml", &text);
    assert_eq!(aoce(&["check", "--config", &cfg]).status.code(), Some(0));
}

#[test]
fn solve_refuses_without_force() {
    let dir = TempDir::new().unwrap();
    let cfg = configs().join("violating.toml");
    let (o, out) = run_into(&dir, "solve", cfg.to_str().unwrap(), "a", &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--force"));
    assert!(!out.exists());

    let (o, out) = run_into(&dir, "solve", cfg.to_str().unwrap(), "b", &["--force"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("thresholds.csv").exists());
}

#[test]
fn solve_writes_class_thresholds() {
    let dir = TempDir::new().unwrap();
    let cfg = configs().join("behavioral.toml");
    let (o, out) = run_into(&dir, "solve", cfg.to_str().unwrap(), "run", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (comment, rows) = csv_rows(&out.join("thresholds.csv"));
    assert_eq!(
        rows[0],
        [
            "p_success",
            "lambda",
            "optimal_cost",
            "missed_alarm",
            "false_alarm",
            "normal"
        ]
    );
    let expected = [
        ["1", "1", "1"],
        ["1", "1", "1"],
        ["1", "1", "inf"],
        ["2", "3", "inf"],
        ["3", "11", "inf"],
        ["3", "inf", "inf"],
        ["3", "inf", "inf"],
        ["3", "inf", "inf"],
    ];
    for (row, want) in rows[1..].iter().zip(expected) {
        assert_eq!(&row[3..], want, "lambda {}", row[1]);
    }

    // The echoed config reproduces the digest in every table header.
    let echo = fs::read_to_string(out.join("config.echo")).unwrap();
    let digest = ExperimentConfig::from_toml(&echo).unwrap().digest();
    assert_eq!(comment, format!("# config sha256 {digest}"));

    let diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["config_digest"], digest.as_str());
    assert_eq!(diag["points"][0]["mdp"]["states"], 244);
    assert_eq!(diag["points"].as_array().unwrap().len(), 8);
}

#[test]
fn solve_writes_matrix_for_asymmetric_sources() {
    let dir = TempDir::new().unwrap();
    let text =
        format!("{ASYMMETRIC}{PRIORITIZED}\n[channel]\np_success = 0.9\n[cost]\nlambda = 3\n[truncation]\nn = 20\n");
    let cfg = write(&dir, "asym.toml", &text);
    let (o, out) = run_into(&dir, "solve", &cfg, "run", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, rows) = csv_rows(&out.join("thresholds.csv"));
    let expected = [
        ("tau_1_2", "2"),
        ("tau_1_3", "2"),
        ("tau_1_4", "3"),
        ("tau_2_1", "3"),
        ("tau_2_3", "inf"),
        ("tau_2_4", "inf"),
        ("tau_3_1", "inf"),
        ("tau_3_2", "inf"),
        ("tau_3_4", "inf"),
        ("tau_4_1", "1"),
        ("tau_4_2", "1"),
        ("tau_4_3", "1"),
    ];
    for (name, want) in expected {
        let k = rows[0].iter().position(|h| h == name).unwrap();
        assert_eq!(rows[1][k], want, "{name}");
    }
}

#[test]
fn solvers_agree_through_the_cli() {
    let dir = TempDir::new().unwrap();
    let base = fs::read_to_string(configs().join("channel_sweep.toml")).unwrap();
    let mut costs = Vec::new();
    for method in ["spi", "pi", "rvi"] {
        let cfg = write(
            &dir,
            &format!("{method}.toml"),
            &format!("{base}\n[solver]\nmethod = \"{method}\"\n"),
        );
        let (o, out) = run_into(&dir, "solve", &cfg, method, &[]);
        assert_eq!(o.status.code(), Some(0), "{method}: {}", stderr(&o));
        let (_, rows) = csv_rows(&out.join("thresholds.csv"));
        costs.push(
            rows[1..]
                .iter()
                .map(|r| r[2].parse::<f64>().unwrap())
                .collect::<Vec<_>>(),
        );
    }
    for ((spi, pi), rvi) in costs[0].iter().zip(&costs[1]).zip(&costs[2]) {
        assert!((spi - pi).abs() < 1e-8 && (spi - rvi).abs() < 1e-8);
    }
}

#[test]
fn outputs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = configs().join("behavioral.toml");
    let cfg = cfg.to_str().unwrap();
    let (_, a) = run_into(&dir, "solve", cfg, "a", &["--threads", "1"]);
    let (_, b) = run_into(&dir, "solve", cfg, "b", &["--threads", "3"]);
    assert_eq!(
        fs::read(a.join("thresholds.csv")).unwrap(),
        fs::read(b.join("thresholds.csv")).unwrap()
    );

    let sim = ["--horizon", "20000", "--seed", "5"];
    let (o, a) = run_into(&dir, "simulate", cfg, "sa", &sim);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, b) = run_into(&dir, "simulate", cfg, "sb", &sim);
    assert_eq!(
        fs::read(a.join("simulate.csv")).unwrap(),
        fs::read(b.join("simulate.csv")).unwrap()
    );

    let (_, c) = run_into(&dir, "simulate", cfg, "sc", &["--horizon", "20000", "--seed", "6"]);
    assert_ne!(
        fs::read(a.join("simulate.csv")).unwrap(),
        fs::read(c.join("simulate.csv")).unwrap()
    );
}

#[test]
fn simulate_embeds_overrides_in_the_echo() {
    let dir = TempDir::new().unwrap();
    let cfg = configs().join("behavioral.toml");
    let (o, out) = run_into(
        &dir,
        "simulate",
        cfg.to_str().unwrap(),
        "run",
        &["--horizon", "30000", "--seed", "9"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let echo = ExperimentConfig::from_toml(&fs::read_to_string(out.join("config.echo")).unwrap()).unwrap();
    assert_eq!((echo.simulation.horizon, echo.simulation.seed), (30000, 9));
    let (_, rows) = csv_rows(&out.join("simulate.csv"));
    // Optimal policy plus two baselines at each of eight costs.
    assert_eq!(rows.len(), 1 + 8 * 3);
    assert!(rows[1..].iter().all(|r| r[12] == "30000" && r[13] == "9"));
}

#[test]
fn compare_flags_exact_and_simulated_cells() {
    let dir = TempDir::new().unwrap();
    let text = format!(
        "{ASYMMETRIC}{PRIORITIZED}\n[channel]\np_success = 0.9\n[cost]\nlambda = [0, 3]\n[truncation]\nn = 20\n\
         [compare]\nbaselines = [\"threshold\", \"aoii_reference\", \"periodic\"]\nperiodic_max = 5\n\
         [simulation]\nhorizon = 40000\n"
    );
    let cfg = write(&dir, "cmp.toml", &text);
    let (o, out) = run_into(&dir, "compare", &cfg, "run", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, rows) = csv_rows(&out.join("compare.csv"));
    let col = |name: &str| rows[0].iter().position(|h| h == name).unwrap();
    // Columns follow the fixed policy order, not the config order.
    assert!(col("periodic_cost") < col("threshold_cost") && col("threshold_cost") < col("aoii_reference_cost"));
    assert!(col("aoii_reference_cost") < col("switching_cost"));
    let at = |row: usize, name: &str| rows[row][col(name)].clone();
    assert_eq!(at(2, "threshold_evaluation"), "exact");
    assert_eq!(at(2, "threshold_parameter"), "delta=5");
    assert!((at(2, "threshold_cost").parse::<f64>().unwrap() - 0.9677).abs() < 5e-4);
    assert_eq!(at(2, "periodic_evaluation"), "simulated");
    assert!(!at(2, "periodic_half_width").is_empty());
    assert!((at(1, "switching_cost").parse::<f64>().unwrap() - 0.3191).abs() < 5e-4);
    assert!((at(2, "switching_cost").parse::<f64>().unwrap() - 0.8030).abs() < 5e-4);
}

#[test]
fn compare_without_baselines_keeps_switching() {
    let dir = TempDir::new().unwrap();
    let text = format!(
        "{ASYMMETRIC}{PRIORITIZED}\n[channel]\np_success = 0.9\n[cost]\nlambda = 1\n[truncation]\nn = 10\n[compare]\nbaselines = []\n"
    );
    let cfg = write(&dir, "cmp.toml", &text);
    let (o, out) = run_into(&dir, "compare", &cfg, "run", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, rows) = csv_rows(&out.join("compare.csv"));
    assert_eq!(
        rows[0],
        [
            "p_success",
            "lambda",
            "switching_cost",
            "switching_evaluation",
            "switching_parameter",
            "switching_half_width"
        ]
    );
}

#[test]
fn truncation_needs_three_sizes() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(configs().join("behavioral.toml"))
        .unwrap()
        .replace("sweep = [4, 6, 8, 10, 12, 14, 16, 18, 20]", "sweep = [10, 10, 20]");
    let cfg = write(&dir, "short.toml", &text);
    let (o, _) = run_into(&dir, "truncation", &cfg, "run", &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("at least 3"), "{}", stderr(&o));
}

#[test]
fn truncation_writes_gaps_and_fit() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(configs().join("behavioral.toml"))
        .unwrap()
        .replace("lambda = [0, 1, 2, 3, 4, 5, 6, 7]", "lambda = 0");
    let cfg = write(&dir, "sweep.toml", &text);
    let (o, out) = run_into(&dir, "truncation", &cfg, "run", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, rows) = csv_rows(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 1 + 9);
    let gaps: Vec<f64> = rows[1..].iter().map(|r| r[4].parse().unwrap()).collect();
    assert_eq!(*gaps.last().unwrap(), 0.0);
    assert!(gaps.windows(2).take(4).all(|w| w[1] < w[0]));
    let fitted: f64 = rows[1][6].parse().unwrap();
    assert!(fitted > 0.0 && fitted < 1.0);
}

#[test]
fn constant_costs_have_no_truncation_gaps() {
    let dir = TempDir::new().unwrap();
    let text = "[source]\nsymmetric = { states = 3, p = 0.2 }\n\
        [significance]\nweight = 2\nmissed_alarm = { kind = \"constant\", value = 1.0 }\n\
        false_alarm = { kind = \"constant\", value = 1.0 }\nother = { kind = \"constant\", value = 1.0 }\n\
        [channel]\np_success = 0.7\n[cost]\nlambda = 1.5\n[truncation]\nn = 8\nsweep = [2, 4, 6, 8]\n";
    let cfg = write(&dir, "flat.toml", text);
    let (o, out) = run_into(&dir, "truncation", &cfg, "run", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, rows) = csv_rows(&out.join("sweep.csv"));
    for r in &rows[1..] {
        assert!(r[4].parse::<f64>().unwrap() < 1e-13, "{r:?}");
        assert_eq!(r[6], "");
    }
}

#[test]
fn config_errors_exit_three() {
    let dir = TempDir::new().unwrap();
    let broken = write(&dir, "broken.toml", "[source]\nsymmetric = { states = 4, p = 0.1 \n");
    let o = aoce(&["check", "--config", &broken]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));

    let text = fs::read_to_string(configs().join("behavioral.toml"))
        .unwrap()
        .replace("alarm_states = [1]", "alarm_states = [5]");
    let bad_alarm = write(&dir, "alarm.toml", &text);
    let o = aoce(&["check", "--config", &bad_alarm]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("alarm_states"), "{}", stderr(&o));

    let text = fs::read_to_string(configs().join("behavioral.toml"))
        .unwrap()
        .replace("p_success = 0.9", "p_success = \"9/0\"");
    let bad_number = write(&dir, "num.toml", &text);
    assert_eq!(aoce(&["check", "--config", &bad_number]).status.code(), Some(3));

    let missing = dir.path().join("missing.toml");
    assert_eq!(
        aoce(&["check", "--config", missing.to_str().unwrap()]).status.code(),
        Some(3)
    );
    assert_eq!(aoce(&["frobnicate"]).status.code(), Some(3));
    assert_eq!(aoce(&["--help"]).status.code(), Some(0));
}

#[test]
fn inadmissible_sources_exit_one() {
    let dir = TempDir::new().unwrap();
    let text = format!(
        "[source]\nmatrix = [[1, 0, 0], [\"1/2\", \"1/2\", 0], [0, 0, 1]]\n{PRIORITIZED}\n[channel]\np_success = 0.9\n[cost]\nlambda = 1\n[truncation]\nn = 5\n"
    );
    let cfg = write(&dir, "reducible.toml", &text);
    let o = aoce(&["check", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("admissible"), "{}", stderr(&o));
}
