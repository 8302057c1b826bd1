use std::path::Path;
use std::process::{Command, Output};

use reusedp::adversaries::AnalystConfig;
use reusedp::bounds::Theorem;
use reusedp::data::BlockLayout;
use reusedp::datagen::{LabelRule, Marginal, OracleMode, PopulationSpec};
use reusedp::harness::{BoundConfig, ExperimentConfig};
use reusedp::mechanisms::{MechanismConfig, PolicyKind};

fn reusedp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reusedp"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn small_config() -> ExperimentConfig {
    let layout = BlockLayout::uniform(3, 2).unwrap();
    ExperimentConfig {
        population: PopulationSpec::labeled(
            6,
            Some(layout),
            Marginal::Bernoulli { p: 0.5 },
            LabelRule::Independent { p: 0.5 },
        ),
        n: 200,
        mechanism: MechanismConfig::laplace_with_quota(PolicyKind::CrossBlockRefusal, 1.0, 6),
        analyst: AnalystConfig::Freedman {
            k_sel: 1,
            per_block: true,
        },
        bound: BoundConfig {
            theorem: Theorem::Full,
            alpha: 0.2,
            beta: None,
            epsilon: None,
            delta: None,
            m: None,
            p: None,
            d: None,
            slack_c: None,
            slack_f: None,
            beta_target: Some(0.5),
        },
        trials: 10,
        base_seed: 3,
        max_steps: 1000,
        oracle: OracleMode::ClosedForm,
        write_transcripts: false,
    }
}

fn write_config(dir: &Path, config: &ExperimentConfig) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn bounds_prints_transfer_values() {
    let o = reusedp(&[
        "bounds",
        "--theorem",
        "transfer",
        "--eps",
        "0.1",
        "--delta",
        "1e-6",
        "--alpha",
        "0.05",
        "--beta",
        "0.01",
        "--slack-c",
        "0.1",
        "--slack-f",
        "0.05",
        "--format",
        "csv",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    let header: Vec<_> = lines.next().unwrap().split(',').collect();
    let values: Vec<_> = lines.next().unwrap().split(',').collect();
    let get = |k: &str| {
        values[header.iter().position(|h| *h == k).unwrap()]
            .parse::<f64>()
            .unwrap()
    };
    assert!((get("alpha_prime") - (0.25 + 0.1f64.exp_m1())).abs() < 1e-12);
    assert!((get("beta_prime") - 0.10002).abs() < 1e-12);
}

#[test]
fn bounds_optimizes_when_given_a_target() {
    let o = reusedp(&[
        "bounds",
        "--theorem",
        "full",
        "--eps",
        "0.1",
        "--delta",
        "1e-6",
        "--alpha",
        "0.05",
        "--beta",
        "0.01",
        "--m",
        "22",
        "--beta-target",
        "0.05",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("grid_alpha_prime"));
}

#[test]
fn bad_input_exits_with_config_status() {
    assert_eq!(
        reusedp(&[
            "bounds",
            "--theorem",
            "full",
            "--m",
            "0",
            "--beta-target",
            "0.1"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        reusedp(&["bounds", "--theorem", "full", "--m", "3"])
            .status
            .code(),
        Some(2)
    );
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config();
    config.trials = 0;
    let path = write_config(dir.path(), &config);
    let out = dir.path().join("out");
    let o = reusedp(&["run", "--config", &path, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    let o = reusedp(&[
        "run",
        "--config",
        missing.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gen_writes_a_csv_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        serde_json::to_string(&small_config().population).unwrap(),
    )
    .unwrap();
    let o = reusedp(&[
        "gen",
        "--spec",
        spec.to_str().unwrap(),
        "--n",
        "25",
        "--seed",
        "4",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<_> = text.lines().collect();
    assert_eq!(rows.len(), 26);
    assert!(rows[1..]
        .iter()
        .all(|r| r.split(',').count() == rows[0].split(',').count()));
    let again = reusedp(&[
        "gen",
        "--spec",
        spec.to_str().unwrap(),
        "--n",
        "25",
        "--seed",
        "4",
    ]);
    assert_eq!(again.stdout, o.stdout);
}

#[test]
fn run_writes_outputs_and_reports_the_check() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &small_config());
    let out = dir.path().join("out");
    let o = reusedp(&[
        "run",
        "--config",
        &path,
        "--out",
        out.to_str().unwrap(),
        "--jobs",
        "2",
        "--check",
    ]);
    let code = o.status.code().unwrap();
    assert!(
        code == 0 || code == 3,
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for f in ["results.csv", "summary.json", "rejections.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let passed = summary["check_passed"].as_bool().unwrap()
        && summary["budget_audit_passed"].as_bool().unwrap();
    assert_eq!(code == 0, passed);
    assert_eq!(
        std::fs::read_to_string(out.join("results.csv"))
            .unwrap()
            .lines()
            .count(),
        11
    );
}
