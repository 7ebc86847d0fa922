use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hdgmv::backtest::load_returns_csv;
use hdgmv::datagen::{Scenario, ScenarioModel};
use hdgmv::rng::{label, SeedSpec};

fn hdgmv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdgmv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/returns.csv")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Extracts the JSON after `# config: ` on the first line.
fn embedded_config(text: &str) -> String {
    text.lines()
        .next()
        .and_then(|l| l.strip_prefix("# config: "))
        .expect("config line")
        .to_string()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn limits_row_at_half() {
    let o = hdgmv(&["limits", "--c", "0.5", "--lb", "1.0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines().skip(1);
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert!((col("loss_traditional") - 1.0).abs() < 1e-12);
    assert!((col("loss_fm") - 5.0 / 9.0).abs() < 1e-12);
    assert!((col("loss_bps") - 0.5).abs() < 1e-12);
}

#[test]
fn limits_reject_c_outside_unit_interval() {
    let o = hdgmv(&["limits", "--c", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr(&o).lines().count(), 1);
}

#[test]
fn missing_config_file_exits_one() {
    let o = hdgmv(&["simulate", "--config", "missing.json"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("missing.json"), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn unknown_subcommand_and_flag_exit_one() {
    assert_eq!(hdgmv(&["frobnicate"]).status.code(), Some(1));
    let o = hdgmv(&["limits", "--c", "0.5", "--nope"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn help_lists_every_flag() {
    let cases: [(&str, &[&str]); 5] = [
        ("limits", &["--config", "--c", "--lb", "--out", "--threads"]),
        (
            "gen-data",
            &["--scenario", "--p", "--t", "--seed", "--start-date", "--out"],
        ),
        (
            "simulate",
            &[
                "--scenario",
                "--n",
                "--c",
                "--c-tilde",
                "--reps",
                "--seed",
                "--tolerance",
                "--out",
            ],
        ),
        (
            "verify-lemmas",
            &[
                "--p",
                "--n",
                "--m",
                "--reps",
                "--seed",
                "--relative-tolerance",
                "--agreement-tolerance",
                "--cross-tolerance",
            ],
        ),
        (
            "backtest",
            &[
                "--input",
                "--n",
                "--m",
                "--step",
                "--assets",
                "--seed",
                "--asset-ids",
                "--out",
            ],
        ),
    ];
    for (cmd, flags) in cases {
        let o = hdgmv(&[cmd, "--help"]);
        assert!(o.status.success());
        let help = String::from_utf8(o.stdout).unwrap();
        for f in flags {
            assert!(help.contains(&format!("{f} ")), "{cmd} help lacks {f}");
        }
        assert!(help.contains("[default:"), "{cmd} help lists no defaults");
    }
}

#[test]
fn verify_command_smoke() {
    let o = hdgmv(&[
        "verify-lemmas",
        "--p",
        "200",
        "--n",
        "400",
        "--m",
        "400",
        "--reps",
        "200",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["config"]["p"], 200);
    assert_eq!(report["config"]["master_seed"], 0);
    assert_eq!(report["checks"].as_array().unwrap().len(), 7);
    assert!(report["summary"]["sandwich_limit"].as_f64().unwrap() > 0.0);
}

#[test]
fn verify_command_rejects_short_sample() {
    let o = hdgmv(&["verify-lemmas", "--p", "10", "--n", "11", "--m", "20", "--reps", "10"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn seed_is_required_for_random_commands() {
    let o = hdgmv(&["gen-data", "--scenario", "t5", "--p", "3", "--t", "5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--seed"));
    let o = hdgmv(&[
        "simulate",
        "--scenario",
        "t5",
        "--n",
        "100",
        "--c",
        "0.5",
        "--c-tilde",
        "0.5",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn gen_data_matches_library_draw_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    for (scenario, name) in [
        (Scenario::T5, "t5"),
        (Scenario::Var1, "var1"),
        (Scenario::CccGarch, "ccc_garch"),
    ] {
        let out = dir.path().join(name);
        let o = hdgmv(&[
            "gen-data",
            "--scenario",
            name,
            "--p",
            "4",
            "--t",
            "30",
            "--seed",
            "9",
            "--out",
            p(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let ds = load_returns_csv(&out.join("returns.csv")).unwrap();
        let master = SeedSpec::new(9);
        let model = ScenarioModel::draw(scenario, 4, &master.children(&[label("params"), 4])).unwrap();
        let expected = model.simulate(30, &master.child(label("gen-data"))).unwrap();
        let diff = (ds.returns() - expected.values()).abs().max();
        assert!(diff <= 1e-15, "{name}: {diff}");

        let params: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("params.json")).unwrap()).unwrap();
        assert_eq!(params["master_seed"], 9);
        assert_eq!(
            params["sigma"][1][2].as_f64().unwrap(),
            model.params().sigma.matrix()[(1, 2)]
        );
        assert_eq!(params.get("var").is_some(), scenario == Scenario::Var1);
        assert_eq!(params.get("garch").is_some(), scenario == Scenario::CccGarch);
    }
}

#[test]
fn outputs_reproduce_from_embedded_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("cfg.json");

    let first = d.join("g1");
    assert!(hdgmv(&[
        "gen-data",
        "--scenario",
        "var1",
        "--p",
        "5",
        "--t",
        "40",
        "--seed",
        "4",
        "--out",
        p(&first)
    ])
    .status
    .success());
    let text = std::fs::read_to_string(first.join("returns.csv")).unwrap();
    std::fs::write(&cfg, embedded_config(&text)).unwrap();
    let second = d.join("g2");
    assert!(hdgmv(&["gen-data", "--config", p(&cfg), "--out", p(&second)])
        .status
        .success());
    assert_eq!(text, std::fs::read_to_string(second.join("returns.csv")).unwrap());

    let first = d.join("s1");
    let o = hdgmv(&[
        "simulate",
        "--scenario",
        "ccc_garch",
        "--n",
        "60",
        "--c",
        "0.25",
        "--c-tilde",
        "0.5",
        "--reps",
        "5",
        "--seed",
        "2",
        "--out",
        p(&first),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(first.join("cells.csv")).unwrap();
    std::fs::write(&cfg, embedded_config(&text)).unwrap();
    let second = d.join("s2");
    assert!(hdgmv(&["simulate", "--config", p(&cfg), "--out", p(&second)])
        .status
        .success());
    assert_eq!(text, std::fs::read_to_string(second.join("cells.csv")).unwrap());

    let o = hdgmv(&["limits", "--c", "0.1,0.9", "--lb", "0,2"]);
    let text = String::from_utf8(o.stdout).unwrap();
    std::fs::write(&cfg, embedded_config(&text)).unwrap();
    let o = hdgmv(&["limits", "--config", p(&cfg)]);
    assert_eq!(text, String::from_utf8(o.stdout).unwrap());

    let first = d.join("b1");
    let fx = fixture();
    assert!(hdgmv(&[
        "backtest",
        "--input",
        p(&fx),
        "--n",
        "60",
        "--m",
        "60",
        "--step",
        "7",
        "--out",
        p(&first)
    ])
    .status
    .success());
    let text = std::fs::read_to_string(first.join("backtest.csv")).unwrap();
    std::fs::write(&cfg, embedded_config(&text)).unwrap();
    let second = d.join("b2");
    assert!(hdgmv(&["backtest", "--config", p(&cfg), "--out", p(&second)])
        .status
        .success());
    assert_eq!(text, std::fs::read_to_string(second.join("backtest.csv")).unwrap());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"c": [0.2], "lb": [3.0]}"#).unwrap();
    let o = hdgmv(&["limits", "--config", p(&cfg), "--c", "0.4"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("# config: {\"c\":[0.4],\"lb\":[3.0]}"), "{text}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"scenario": "t5", "n_grid": [], "c_grid": [], "c_tilde_grid": [], "master_seed": 1, "nn": 3}"#,
    )
    .unwrap();
    assert_eq!(
        hdgmv(&["simulate", "--config", p(&cfg), "--out", p(dir.path())])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn empty_grid_succeeds_with_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"scenario": "t5", "n_grid": [], "c_grid": [0.5], "c_tilde_grid": [0.5], "master_seed": 1}"#,
    )
    .unwrap();
    let o = hdgmv(&["simulate", "--config", p(&cfg), "--out", p(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("cells.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn singular_window_exits_two_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let mut text = String::from("date,A,B,C,D,E\n");
    for t in 0..40u32 {
        let day = chrono::NaiveDate::from_ymd_opt(2001, 1, 1).unwrap() + chrono::Days::new(t as u64);
        let x = |k: u32| (((t + 1) * (k + 3) * 7919 % 101) as f64 - 50.0) / 100.0;
        text.push_str(&format!("{day},{},{},{},{},0.01\n", x(0), x(1), x(2), x(3)));
    }
    std::fs::write(&csv, text).unwrap();
    let o = hdgmv(&[
        "backtest",
        "--input",
        p(&csv),
        "--n",
        "15",
        "--m",
        "15",
        "--step",
        "5",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("window 0"), "{}", stderr(&o));
}

#[test]
fn backtest_reports_load_errors_as_validation() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    std::fs::write(&csv, "date,A,B\n2001-01-01,0.1,\n").unwrap();
    let o = hdgmv(&["backtest", "--input", p(&csv), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("row"), "{}", stderr(&o));
}
