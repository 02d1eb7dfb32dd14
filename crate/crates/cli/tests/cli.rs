use std::process::{Command, Output};

fn fractscan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fractscan"))
        .args(args)
        .env_clear()
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn hilbert_csv_endpoints() {
    let out = fractscan(&[
        "curve",
        "--kind",
        "hilbert",
        "--depth",
        "3",
        "--direction",
        "1",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "index,row,col");
    assert_eq!(lines.len(), 65);
    assert_eq!(lines[1], "0,0,0");
    assert_eq!(lines[64], "63,7,0");
}

#[test]
fn json_echoes_shift() {
    let out = fractscan(&[
        "curve", "--kind", "hilbert", "--depth", "3", "--shift", "1", "--format", "json",
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["shift"], 1);
    assert_eq!(doc["forward"].as_array().unwrap().len(), 64);
}

#[test]
fn svg_output() {
    let out = fractscan(&["curve", "--depth", "2", "--format", "svg"]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("<svg"));
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["curve", "--direction", "5"][..],
        &["curve", "--bogus"],
        &["curve", "--depth", "13"],
        &["curve", "--rows", "4"],
        &["metrics"],
        &["metrics", "--spec", "hilbert:7"],
        &[],
    ] {
        let out = fractscan(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn runtime_errors_exit_one() {
    let out = fractscan(&["metrics", "--spec", "raster@4x4", "--spec", "raster@8x8"]);
    assert_eq!(out.status.code(), Some(1));
    let out = fractscan(&[
        "kernel", "--a=-1", "--b", "1", "--c", "1", "--delta", "-0.5", "--length", "3",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let out = fractscan(&["block", "--input", "/nonexistent/grid.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn baseline_metrics_table() {
    let out = fractscan(&["metrics", "--baseline"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("hilbert,1,0,1,"));
}

#[test]
fn single_raster_continuity() {
    let out = fractscan(&["metrics", "--spec", "raster", "--format", "json"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc[0]["continuity_fraction"].as_f64().unwrap(), 56.0 / 63.0);
}

#[test]
fn kernel_dump() {
    let out = fractscan(&[
        "kernel", "--a=0", "--b", "2", "--c", "1", "--delta", "0.3", "--length", "3",
    ]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "k0,k1,k2\n0.6,0.6,0.6\n");
}

#[test]
fn identity_block_round_trips_a_grid_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.json");
    let output = dir.path().join("out.json");
    std::fs::write(
        &input,
        r#"{"rows":2,"cols":3,"channels":2,"data":[1,2,3,4,5,6,7,8,9,10,11,12]}"#,
    )
    .unwrap();
    let out = fractscan(&[
        "block",
        "--input",
        input.to_str().unwrap(),
        "--param",
        "identity",
        "--out",
        output.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(output).unwrap()).unwrap();
    for (i, v) in doc["data"].as_array().unwrap().iter().enumerate() {
        assert!((v.as_f64().unwrap() - (i + 1) as f64).abs() <= 1e-12);
    }
}

#[test]
fn verify_suites_pass() {
    for suite in ["curves", "block"] {
        let out = fractscan(&["verify", "--suite", suite]);
        assert!(out.status.success(), "{suite}");
        let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
        assert_eq!(doc["passed"], true);
    }
}

#[test]
fn verify_ssm_gradient_summary() {
    let out = fractscan(&["verify", "--suite", "ssm", "--seed", "7"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["seed"], 7);
    assert!(doc["max_gradient_relative_error"].as_f64().unwrap() <= 1e-4);
}

#[test]
fn flags_override_file_override_environment() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("fractscan.toml");
    std::fs::write(&config, "depth = 2\nformat = \"json\"\n").unwrap();
    let config = config.to_str().unwrap();

    let run = |args: &[&str], env: &[(&str, &str)]| {
        let out = Command::new(env!("CARGO_BIN_EXE_fractscan"))
            .args(args)
            .env_clear()
            .envs(env.iter().copied())
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        stdout(&out)
    };

    let from_env = run(&["curve"], &[("FRACTSCAN_DEPTH", "1")]);
    assert_eq!(from_env.lines().count(), 5);
    let from_file = run(&["--config", config, "curve"], &[("FRACTSCAN_DEPTH", "1")]);
    let doc: serde_json::Value = serde_json::from_str(&from_file).unwrap();
    assert_eq!(doc["rows"], 4);
    let from_flag = run(
        &[
            "--config", config, "curve", "--depth", "3", "--format", "csv",
        ],
        &[],
    );
    assert_eq!(from_flag.lines().count(), 65);
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "colour = 3\n").unwrap();
    let out = fractscan(&["--config", config.to_str().unwrap(), "curve"]);
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_fractscan"))
        .args(["curve"])
        .env_clear()
        .env("FRACTSCAN_DEPTH", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seeded_block_is_reproducible_and_seed_sensitive() {
    let a = fractscan(&["block", "--seed", "3"]);
    let b = fractscan(&["block", "--seed", "3"]);
    let c = fractscan(&["block", "--seed", "4"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}
