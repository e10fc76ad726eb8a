use std::process::Command;

use dirmax::experiments::{read_rows, ResultRow};

fn dirmax() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dirmax"))
}

fn strip_timing(rows: Vec<ResultRow>) -> Vec<ResultRow> {
    rows.iter().map(ResultRow::without_timing).collect()
}

#[test]
fn combinatorics_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("comb.csv");
    let res = dirmax()
        .args([
            "combinatorics",
            "--num-dirs",
            "16",
            "--num-dirs",
            "64",
            "--k",
            "2",
            "--threads",
            "1",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary = String::from_utf8(res.stderr).unwrap();
    assert!(
        summary.contains("L=") && summary.contains("sqrtN=4") && summary.contains("max residual="),
        "{summary}"
    );
    let rows = read_rows(std::fs::File::open(&out).unwrap()).unwrap();
    assert!(rows.iter().all(|r| r.experiment == "combinatorics" && r.k == Some(2)));
    assert!(rows
        .iter()
        .any(|r| r.num_dirs == Some(64) && r.quantity == "verified" && r.value == Some(1.0)));
}

#[test]
fn csv_goes_to_stdout_without_out() {
    let res = dirmax()
        .args([
            "sweep",
            "--grid-n",
            "16",
            "--domain-length",
            "4",
            "--num-dirs",
            "4",
            "--num-dirs",
            "8",
            "--random-members",
            "1",
        ])
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.starts_with("schema_version,"));
    let rows = read_rows(text.as_bytes()).unwrap();
    assert!(rows.iter().any(|r| r.quantity == "slope" && r.value.is_some()));
    assert!(String::from_utf8(res.stderr).unwrap().contains("fitted exponent"));
}

#[test]
fn config_file_with_flag_override_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"experiment": "sweep", "grid_n": 16, "domain_length": 4.0, "num_dirs": [8], "delta": [0.25], "random_members": 1, "seed": 5}"#,
    )
    .unwrap();
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let res = dirmax()
            .args(["nikodym", "--config"])
            .arg(&cfg)
            .arg("--seed")
            .arg("11")
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        outputs.push(strip_timing(read_rows(std::fs::File::open(&out).unwrap()).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let rows = &outputs[0];
    assert!(rows
        .iter()
        .all(|r| r.experiment == "nikodym" && r.seed == 11 && r.grid_n == 16 && r.delta == Some(0.25)));
}

#[test]
fn invalid_input_fails_with_message() {
    let res = dirmax().args(["sweep", "--grid-n", "48"]).output().unwrap();
    assert!(!res.status.success());
    assert!(String::from_utf8(res.stderr).unwrap().starts_with("dirmax:"));

    let res = dirmax()
        .args(["annulus", "--grid-n", "16", "--domain-length", "4", "--k", "9"])
        .output()
        .unwrap();
    assert!(!res.status.success());
    assert!(String::from_utf8(res.stderr).unwrap().contains("Nyquist"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"grid_n": 16, "unknown_field": true}"#).unwrap();
    let res = dirmax().args(["sweep", "--config"]).arg(&cfg).output().unwrap();
    assert!(!res.status.success());

    let res = dirmax().args(["sweep", "--dirs", "spiral"]).output().unwrap();
    assert!(!res.status.success());
}

#[test]
fn every_subcommand_is_listed() {
    let res = dirmax().arg("--help").output().unwrap();
    let help = String::from_utf8(res.stdout).unwrap();
    for sub in ["sharpness", "sweep", "annulus", "combinatorics", "cww", "nikodym", "regimes"] {
        assert!(help.contains(sub), "{sub}");
    }
}
