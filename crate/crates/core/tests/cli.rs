use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use relwalk::config::ExperimentConfig;
use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn relwalk(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relwalk"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn result(out: &Path, command: &str) -> Value {
    let text = std::fs::read_to_string(out.join(format!("{command}.json"))).unwrap();
    let report: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["report_schema"], 1);
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    report["experiments"][0]["result"].clone()
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let c = ExperimentConfig::load(&path).unwrap();
            assert_eq!(ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
            let g = c.build_group().unwrap();
            c.build_measure(&g).unwrap();
            n += 1;
        }
    }
    assert!(n >= 4);
}

#[test]
fn walk_csv_on_the_free_group() {
    let dir = tempfile::tempdir().unwrap();
    let out = relwalk(&configs().join("f2.toml"), dir.path(), &["walk"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("walk.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 21);
    assert_eq!(&rows[0][1], "1");
    assert_eq!(&rows[4][1], "7/64");
}

#[test]
fn bad_inputs_fail_loudly() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "schema = 1\n[walk]\nhorizn = 3\n").unwrap();
    let out = relwalk(&bad, dir.path(), &["walk"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizn"));

    let radial = dir.path().join("radial.toml");
    let text = std::fs::read_to_string(configs().join("z2_z3_long_steps.toml")).unwrap();
    std::fs::write(&radial, format!("{text}\n[walk]\nmethod = \"radial\"\n")).unwrap();
    let out = relwalk(&radial, dir.path(), &["walk"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not radial"));

    let out = relwalk(&configs().join("f2.toml"), dir.path(), &["green", "--r", "1.2"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverges"));
}

#[test]
fn degeneracy_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    for (config, verdict) in [("f2.toml", "non-degenerate"), ("z2x3.toml", "non-degenerate")] {
        let out = relwalk(&configs().join(config), dir.path(), &["degeneracy"]);
        assert!(out.status.success());
        assert_eq!(result(dir.path(), "degeneracy")["verdict"], verdict, "{config}");
    }
    let out = relwalk(&configs().join("z2_z3.toml"), dir.path(), &["degeneracy", "--budget", "50"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("inconclusive"));
    assert_eq!(result(dir.path(), "degeneracy")["verdict"], "inconclusive");
}

#[test]
fn pressure_and_exponent_reports() {
    let dir = tempfile::tempdir().unwrap();
    let f2 = configs().join("f2.toml");
    assert!(relwalk(&f2, dir.path(), &["pressure"]).status.success());
    let est = result(dir.path(), "pressure")["estimates"].as_array().unwrap().clone();
    let last = est.last().unwrap();
    let p = last["pressure"].as_f64().unwrap();
    assert!((-0.05..=0.01).contains(&p), "{p}");
    assert!(est.iter().all(|e| e["pressure"].as_f64().unwrap() < 0.01));

    assert!(relwalk(&f2, dir.path(), &["llt"]).status.success());
    let alpha = result(dir.path(), "llt")["regression"]["alpha"].as_f64().unwrap();
    assert!((alpha - 1.5).abs() < 0.1, "{alpha}");
}

#[test]
fn reports_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("z2_z3.toml");
    for d in [&a, &b] {
        assert!(relwalk(&cfg, d.path(), &["ancona", "--seed", "5"]).status.success());
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("ancona.json")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(result(a.path(), "ancona")["seed"], 5);
}
