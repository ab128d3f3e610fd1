use std::path::Path;
use std::process::{Command, Output};

fn iotfp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iotfp"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = iotfp(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn train_then_predict_held_out_session() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["synth", "--devices", "4", "--sessions", "4", "--seed", "1"]);
    let line = ok(d.path(), &["train", "--window", "30", "--n-trees", "20", "--seed", "1"]);
    assert!(line.starts_with("model\t"));
    ok(d.path(), &["synth", "--devices", "4", "--sessions", "1", "--seed", "77", "--out", "held"]);
    for dev in ["device-00", "device-01", "device-02", "device-03"] {
        let pcap = format!("held/{dev}/{dev}-s000.pcap");
        let out = ok(d.path(), &["predict", "--pcap", &pcap]);
        let fields: Vec<&str> = out.trim_end().split('\t').collect();
        assert_eq!(fields.len(), 3, "{out}");
        assert_eq!(fields[0], dev);
        let score: f64 = fields[1].parse().unwrap();
        assert!(score > 0.5 && score <= 1.0);
        assert_eq!(fields[2], "30");
    }
}

#[test]
fn sweep_reports_one_row_per_window_and_is_reproducible() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["synth", "--devices", "4", "--sessions", "5"]);
    let args = ["sweep", "--windows", "10,30,105", "--n-trees", "10", "--reports", "r1"];
    let stdout = ok(d.path(), &args);
    let sweep = std::fs::read_to_string(d.path().join("r1/sweep.tsv")).unwrap();
    assert_eq!(stdout, sweep);
    let rows: Vec<&str> = sweep.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for (r, w) in rows.iter().zip(["10", "30", "105"]) {
        assert!(r.starts_with(&format!("{w}\tok\t")), "{r}");
    }
    ok(d.path(), &["sweep", "--windows", "10,30,105", "--n-trees", "10", "--reports", "r2", "--no-cache", "--jobs", "2"]);
    assert_eq!(read_all(&d.path().join("r1")), read_all(&d.path().join("r2")));
    let table = ok(d.path(), &["report", "--reports", "r1"]);
    assert_eq!(table.lines().count(), 4);
}

#[test]
fn unknown_flag_is_usage_error_without_side_effects() {
    let d = tempfile::tempdir().unwrap();
    for args in [
        vec!["synth", "--bogus"],
        vec!["sweep", "--windows", "30,10"],
        vec!["--config", "missing.toml", "synth"],
        vec!["frobnicate"],
    ] {
        let out = iotfp(d.path(), &args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    std::fs::write(d.path().join("bad.toml"), "sed = 3\n").unwrap();
    let out = iotfp(d.path(), &["--config", "bad.toml", "synth"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sed"));
    assert_eq!(read_all(d.path()).len(), 1);
}

#[test]
fn config_file_values_apply_and_flags_override() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("run.toml"), "corpus = \"c\"\nseed = 5\n[params]\nn_trees = 5\n").unwrap();
    ok(d.path(), &["--config", "run.toml", "synth", "--devices", "2", "--sessions", "2"]);
    assert!(d.path().join("c/manifest.tsv").exists());
    let a = std::fs::read(d.path().join("c/device-00/device-00-s000.pcap")).unwrap();
    ok(d.path(), &["--config", "run.toml", "synth", "--devices", "2", "--sessions", "2", "--seed", "6", "--out", "c6"]);
    let b = std::fs::read(d.path().join("c6/device-00/device-00-s000.pcap")).unwrap();
    assert_ne!(a, b);
    ok(d.path(), &["--config", "run.toml", "synth", "--devices", "2", "--sessions", "2", "--out", "c5"]);
    assert_eq!(read_all(&d.path().join("c/device-00")), read_all(&d.path().join("c5/device-00")));
}

#[test]
fn cache_verify_flags_corruption_as_data_error() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["synth", "--devices", "2", "--sessions", "2"]);
    let out = ok(d.path(), &["features", "--windows", "30"]);
    assert_eq!(out.lines().count(), 1);
    assert!(ok(d.path(), &["cache", "verify"]).contains("corrupt\t0"));
    let dir = std::fs::read_dir(d.path().join("cache"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.is_dir())
        .unwrap();
    let file = std::fs::read_dir(dir.join("30s")).unwrap().next().unwrap().unwrap().path();
    let mut bytes = std::fs::read(&file).unwrap();
    bytes[20] ^= 0x04;
    std::fs::write(&file, bytes).unwrap();
    let out = iotfp(d.path(), &["cache", "verify"]);
    assert_eq!(out.status.code(), Some(2));
    let out = iotfp(d.path(), &["sweep", "--windows", "30", "--n-trees", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("corrupt"));
}

#[test]
fn ingest_is_idempotent() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["synth", "--devices", "2", "--sessions", "2"]);
    assert!(ok(d.path(), &["ingest"]).contains("new\t4"));
    let first = std::fs::read(d.path().join("cache/sessions.jsonl")).unwrap();
    assert!(ok(d.path(), &["ingest"]).contains("new\t0"));
    assert_eq!(first, std::fs::read(d.path().join("cache/sessions.jsonl")).unwrap());
}
