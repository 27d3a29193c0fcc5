use std::path::Path;
use std::process::{Command, Output};

fn nilcalc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nilcalc")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn groups_list() {
    let dir = tempfile::tempdir().unwrap();
    let o = nilcalc(&["groups", "list"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let row = |name: &str| -> Vec<String> {
        let line = text.lines().find(|l| l.split_whitespace().next() == Some(name)).unwrap();
        line.split_whitespace().map(str::to_string).collect()
    };
    assert_eq!(row("H1")[1..5], ["2", "1", "4", "3"]);
    assert_eq!(row("G37D")[5], "37D");
    assert_eq!(row("N32")[4], "6");
    assert_eq!(row("37A-graph")[5], "37A");
}

#[test]
fn classify_and_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let o = nilcalc(&["classify", "--group", "HTYPE3"], dir.path());
    assert_eq!(stdout(&o).trim(), "37D₁");
    let o = nilcalc(&["spectrum", "--group", "G37D", "--eta", "-0.3,0.4,0.2"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["r"], serde_json::json!([1, 1]));
    assert_eq!(v["r0"], 0);
    // classify needs d1 = 4, d2 = 3
    assert_eq!(nilcalc(&["classify", "--group", "H1"], dir.path()).status.code(), Some(2));
    // η = 0 is rejected as input
    assert_eq!(nilcalc(&["spectrum", "--group", "H1", "--eta", "0"], dir.path()).status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(nilcalc(&["bogus"], p).status.code(), Some(1));
    assert_eq!(nilcalc(&["spectrum", "--group", "H1"], p).status.code(), Some(1));
    assert_eq!(nilcalc(&["kernel", "--group", "nope"], p).status.code(), Some(2));
    assert_eq!(nilcalc(&["kernel", "--multiplier", "heat:-1"], p).status.code(), Some(2));
    assert_eq!(nilcalc(&["kernel", "--grid", "16x3.0:32x0.5"], p).status.code(), Some(2));
    std::fs::write(p.join("bad.json"), r#"{"d1":2,"d2":1,"brackets":[{"i":2,"j":1,"k":1,"v":1.0}]}"#).unwrap();
    assert_eq!(nilcalc(&["classify", "--group", "bad.json"], p).status.code(), Some(2));
}

#[test]
fn dry_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = nilcalc(&["kernel", "--dry-run", "--group", "G37D", "--seed", "9"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["group"], "G37D");
    assert_eq!(v["seed"], 9);
    assert!(!dir.path().join("nilcalc-out").exists());
    std::fs::write(dir.path().join("cfg.json"), r#"{"group": "H1", "multiplier": {"kind": "heat", "t": 0}}"#).unwrap();
    assert_eq!(nilcalc(&["kernel", "--dry-run", "--config", "cfg.json"], dir.path()).status.code(), Some(2));
}

fn read_header(bytes: &[u8]) -> Vec<(u32, f64)> {
    assert_eq!(&bytes[..4], b"NKG1");
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    (0..n)
        .map(|i| {
            let o = 8 + 12 * i;
            (u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()), f64::from_le_bytes(bytes[o + 4..o + 12].try_into().unwrap()))
        })
        .collect()
}

#[test]
fn kernel_files_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let args = ["kernel", "--group", "H1", "--multiplier", "bump:0.5,2", "--grid", "16x0.5:32x0.5", "--seed", "4"];
    assert_eq!(nilcalc(&[&args[..], &["--out", "a"]].concat(), p).status.code(), Some(0));
    assert_eq!(nilcalc(&[&args[..], &["--out", "b", "--threads", "1"]].concat(), p).status.code(), Some(0));
    let a = std::fs::read(p.join("a/kernel.nkg1")).unwrap();
    let b = std::fs::read(p.join("b/kernel.nkg1")).unwrap();
    assert_eq!(a, b);
    assert_eq!(read_header(&a), vec![(16, 0.5), (16, 0.5), (32, 0.5)]);
    assert_eq!(a.len(), 8 + 3 * 12 + 16 * 16 * 16 * 32);
    let meta: serde_json::Value = serde_json::from_slice(&std::fs::read(p.join("a/kernel.json")).unwrap()).unwrap();
    assert!(meta.is_object());
}

#[test]
fn zero_multiplier_writes_zero_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = nilcalc(&["kernel", "--multiplier", "zero", "--grid", "8x0.5:8x0.5"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let bytes = std::fs::read(dir.path().join("nilcalc-out/kernel.nkg1")).unwrap();
    let body = &bytes[8 + 3 * 12..];
    assert_eq!(body.len(), 16 * 8 * 8 * 8);
    assert!(body.iter().all(|b| *b == 0));
}

#[test]
fn checks_pass_and_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = nilcalc(&["check", "laguerre", "--out", "r"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("PASS laguerre"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("r/check-laguerre.json")).unwrap()).unwrap();
    assert_eq!(report["criteria"][0]["pass"], true);
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    let o = nilcalc(&["check", "plancherel", "--group", "H1", "--multiplier", "bump:0.5,2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = nilcalc(&["check", "partition"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn partition_dump() {
    let dir = tempfile::tempdir().unwrap();
    let o = nilcalc(&["partition", "dump", "--n", "2", "--eps", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["centers"].as_array().unwrap().len(), 6);
    assert_eq!(v["sectors"].as_array().unwrap().len(), 12);
}
