use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_specguard"))
}

fn run(out: &Path, args: &[&str]) -> Output {
    bin().arg("--out").arg(out).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Artifact contents without the metadata line.
fn body(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("{\"_meta\""))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
    assert_eq!(bin().arg("no-such-command").output().unwrap().status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["validate-spectral", "--n-matrices", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    let o = run(dir.path(), &["eval-guard", "--counts", "1,2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"guard": {"rho_min": 0.3, "windw": 4}}"#).unwrap();
    let o = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .arg("horizon")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("windw"));
}

#[test]
fn eval_guard_counts_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["eval-guard", "--counts", "235,15,5,245"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("precision=0.942 recall=0.980 F1=0.961 FPR=0.060"), "{s}");

    let fixture = dir.path().join("counts.json");
    fs::write(&fixture, r#"{"tn": 235, "fp": 15, "fn": 5, "tp": 245}"#).unwrap();
    let o = run(dir.path(), &["eval-guard", "--counts-file", fixture.to_str().unwrap()]);
    assert!(stdout(&o).contains("F1=0.961 FPR=0.060"));
}

#[test]
fn horizon_undefined_at_unit_radius() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--check", "horizon", "--rho", "1.0,0.99,0.98"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = body(&dir.path().join("horizon.csv"));
    assert!(csv.contains("1.0,,,bound undefined"), "{csv}");
}

#[test]
fn same_seed_gives_identical_bodies() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run(d.path(), &["--seed", "7", "validate-spectral", "--n-matrices", "50"]);
        assert_eq!(o.status.code(), Some(0));
        let o = run(
            d.path(),
            &["--seed", "7", "gen-data", "--benign", "5", "--adversarial", "5"],
        );
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["validate_spectral.csv", "traces.jsonl"] {
        let (x, y) = (body(&a.path().join(f)), body(&b.path().join(f)));
        assert!(!x.is_empty());
        assert_eq!(x, y, "{f}");
    }
    let c = tempfile::tempdir().unwrap();
    run(c.path(), &["--seed", "8", "validate-spectral", "--n-matrices", "50"]);
    assert_ne!(
        body(&a.path().join("validate_spectral.csv")),
        body(&c.path().join("validate_spectral.csv"))
    );
}

#[test]
fn metadata_is_stamped() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &["--seed", "3", "horizon"]);
    let text = fs::read_to_string(dir.path().join("horizon.csv")).unwrap();
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("# specguard "));
    assert!(first.contains("command=horizon seed=3 config="));
}

#[test]
fn gen_data_monitor_and_guard_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--check", "gen-data"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let traces = dir.path().join("traces.jsonl");
    assert_eq!(body(&traces).lines().count(), 500);

    let benign = dir.path().join("benign.jsonl");
    let lines: Vec<String> = fs::read_to_string(&traces)
        .unwrap()
        .lines()
        .filter(|l| l.contains("\"label\":false"))
        .map(String::from)
        .collect();
    fs::write(&benign, lines.join("\n") + "\n").unwrap();
    let o = run(dir.path(), &["--check", "monitor", "--trace", benign.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let alerts = body(&dir.path().join("alerts.jsonl"));
    assert_eq!(alerts.lines().filter(|l| l.contains("\"block\"")).count(), 0);
    assert!(alerts.lines().count() > 0);

    let o = run(dir.path(), &["--check", "train-guard"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let model = dir.path().join("guard_model.json");
    let o = run(
        dir.path(),
        &[
            "eval-guard",
            "--model",
            model.to_str().unwrap(),
            "--data",
            traces.to_str().unwrap(),
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("classifier"));

    let o = run(
        dir.path(),
        &[
            "--check",
            "eval-guard",
            "--data",
            traces.to_str().unwrap(),
            "--ablate",
            "0.1,0.3,0.5",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(body(&dir.path().join("ablation.csv")).lines().count(), 4);
}

#[test]
fn monitor_accepts_plain_record_stream() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stream.jsonl");
    let mut text = String::new();
    for t in 0..6 {
        for layer in 0..2 {
            let rho = if t == 4 && layer == 1 { 0.1 } else { 0.95 };
            text += &format!(
                "{{\"t\":{t},\"layer\":{layer},\"delta\":0.1,\"rho_hat\":{rho},\"h_norm_before\":0.0,\"h_norm_after\":0.0,\"probe_flops\":0,\"abar\":[]}}\n"
            );
        }
    }
    fs::write(&path, text).unwrap();
    let o = run(
        dir.path(),
        &["monitor", "--trace", path.to_str().unwrap(), "--layers", "2"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let alerts = body(&dir.path().join("alerts.jsonl"));
    let decisions: Vec<bool> = alerts.lines().map(|l| l.contains("\"block\"")).collect();
    assert_eq!(decisions, vec![false, false, false, false, true, true]);
}

#[test]
fn failed_check_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    let benign_low = r#"{"stream_id":0,"label":false,"source":"benign","injected_at":null,"trace":{"n_layers":1,"length":1,"records":[{"t":0,"layer":0,"delta":0.1,"rho_hat":0.1,"h_norm_before":0.0,"h_norm_after":0.0,"probe_flops":0,"abar":[]}]}}"#;
    fs::write(&path, format!("{benign_low}\n")).unwrap();
    let o = run(dir.path(), &["monitor", "--trace", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(dir.path(), &["--check", "monitor", "--trace", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
