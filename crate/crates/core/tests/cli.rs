use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn fogcap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fogcap")).args(args).output().unwrap()
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn sweep_writes_three_rows_with_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("sweep.json");
    let out = fogcap(&["sweep", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("# fogcap config_hash=") && first.ends_with("seed=7"), "{first}");
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "alpha,avg_loss,loss_probability,ub_markov,stderr");
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 3);
    let alphas: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(alphas, vec![0.0, 10.0, 19.9]);
    for r in &rows {
        let loss: f64 = r[1].parse().unwrap();
        let ub: f64 = r[3].parse().unwrap();
        assert!(loss >= 0.0 && ub >= loss, "{r:?}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = configs().join("sweep.json");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let out = fogcap(&["sweep", "--config", cfg.to_str().unwrap(), "--out", d.path().to_str().unwrap(), "--slots", "20000"]);
        assert!(out.status.success());
    }
    assert_eq!(fs::read(a.path().join("sweep.csv")).unwrap(), fs::read(b.path().join("sweep.csv")).unwrap());
}

#[test]
fn seed_override_changes_header_and_values() {
    let cfg = configs().join("sweep.json");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let base = ["sweep", "--config", cfg.to_str().unwrap(), "--slots", "20000"];
    assert!(fogcap(&[&base[..], &["--out", a.path().to_str().unwrap()]].concat()).status.success());
    assert!(fogcap(&[&base[..], &["--out", b.path().to_str().unwrap(), "--seed", "8"]].concat()).status.success());
    let tb = fs::read_to_string(b.path().join("sweep.csv")).unwrap();
    assert!(tb.lines().next().unwrap().ends_with("seed=8"));
    assert_ne!(fs::read_to_string(a.path().join("sweep.csv")).unwrap(), tb);
}

#[test]
fn fig3_loss_is_monotone_per_process() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("reproduce_fig3.json");
    let out = fogcap(&[
        "reproduce",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--slots",
        "100000",
        "--svg",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "csv"))
        .unwrap();
    let text = fs::read_to_string(&csv).unwrap();
    let header: Vec<&str> = text.lines().find(|l| !l.starts_with('#')).unwrap().split(',').collect();
    let (pi, ai, li) = (
        header.iter().position(|c| *c == "process").unwrap(),
        header.iter().position(|c| *c == "alpha").unwrap(),
        header.iter().position(|c| *c == "avg_loss").unwrap(),
    );
    let rows = data_rows(&text);
    let mut procs: Vec<String> = rows.iter().map(|r| r[pi].clone()).collect();
    procs.dedup();
    assert_eq!(procs.len(), 3);
    for p in &procs {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| &r[pi] == p)
            .map(|r| (r[ai].parse().unwrap(), r[li].parse().unwrap()))
            .collect();
        assert_eq!(pts.len(), 41);
        // Bufferless regime with common random numbers: pathwise non-decreasing.
        for w in pts.windows(2) {
            assert!(w[1].1 >= w[0].1 - 1e-9, "{p}: {:?} -> {:?}", w[0], w[1]);
        }
        let min = pts.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        assert_eq!(pts[0].1, min);
    }
    assert!(fs::read_dir(dir.path()).unwrap().any(|e| e.unwrap().path().extension().is_some_and(|e| e == "svg")));
}

#[test]
fn trace_stats_reports_mean_and_lags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("trace_stats.json");
    let out = fogcap(&["trace-stats", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let file = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().path()).next().unwrap();
    let text = fs::read_to_string(file).unwrap();
    let rows = data_rows(&text);
    assert_eq!(rows.iter().filter(|r| r[0] != "mean").count(), 31);
    assert!(rows.iter().any(|r| r[0] == "mean"));
}

#[test]
fn mismatched_subcommand_fails() {
    let cfg = configs().join("sweep.json");
    let out = fogcap(&["optimize", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("does not match subcommand"), "{err}");
}

#[test]
fn invalid_value_is_reported_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(
        &cfg,
        "{\n  \"scenario\": {\n    \"budget\": -5,\n    \"cloudlets\": [{\"type\": \"gaussian_iid\", \"mean\": 4, \"variance\": 1}]\n  },\n  \"experiment\": {\"kind\": \"sweep\", \"alpha_grid\": [0]}\n}\n",
    )
    .unwrap();
    let out = fogcap(&["sweep", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:3:"), "{err}");
}

#[test]
fn malformed_json_is_reported_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("broken.json");
    fs::write(&cfg, "{\n  \"experiment\": {\"kind\": \"sweep\",\n  \"alpha_grid\": [0,]}\n}\n").unwrap();
    let out = fogcap(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("broken.json:3:"), "{err}");
}

#[test]
fn missing_config_flag_fails() {
    let out = fogcap(&["sweep"]);
    assert_eq!(out.status.code(), Some(1));
}
