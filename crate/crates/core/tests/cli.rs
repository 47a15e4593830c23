use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn deltaml(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deltaml"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn smoke_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/smoke.toml")
}

#[test]
fn generate_fit_transpile_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(deltaml(&["generate", "--dataset", "circles", "--seed", "3", "--n", "400", "--out", "s.csv"], d));
    let lines = fs::read_to_string(d.join("s.csv")).unwrap();
    assert_eq!(lines.lines().count(), 401);
    assert!(lines.starts_with("iteration,label,f0,f1\n"));

    let dump = ok(deltaml(&["fit", "s.csv", "--frame", "150", "--out", "m.bin"], d));
    assert!(dump.contains("node=0 test node: go to node 1 if X[:, "), "{dump}");

    ok(deltaml(&["transpile", "m.bin", "--out-dir", "gen"], d));
    let c = fs::read_to_string(d.join("gen/m.c")).unwrap();
    assert!(c.starts_with("int predict(float* x){\n"));
    let sizes: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("gen/m.sizes.json")).unwrap()).unwrap();
    assert_eq!(sizes["source_bytes"].as_u64().unwrap() as usize, c.len());
    assert_eq!(sizes["model_bytes"].as_u64().unwrap(), fs::metadata(d.join("m.bin")).unwrap().len());
}

#[test]
fn transpile_rejects_naive_bayes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(deltaml(&["generate", "--dataset", "random-tree", "--n", "200", "--out", "s.csv"], d));
    ok(deltaml(&["fit", "s.csv", "--learner", "gaussian_nb", "--out", "nb.bin"], d));
    let out = deltaml(&["transpile", "nb.bin"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("decision trees"));
}

#[test]
fn run_recommend_and_check_trends() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = smoke_config();
    let stdout = ok(deltaml(&["run", config.to_str().unwrap(), "--out-dir", "out"], d));
    assert!(stdout.starts_with("2 scenarios (0 failed)"), "{stdout}");
    let results = fs::read_to_string(d.join("out/results.csv")).unwrap();
    assert_eq!(results.lines().count(), 3);
    assert_eq!(fs::read_dir(d.join("out/logs")).unwrap().count(), 3);

    ok(deltaml(&["recommend", "--results", "out/results.csv", "--out-dir", "out"], d));
    let rec = fs::read_to_string(d.join("out/recommendations.csv")).unwrap();
    // 2 app classes × 3 patterns × 4 media, plus the header
    assert_eq!(rec.lines().count(), 25);

    // The smoke grid covers none of the trend scenarios, so nothing can fail.
    ok(deltaml(&["check-trends", "out/results.csv", "--out-dir", "out", "--strict"], d));
    let verdicts: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("out/verdicts.json")).unwrap()).unwrap();
    let list = verdicts["verdicts"].as_array().unwrap();
    assert_eq!(list.len(), 6);
    assert!(list.iter().all(|v| v["status"] == "not_evaluable"));
}

#[test]
fn seed_override_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = smoke_config();
    ok(deltaml(&["run", config.to_str().unwrap(), "--out-dir", "a"], d));
    ok(deltaml(&["run", config.to_str().unwrap(), "--seed", "40", "--out-dir", "b"], d));
    assert!(d.join("b/logs").read_dir().unwrap().any(|e| e
        .unwrap()
        .file_name()
        .to_string_lossy()
        .contains("seed40")));
    assert_ne!(fs::read(d.join("a/results.csv")).unwrap(), fs::read(d.join("b/results.csv")).unwrap());
}

#[test]
fn bad_inputs_fail_with_messages() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.toml"), "[[scenario]]\nframes = 3\n").unwrap();
    let out = deltaml(&["run", "bad.toml"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("frames"));

    let out = deltaml(&["run", "missing.toml"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.toml"));

    fs::write(d.join("s.csv"), "iteration,label,f0\n0,0,1.0\n").unwrap();
    let out = deltaml(&["fit", "s.csv", "--frame", "0", "--out", "m.bin"], d);
    assert!(!out.status.success());
}
