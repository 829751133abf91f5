use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SHORT: &str = "duration = 3.0\n\n[attack]\nkind = \"false_positive\"\nattacked_fraction = 0.3\nstart_time = 1.0\n";

fn addf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_addf")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("scenario.toml");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn digest(stdout: &[u8]) -> String {
    String::from_utf8_lossy(stdout)
        .lines()
        .find_map(|l| l.strip_prefix("digest").map(|d| d.trim().to_string()))
        .expect("digest line")
}

#[test]
fn simulate_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SHORT);
    let runs: Vec<(String, Vec<u8>, Vec<u8>)> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = tmp.path().join(name);
            let o = addf(&["simulate", "--config", &cfg, "--seed", "3", "--trials", "2", "--out", out.to_str().unwrap()]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            let trial = out.join("trial_0001");
            (digest(&o.stdout), fs::read(trial.join("metrics.csv")).unwrap(), fs::read(trial.join("frames.ndjson")).unwrap())
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    let csv = String::from_utf8(runs[0].1.clone()).unwrap();
    assert!(csv.starts_with(&format!("# manifest_digest={}\n# root_seed=3\n", runs[0].0)));

    let other = tmp.path().join("c");
    let o = addf(&["simulate", "--config", &cfg, "--seed", "4", "--trials", "2", "--out", other.to_str().unwrap()]);
    assert!(o.status.success());
    assert_ne!(digest(&o.stdout), runs[0].0);
}

#[test]
fn trials_produce_one_output_each() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "duration = 0.5\n");
    let out = tmp.path().join("out");
    let o = addf(&["simulate", "--config", &cfg, "--trials", "20", "--no-frames", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trials = fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("trial_")).count();
    assert_eq!(trials, 20);
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["trials"].as_array().unwrap().len(), 20);
}

#[test]
fn sweep_writes_a_table_per_variant() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "duration = 1.0\n");
    let out = tmp.path().join("sweep");
    let o = addf(&["sweep", "--config", &cfg, "--axis", "attacked-fraction", "--values", "0,0.5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(rows[0].starts_with("attacked_fraction,variant,trials"));
    assert_eq!(rows.len(), 1 + 2 * 2);
}

#[test]
fn invalid_config_is_rejected_by_key() {
    let tmp = tempfile::tempdir().unwrap();
    for (text, key) in [
        ("[trust]\nforgetting = 1.5\n", "trust.forgetting"),
        ("[tracker]\nmerge_iou = 0.0\n", "tracker.merge_iou"),
        ("density = 0.0\n", "density"),
        ("bogus = 1\n", "bogus"),
    ] {
        let cfg = write_config(tmp.path(), text);
        let out = tmp.path().join("never");
        let o = addf(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(key), "stderr for {text:?} should name {key}: {err}");
        assert!(!out.join("summary.json").exists());
    }
}

#[test]
fn refuses_non_empty_output_without_force() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "duration = 0.5\n");
    let out = tmp.path().join("out");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join("keep.txt"), "x").unwrap();
    let o = addf(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    let o = addf(&["simulate", "--config", &cfg, "--force", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
