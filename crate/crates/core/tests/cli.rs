use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use romdict::io::read_snapshots;

fn romdict(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_romdict")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = romdict(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn report(dir: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(PathBuf::from(dir).join("report.json")).unwrap()).unwrap()
}

fn sweep_rows(file: &str) -> Vec<Vec<String>> {
    fs::read_to_string(file).unwrap().lines().map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn generate_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = r#"{"kind":"translated_gaussian","n_h":50,"m":20,"seed":3,"intensity_range":[0.5,2]}"#;
    let (a, b) = (path(tmp.path(), "a.bin"), path(tmp.path(), "b.bin"));
    ok(&["generate", "--spec", spec, "--out", &a]);
    ok(&["generate", "--spec", spec, "--out", &b]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let c = path(tmp.path(), "c.csv");
    ok(&["generate", "--spec", spec, "--out", &c, "--format", "csv"]);
    let from_csv = read_snapshots(Path::new(&c)).unwrap();
    let from_bin = read_snapshots(Path::new(&a)).unwrap();
    assert_eq!(from_csv.data(), from_bin.data());
    assert!(tmp.path().join("c.labels.csv").exists());
}

#[test]
fn pure_scaling_has_zero_dissimilarity() {
    let tmp = tempfile::tempdir().unwrap();
    let spec_file = path(tmp.path(), "spec.json");
    fs::write(&spec_file, r#"{"kind":"pure_scaling","n_h":12,"m":9,"seed":1,"intensity_range":[0.1,10],"random_sign":true}"#)
        .unwrap();
    let s = path(tmp.path(), "s.bin");
    ok(&["generate", "--spec", &spec_file, "--out", &s]);
    let d = path(tmp.path(), "d.csv");
    ok(&["dissim", "--input", &s, "--out", &d]);
    let text = fs::read_to_string(&d).unwrap();
    assert_eq!(text.lines().count(), 9);
    assert!(text.lines().flat_map(|l| l.split(',')).all(|x| x.parse::<f64>().unwrap() == 0.0));
}

#[test]
fn multi_regime_labels() {
    let tmp = tempfile::tempdir().unwrap();
    let s = path(tmp.path(), "s.bin");
    ok(&["generate", "--spec", r#"{"kind":"multi_regime","regimes":3,"n_h":10,"m":30,"seed":2}"#, "--out", &s]);
    let set = read_snapshots(Path::new(&s)).unwrap();
    assert_eq!((set.m(), set.n_h()), (30, 10));
    let labels = set.labels().unwrap();
    let mut regimes: Vec<u64> = (0..30).map(|i| labels.row(i)[0] as u64).collect();
    regimes.sort();
    regimes.dedup();
    assert_eq!(regimes, vec![0, 1, 2]);
}

#[test]
fn build_two_directions_and_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let s = path(tmp.path(), "s.csv");
    fs::write(&s, "1,0,0\n-4,0,0\n0,0.3,0\n0,7,0\n0.1,0,0\n").unwrap();
    let out = path(tmp.path(), "out");
    ok(&["build", "--input", &s, "--k", "2", "--n", "1", "--out", &out]);
    let r = report(&out);
    assert_eq!(r["total_cost"].as_f64().unwrap(), 0.0);
    assert_eq!(r["per_cluster"].as_array().unwrap().len(), 2);
    for name in ["global_pod", "kmeans_dict", "random_dict"] {
        assert!(r["baselines"][name].is_number());
    }
    let partition = fs::read_to_string(PathBuf::from(&out).join("partition.csv")).unwrap();
    assert_eq!(partition.lines().next().unwrap(), "snapshot_index,cluster_id,is_medoid");
    assert_eq!(partition.lines().count(), 6);
    for c in 0..2 {
        assert!(PathBuf::from(&out).join(format!("basis_{c}.bin")).exists());
        assert!(PathBuf::from(&out).join(format!("basis_{c}.json")).exists());
    }

    let eval = ok(&["evaluate", "--input", &s, "--partition", &format!("{out}/partition.csv"), "--baselines", "global_pod"]);
    let v: serde_json::Value = serde_json::from_slice(&eval.stdout).unwrap();
    assert_eq!(v["total_cost"].as_f64().unwrap(), 0.0);
}

#[test]
fn build_beats_global_on_pulses() {
    let tmp = tempfile::tempdir().unwrap();
    let s = path(tmp.path(), "s.bin");
    ok(&["generate", "--spec", r#"{"kind":"translated_gaussian","n_h":100,"m":64,"seed":0,"intensity_range":[0.5,2]}"#, "--out", &s]);
    let out = path(tmp.path(), "out");
    ok(&["build", "--input", &s, "--k", "4", "--n", "3", "--baselines", "global_pod", "--out", &out]);
    let r = report(&out);
    assert!(r["baselines"]["global_pod"].as_f64().unwrap() > r["total_cost"].as_f64().unwrap());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let s = path(tmp.path(), "s.bin");
    let out = romdict(&["generate", "--spec", "{not json", "--out", &s]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let bad = path(tmp.path(), "bad.csv");
    fs::write(&bad, "1,2\n0,0\n").unwrap();
    let out = romdict(&["dissim", "--input", &bad, "--out", &path(tmp.path(), "d.csv")]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:") && err.lines().count() == 1, "{err}");

    let good = path(tmp.path(), "good.csv");
    fs::write(&good, "1,2\n3,1\n").unwrap();
    let out = romdict(&["build", "--input", &good, "--k", "5", "--out", &path(tmp.path(), "o")]);
    assert_eq!(out.status.code(), Some(2));

    let out = romdict(&["sweep", "--input", &good, "--k-range", "", "--n-range", "1", "--out", &path(tmp.path(), "x.csv")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_shapes_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let s = path(tmp.path(), "s.bin");
    ok(&["generate", "--spec", r#"{"kind":"multi_regime","regimes":4,"n_h":20,"m":40,"seed":9,"intensity_range":[0.1,10]}"#, "--out", &s]);

    let n_sweep = path(tmp.path(), "n.csv");
    ok(&["sweep", "--input", &s, "--k-range", "1", "--n-range", "1..6", "--out", &n_sweep]);
    let rows = sweep_rows(&n_sweep);
    assert_eq!(rows[0][..3], ["k", "n", "total_cost"]);
    let costs: Vec<f64> = rows[1..].iter().map(|r| r[2].parse().unwrap()).collect();
    assert_eq!(costs.len(), 6);
    assert!(costs.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{costs:?}");

    let k_sweep = path(tmp.path(), "k.csv");
    ok(&["sweep", "--input", &s, "--k-range", "1..4", "--n-range", "1", "--out", &k_sweep]);
    let rows = sweep_rows(&k_sweep);
    let last = rows.last().unwrap();
    assert_eq!(last[0], "4");
    assert!(last[2].parse::<f64>().unwrap() <= 1e-20);
    assert!(rows[1][2].parse::<f64>().unwrap() > 0.1);

    let again = path(tmp.path(), "k2.csv");
    ok(&["--threads", "1", "sweep", "--input", &s, "--k-range", "1..4", "--n-range", "1", "--out", &again]);
    assert_eq!(fs::read(&k_sweep).unwrap(), fs::read(&again).unwrap());
}
