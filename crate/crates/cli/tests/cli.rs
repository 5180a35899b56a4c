use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_proxsample"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("PROXSAMPLE_OUT").output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const LAPLACE: &str = "[target]\nname = \"l1\"\ndim = 1\n[regime]\nkind = \"semi-smooth\"\n[chain]\nn_iters = 100\nchains = 4\nseed = 7\n";

#[test]
fn sample_writes_one_csv_per_chain_plus_manifest_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), LAPLACE);
    let out = tmp.path().join("out");
    let o = run(&["sample", "-c", &cfg, "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["chain_000.csv", "chain_001.csv", "chain_002.csv", "chain_003.csv", "manifest.json", "summary.json"]
    );
    let csv = fs::read_to_string(out.join("chain_002.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "k,x_1,rejections,bundle_iters,subgrad_calls");
    assert_eq!(lines.len(), 102);

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"], serde_json::json!([7, 8, 9, 10]));
    assert_eq!(manifest["resolved"]["n_iters"], 100);
    assert_eq!(manifest["csv"]["schema_version"], 1);
    assert_eq!(manifest["config"]["target"]["name"], "l1");
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["steps"], 400);
}

#[test]
fn rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), LAPLACE);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run(&["sample", "-c", &cfg, "-o", a.to_str().unwrap()]).status.success());
    // output directory from the environment this time
    let o = bin().args(["sample", "-c", &cfg]).env("PROXSAMPLE_OUT", &b).output().unwrap();
    assert!(o.status.success());
    for i in 0..4 {
        let name = format!("chain_{i:03}.csv");
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name}");
    }
}

#[test]
fn invalid_target_lists_zoo_names() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[target]\nname = \"laplacian\"\ndim = 1\n[regime]\nkind = \"semi-smooth\"\n");
    let o = run(&["params", "-c", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for n in ["l1", "power_norm", "quad_plus_l1", "hinge", "gaussian", "zero"] {
        assert!(err.contains(n), "{err}");
    }
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let o = run(&["verify", "--suite", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("prop-key"));
}

#[test]
fn missing_subcommand_is_a_usage_error() {
    assert_eq!(run(&[]).status.code(), Some(2));
}

#[test]
fn params_examples() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[target]\nname = \"l1\"\ndim = 1\nscale = 0.5\n[regime]\nkind = \"semi-smooth\"\nregularize = false\n[chain]\nn_iters = 10\n",
    );
    let o = run(&["params", "-c", &cfg, "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["eta"], 0.25);
    assert_eq!(v["delta"], 1.0);

    let cfg = write_config(
        tmp.path(),
        "[target]\nname = \"gaussian\"\nprecision = [1,1,1,1,1,1,1,1,1,1]\n[regime]\nkind = \"composite\"\nregularize = false\n[chain]\nn_iters = 10\n",
    );
    let v: serde_json::Value = serde_json::from_slice(&run(&["params", "-c", &cfg, "--json"]).stdout).unwrap();
    assert!((v["eta"].as_f64().unwrap() - 0.1).abs() < 1e-15);

    let cfg = write_config(tmp.path(), "[target]\nname = \"gaussian\"\nprecision = [3.0]\n[regime]\nkind = \"strongly-convex\"\n");
    let o = run(&["params", "-c", &cfg]);
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success());
    assert!(table.contains("mu                     0\n"), "{table}");
    assert!(table.contains("lambda = 3"), "{table}");
}

#[test]
fn defaults_parse_back() {
    let o = run(&["config", "--defaults"]);
    assert!(o.status.success());
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &String::from_utf8_lossy(&o.stdout));
    assert!(run(&["params", "-c", &cfg]).status.success());
}

#[test]
fn verify_prop_key_passes_and_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let report = tmp.path().join("report.json");
    let o = run(&["verify", "--suite", "prop-key", "--report", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["suites"][0]["suite"], "prop-key");
}
