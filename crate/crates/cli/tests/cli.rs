use std::process::{Command, Output};

use serde_json::Value;

const TWISTS: [&str; 8] = ["--alpha1", "0.1", "--beta1", "0.3", "--alpha2", "0.6", "--beta2", "0.8"];

fn g2f(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_g2f")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = g2f(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn cx(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

fn with_twists<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().copied().chain(TWISTS).collect()
}

#[test]
fn z2_at_zero_eps_is_the_torus_product() {
    let v = json(&with_twists(&["z2", "--tau1", "i", "--tau2", "i", "--eps", "0"]));
    let (a, b) = (cx(&v["result"]["value"]), cx(&v["result"]["z1_product"]));
    assert!((a.0 - b.0).abs() + (a.1 - b.1).abs() < 1e-15);
    let z1 = json(&with_twists(&["z1", "--torus", "1"]));
    let z2 = json(&with_twists(&["z1", "--torus", "2"]));
    let (p, q) = (cx(&z1["result"]["value"]), cx(&z2["result"]["value"]));
    let prod = (p.0 * q.0 - p.1 * q.1, p.0 * q.1 + p.1 * q.0);
    assert!((prod.0 - a.0).abs() + (prod.1 - a.1).abs() < 1e-14);
    assert_eq!(v["truncation"]["M"], 16);
    assert!(v["self_convergence"]["rel_diff"].as_f64().unwrap() < 1e-15);
}

#[test]
fn output_is_byte_identical_and_fixed_format() {
    let args = with_twists(&["genform", "--eps", "0.01+0.004i", "--w", "1:0.9+0.3i", "--z", "2:0.7-0.4i", "-W", "3"]);
    let a = g2f(&args).stdout;
    let b = g2f(&args).stdout;
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let keys: Vec<_> = ["\"command\"", "\"config\"", "\"truncation\"", "\"result\"", "\"self_convergence\""]
        .iter()
        .map(|k| text.find(k).unwrap())
        .collect();
    assert!(keys.windows(2).all(|w| w[0] < w[1]));
    assert!(text.contains("\"W\":3.0000000000000000e0"));
    let v: Value = serde_json::from_str(&text).unwrap();
    assert!(v["result"]["oracle_rel_diff"].as_f64().unwrap() < 1e-4);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, "# sewing\nM = 16\ntau2 = 1.2i\neps=0.01\n").unwrap();
    let p = path.to_str().unwrap();
    let v = json(&with_twists(&["z2", "--config", p, "-M", "20"]));
    assert_eq!(v["truncation"]["M"], 20);
    assert_eq!(v["config"]["M"], "20");
    assert_eq!(v["config"]["tau2"], "1.2i");
    assert_eq!(v["self_convergence"]["reference_M"], 24);

    let empty = dir.path().join("empty.cfg");
    std::fs::write(&empty, "").unwrap();
    let a = json(&with_twists(&["z2", "--config", empty.to_str().unwrap(), "--tau2", "1.2i", "--eps", "0.01"]));
    let b = json(&with_twists(&["z2", "--tau2", "1.2i", "--eps", "0.01"]));
    assert_eq!(a, b);
}

#[test]
fn malformed_value_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    std::fs::write(&path, "M = 12\neps = 0.0x1\n").unwrap();
    let out = g2f(&["z2", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("key 'eps'") && err.contains("line 2"), "{err}");

    std::fs::write(&path, "colour = blue\n").unwrap();
    let out = g2f(&["z2", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("'colour'"));

    let out = g2f(&["z2", "-M", "many"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("key 'M'"));
}

#[test]
fn exit_codes() {
    assert_eq!(g2f(&with_twists(&["z2", "--eps", "10"])).status.code(), Some(2));
    assert_eq!(g2f(&["z2", "--alpha1", "0.5", "--beta1", "0.5"]).status.code(), Some(2));
    let slow = g2f(&["z1", "--max-terms", "8", "--tau1", "0.3i", "--alpha1", "0.2", "--beta1", "0.3"]);
    assert_eq!(slow.status.code(), Some(3));
    assert!(slow.stdout.is_empty());
}

#[test]
fn scan_writes_ordered_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scan.csv");
    let out = g2f(&with_twists(&["scan", "--eps-grid", "4", "--scan-extent", "0.7", "--format", "csv", "-o", path.to_str().unwrap()]));
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "index,eps_re,eps_im,in_domain,abs_z2,det_re,det_im,M,series_tol");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 16);
    assert!(!text.contains('"'));
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.len(), 9);
        assert_eq!(r[0], i.to_string());
        assert_eq!(r[4].is_empty(), r[3] == "0");
    }
    // corners of a 0.7 × bound square lie outside the disk
    assert_eq!(rows[0][3], "0");
    assert!(rows.iter().any(|r| r[3] == "1"));
    let again = g2f(&with_twists(&["scan", "--eps-grid", "4", "--scan-extent", "0.7", "--format", "csv"]));
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn identity_checks() {
    let tau = ["--tau1", "i", "--tau2", "1.2i", "-M", "12"];
    let v = json(&with_twists(&[&["check", "jacobi-product", "--order", "6"][..], &tau].concat()));
    assert_eq!(v["result"]["passed"], true);
    assert!(v["result"]["fitted_order"].as_f64().unwrap() > 6.0);

    let eps = ["--eps", "0.01+0.005i"];
    for id in ["partition-oracle", "qf-det", "bosonization"] {
        let v = json(&with_twists(&[&["check", id, "-W", "6"][..], &tau, &eps].concat()));
        assert_eq!(v["result"]["passed"], true, "{id}: {v}");
    }
    let v = json(&["check", "rank-one", "--alpha1", "0", "--beta1", "0.5", "--alpha2", "0.5", "--beta2", "0", "--eps", "0.1"]);
    assert_eq!(v["result"]["passed"], true);

    let v = json(&with_twists(&[
        "check", "modular", "--word", "g1S,b,g2T", "--tau1", "0.1+i", "--tau2", "-0.2+1.2i", "--eps", "0.05+0.02i",
        "--w", "1:0.7+0.3i", "--z", "2:-0.4+0.5i",
    ]));
    assert_eq!(v["result"]["passed"], true);
    assert_eq!(v["result"]["reports"].as_array().unwrap().len(), 2);
}

#[test]
fn kernels_and_limits() {
    let v = json(&with_twists(&["szego", "--eps", "1e-9", "--w", "1:0.9+0.2i", "--z", "1:-0.4+0.5i"]));
    let (a, b) = (cx(&v["result"]["value"]), cx(&v["result"]["genus_one"]));
    assert!((a.0 - b.0).abs() + (a.1 - b.1).abs() < 1e-6);
    let v = json(&with_twists(&["virasoro", "--eps", "0.05+0.02i", "--tau2", "0.1+1.2i", "--w", "1:0.6+0.4i"]));
    assert!(v["self_convergence"]["extrapolant_rel_diff"].as_f64().unwrap() < 1e-5);
    let v = json(&["z2-heisenberg", "--eps", "0"]);
    assert!(cx(&v["result"]["value"]).0 > 0.0);
    assert_eq!(g2f(&["virasoro"]).status.code(), Some(2));
    assert_eq!(g2f(&["z2", "--format", "csv"]).status.code(), Some(2));
}
