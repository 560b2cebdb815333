use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn ptlg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptlg"))
        .args(args)
        .output()
        .expect("spawn ptlg")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn evolve_grid_and_hermitian_speed() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("ev");
    let o = ptlg(&[
        "evolve",
        "--gamma",
        "0",
        "--J",
        "1.5",
        "--t-end",
        "2",
        "--dt-out",
        "0.1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let header = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(header.starts_with("t,S_x,S_y,S_z,v,v1_sq,v2_sq,v3_sq\n"));
    let rows = rows(&out.join("trajectory.csv"));
    assert_eq!(rows.len(), 21);
    for r in &rows {
        assert!((r[4] - 1.5).abs() < 1e-9, "v = {}", r[4]);
    }
    let m = manifest(&out);
    assert_eq!(m["subcommand"], "evolve");
    assert_eq!(m["config"]["j"], 1.5);
    assert_eq!(m["outputs"]["trajectory.csv"].as_str().unwrap().len(), 64);
}

#[test]
fn soe_scan_header() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("soe");
    let o = ptlg(&[
        "soe-scan",
        "--gamma-steps",
        "5",
        "--samples",
        "200",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("order_parameter.csv")).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.starts_with("gamma,"));
}

#[test]
fn config_file_merges_and_flags_win() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        "[evolve]\nJ = 2.0\ngamma = 0.0\nt-end = 1.0\ndt-out = 0.5\n",
    )
    .unwrap();
    let out = tmp.path().join("ev");
    let o = ptlg(&[
        "--config",
        cfg.to_str().unwrap(),
        "evolve",
        "--dt-out",
        "0.25",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["config"]["j"], 2.0);
    assert_eq!(m["config"]["dt_out"], 0.25);
    assert_eq!(rows(&out.join("trajectory.csv")).len(), 5);
}

#[test]
fn config_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[evolve]\ngama = 1.0\n").unwrap();
    let out = tmp.path().join("x");
    let out = out.to_str().unwrap();
    assert_eq!(
        code(&ptlg(&[
            "--config",
            cfg.to_str().unwrap(),
            "evolve",
            "--out",
            out
        ])),
        2
    );
    assert_eq!(code(&ptlg(&["k3-scan", "--gammas", "1", "--out", out])), 2);
    assert_eq!(code(&ptlg(&["evolve", "--J", "-1", "--out", out])), 2);
    assert_eq!(code(&ptlg(&["evolve"])), 2);
    assert_eq!(code(&ptlg(&["verify", "--only", "99"])), 2);
}

#[test]
fn k3_scan_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let run = |name: &str, jobs: &str| {
        let out = tmp.path().join(name);
        let o = ptlg(&[
            "--jobs",
            jobs,
            "k3-scan",
            "--gammas",
            "0.5,1.5",
            "--seed",
            "7",
            "--n-starts",
            "8",
            "--max-evals",
            "3000",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = run("a", "1");
    let b = run("b", "4");
    assert_eq!(
        fs::read(a.join("k3_scan.csv")).unwrap(),
        fs::read(b.join("k3_scan.csv")).unwrap()
    );
    assert_eq!(manifest(&a)["outputs"], manifest(&b)["outputs"]);
    assert_eq!(manifest(&a)["seed"], 7);
    let r = rows(&a.join("k3_scan.csv"));
    assert_eq!(r.len(), 2);
    assert!(r[1][1] > r[0][1] && r[1][1] <= 3.0 + 1e-9);
}

#[test]
fn k3_single_configuration() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("k3");
    let o = ptlg(&[
        "k3",
        "--gamma",
        "0",
        "--theta",
        "90",
        "--phi",
        "270",
        "--theta-m",
        "90",
        "--phi-m",
        "90",
        "--t2",
        "0.5",
        "--t3",
        "1",
        "--degrees",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("k3.json")).unwrap()).unwrap();
    let k3 = v["k3"].as_f64().unwrap();
    assert!(k3.is_finite() && k3 <= 1.5 + 1e-9, "K3 = {k3}");
}

#[test]
fn lindblad_checks_pass() {
    let tmp = TempDir::new().unwrap();
    for check in ["e15", "parametric", "equivalence"] {
        let out = tmp.path().join(check);
        let o = ptlg(&[
            "lindblad",
            "--gamma1",
            "6",
            "--t-end",
            "2",
            "--check",
            check,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(
            code(&o),
            0,
            "{check}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let report: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(tmp.path().join("equivalence/equivalence.json")).unwrap(),
    )
    .unwrap();
    assert!(report["max_deviation"].as_f64().unwrap() < 1e-5);
}

#[test]
fn lindblad_without_decay_keeps_ground_empty() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("l");
    let o = ptlg(&[
        "lindblad",
        "--gamma1",
        "0",
        "--t-end",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let gg = header.iter().position(|h| *h == "re_gg").unwrap();
    for r in rows(&out.join("trajectory.csv")) {
        assert!(r[gg].abs() < 1e-12);
    }
}

#[test]
fn verify_json_subset() {
    let o = ptlg(&["verify", "--only", "10,11", "--json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let results = v["results"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    assert!(results.iter().all(|r| r["passed"] == true));
}
