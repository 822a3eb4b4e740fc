use std::process::{Command, Output};

use serde_json::Value;

fn ftm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ftm"))
        .args(args)
        .output()
        .expect("run ftm")
}

fn json(args: &[&str]) -> Value {
    let out = ftm(args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn complex(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

#[test]
fn cc_equal_masses() {
    let v = json(&["cc", "--masses", "1,1,1"]);
    let records = v.as_array().unwrap();
    assert_eq!(records.len(), 5);
    for r in records
        .iter()
        .filter(|r| r["kind"].as_str().unwrap().starts_with("euler"))
    {
        assert!((r["euler_root"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn cc_residuals() {
    let v = json(&["cc", "--masses", "1,2,3"]);
    for r in v.as_array().unwrap() {
        assert!(r["residual"].as_f64().unwrap() < 1e-10);
    }
}

#[test]
fn invalid_input_exits_2() {
    for args in [
        vec!["cc", "--masses", "0,1,1"],
        vec!["cc", "--masses", "1,1"],
        vec!["spectra", "--masses", "1,1,1", "--cc", "euler7"],
        vec!["cc", "--masses", "1,1,1", "--format", "csv"],
        vec!["massmap", "--resolution", "1"],
        vec![
            "integrate",
            "--masses",
            "1,1,1",
            "--restpoint",
            "lagrange+,nowhere",
            "--tau",
            "1",
        ],
    ] {
        assert_eq!(ftm(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn spectra_reports() {
    let v = json(&[
        "spectra",
        "--masses",
        "1,1,1",
        "--cc",
        "euler2",
        "--infinity",
    ]);
    assert_eq!(v["spiraling"], Value::Bool(true));
    let eig = v["eigenvalues"].as_array().unwrap();
    assert!(eig.iter().any(|e| complex(e).1 > 0.0) && eig.iter().any(|e| complex(e).1 < 0.0));
    let lag = json(&["spectra", "--masses", "1,1,1", "--cc", "lagrange+"]);
    assert!(lag["k"].as_f64().unwrap().abs() < 1e-15);
    let e = lag["eigenvalues"].as_array().unwrap();
    assert_eq!(complex(&e[4]), complex(&e[6]));
    assert_eq!(complex(&e[5]), complex(&e[7]));
    for (cc, sign) in [("lagrange-", "-"), ("euler1", "+"), ("euler3", "-")] {
        let r = json(&["spectra", "--masses", "1,2,3", "--cc", cc, "--sign", sign]);
        let c = &r["crosscheck"];
        assert!(
            c["discrepancy_a"].as_f64().unwrap() < 1e-8
                && c["discrepancy_b"].as_f64().unwrap() < 1e-8
        );
    }
}

#[test]
fn massmap_rows() {
    let out = ftm(&["massmap", "--resolution", "4", "--margin", "0"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    // N(N+1)/2 = 10 lattice cells, 9 of them on an edge with a zero mass
    assert_eq!(rows.len(), 1);
    assert!(rows[0].ends_with(",1,1,1,1"));

    let out = ftm(&["massmap", "--resolution", "101", "--margin", "0.01"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    // masses >= 0.01 on a 100-step lattice: i, j, k >= 1 with i + j + k = 100
    assert_eq!(rows.len(), 99 * 98 / 2);
    for r in &rows {
        for k in 0..3 {
            if r[k] > 0.97 {
                assert_eq!(r[6 + k], 0.0, "{r:?}");
            }
        }
    }
}

#[test]
fn integrate_stable_manifold_probe() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("probe.csv");
    let p = path.to_str().unwrap();
    let out = ftm(&[
        "integrate",
        "--masses",
        "1,1,1",
        "--restpoint",
        "lagrange+,infinity",
        "--offset",
        "1e-6",
        "--dir",
        "stable0",
        "--tau",
        "-8",
        "--output",
        p,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with(
        "tau,t,radial,chart,s1x,s1y,s2x,s2y,s3x,s3y,z1x,z1y,z2x,z2y,z3x,z3y,v,energy_residual\n"
    ));
    assert!(text.lines().count() > 10);
    let meta: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("probe.csv.json")).unwrap())
            .unwrap();
    assert_eq!(meta["summary"]["v_monotonicity_violations"], 0);
    assert!(meta["summary"]["max_energy_residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn integrate_homothetic() {
    let v = json(&[
        "integrate",
        "--masses",
        "1,2,3",
        "--restpoint",
        "euler1,collision",
        "--radial",
        "1e-3",
        "--tau",
        "2",
        "--format",
        "json",
    ]);
    let samples = v["samples"].as_array().unwrap();
    let spec = json(&["spectra", "--masses", "1,2,3", "--cc", "euler1"]);
    let v0 = spec["v0"].as_f64().unwrap();
    for s in samples {
        let tau = s["tau"].as_f64().unwrap();
        let r = s["state"]["radial"].as_f64().unwrap();
        assert!(
            (r / (1e-3 * (v0 * tau).exp()) - 1.0).abs() < 1e-8,
            "{tau} {r}"
        );
    }
    assert_eq!(v["metadata"]["summary"]["v_monotonicity_violations"], 0);
}

#[test]
fn integrate_failure_exits_3() {
    let out = ftm(&[
        "integrate",
        "--masses",
        "1,2,3",
        "--restpoint",
        "euler1,collision",
        "--radial",
        "1e-3",
        "--tau",
        "2",
        "--max-steps",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn secondvar_certificates() {
    let v = json(&["secondvar", "--masses", "1,1,1", "--middle", "2"]);
    assert_eq!(v["spiraling"], Value::Bool(true));
    let q = v["Q"].as_f64().unwrap();
    assert!(q < 0.0 && q.abs() > 10.0 * v["quadrature_error"].as_f64().unwrap());
    let rate = v["oscillation_rate"].as_f64().unwrap();
    let ratio = v["conjugate_ratio"].as_f64().unwrap();
    assert!((ratio - (std::f64::consts::PI / rate).exp()).abs() < 1e-9 * ratio);
    let first = v["conjugate_points"][0].as_f64().unwrap();
    assert!((first / ratio - 1.0).abs() < 1e-9);

    let n = json(&["secondvar", "--masses", "0.05,0.9,0.05", "--middle", "2"]);
    assert_eq!(n["spiraling"], Value::Bool(false));
    assert!(n.get("Q").is_none());
}

#[test]
fn probe_on_path_file() {
    let cc = json(&["cc", "--masses", "1,1,1"]);
    let s: Vec<f64> = cc[0]["s"]["s"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    let nodes: Vec<Vec<f64>> = (0..=30)
        .map(|k| {
            let r = 1.0 + k as f64 / 10.0;
            s.iter().map(|x| r * x).collect()
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("path.json");
    std::fs::write(
        &file,
        serde_json::json!({ "masses": [1.0, 1.0, 1.0], "nodes": nodes }).to_string(),
    )
    .unwrap();
    let v = json(&["probe", "--path", file.to_str().unwrap(), "--modes", "2"]);
    assert_eq!(v["timed_input"], Value::Bool(false));
    let (a, l) = (
        v["action"].as_f64().unwrap(),
        v["jm_length"].as_f64().unwrap(),
    );
    assert!((a - l).abs() < 1e-8 * l);
    assert!(v["probe"]["min_eigenvalue"].as_f64().unwrap() >= -1e-8);
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let p = dir.path().join(name);
        let out = ftm(&[
            "integrate",
            "--masses",
            "1,2,3",
            "--restpoint",
            "lagrange-,infinity,-",
            "--offset",
            "1e-5",
            "--dir",
            "stable1",
            "--tau",
            "-3",
            "--seed",
            "7",
            "--output",
            p.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        (
            std::fs::read(&p).unwrap(),
            std::fs::read(dir.path().join(format!("{name}.json"))).unwrap(),
        )
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert_eq!(a, b);
    let m1 = ftm(&["massmap", "--resolution", "30"]).stdout;
    let m2 = ftm(&["massmap", "--resolution", "30"]).stdout;
    assert_eq!(m1, m2);
}
