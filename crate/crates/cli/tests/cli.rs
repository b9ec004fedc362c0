use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn example_text() -> String {
    fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/example.toml"))
        .unwrap()
}

/// Example scenario with `key = value` lines replaced and extra lines appended.
fn scenario(dir: &Path, name: &str, replace: &[(&str, &str)], extra: &str) -> PathBuf {
    let mut text: String = example_text()
        .lines()
        .filter(|l| !l.starts_with("out_dir"))
        .map(|line| {
            let key = line.split('=').next().unwrap_or("").trim();
            match replace.iter().find(|(k, _)| *k == key) {
                Some((k, "")) => format!("# {k} removed"),
                Some((k, v)) => format!("{k} = {v}"),
                None => line.to_string(),
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    text.push('\n');
    text.push_str(extra);
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn fbs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbs"))
        .args(args)
        .output()
        .unwrap()
}

fn text(o: &Output) -> (String, String) {
    (
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

#[test]
fn validate_reports_derived_quantities() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario(dir.path(), "s.toml", &[], "");
    let o = fbs(&["validate", path.to_str().unwrap()]);
    let (out, err) = text(&o);
    assert_eq!(o.status.code(), Some(0), "{err}");
    assert!(
        out.contains("lambda: 100 given; 2/tau default = 200"),
        "{out}"
    );
    assert!(out.contains("A0 = sup|y_d| on [0, 20]: 1.802776"), "{out}");
    assert!(out.contains("delay steps m = tau/h: 100"), "{out}");
    assert!(out.contains("FLS rules per level: 25, 125"), "{out}");
    assert!(
        out.contains("k_c1 - A0 - k_b1") && out.contains("VIOLATED"),
        "{out}"
    );
    assert!(
        out.trim_end().lines().last().unwrap().starts_with("ok"),
        "{out}"
    );
}

#[test]
fn validate_itemizes_missing_gains() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario(
        dir.path(),
        "s.toml",
        &[("K", ""), ("sigma", ""), ("beta", "")],
        "",
    );
    let o = fbs(&["validate", path.to_str().unwrap()]);
    let (_, err) = text(&o);
    assert_eq!(o.status.code(), Some(2));
    assert!(err.contains("3 problem(s)"), "{err}");
    for key in ["`K`", "`sigma`", "`beta`"] {
        assert!(err.contains(key), "{err}");
    }
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario(dir.path(), "s.toml", &[], "gain_typo = 3.0\n");
    let o = fbs(&["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).1.contains("gain_typo"));
}

#[test]
fn simulation_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario(dir.path(), "s.toml", &[("T", "2.0")], "");
    let out = dir.path().join("run");
    let o = fbs(&[
        "sim",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--stride",
        "100",
    ]);
    let (stdout, err) = text(&o);
    assert_eq!(o.status.code(), Some(0), "{err}");
    assert!(stdout.contains("[pass]"));

    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,x1,x2,z1,z2,z3,u,u_delayed,chi,v,alpha1,alpha2,delta_hat1,delta_hat2,theta_hat1,theta_hat2,Vs"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 201);
    let first: Vec<f64> = rows[0].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first.len(), 17);
    assert_eq!(first[1], 0.5);
    let last_t: f64 = rows[200].split(',').next().unwrap().parse().unwrap();
    assert!((last_t - 2.0).abs() < 1e-9);
    // at least 12 significant digits per field
    let mantissa = rows[1]
        .split(',')
        .nth(1)
        .unwrap()
        .split('e')
        .next()
        .unwrap();
    assert!(
        mantissa.chars().filter(char::is_ascii_digit).count() >= 13,
        "{mantissa}"
    );

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["all_constraints_ok"], true);
    assert_eq!(report["constraints"].as_array().unwrap().len(), 2);
    assert!(fs::read_to_string(out.join("report.txt"))
        .unwrap()
        .contains("sup|x1|"));
    let plot = fs::read_to_string(out.join("plot.py")).unwrap();
    assert!(plot.contains("fig6_adaptation.png"));
}

#[test]
fn barrier_violated_at_start_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario(dir.path(), "s.toml", &[("x0", "[3.1, 0.0]")], "");
    let out = dir.path().join("run");
    let o = fbs(&[
        "sim",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).1.contains("|z1|"));
    assert!(!out.join("trajectory.csv").exists());
}

#[test]
fn delay_off_grid_names_both_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario(dir.path(), "s.toml", &[("h", "0.0003")], "");
    let o = fbs(&["validate", path.to_str().unwrap()]);
    let err = text(&o).1;
    assert_eq!(o.status.code(), Some(2));
    assert!(err.contains("0.01") && err.contains("0.0003"), "{err}");
}

#[test]
fn barrier_violation_during_run_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario(
        dir.path(),
        "s.toml",
        &[
            ("K", "[6.0, 10.2, 20.0]"),
            ("k_b", "[2.0, 4.0]"),
            ("x0", "[0.5, -0.5]"),
            ("T", "1.0"),
        ],
        "",
    );
    let o = fbs(&[
        "sim",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("run").to_str().unwrap(),
    ]);
    let err = text(&o).1;
    assert_eq!(o.status.code(), Some(3), "{err}");
    assert!(err.contains("at t = ") && err.contains("|z2|"), "{err}");
}

#[test]
fn divergence_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario(
        dir.path(),
        "s.toml",
        &[("plant", "\"custom\""), ("T", "2.0")],
        "f = [\"0.2*x1 + 10*x2\", \"10*u + sqrt(1.2 - x1)\"]\n",
    );
    let o = fbs(&[
        "sim",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("run").to_str().unwrap(),
    ]);
    let err = text(&o).1;
    assert_eq!(o.status.code(), Some(4), "{err}");
    assert!(err.contains("diverged at t = "), "{err}");
}

fn grid(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("grid.toml");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn feasibility_single_candidate_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario(dir.path(), "s.toml", &[], "");
    let g = grid(
        dir.path(),
        "K1 = [4.0]\nkb2 = [3.0]\nhorizon = 2.0\nsamples = [[0.5, 0.0]]\n",
    );
    let out = dir.path().join("feas");
    let o = fbs(&[
        "feas",
        path.to_str().unwrap(),
        "--grid",
        g.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let (stdout, err) = text(&o);
    assert_eq!(o.status.code(), Some(0), "{err}");
    assert!(
        stdout.contains("selected: [4.0, 3.0] with N = 7.0000"),
        "{stdout}"
    );
    assert!(
        stdout.contains("k_c1 - A0 - k_b1") && stdout.contains("VIOLATED"),
        "{stdout}"
    );
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("feasibility.json")).unwrap()).unwrap();
    assert_eq!(json["selected"]["sigma"], serde_json::json!([4.0, 3.0]));
    assert!(out.join("feasibility.txt").exists());
}

#[test]
fn feasibility_empty_set_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario(dir.path(), "s.toml", &[], "");
    let g = grid(
        dir.path(),
        "K1 = [4.9]\nkb2 = [1.0]\nhorizon = 1.0\nsamples = [[0.5, 0.0]]\n",
    );
    let o = fbs(&[
        "feas",
        path.to_str().unwrap(),
        "--grid",
        g.to_str().unwrap(),
        "--out",
        dir.path().join("f").to_str().unwrap(),
    ]);
    let (stdout, err) = text(&o);
    assert_eq!(o.status.code(), Some(5), "{err}");
    assert!(err.contains("k_b2"), "{err}");
    assert!(stdout.contains("selected: none"), "{stdout}");
}

#[test]
fn feasibility_empty_grid_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario(dir.path(), "s.toml", &[], "");
    let g = grid(dir.path(), "K1 = []\nkb2 = [3.0]\n");
    let o = fbs(&[
        "feas",
        path.to_str().unwrap(),
        "--grid",
        g.to_str().unwrap(),
        "--out",
        dir.path().join("f").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).1.contains("K1"));
}

#[test]
fn validated_scenarios_simulate_without_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let variants: [&[(&str, &str)]; 4] = [
        &[("T", "0.5")],
        &[("T", "0.5"), ("lambda", "")],
        &[("T", "0.5"), ("fls_rules", "3"), ("x0", "[1.2, 0.3]")],
        &[("T", "0.5"), ("h", "0.0005"), ("delta_hat0", "[0.4, 0.2]")],
    ];
    for (k, replace) in variants.iter().enumerate() {
        let path = scenario(dir.path(), &format!("v{k}.toml"), replace, "");
        let v = fbs(&["validate", path.to_str().unwrap()]);
        assert_eq!(v.status.code(), Some(0), "variant {k}: {}", text(&v).1);
        let out = dir.path().join(format!("run{k}"));
        let s = fbs(&[
            "sim",
            path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_ne!(s.status.code(), Some(2), "variant {k}: {}", text(&s).1);
    }
}
