use std::path::Path;
use std::process::Command;

fn run(args: &[&str], config: Option<&str>, dir: &Path) -> i32 {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_flowperiod"));
    cmd.args(args).arg("--out").arg(dir.join("out"));
    if let Some(text) = config {
        let path = dir.join("config.json");
        std::fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap().status.code().unwrap()
}

const SEIFERT: &str = r#"{"flow":{"type":"gallery","name":"seifert","params":{"k":3}},"grid":{"cells":8}}"#;

#[test]
fn malformed_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["classify"], Some(r#"{"flow": {"type": "gallery""#), dir.path()), 2);
    assert_eq!(run(&["classify"], Some(r#"{"flow":{"type":"gallery","name":"nope"}}"#), dir.path()), 2);
    assert_eq!(run(&["classify"], None, dir.path()), 2);
    assert_eq!(run(&["field", "--tol-scale", "0"], Some(SEIFERT), dir.path()), 2);
}

#[test]
fn seifert_field_csv_has_constant_theta() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["field", "--seed", "3"], Some(SEIFERT), dir.path()), 0);
    let text = std::fs::read_to_string(dir.path().join("out/field.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# seed=3"));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header, ["x1", "x2", "x3", "per", "theta", "multiplier", "dense_mask", "residual"]);
    let mut rows = 0;
    for line in lines {
        let theta: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
        assert!((theta - 3.0).abs() < 1e-6, "{line}");
        rows += 1;
    }
    assert!(rows > 100);
}

#[test]
fn identical_seed_gives_identical_csv() {
    let config = r#"{"flow":{"type":"gallery","name":"c_inf_disk"},"samples":40}"#;
    let read = |dir: &Path, name: &str| std::fs::read(dir.join("out").join(name)).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    for cmd in ["classify", "geometry"] {
        assert_eq!(run(&[cmd, "--seed", "11", "--threads", "2"], Some(config), a.path()), 0);
        assert_eq!(run(&[cmd, "--seed", "11"], Some(config), b.path()), 0);
        assert_eq!(run(&[cmd, "--seed", "12"], Some(config), c.path()), 0);
        let file = format!("{cmd}.csv");
        assert_eq!(read(a.path(), &file), read(b.path(), &file), "{cmd}");
        assert_ne!(read(a.path(), &file), read(c.path(), &file), "{cmd}");
    }
}

#[test]
fn generator_and_fixed_point_reports() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["generator"], Some(SEIFERT), dir.path()), 0);
    let rep: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/generator.json")).unwrap()).unwrap();
    assert_eq!(rep["group"], "multiples");
    assert_eq!(rep["divisions"].as_array().unwrap().len(), 0);
    assert!(rep["zp_tests"].as_array().unwrap().iter().all(|t| t["divisible"] == false));

    let ham = r#"{"flow":{"type":"polynomial_field","dim":2,"components":["-2*y","4*x^3"]},"grid":{"cells":8}}"#;
    assert_eq!(run(&["fixedpoints"], Some(ham), dir.path()), 0);
    let rep: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/fixedpoints.json")).unwrap()).unwrap();
    let fp = &rep["fixed_points"][0];
    assert_eq!(fp["verdict"], "DegenerateBlock");
    assert_eq!(fp["matrix"], serde_json::json!([[0.0, -2.0], [0.0, 0.0]]));
    assert!(fp["blowup_table"]["strictly_increasing"].as_bool().unwrap());
}

#[test]
fn geometry_reports_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"flow":{"type":"gallery","name":"rotation","params":{"beta":3.0}},"samples":25,"quad_n":1024}"#;
    assert_eq!(run(&["geometry"], Some(config), dir.path()), 0);
    let text = std::fs::read_to_string(dir.path().join("out/geometry.csv")).unwrap();
    assert_eq!(text.lines().nth(1), Some("orbit_id,period,length,diameter,sup_speed,slack1,slack2"));
    assert_eq!(text.lines().count(), 2 + 25);
}
