use std::fs;
use std::process::{Command, Output};

use tempfile::tempdir;

fn wab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wab"))
        .args(args)
        .env("WAB_WORKERS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn classify_single_point_from_flags() {
    let o = wab(&["--command", "classify", "--a", "0", "--b", "2", "--format", "machine"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("block suite=classify a=0 b=2 verdict=PASS"));
    assert!(out.contains("shift k=0 certified=1 predicted=1 families=Inner residual=0 verdict=PASS"));
    assert!(out.contains("shift k=-3 certified=0 predicted=0 families=- residual=0 verdict=PASS"));
}

#[test]
fn negative_parameters_parse() {
    let o = wab(&["--command", "jacobi", "--a", "-1/2", "--b", "-1", "--radius", "4", "--k-min", "-2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("[PASS] jacobi W(-1/2, -1)"));
}

#[test]
fn config_file_and_output_path() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("report.txt");
    fs::write(
        &cfg,
        format!(
            "# small derivation run\ncommand = derivations\ngrid = 1/2,3; 2,1\nradius = 6\nmargin = 2\nk_min = -2\nk_max = 2\nformat = machine\noutput = {}\n",
            out.display()
        ),
    )
    .unwrap();
    let o = wab(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).is_empty());
    let report = fs::read_to_string(&out).unwrap();
    assert!(report.contains("block suite=derivations a=1/2 b=3 verdict=PASS"));
    // W(2,1) is solved at its normalization W(0,1)
    assert!(report.contains("normalized a=0 b=1"));
    assert!(report.contains("shift k=0 raw=4 certified=4 predicted=4 D1=in_space D2_01=in_space"));
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "command = classify\na = 1/0\nb = 0\n").unwrap();
    let o = wab(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2"), "{err}");

    let o = wab(&["--radius", "3", "--margin", "3"]);
    assert_eq!(o.status.code(), Some(2));
    let o = wab(&["--a", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn golden_fixture_round_trip_and_corruption() {
    let dir = tempdir().unwrap();
    let golden = dir.path().join("golden.txt");
    let base = ["--command", "postlie", "--a", "2", "--b", "-1", "--k-min", "-3", "--k-max", "1"];
    let mut args: Vec<&str> = base.to_vec();
    let golden_path = golden.to_str().unwrap().to_string();
    args.extend(["--format", "machine", "--out", &golden_path]);
    assert_eq!(wab(&args).status.code(), Some(0));

    let mut check: Vec<&str> = base.to_vec();
    check.extend(["--golden", &golden_path]);
    let o = wab(&check);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("golden payload matches"));

    // timing lines are not part of the comparison
    let text = fs::read_to_string(&golden).unwrap();
    let retimed = text.replace("seconds=", "seconds=9");
    fs::write(&golden, &retimed).unwrap();
    assert_eq!(wab(&check).status.code(), Some(0));

    let corrupted = text.replacen("axiom=commutativity", "axiom=leibniz_like", 1);
    assert_ne!(corrupted, text);
    fs::write(&golden, corrupted).unwrap();
    let o = wab(&check);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("golden payload DIFFERS"));
}

#[test]
fn full_grid_exits_zero() {
    let o = wab(&["--format", "machine"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("summary blocks=65 failed=0 verdict=PASS"));
}
