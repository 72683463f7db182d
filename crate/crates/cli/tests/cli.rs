use std::path::Path;
use std::process::{Command, Output};

fn conewalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conewalk"))
        .args(args)
        .env_remove("CONEWALK_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn invalid_cone_is_a_usage_error() {
    let o = conewalk(&[
        "survival-exponent",
        "--cone",
        "wedge:-1",
        "--steps",
        "gaussian",
        "--start",
        "1,1",
        "--horizons",
        "10:1000",
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("wedge"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(code(&conewalk(&["simulate", "--bogus"])), 2);
    assert_eq!(code(&conewalk(&[])), 2);
}

#[test]
fn start_outside_the_cone_is_rejected() {
    let o = conewalk(&[
        "simulate",
        "--cone",
        "orthant:2",
        "--steps",
        "gaussian",
        "--start",
        "-1,1",
        "--n",
        "10",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn srw_survival_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fit.json");
    let csv = dir.path().join("fit.csv");
    let o = conewalk(&[
        "survival-exponent",
        "--cone",
        "half-line",
        "--steps",
        "lattice:srw",
        "--start",
        "1",
        "--horizons",
        "100:10000:log10",
        "--out",
        s(&out),
        "--csv",
        s(&csv),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out);
    let slope = r["metadata"]["slope"].as_f64().unwrap();
    assert!((slope + 0.5).abs() <= 0.02, "slope {slope}");
    assert_eq!(r["pass"], true);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("series,index,value\n"));
}

#[test]
fn statistical_failure_has_its_own_exit_code() {
    let o = conewalk(&[
        "survival-exponent",
        "--cone",
        "half-line",
        "--steps",
        "lattice:srw",
        "--start",
        "1",
        "--horizons",
        "100:10000:log10",
        "--tolerance",
        "0",
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn harmonic_table_feeds_the_h_transform() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("v.csv");
    let o = conewalk(&[
        "estimate-v",
        "--cone",
        "orthant:2",
        "--steps",
        "rademacher",
        "--window",
        "30",
        "--init",
        "anchor",
        "--out",
        s(&table),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("v.json").exists());

    let paths = dir.path().join("h.csv");
    let o = conewalk(&[
        "sample",
        "--law",
        "htransform",
        "--cone",
        "orthant:2",
        "--steps",
        "rademacher",
        "--start",
        "1,1",
        "--n",
        "40",
        "--vtable",
        s(&table),
        "--count",
        "20",
        "--out",
        s(&paths),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&paths).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("replica,k,coord_1,coord_2,exited"));
    // 20 paths of 41 points each, all inside the quadrant.
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 20 * 41);
    assert!(rows.iter().all(|r| r[2] > 0.0 && r[3] > 0.0));
    assert_eq!(json(&dir.path().join("h.json"))["count"], 20);
}

#[test]
fn bridge_samples_end_at_the_target() {
    let dir = tempfile::tempdir().unwrap();
    let paths = dir.path().join("b.csv");
    let o = conewalk(&[
        "sample",
        "--law",
        "bridge",
        "--cone",
        "half-line",
        "--steps",
        "lattice:srw",
        "--start",
        "1",
        "--end",
        "3",
        "--n",
        "12",
        "--count",
        "5",
        "--out",
        s(&paths),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&paths).unwrap();
    assert!(text.starts_with("replica,k,coord_1,exited\n"));
    let ends: Vec<&str> = text
        .lines()
        .filter(|l| l.split(',').nth(1) == Some("12"))
        .collect();
    assert_eq!(ends.len(), 5);
    assert!(ends.iter().all(|l| l.split(',').nth(2) == Some("3")));
}

#[test]
fn bridge_needs_an_end_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = conewalk(&[
        "sample",
        "--law",
        "bridge",
        "--cone",
        "half-line",
        "--steps",
        "lattice:srw",
        "--start",
        "1",
        "--n",
        "12",
        "--count",
        "5",
        "--out",
        s(&dir.path().join("b.csv")),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn entrance_density_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e.csv");
    let o = conewalk(&[
        "reference",
        "--object",
        "entrance-density",
        "--cone",
        "orthant:2",
        "--grid",
        "0:6:60",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r,density,cdf"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 61);
    assert!(rows.windows(2).all(|w| w[1][2] >= w[0][2]));
    assert!(rows.last().unwrap()[2] > 0.999);
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "summary.json")
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn outputs_do_not_depend_on_threads() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<_> = ["1", "3"]
        .iter()
        .map(|t| {
            let out = dir.path().join(format!("t{t}"));
            let o = conewalk(&[
                "--threads",
                t,
                "suite",
                "--manifest",
                "quick.json",
                "--out-dir",
                s(&out),
                "--only",
                "survival-gaussian-mc,meander-quadrant,bridge-srw",
            ]);
            assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
            read_tree(&out)
        })
        .collect();
    assert_eq!(runs[0].len(), 6);
    assert_eq!(runs[0], runs[1]);

    let paths: Vec<Vec<u8>> = ["1", "3"]
        .iter()
        .map(|t| {
            let out = dir.path().join(format!("sim{t}.csv"));
            let o = conewalk(&[
                "--threads",
                t,
                "simulate",
                "--cone",
                "orthant:2",
                "--steps",
                "gaussian",
                "--start",
                "1,1",
                "--n",
                "50",
                "--replicas",
                "200",
                "--seed",
                "4",
                "--record-paths",
                s(&out),
            ]);
            assert_eq!(code(&o), 0);
            std::fs::read(&out).unwrap()
        })
        .collect();
    assert_eq!(paths[0], paths[1]);
}
