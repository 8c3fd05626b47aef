use std::path::Path;
use std::process::{Command, Output};

fn freesub(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freesub")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn convolve_writes_grid_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = freesub(&["convolve", "--measure", "pareto:1.5,1", "--n", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("convolution.csv")).unwrap();
    assert!(csv.lines().count() > 1000);
    let diag: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap();
    assert!(diag["mass_defect"].as_f64().unwrap() < 1e-4);
    assert_eq!(diag["iterations_histogram"].as_array().unwrap().len(), 6);
    // the written grid reads back as a measure
    let o = freesub(&[
        "convolve",
        "--measure",
        out.join("convolution.csv").to_str().unwrap(),
        "--measure",
        "point:1",
        "--out",
        dir.path().join("shifted").to_str().unwrap(),
    ]);
    assert!(code(&o) != 64, "{}", stderr(&o));
}

#[test]
fn remainder_case_c_example() {
    let o = freesub(&["remainder-equiv", "--measure", "pareto:0.5,1", "--case", "C"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rep: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let names: Vec<&str> = rep["claims"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"im_r_G_constant") && names.contains(&"re_r_G_constant"));
    assert_eq!(rep["schema_version"], 1);
    assert!(rep["environment"]["schedules"]["y"].is_array());
}

#[test]
fn n_max_guard() {
    let o = freesub(&["tail-ratio", "--measure", "pareto:1.5,1", "--n", "5"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("n_max exceeded"));
}

#[test]
fn warnings_give_exit_two() {
    let o = freesub(&[
        "remainder-equiv",
        "--measure",
        "pareto:0.5,1",
        "--case",
        "C",
        "--schedule",
        "1,5,1e2,1e3,1e4,1e5",
    ]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn failing_claims_give_exit_one() {
    // a one-decade schedule is far too short for the slowly varying case
    let o = freesub(&["remainder-equiv", "--measure", "logpareto:2,3,1", "--case", "B", "--schedule", "1e2:1e3:5"]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn usage_errors() {
    for args in [
        vec!["frobnicate"],
        vec!["tail-ratio"],
        vec!["tail-ratio", "--measure", "pareto:-1"],
        vec!["tail-ratio", "--measure", "cauchy:1"],
        vec!["remainder-equiv", "--measure", "pareto:1.5,1"],
        vec!["remainder-equiv", "--measure", "pareto:1.5,1", "--case", "Q"],
        vec!["karamata", "--measure", "pareto:1.5,1", "--grid", "nodes=abc"],
        vec!["karamata", "--measure", "pareto:1.5,1", "--schedule", "10,1"],
        vec!["karamata", "--measure", "pareto:1.5,1", "--tolerance", "-1"],
        vec!["karamata", "--measure", "pareto:1.5,1", "--format", "xml"],
    ] {
        let o = freesub(&args);
        assert_eq!(code(&o), 64, "{args:?}: {}", stderr(&o));
    }
    assert_eq!(code(&freesub(&["--help"])), 0);
}

#[test]
fn incompatible_case_is_an_error() {
    let o = freesub(&["remainder-equiv", "--measure", "pareto:1.5,1", "--case", "B"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("incompatible"));
    let o = freesub(&["tail-ratio", "--measure", "point:1"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("inapplicable"));
}

#[test]
fn report_subcommand_combines_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = freesub(&["karamata", "--measure", "pareto:1.5,1", "--out", d]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let good = Path::new(d).join("karamata.json");
    assert!(good.exists());
    let o = freesub(&["report", good.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));

    let mut rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&good).unwrap()).unwrap();
    rep["claims"][0]["verdict"] = "fail".into();
    let bad = Path::new(d).join("bad.json");
    std::fs::write(&bad, rep.to_string()).unwrap();
    let o = freesub(&["report", good.to_str().unwrap(), bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn csv_format_and_series_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = freesub(&["inverse-remainder", "--measure", "semicircle:2,2", "--p", "0", "--out", d, "--format", "csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("inverse-remainder.csv")).unwrap();
    assert_eq!(text.lines().count(), 5);
    let series = std::fs::read_dir(d).unwrap().filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".csv")).count();
    assert_eq!(series, 5);
}

#[test]
fn json_measure_argument() {
    let o = freesub(&["karamata", "--measure", r#"{"kind":"pareto","alpha":0.5,"xm":1.0}"#]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("m.json");
    std::fs::write(&f, r#"{"kind":"frechet","alpha":1.5}"#).unwrap();
    let o = freesub(&["karamata", "--measure", f.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn same_seed_same_bytes() {
    let args = ["karamata", "--measure", "pareto:1,1", "--seed", "42"];
    let (a, b) = (freesub(&args), freesub(&args));
    assert_eq!(a.stdout, b.stdout);
}
