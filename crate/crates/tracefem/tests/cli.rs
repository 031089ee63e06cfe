use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const P2_LINEAR: &str = "method = \"p2\"\nk = 1\nk_p = 2\neta = { c = 1.0, e = 2.0 }\nrho = { c = 1.0, e = 1.0 }\n";
const HEADER: &str = "level,h,ndof_u,ndof_lambda,err_energy,err_M,err_L2,err_L2_tan,err_H1,eoc_energy,eoc_M,iters,seconds";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tracefem"))
        .args(args)
        .arg("--quiet")
        .current_dir(dir)
        .env_remove("TRACEFEM_THREADS")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn study_writes_csv_json_and_plot() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &format!("{P2_LINEAR}levels = [1, 2]\noutput_dir = \"res\"\n"));
    let out = run(tmp.path(), &["study", &cfg, "--plot"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("res/results.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(HEADER));
    let r = rows(&csv);
    assert_eq!(r.len(), 2);
    assert_eq!(r[0][0], "1");
    assert_eq!(r[1][0], "2");
    let eoc: f64 = r[1][9].parse().unwrap();
    assert!(eoc > 0.5 && eoc < 1.5, "{eoc}");
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("res/results.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["config"]["method"], "p2");
    assert_eq!(json["records"].as_array().unwrap().len(), 2);
    assert!(fs::read_to_string(tmp.path().join("res/convergence.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn config_errors_exit_one_without_output() {
    let tmp = TempDir::new().unwrap();
    let bad = write_config(tmp.path(), "bad.toml", &format!("{P2_LINEAR}colour = \"red\"\noutput_dir = \"res\"\n"));
    let out = run(tmp.path(), &["study", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
    assert!(!tmp.path().join("res").exists());
    let missing = run(tmp.path(), &["study", "nope.toml"]);
    assert_eq!(missing.status.code(), Some(1));
    let deep = write_config(tmp.path(), "deep.toml", &format!("{P2_LINEAR}levels = [1, 8]\noutput_dir = \"res\"\n"));
    assert_eq!(run(tmp.path(), &["study", &deep]).status.code(), Some(1));
    assert!(!tmp.path().join("res").exists());
}

#[test]
fn solver_failure_on_one_level_exits_two() {
    let tmp = TempDir::new().unwrap();
    let first = write_config(tmp.path(), "a.toml", &format!("{P2_LINEAR}levels = [1]\noutput_dir = \"a\"\n"));
    assert_eq!(run(tmp.path(), &["study", &first]).status.code(), Some(0));
    let iters = rows(&fs::read_to_string(tmp.path().join("a/results.csv")).unwrap())[0][11].clone();
    let text = format!("{P2_LINEAR}levels = [1, 2]\noutput_dir = \"b\"\n[solver]\nkind = \"cg\"\nmaxit = {iters}\n");
    let capped = write_config(tmp.path(), "b.toml", &text);
    let out = run(tmp.path(), &["study", &capped]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("b/results.csv")).unwrap();
    assert_eq!(rows(&csv).len(), 1);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("b/results.json")).unwrap()).unwrap();
    assert_eq!(json["failures"][0]["level"], 2);
    assert_eq!(json["failures"][0]["stage"], "solve");
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &format!("{P2_LINEAR}levels = [1, 2]\n"));
    let mut files = Vec::new();
    for out in ["x", "y"] {
        let o = run(tmp.path(), &["study", &cfg, "--deterministic", "--output", out]);
        assert_eq!(o.status.code(), Some(0));
        files.push((fs::read(tmp.path().join(out).join("results.csv")).unwrap(), fs::read(tmp.path().join(out).join("results.json")).unwrap()));
    }
    assert_eq!(files[0], files[1]);
    assert!(rows(&String::from_utf8(files[0].0.clone()).unwrap()).iter().all(|r| r[12] == "0.000"));
}

#[test]
fn solve_and_vtk_on_one_level() {
    let tmp = TempDir::new().unwrap();
    let text = "method = \"lagrange\"\nk = 1\nk_g = 2\nk_l = 1\nrho = { c = 1.0, e = 1.0 }\nrho_tilde = { c = 1.0, e = 1.0 }\noutput_dir = \"s\"\n";
    let cfg = write_config(tmp.path(), "l.toml", text);
    let out = Command::new(env!("CARGO_BIN_EXE_tracefem")).args(["solve", &cfg, "--level", "1", "--vtk"]).current_dir(tmp.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("multiplier M-norm error"), "{stdout}");
    let vtk = fs::read_to_string(tmp.path().join("s/solution_level1.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version"));
    assert!(vtk.contains("lambda_h"));
}

#[test]
fn geometry_report_and_thread_variable() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "g.toml", &format!("{P2_LINEAR}levels = [1, 2]\noutput_dir = \"g\"\n"));
    assert_eq!(run(tmp.path(), &["verify-geometry", &cfg]).status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("g/geometry.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let bad = Command::new(env!("CARGO_BIN_EXE_tracefem"))
        .args(["verify-geometry", &cfg])
        .current_dir(tmp.path())
        .env("TRACEFEM_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
