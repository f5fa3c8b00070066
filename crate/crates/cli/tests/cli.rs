use std::fs;
use std::process::{Command, Output};

const SMALL: [&str; 4] = ["--coarse", "4", "--fine", "32"];

fn mspg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mspg")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn run_prints_header_and_one_row() {
    let mut args = vec!["run"];
    args.extend(SMALL);
    args.extend(["--trial", "1", "--test", "3", "--eig", "2"]);
    let o = mspg(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("example,alpha,H,h,m_trial,L_test,eigenproblem"));
    assert!(lines[1].starts_with("1,2,0.25,0.03125,1,3,2,0,"));
}

#[test]
fn run_rejects_lists() {
    let mut args = vec!["run"];
    args.extend(SMALL);
    args.extend(["--test", "1,3"]);
    let o = mspg(&args);
    assert_eq!(o.status.code(), Some(6));
    assert!(stderr(&o).contains("sweep"));
}

#[test]
fn sweep_writes_json_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rows.json");
    let mut args = vec!["sweep"];
    args.extend(SMALL);
    args.extend(["--trial", "1,2", "--test", "1,7", "--eig", "1", "--online", "1", "--format", "json", "--out"]);
    args.push(out.to_str().unwrap());
    let o = mspg(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    let rows = mspg_core::harness::report::from_json(&fs::read_to_string(&out).unwrap()).unwrap();
    // two trial sizes x two test sizes x (offline + one online row)
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.eigenproblem == 1));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    fs::write(&cfg, "# small case\nexample = 3\ncoarse = 4\nfine = 32\ntrial = 1\ntest = 1\neig = 1\n").unwrap();
    let o = mspg(&["run", "--config", cfg.to_str().unwrap(), "--test", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("3,0.001,0.25,0.03125,1,7,1,0,"), "{row}");
}

#[test]
fn config_errors_report_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "example = 1\ncoarse = four\n").unwrap();
    let o = mspg(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(6));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn exit_codes_by_category() {
    assert_eq!(mspg(&["run", "--coarse", "3", "--fine", "32"]).status.code(), Some(2));
    let missing = mspg(&["run", "--example", "5", "--coarse", "4", "--fine", "32", "--raster", "/nonexistent/k.txt"]);
    assert_eq!(missing.status.code(), Some(7));
    let mut args = vec!["run"];
    args.extend(SMALL);
    args.extend(["--test", "8"]);
    assert_eq!(mspg(&args).status.code(), Some(6));
}

#[test]
fn bundled_raster_runs_example_five() {
    let raster = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/permeability_64.txt");
    let o = mspg(&["run", "--example", "5", "--coarse", "8", "--fine", "64", "--raster", raster, "--test", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    assert!(row.starts_with("5,0.004,"), "{row}");
}

#[test]
fn eigen_csv_lists_every_edge() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eig.csv");
    let mut args = vec!["run"];
    args.extend(SMALL);
    args.extend(["--eig", "2", "--test", "3", "--eigen-csv"]);
    args.push(path.to_str().unwrap());
    let o = mspg(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("edge,index,eigenvalue,selected"));
    // 24 interior edges with 7 eigenvalues each
    assert_eq!(lines.count(), 24 * 7);
}

#[test]
fn validate_passes() {
    let o = mspg(&["validate"]);
    assert!(o.status.success(), "{}\n{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    assert!(text.lines().count() >= 8);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}
