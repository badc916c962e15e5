use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sstqp"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn sample() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/d1b_d2b_gap_n6.txt")
}

fn value_after(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key))
        .and_then(|v| v.split_whitespace().next())
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| panic!("no '{key}' in {text}"))
}

fn gen(dir: &Path, args: &[&str]) -> Vec<PathBuf> {
    let out = dir.to_str().unwrap();
    let mut all = vec!["gen"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out-dir", out]);
    let o = run(&all);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    stdout(&o).lines().map(PathBuf::from).collect()
}

#[test]
fn gen_is_deterministic_and_validates_parameters() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--family", "psd", "--n", "12", "--rho0", "6", "--rho", "3", "--seed", "7", "--count", "3"];
    let fa = gen(a.path(), &args);
    let fb = gen(b.path(), &args);
    assert_eq!(fa.len(), 3);
    for (p, q) in fa.iter().zip(&fb) {
        assert_eq!(fs::read(p).unwrap(), fs::read(q).unwrap());
    }
    assert_ne!(fs::read(&fa[0]).unwrap(), fs::read(&fa[1]).unwrap());
    let o = run(&["gen", "--family", "cop", "--n", "8", "--rho0", "5", "--out-dir", a.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&run(&["gen", "--family", "nope", "--n", "8", "--rho0", "2"])), 2);
}

#[test]
fn solve_reproduces_the_reduced_gap() {
    let p = sample();
    let o = run(&["solve", "--model", "d2b", p.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let d2b = value_after(&stdout(&o), "bound ");
    assert!((d2b - 0.1320).abs() <= 1e-3, "{d2b}");
    assert!(stdout(&o).contains("record model=d2b,"));
    let o = run(&["solve", "--model", "d1b", p.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let d1b = value_after(&stdout(&o), "bound ");
    assert!((d1b - 0.1333).abs() <= 1e-3, "{d1b}");
    assert!(stdout(&o).contains("check lemma pass"));
}

#[test]
fn solve_exit_codes() {
    let p = sample();
    // an iteration cap of one cannot reach an accepted status
    let o = run(&["solve", "--model", "d1b", "--max-iter", "1", p.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert_eq!(code(&run(&["solve", "/nonexistent/file"])), 2);
    assert_eq!(code(&run(&["solve", "--model", "d9", p.to_str().unwrap()])), 2);
}

#[test]
fn mu_is_negative_on_a_cop_instance() {
    let dir = tempfile::tempdir().unwrap();
    let f = gen(dir.path(), &["--family", "cop", "--n", "10", "--rho0", "5", "--rho", "2", "--seed", "3"]);
    let o = run(&["solve", "--model", "mu", f[0].to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(value_after(&stdout(&o), "bound ") < -1e-4);
    let o = run(&["check", f[0].to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(value_after(&stdout(&o), "mu ") < 0.0);
}

#[test]
fn oracle_values_and_budget() {
    let dir = tempfile::tempdir().unwrap();
    let f = gen(dir.path(), &["--family", "psd", "--n", "12", "--rho0", "4", "--rho", "1", "--seed", "1"]);
    let text = fs::read_to_string(&f[0]).unwrap();
    let o = run(&["oracle", f[0].to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let inst = sstqp::io::parse(&text).unwrap();
    let min_diag = inst.q.diagonal().into_iter().fold(f64::INFINITY, f64::min);
    assert_eq!(value_after(&stdout(&o), "value "), min_diag);

    // raising rho to rho0 makes the designated minimizer feasible
    let edited = text.replace("\nrho 1\n", "\nrho 4\n");
    let p = dir.path().join("rho4.txt");
    fs::write(&p, edited).unwrap();
    let o = run(&["oracle", p.to_str().unwrap()]);
    assert!(value_after(&stdout(&o), "value ").abs() <= 1e-9);
    // and the instance stops being nontrivial
    assert_eq!(code(&run(&["check", p.to_str().unwrap()])), 4);

    let big = sstqp::formulations::SparseStqpInstance::new(sstqp::linalg::SymMatrix::identity(25), 10).unwrap();
    let p = dir.path().join("big.txt");
    sstqp::io::write_instance(&p, &big).unwrap();
    let o = run(&["oracle", p.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("budget"));
}

#[test]
fn check_passes_on_generated_psd() {
    let dir = tempfile::tempdir().unwrap();
    let f = gen(dir.path(), &["--family", "psd", "--n", "10", "--rho0", "5", "--rho", "2", "--seed", "11"]);
    let o = run(&["check", f[0].to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}

const GOLDEN_HEADER: &str = "id,family,n,rho0,rho,seed,status,nu_d1b,nu_d2b,nu_d1a,nu_d2a,oracle,upper,dnn_gap,oracle_gap,iters_d1b,time_d1b,res_d1b,iters_d2b,time_d2b,res_d2b,iters_d1a,time_d1a,res_d1a,iters_d2a,time_d2a,res_d2a,oracle_time,soft_cap_hit,version";

#[test]
fn bench_and_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.txt");
    fs::write(&grid, "# family n rho0 rho\npsd 6 3 1\ncop 8 2 1\n").unwrap();
    let csv = dir.path().join("out.csv");
    let o = run(&[
        "bench", "--grid", grid.to_str().unwrap(), "--per-cell", "2", "--out", csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), GOLDEN_HEADER);
    assert_eq!(lines.count(), 4);

    // a rerun gives the same rows up to the timing columns
    let csv2 = dir.path().join("out2.csv");
    run(&["bench", "--grid", grid.to_str().unwrap(), "--per-cell", "2", "--out", csv2.to_str().unwrap()]);
    let strip = |t: &str| -> Vec<Vec<String>> {
        t.lines()
            .map(|l| {
                l.split(',')
                    .enumerate()
                    .filter(|(i, _)| ![16, 19, 22, 25, 27].contains(i))
                    .map(|(_, v)| v.to_string())
                    .collect()
            })
            .collect()
    };
    assert_eq!(strip(&text), strip(&fs::read_to_string(&csv2).unwrap()));

    let svg = dir.path().join("gaps.svg");
    let o = run(&["report", "--svg", svg.to_str().unwrap(), csv.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let doc_text = fs::read_to_string(&svg).unwrap();
    let doc = roxmltree::Document::parse(&doc_text).unwrap();
    let panels = doc.descendants().filter(|n| n.attribute("class") == Some("panel")).count();
    assert_eq!(panels, 2);
    let lines = doc.descendants().filter(|n| n.has_tag_name("polyline")).count();
    assert_eq!(lines, 4);

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    assert_eq!(code(&run(&["report", "--svg", svg.to_str().unwrap(), empty.to_str().unwrap()])), 2);
    fs::write(&empty, format!("{GOLDEN_HEADER}\n")).unwrap();
    assert_eq!(code(&run(&["report", "--svg", svg.to_str().unwrap(), empty.to_str().unwrap()])), 2);
}

#[test]
fn bench_rejects_bad_grid_files() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.txt");
    fs::write(&grid, "cop 8 5 1\n").unwrap();
    let csv = dir.path().join("out.csv");
    let o = run(&["bench", "--grid", grid.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}
