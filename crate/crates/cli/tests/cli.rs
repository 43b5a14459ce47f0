use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_homlab"))
}

fn config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(sub: &str, cfg: &Path, out: Option<&Path>) -> Output {
    let mut c = bin();
    c.arg(sub).arg("--config").arg(cfg).args(["--threads", "1"]);
    if let Some(o) = out {
        c.arg("--out").arg(o);
    }
    c.output().unwrap()
}

const LAMINATE: &str = r#"
[field]
family = "laminate"
base = 2.0
amplitude = 1.0

[domain]
cells = [128, 128]

[eps]
values = [0.5, 0.25, 0.125]

[lambda]
moduli = [0.0, 1.0]
angles = [3.141592653589793]

[sweep]
studies = ["l2-h1", "max-principle"]
"#;

#[test]
fn sweep_writes_tables_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.toml", LAMINATE);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let out = run("sweep", &cfg, Some(&a));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(run("sweep", &cfg, Some(&b)).status.success());
    let cells = fs::read(a.join("cells.csv")).unwrap();
    assert_eq!(cells, fs::read(b.join("cells.csv")).unwrap());
    let rates = fs::read_to_string(a.join("rates.csv")).unwrap();
    assert_eq!(
        rates.lines().next().unwrap(),
        "lambda_modulus,lambda_angle,p,norm,slope,constant,residual,pass"
    );
    assert_eq!(rates.lines().count(), 1 + 2 * 2);
    assert!(a.join("config.effective.toml").exists());
    assert!(a.join("report.txt").exists());
    assert_eq!(fs::read_to_string(a.join("failures.csv")).unwrap(), "study,item,detail\n");

    // report rebuilds the same rates from cells.csv
    let before = fs::read(a.join("rates.csv")).unwrap();
    let out = run("report", &cfg, Some(&a));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(before, fs::read(a.join("rates.csv")).unwrap());
    assert_eq!(cells, fs::read(a.join("cells.csv")).unwrap());
}

#[test]
fn failing_window_sets_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let text = LAMINATE.replace("moduli = [0.0, 1.0]", "moduli = [100.0]");
    let cfg = config(tmp.path(), "c.toml", &text);
    let out = run("sweep", &cfg, Some(tmp.path()));
    assert_eq!(out.status.code(), Some(1));
    let failures = fs::read_to_string(tmp.path().join("failures.csv")).unwrap();
    assert!(failures.lines().count() > 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL rates"));
}

#[test]
fn single_scale_sweep_has_header_and_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let text = LAMINATE
        .replace("values = [0.5, 0.25, 0.125]", "values = [0.25]")
        .replace("moduli = [0.0, 1.0]", "moduli = [1.0]");
    let cfg = config(tmp.path(), "c.toml", &text);
    let out = run("sweep", &cfg, Some(tmp.path()));
    assert_eq!(out.status.code(), Some(1));
    let cells = fs::read_to_string(tmp.path().join("cells.csv")).unwrap();
    let lines: Vec<&str> = cells.lines().collect();
    assert_eq!(lines[0], "epsilon,lambda_modulus,lambda_angle,p,norm,error,status");
    assert_eq!(lines.len(), 1 + 4);
    assert!(lines[1..].iter().all(|l| l.ends_with(",ok")));
}

#[test]
fn config_errors_name_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = LAMINATE.replace("angles = [3.141592653589793]", "angles = [1.5707963267948966]");
    let out = run("validate", &config(tmp.path(), "a.toml", &bad), None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda.angles[0]"));

    let fine = LAMINATE
        .replace("cells = [128, 128]", "cells = [256, 256]")
        .replace("values = [0.5, 0.25, 0.125]", "values = [0.015625]");
    let out = run("validate", &config(tmp.path(), "b.toml", &fine), None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("eps.values[0]") && err.contains("resolution"), "{err}");

    let unknown = LAMINATE.replace("[sweep]", "[sweep]\nthreads = 4");
    let out = run("validate", &config(tmp.path(), "c.toml", &unknown), None);
    assert!(String::from_utf8_lossy(&out.stderr).contains("sweep.threads"));

    let out = run("validate", &config(tmp.path(), "d.toml", LAMINATE), None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn homogenize_and_cell_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.toml", &format!("{LAMINATE}\n[cell]\ngrid = 64\ntol = 1e-12\n"));
    let out = run("homogenize", &cfg, Some(tmp.path()));
    assert!(out.status.success());
    let t = fs::read_to_string(tmp.path().join("homogenized.csv")).unwrap();
    let a11: f64 = t.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!((a11 - 3f64.sqrt()).abs() < 1e-2 * 3f64.sqrt(), "{a11}");
    let out = run("cell", &cfg, Some(tmp.path()));
    assert!(out.status.success());
    assert!(tmp.path().join("chi_0_0.dat").exists());
    assert!(fs::read_to_string(tmp.path().join("cell_report.txt")).unwrap().contains("antisymmetry"));
}

#[test]
fn resolve_and_green_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "{}\n[green]\nsteps = [3, 4, 5, 7, 9, 12, 15, 20, 26, 34]\n",
        LAMINATE.replace("values = [0.5, 0.25, 0.125]", "values = [0.25]")
    );
    let cfg = config(tmp.path(), "c.toml", &text);
    let out = run("resolve", &cfg, Some(tmp.path()));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("u_midline_l1.dat").exists());
    let out = run("green", &cfg, Some(tmp.path()));
    assert!(out.status.code().is_some_and(|c| c < 2), "{}", String::from_utf8_lossy(&out.stderr));
    let g = fs::read_to_string(tmp.path().join("green.csv")).unwrap();
    assert_eq!(g.lines().count(), 1 + 2 * 3);
    assert!(tmp.path().join("green_grad_l0.dat").exists());
}
