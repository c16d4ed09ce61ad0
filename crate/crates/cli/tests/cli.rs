use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(out: &Path) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_enclosure-fem"));
    c.arg("--output-dir").arg(out);
    c
}

fn run(out: &Path, args: &[&str]) -> Output {
    bin(out).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const SQUARE: &[&str] = &[
    "enclose", "--domain", "square", "--n", "2", "--t-up", "0.5", "--t-low", "1.2",
];

#[test]
fn converged_run_exits_zero_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &[SQUARE, &["--delta", "1e-2"]].concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("enclose.csv")).unwrap();
    assert!(csv.starts_with("j,lower,upper,width,converged\n"));
    assert_eq!(csv.lines().count(), 3);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("enclose.json")).unwrap())
            .unwrap();
    assert_eq!(json["m_tilde"], 2);
    assert!(dir.path().join("enclose.config.json").exists());
}

#[test]
fn exhausted_budget_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[SQUARE, &["--delta", "1e-9", "--budget", "1"]].concat(),
    );
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stdout).contains("budget exhausted"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["enclose", "--t-up", "0.5"][..],
        &[
            "enclose", "--t-up", "0.5", "--t-low", "1.2", "--delta", "-1",
        ],
        &["enclose", "--t-up", "0.5", "--t-low", "1.2", "--r", "9"],
        &["mesh", "--domain", "circle"],
        &["mesh", "--grade", "1.5"],
        &[],
    ] {
        assert_eq!(code(&run(dir.path(), args)), 2, "{args:?}");
    }
    let cfg = dir.path().join("x.json");
    assert_eq!(
        code(&run(
            dir.path(),
            &["--config", cfg.to_str().unwrap(), "mesh"]
        )),
        2
    );
    assert_eq!(
        code(&run(dir.path(), &["--config", cfg.to_str().unwrap()])),
        2
    );
}

#[test]
fn module_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["enclose", "--t-up", "1.2", "--t-low", "0.5"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("t_up < t_low"));
}

#[test]
fn config_replay_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[SQUARE, &["--r", "2", "--jitter", "0.2", "--seed", "4"]].concat(),
    );
    assert_eq!(code(&o), 0);
    let first = fs::read_to_string(dir.path().join("enclose.csv")).unwrap();
    fs::remove_file(dir.path().join("enclose.csv")).unwrap();
    let cfg = dir.path().join("enclose.config.json");
    let o = Command::new(env!("CARGO_BIN_EXE_enclosure-fem"))
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(dir.path().join("enclose.csv")).unwrap(),
        first
    );
}

#[test]
fn thread_count_does_not_change_results() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = [SQUARE, &["--r", "2"]].concat();
    assert_eq!(
        code(
            &bin(a.path())
                .args(&args)
                .arg("--threads")
                .arg("1")
                .output()
                .unwrap()
        ),
        0
    );
    assert_eq!(
        code(
            &bin(b.path())
                .args(&args)
                .env("ENCLOSURE_FEM_THREADS", "3")
                .output()
                .unwrap()
        ),
        0
    );
    let read = |d: &Path| fs::read_to_string(d.join("enclose.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn mesh_validation_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "mesh",
            "--domain",
            "slit",
            "--n",
            "2",
            "--grade",
            "0.3",
            "--validate",
        ],
    );
    assert_eq!(code(&o), 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("mesh_report.json")).unwrap())
            .unwrap();
    assert!(report.to_string().contains("crack"));
    let mesh = enclosure_fem::io::read_mesh_json(dir.path().join("mesh.json")).unwrap();
    assert!(!mesh.crack_pairs().is_empty());
}

#[test]
fn sweep_writes_one_row_per_shift() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "sweep",
            "--domain",
            "square",
            "--n",
            "3",
            "--side",
            "upper",
            "--l",
            "1",
            "--t",
            "0.3,0.6,0.9",
        ],
    );
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "t,l,rho,note");
    assert_eq!(rows.len(), 4);
    for row in &rows[1..] {
        let rho: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert!(rho >= 1.0 - 1e-12);
    }
}

#[test]
fn convergence_and_demo_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "converge", "--domain", "square", "--n", "2", "--t-up", "0.5", "--t-low", "1.2",
        ],
    );
    assert_eq!(code(&o), 0);
    for f in ["converge.json", "converge.csv", "converge.dat"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let o = run(
        dir.path(),
        &[
            "demo", "--domain", "square", "--n", "4", "--r", "2", "--window", "0.5,1.2",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("demo.csv")).unwrap();
    assert!(csv.starts_with("value,enclosure,spurious\n"));
}

#[test]
fn export_field_writes_legacy_vtk() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "export-field",
            "--domain",
            "square",
            "--n",
            "3",
            "--r",
            "2",
            "--mode",
            "1",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let vtk = fs::read_to_string(dir.path().join("field.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version 3.0\n"));
    for key in [
        "DATASET UNSTRUCTURED_GRID",
        "CELL_TYPES",
        "POINT_DATA",
        "SCALARS E_norm",
        "SCALARS H",
        "VECTORS E",
    ] {
        assert!(vtk.contains(key), "{key}");
    }
    assert_eq!(code(&run(dir.path(), &["export-field", "--mode", "0"])), 1);
}
