use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_entropy-lab"))
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn results(dir: &Path) -> serde_json::Value {
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("results.json")).unwrap()).unwrap();
    doc["results"].clone()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("scenario.toml");
    fs::write(&path, text).unwrap();
    path
}

const OU_MODEL: &str = r#"
[model]
hamiltonian = "quadratic"
coefficients = [[1.0]]
kt = 1.0
sigma2 = 2.0

[initial]
mean = [1.0]
variance = 2.0
"#;

#[test]
fn list_names_six_builtins() {
    let o = bin().arg("list").output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let names = ["ou-relax", "ou-modulated", "polymer-cooling", "qubit-qrec", "qubit-lindblad", "paths-osmotic"];
    assert_eq!(text.lines().count(), 6);
    for n in names {
        assert!(text.contains(n), "{n}");
    }
    let o = bin().args(["list", "--json"]).output().unwrap();
    let list: Vec<serde_json::Value> = serde_json::from_slice(&o.stdout).unwrap();
    let got: Vec<&str> = list.iter().map(|v| v["name"].as_str().unwrap()).collect();
    assert_eq!(got, names);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = bin().arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    let o = bin().arg("fp-run").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin().args(["run", "no-such-builtin"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ou_relax_initial_rate() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["run", "ou-relax"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&tmp.path().join("divergence.csv"));
    assert_eq!(header, ["t", "D", "rate"]);
    assert_eq!(rows[0][0], 0.0);
    assert!((rows[0][2] + 1.5).abs() < 0.015, "{}", rows[0][2]);
    // D decreases along the run
    assert!(rows.windows(2).all(|w| w[1][1] < w[0][1]));
}

#[test]
fn ou_modulated_initial_rate() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["run", "ou-modulated"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, rows) = read_csv(&tmp.path().join("divergence.csv"));
    assert!((rows[0][2] + 3.0).abs() < 0.03, "{}", rows[0][2]);
}

#[test]
fn decompose_columns_and_identity() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["decompose", "ou-modulated"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&tmp.path().join("decomposition.csv"));
    assert_eq!(header, ["t", "D", "total_rate", "pepr", "epur", "fd_check_residual"]);
    for r in &rows {
        assert!(r[3] >= 0.0);
        assert!((r[2] - (-r[3] + r[4])).abs() <= 1e-12 * r[2].abs().max(1.0));
    }
    assert!(rows[0][5].is_nan() && rows[rows.len() - 1][5].is_nan());
    for r in &rows[1..rows.len() - 1] {
        assert!(r[5].abs() < 1e-2 * r[2].abs().max(1e-3), "{r:?}");
    }
}

#[test]
fn ill_posed_gain_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!("{OU_MODEL}\n[control]\nalpha = -2.0\n\n[numerics]\ngrid = {{ lo = -8.0, hi = 8.0, cells = 64 }}\ndt = 1e-2\nt1 = 1.0\n");
    let path = write_config(tmp.path(), &cfg);
    let out = tmp.path().join("out");
    let o = bin().arg("control-run").arg("--config").arg(&path).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ill-posed gain"), "{}", stderr(&o));
    assert!(stderr(&o).contains("control.alpha"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn malformed_config_reports_line_and_field() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), &format!("{OU_MODEL}\n[numerics]\ndt = 1e-2\nsteps = 4\n"));
    let o = bin().arg("fp-run").arg("--config").arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("steps") && e.contains("line"), "{e}");

    let path = write_config(tmp.path(), &format!("{OU_MODEL}\n[numerics]\ngrid = {{ lo = -8.0, hi = 8.0, cells = 64 }}\ndt = -1.0\nt1 = 1.0\n"));
    let o = bin().arg("fp-run").arg("--config").arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("numerics.dt"), "{}", stderr(&o));
}

fn small_sde(dir: &Path) -> std::path::PathBuf {
    write_config(
        dir,
        &format!("{OU_MODEL}\n[numerics]\nn = 500\ndt = 1e-2\nt1 = 0.5\nseed = 3\n\n[outputs]\nfiles = [\"ensemble\", \"summary\"]\n"),
    )
}

#[test]
fn identical_seed_identical_hashes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_sde(tmp.path());
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    for (dir, seed) in [(&a, "3"), (&b, "3"), (&c, "4")] {
        let o = bin().arg("sde-run").arg("--config").arg(&cfg).arg("--out").arg(dir).args(["--seed", seed]).output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (ma, mb, mc) = (manifest(&a), manifest(&b), manifest(&c));
    assert_eq!(ma["files"], mb["files"]);
    assert_eq!(fs::read(a.join("ensemble.csv")).unwrap(), fs::read(b.join("ensemble.csv")).unwrap());
    assert_ne!(ma["files"], mc["files"]);
    assert_eq!(mc["seed"], 4);
    let names: Vec<&str> = ma["files"].as_array().unwrap().iter().map(|f| f["file"].as_str().unwrap()).collect();
    assert_eq!(names, ["ensemble.csv", "summary.csv", "results.json"]);
    for f in ma["files"].as_array().unwrap() {
        assert_eq!(f["sha256"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn builtin_grid_runs_reproduce() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&["run", "qubit-lindblad"], &a).status.success());
    assert!(run(&["run", "qubit-lindblad"], &b).status.success());
    assert_eq!(manifest(&a), manifest(&b));
}

#[test]
fn numerical_failure_removes_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    // density grid far too narrow for the ensemble: the kernel estimate fails
    // after the ensemble and drifts have been written
    let cfg = format!(
        "{OU_MODEL}\n[numerics]\ngrid = {{ lo = -0.2, hi = 0.2, cells = 8 }}\nn = 2000\ndt = 1e-2\nt1 = 0.2\n\n[paths]\ndrift_grid = {{ lo = -4.0, hi = 4.0, cells = 8 }}\n\n[outputs]\nfiles = [\"ensemble\", \"drifts\"]\n"
    );
    let path = write_config(tmp.path(), &cfg);
    let out = tmp.path().join("out");
    let o = bin().arg("paths-run").arg("--config").arg(&path).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("coverage"), "{}", stderr(&o));
    assert!(!out.exists());

    // an existing directory is kept, only this run's files go
    fs::create_dir(&out).unwrap();
    fs::write(out.join("keep.txt"), "x").unwrap();
    let o = bin().arg("paths-run").arg("--config").arg(&path).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    let left: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(left, ["keep.txt"]);
}

#[test]
fn quantum_config_with_complex_entries() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"
[quantum]
hamiltonian = [[0.5, "0.2-0.1i"], ["0.2+0.1i", -0.5]]
perturbation = [[0.0, "0.3i"], ["-0.3i", 0.0]]
initial_bloch = [0.2, 0.1, 0.4]
channel = "dephasing"
gamma = 0.3
beta = 1.0

[numerics]
dt = 1e-3
t1 = 0.5
record_every = 10
"#;
    let path = write_config(tmp.path(), cfg);
    let o = bin().arg("quantum-run").arg("--config").arg(&path).arg("--out").arg(tmp.path().join("o")).output().unwrap();
    // the Gibbs reference commutes with H even though H is not diagonal
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&tmp.path().join("o/quantum.csv"));
    assert_eq!(header[..5], ["t", "D", "total_rate", "hamiltonian_term", "dissipative_term"]);
    for r in &rows {
        assert!((r[6] - 1.0).abs() < 1e-10);
        assert!((r[2] - r[3] - r[4]).abs() < 1e-12);
    }

    let bad = cfg.replace("\"0.2+0.1i\"", "\"0.2+0.5i\"");
    let path = write_config(tmp.path(), &bad);
    let o = bin().arg("quantum-run").arg("--config").arg(&path).arg("--out").arg(tmp.path().join("p")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("quantum.hamiltonian"), "{}", stderr(&o));
}

#[test]
fn qubit_qrec_rate_matches_divergence_slope() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run(&["run", "qubit-qrec"], tmp.path()).status.success());
    let r = results(tmp.path());
    assert!(r["max_fd_check_residual"].as_f64().unwrap() < 1e-4);
    assert!(r["entropy_drift"].as_f64().unwrap() < 1e-10);
}

#[test]
fn polymer_cooling_builtin() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["run", "polymer-cooling"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&tmp.path().join("temperature.csv"));
    assert_eq!(header, ["alpha_c", "kinetic_temperature", "se"]);
    assert_eq!(rows.len(), 4);
    assert!(rows.windows(2).all(|w| w[1][1] <= w[0][1]));
    // α_c = γ
    let r = &rows[2];
    assert_eq!(r[0], 1.0);
    assert!(r[1] + 3.0 * r[2] < 1.0, "{r:?}");
    assert!(rows[0][1] - 3.0 * rows[0][2] < 1.0 && rows[0][1] + 3.0 * rows[0][2] > 0.97);
}

#[test]
fn paths_osmotic_builtin() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["run", "paths-osmotic"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = results(tmp.path());
    assert!(r["osmotic_residual"].as_f64().unwrap() < 0.1, "{r}");
    let fe = &r["finite_energy"];
    assert!((fe["value"].as_f64().unwrap() - 1.0).abs() < 3.0 * fe["se"].as_f64().unwrap(), "{fe}");
    assert!(r["continuity"].as_array().unwrap().iter().all(|c| c["pass"].as_bool().unwrap()));
    let (header, _) = read_csv(&tmp.path().join("drifts.csv"));
    assert_eq!(header, ["x", "beta", "gamma", "v", "count", "se"]);
}

#[test]
fn show_round_trips_through_config() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin().args(["show", "ou-relax"]).output().unwrap();
    let path = write_config(tmp.path(), &String::from_utf8(o.stdout).unwrap());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(bin().arg("run").arg("--config").arg(&path).arg("--out").arg(&a).output().unwrap().status.success());
    assert!(run(&["run", "ou-relax"], &b).status.success());
    assert_eq!(manifest(&a), manifest(&b));
}
