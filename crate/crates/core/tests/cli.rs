//! End-to-end checks of the command-line binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qhd_moments::asymptotics::steady_classical_state;
use qhd_moments::potential::bump_potential;
use serde_json::Value;
use tempfile::TempDir;

fn qhd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qhd-moments")).args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = args.to_vec();
    let d = dir.to_str().unwrap();
    all.extend(["--output-dir", d]);
    qhd(&all)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

/// Every listed output exists, nothing unlisted was written and no temporary
/// file was left behind.
fn assert_manifest_complete(dir: &Path) {
    let m = manifest(dir);
    let listed: Vec<PathBuf> = m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| PathBuf::from(p.as_str().unwrap()))
        .collect();
    for p in &listed {
        assert!(p.exists(), "{} missing", p.display());
    }
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_str().unwrap().to_string();
        assert!(!name.ends_with(".tmp"), "{name} left behind");
        if name != "manifest.json" {
            assert!(listed.iter().any(|p| p.file_name() == path.file_name()), "{name} not in manifest");
        }
    }
}

#[test]
fn bump_tunneling_flags_form_a_valid_config() {
    let dir = TempDir::new().unwrap();
    let o = run_in(
        dir.path(),
        &["run", "--scenario", "bump-tunneling", "--order", "3", "--cells", "200", "--t-end", "0.05", "--hbar", "1", "--tau", "1e6"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_manifest_complete(dir.path());
    let m = manifest(dir.path());
    assert!(m["failure"].is_null());
    assert_eq!(m["config"]["scenario"], "bump-tunneling");
    assert_eq!(m["config"]["cells"], "200");

    let (header, rows) = read_csv(&dir.path().join("trajectory.csv"));
    assert_eq!(header, ["t", "x", "rho", "u", "P", "f3"]);
    let first: Vec<_> = rows.iter().filter(|r| r[0] == 0.0).collect();
    assert_eq!(first.len(), 200);
    let v = bump_potential();
    for r in first {
        let s = steady_classical_state(&v, r[1]);
        assert_eq!([r[2], r[3], r[4], r[5]], [s.rho, s.u, s.pressure, s.f3], "x = {}", r[1]);
    }
    let last_t = rows.last().unwrap()[0];
    assert_eq!(last_t, 0.05);

    let (header, diag) = read_csv(&dir.path().join("diagnostics.csv"));
    assert_eq!(&header[..6], ["t", "mass", "momentum", "energy", "momentum_residual", "energy_residual"]);
    assert!(diag.iter().all(|r| r.iter().all(|v| v.is_finite())));
}

#[test]
fn invalid_flags_are_config_errors() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["run", "--order", "2"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("order"), "{}", stderr(&o));
    let o = run_in(dir.path(), &["run", "--cfl", "1.5"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("cfl"), "{}", stderr(&o));
    let o = run_in(dir.path(), &["run", "--set", "grid.cells=3"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("grid.cells"));
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn config_file_errors_report_the_line() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "# comment\norder = 4\nspeed = 3\n").unwrap();
    let o = qhd(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("speed") && stderr(&o).contains(":3"), "{}", stderr(&o));

    std::fs::write(&cfg, "order = 4\ncells 10\n").unwrap();
    let o = qhd(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bad.cfg:2:"), "{}", stderr(&o));
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "scenario = equilibrium\norder = 4\ncells = 30\nt_end = 0.1\n").unwrap();
    let out = dir.path().join("out");
    let o = qhd(&["run", "--config", cfg.to_str().unwrap(), "--cells", "12", "--output-dir", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = manifest(&out);
    assert_eq!(m["config"]["cells"], "12");
    assert_eq!(m["config"]["order"], "4");
}

#[test]
fn equilibrium_stays_constant() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["run", "--scenario", "equilibrium", "--order", "5", "--t-end", "0.5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, rows) = read_csv(&dir.path().join("trajectory.csv"));
    let first = rows[0][2..].to_vec();
    assert!(rows.len() > 100);
    for r in &rows {
        for (a, b) in r[2..].iter().zip(&first) {
            assert!((a - b).abs() <= 1e-12, "t = {}: {a} vs {b}", r[0]);
        }
    }
}

#[test]
fn identical_config_gives_identical_bytes() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["run", "--scenario", "bump-tunneling", "--cells", "60", "--t-end", "0.02", "--order", "4"];
    assert_eq!(code(&run_in(a.path(), &args)), 0);
    assert_eq!(code(&run_in(b.path(), &args)), 0);
    for name in ["trajectory.csv", "diagnostics.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs");
    }
    let report = ["eigen-report", "--seed", "17", "--set", "report.orders=3..5", "--set", "report.samples=4"];
    assert_eq!(code(&run_in(a.path(), &report)), 0);
    assert_eq!(code(&run_in(b.path(), &report)), 0);
    assert_eq!(
        std::fs::read(a.path().join("eigen_report.jsonl")).unwrap(),
        std::fs::read(b.path().join("eigen_report.jsonl")).unwrap()
    );
}

#[test]
fn eigen_report_is_hyperbolic() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["eigen-report", "--set", "report.orders=3..6", "--set", "report.samples=10"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_manifest_complete(dir.path());
    let text = std::fs::read_to_string(dir.path().join("eigen_report.jsonl")).unwrap();
    let records: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 40);
    assert!(records.iter().all(|r| r["hyperbolic"] == true));

    let o = run_in(dir.path(), &["eigen-report", "--dimension", "3", "--set", "report.orders=3..4", "--set", "report.samples=3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn dump_system_harmonic_order_three() {
    let dir = TempDir::new().unwrap();
    let o = run_in(
        dir.path(),
        &[
            "dump-system", "--order", "3", "--potential", "harmonic:1", "--hbar", "0", "--tau", "1",
            "--set", "state.rho=1", "--set", "state.u=0", "--set", "state.pressure=1", "--set", "state.x=0.5",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_manifest_complete(dir.path());
    let (header, a) = read_csv(&dir.path().join("A.csv"));
    assert_eq!(header, ["rho", "u", "P/2", "f3"]);
    // ρ=1, u=0, P=1, f₃=0: continuity, momentum, pressure and f₃ rows
    let expected = [
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 2.0, 0.0],
        [0.0, 1.5, 0.0, 3.0],
        [-0.5, 0.0, 1.0, 0.0],
    ];
    for (row, want) in a.iter().zip(&expected) {
        assert_eq!(row.as_slice(), want.as_slice());
    }
    let (_, g) = read_csv(&dir.path().join("G.csv"));
    let nonzero: Vec<(usize, usize, f64)> = g
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.iter().enumerate().filter(|(_, v)| **v != 0.0).map(move |(j, v)| (i, j, *v)))
        .collect();
    // force −V′(0.5) on the momentum row and −1/τ on the f₃ row
    assert_eq!(nonzero, [(1, 0, -0.5), (3, 3, -1.0)]);
}

#[test]
fn dump_system_dimensions() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["dump-system", "--order", "6"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, a) = read_csv(&dir.path().join("A.csv"));
    assert_eq!(header.len(), 7);
    assert_eq!(a.len(), 7);
    assert!(a.iter().all(|r| r.len() == 7));

    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["dump-system", "--dimension", "3", "--order", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_manifest_complete(dir.path());
    for name in ["M1.csv", "M2.csv", "M3.csv", "G.csv"] {
        let (header, m) = read_csv(&dir.path().join(name));
        assert_eq!((header.len(), m.len()), (20, 20), "{name}");
    }
}

#[test]
fn solver_failure_is_recorded() {
    let dir = TempDir::new().unwrap();
    let o = run_in(
        dir.path(),
        &[
            "run", "--scenario", "equilibrium", "--potential", "harmonic:-2000", "--boundary", "zero-gradient",
            "--set", "state.pressure=1e-6", "--t-end", "1", "--cells", "50",
        ],
    );
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert_manifest_complete(dir.path());
    let failure = &manifest(dir.path())["failure"];
    assert_eq!(failure["kind"], "solver");
    let t = failure["time"].as_f64().unwrap();
    assert!(t > 0.0 && t < 1.0, "{t}");
    assert!(failure["cell"].is_u64());
    let (_, rows) = read_csv(&dir.path().join("trajectory.csv"));
    assert!(rows.last().unwrap()[0] < 1.0);
}

#[test]
fn asymptotics_table() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["asymptotics", "--scenario", "bump-tunneling", "--set", "asymptotics.points=21"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_manifest_complete(dir.path());
    let (header, rows) = read_csv(&dir.path().join("asymptotics.csv"));
    assert_eq!(&header[..3], ["x", "g", "density_profile"]);
    assert_eq!(header.len(), 3 + 4 * 3);
    assert_eq!(rows.len(), 21);
    let v = bump_potential();
    for r in &rows {
        assert!(r.iter().all(|x| x.is_finite()));
        if r[0].abs() >= 1.0 {
            assert_eq!(r[1], 0.0);
            assert_eq!(r[3], steady_classical_state(&v, r[0]).rho);
        }
    }

    let o = run_in(dir.path(), &["asymptotics", "--scenario", "bump-tunneling", "--tau", "10"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}
