use std::path::Path;
use std::process::{Command, Output};

fn cutflux(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cutflux"))
        .args(args)
        .current_dir(dir)
        .env_remove("CUTFLUX_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

fn data_lines(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn solve_writes_vtk_and_an_eight_column_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cutflux(&["solve", "--problem", "peak", "--cells", "5", "--out", "run"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("run");
    let report = read(dir.join("report.csv"));
    let header = report.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "iteration,dofs,eta1,eta2,eta_res,energy_error,flux_error,efficiency");
    let rows = data_lines(&report);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].split(',').count(), 8);
    assert!(rows[0].starts_with("0,36,"));
    for f in ["solution.vtk", "flux.vtk"] {
        let vtk = read(dir.join(f));
        assert!(vtk.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(vtk.contains("SCALARS cut_class double 1"));
    }
    let sol = read(dir.join("solution.vtk"));
    for field in ["u_h", "eta1", "eta2", "eta_res"] {
        assert!(sol.contains(&format!("SCALARS {field} double 1")), "{field}");
    }
    let flux = read(dir.join("flux.vtk"));
    assert!(flux.contains("SCALARS flux_mismatch double 1") && flux.contains("VECTORS sigma double"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cutflux(&["solve", "--estimator", "eta9", "--no-vtk", "--no-csv"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eta9"));

    std::fs::write(tmp.path().join("bad.toml"), "[mesh]\ncels = 4\n").unwrap();
    let out = cutflux(&["solve", "--config", "bad.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(2));

    let out = cutflux(&["amr", "--fraction", "0"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let out = cutflux(&["solve", "--pattern", "hexagonal"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reruns_and_thread_counts_give_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |out: &'static str, threads: &'static str| {
        ["amr", "--problem", "reentrant", "--max-dofs", "400", "--threads", threads, "--out", out]
    };
    for (out, threads) in [("a", "1"), ("b", "1"), ("c", "4")] {
        let o = cutflux(&args(out, threads), tmp.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["trace.csv", "diagnostics.csv", "final_mesh.vtk"] {
        let a = read(tmp.path().join("a").join(f));
        assert_eq!(a, read(tmp.path().join("b").join(f)), "{f} differs between reruns");
        assert_eq!(a, read(tmp.path().join("c").join(f)), "{f} differs between thread counts");
    }
    assert!(data_lines(&read(tmp.path().join("a/trace.csv"))).len() >= 3);
}

#[test]
fn output_directory_defaults_to_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cutflux"))
        .args(["solve", "--cells", "4", "--no-vtk"])
        .current_dir(tmp.path())
        .env("CUTFLUX_OUT_DIR", "from-env")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("from-env/report.csv").exists());
}

#[test]
fn one_level_study_has_no_rates() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cutflux(&["uniform", "--problem", "franke", "--cells", "8", "--levels", "1", "--out", "u"], tmp.path());
    assert!(out.status.success());
    let csv = read(tmp.path().join("u/uniform.csv"));
    let rows = data_lines(&csv);
    assert_eq!(rows.len(), 1);
    let cols: Vec<&str> = rows[0].split(',').collect();
    assert_eq!(cols.len(), 11);
    assert_eq!((cols[5], cols[7]), ("", ""));
}

#[test]
fn config_file_drives_a_custom_problem() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("run.toml"),
        r#"
[problem.custom]
levelset = { type = "circle", center = [0.5, 0.5], radius = 0.35 }
u = "x^2 - y^2 + x*y"

[mesh]
cells = 6

[output]
dir = "custom"
vtk = false
"#,
    )
    .unwrap();
    let out = cutflux(&["solve", "--config", "run.toml"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(tmp.path().join("custom/report.csv"));
    let rows = data_lines(&csv);
    let cols: Vec<&str> = rows[0].split(',').collect();
    assert!(cols[5].parse::<f64>().unwrap() > 0.0, "error column filled for a known solution");
    assert!(!tmp.path().join("custom/solution.vtk").exists());
}

#[test]
fn oracle_check_passes_on_a_small_cut_mesh() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cutflux(&["oracle-check", "--problem", "reentrant", "--cells", "6"], tmp.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("PASS"));
}
