use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_open-schwinger"))
}

fn run(args: &[&str], out: &Path) -> std::process::Output {
    bin().args(args).arg("--out").arg(out).env("OPEN_SCHWINGER_THREADS", "2").output().unwrap()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn listed_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = manifest(dir)["files"].as_array().unwrap().iter().map(|f| f.as_str().unwrap().to_string()).collect();
    v.sort();
    v
}

fn files_on_disk(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    v.sort();
    v
}

#[test]
fn empty_grid_exits_with_validation_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["phase-diagram", "--set", "sweep.masses=[]"], &tmp.path().join("p"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));
    assert!(!tmp.path().join("p").exists());
}

#[test]
fn bad_inputs_exit_with_validation_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[model]\ncolour = 3\n").unwrap();
    for args in [
        vec!["spectrum", "--set", "environment.D0=-1"],
        vec!["spectrum", "--set", "model.n_sites=6"],
        vec!["spectrum", "--config", cfg.to_str().unwrap()],
        vec!["--figure", "fig12"],
        vec!["rates", "--figure", "fig3"],
    ] {
        let out = run(&args, &tmp.path().join("x"));
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn spectrum_emits_one_file_per_correlator() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("s");
    let out = run(&["spectrum", "--set", "model.n_sites=2"], &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let files = listed_files(&dir);
    assert_eq!(files, vec!["gaps.csv", "spectrum_constant.csv", "spectrum_delta.csv", "spectrum_gaussian_1.csv"]);
    assert_eq!(files, files_on_disk(&dir));
    let text = std::fs::read_to_string(dir.join("spectrum_delta.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("j,re_lambda,im_lambda,trace_of_mode,cp_sector"));
    assert_eq!(lines.count(), 36);
    let m = manifest(&dir);
    assert_eq!(m["config"]["model"]["n_sites"], 2);
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("d.toml");
    std::fs::write(&cfg, "kind = \"dilation\"\n[evolution]\nt_final = 1.0\n[dilation]\nn_cyl = [1, 2]\nreference_dt = 0.01\n").unwrap();
    let args = ["dilation", "--config", cfg.to_str().unwrap(), "--set", "dilation.r_h=[1]", "--set", "dilation.r_j=[2]"];
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run(&args, &a).status.success());
    let out = bin().args(args).arg("--out").arg(&b).env("OPEN_SCHWINGER_THREADS", "1").output().unwrap();
    assert!(out.status.success());
    let files = listed_files(&a);
    assert_eq!(files, files_on_disk(&a));
    assert_eq!(files, listed_files(&b));
    for f in &files {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let text = std::fs::read_to_string(a.join("dilation.csv")).unwrap();
    assert!(text.starts_with("t,n_cyl,r_H,r_J,observable_sum_E,error_vs_rk4\n"));
    assert!(text.contains(",4,1,2,") || text.contains(",2,inf,inf,"));
}

#[test]
fn figure_preset_selects_the_experiment() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("f14");
    let out = run(&["--figure", "fig14", "--set", "evolution.t_final=1"], &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(manifest(&dir)["experiment"], "trotter-closed");
    assert_eq!(listed_files(&dir), vec!["bounds.csv", "trotter.csv"]);
    let bounds = std::fs::read_to_string(dir.join("bounds.csv")).unwrap();
    assert!(bounds.starts_with("r,t,bound,measured_norm_error\n"));
}

#[test]
fn string_and_rates_schemas() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("sv");
    let out = run(
        &["string-vacuum", "--set", "model.n_sites=3", "--set", "evolution.t_final=1", "--set", "string.t_max=1", "--set", "string.report_sites=[0]"],
        &dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let traj = std::fs::read_to_string(dir.join("traj.csv")).unwrap();
    assert!(traj.starts_with("t,link,E_in_units_of_e,subtracted_flag\n0,0,-1,1\n"));
    let ts = std::fs::read_to_string(dir.join("tstar.csv")).unwrap();
    assert!(ts.starts_with("site,t_star,D0\n"));

    let dir = tmp.path().join("r");
    assert!(run(&["rates", "--set", "model.n_sites=2"], &dir).status.success());
    let r = std::fs::read_to_string(dir.join("rates.csv")).unwrap();
    assert!(r.starts_with("k,D_k,gamma_diag_mean\n"));
    assert_eq!(r.lines().count(), 5);
}
