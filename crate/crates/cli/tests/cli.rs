use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dualjump"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn small_config(dir: &Path, preset: &str, edit: impl Fn(String) -> String) -> String {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets");
    let text = fs::read_to_string(root.join(format!("{preset}.toml"))).unwrap();
    let text = text
        .replace("nx = 100", "nx = 24")
        .replace("ny = 100", "ny = 24")
        .replace("n_s = 32", "n_s = 8")
        .replace("n_s = 16", "n_s = 8")
        .replace("n_theta = 64", "n_theta = 16")
        .replace("n_theta = 32", "n_theta = 16");
    let p = dir.join(format!("{preset}.toml"));
    fs::write(&p, edit(text)).unwrap();
    p.display().to_string()
}

#[test]
fn help_lists_commands() {
    let o = run(&["--help"]);
    assert!(o.status.success());
    let s = String::from_utf8_lossy(&o.stdout);
    for c in ["kernels", "simulate", "experiment", "diagnostics"] {
        assert!(s.contains(c), "{c}");
    }
}

#[test]
fn unknown_preset_is_validation_failure() {
    let o = run(&["experiment", "test9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown preset"));
}

#[test]
fn single_angle_grid_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "test1", |t| t.replace("n_theta = 16", "n_theta = 1"));
    let o = run(&["diagnostics", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_variant_rejected() {
    let o = run(&["simulate", "macro", "--variant", "m5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn diagnostics_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "test2_2", |t| t);
    let out = dir.path().join("diag");
    let o = run(&["diagnostics", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = String::from_utf8_lossy(&o.stdout);
    assert!(s.contains("0 failed"), "{s}");
    assert!(out.join("diagnostics.csv").exists());
}

#[test]
fn custom_experiment_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "test2_1", |t| t);
    let out = dir.path().join("run");
    let o = run(&["experiment", "--config", &cfg, "--out", out.to_str().unwrap(), "--parallel"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("format_version = 1"));
    for f in ["M1_t1.2500.f64", "M3_t4.6900.png", "M4_t0.4700.toml", "center_of_mass.csv", "macro_models.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "test1", |t| t.replace("t_end = 1.88", "t_end = 0.1"));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&["simulate", "kinetic", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["center_of_mass.csv", "K3_t0.1000.f64", "manifest.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn simulate_each_target() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "test1", |t| t);
    let out = |n: &str| dir.path().join(n).display().to_string();
    let cases: Vec<Vec<String>> = vec![
        vec!["kernels".into(), "inspect".into()],
        vec!["simulate".into(), "homogeneous".into(), "--t-end".into(), "1".into()],
        vec!["simulate".into(), "particles".into(), "--n".into(), "5000".into(), "--seed".into(), "7".into()],
        vec![
            "simulate".into(),
            "particles".into(),
            "--n".into(),
            "5000".into(),
            "--scheme".into(),
            "discrete".into(),
            "--dt".into(),
            "0.05".into(),
            "--t-end".into(),
            "0.5".into(),
        ],
        vec!["simulate".into(), "macro".into(), "--variant".into(), "m2".into(), "--t-end".into(), "0.2".into()],
    ];
    for (k, args) in cases.iter().enumerate() {
        let mut a: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
        let o_dir = out(&format!("c{k}"));
        a.extend(["--config", &cfg, "--out", &o_dir]);
        let o = run(&a);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(dir.path().join("c0/kernels.csv").exists());
    assert!(dir.path().join("c1/relaxation.csv").exists());
    assert!(dir.path().join("c2/particle_density.f64").exists());
    assert!(dir.path().join("c4/M2_t0.2000.f64").exists());
}

#[test]
fn discrete_step_too_large() {
    let o = run(&["simulate", "particles", "--n", "100", "--scheme", "discrete", "--dt", "2"]);
    assert_eq!(o.status.code(), Some(2));
}
