use std::fs;
use std::path::Path;
use std::process::Command;

use isopoincare::experiment::{ExperimentConfig, RunSummary};
use isopoincare::fpsolver::{build_solver, GridSpec};
use isopoincare::weights::closed_form_weight;
use isopoincare::{Error, IsotropicDensity};

const BIN: &str = env!("CARGO_BIN_EXE_isopoincare");

const SMALL: &str = r#"
densities = ["gaussian:sigma=1,n=1", "cauchy:beta=4,n=1"]
theorems = ["poincare_1d"]
extras = false

[solver]
cells = 100
refine = false
perturbations = ["tanh", "bump"]
"#;

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(BIN).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn config(dir: &Path) -> String {
    let p = dir.join("small.toml");
    fs::write(&p, SMALL).unwrap();
    p.display().to_string()
}

#[test]
fn run_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let (code, _) = run(&["run", "--config", &cfg, "--out", dir.to_str().unwrap()]);
        assert_eq!(code, 0);
    }
    for f in ["checks.json", "decay.json", "summary.json", "manifest.json"] {
        let x = fs::read(a.join(f)).unwrap();
        let y = fs::read(b.join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
    let s = RunSummary::load(&a).unwrap();
    assert!(s.all_pass);
    let (code, text) = run(&["report", a.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(text.contains("overall: pass"));
}

#[test]
fn seed_changes_the_random_members() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path());
    let mut outputs = Vec::new();
    for seed in ["1", "2"] {
        let dir = tmp.path().join(seed);
        let (code, _) = run(&["check", "--config", &cfg, "--seed", seed, "--out", dir.to_str().unwrap()]);
        assert_eq!(code, 0);
        outputs.push(fs::read(dir.join("checks.json")).unwrap());
    }
    assert_ne!(outputs[0], outputs[1]);
}

#[test]
fn gaussian_poincare_config() {
    let cfg = ExperimentConfig::from_toml(
        r#"
densities = ["gaussian:sigma=1,n=1"]
theorems = ["poincare_1d"]
extras = false
"#,
    )
    .unwrap();
    assert!(cfg.solver.is_none());
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        output_dir: tmp.path().to_path_buf(),
        ..cfg
    };
    let s = isopoincare::experiment::run(&cfg).unwrap();
    assert!(s.all_pass);
    let checks = fs::read_to_string(tmp.path().join("checks.json")).unwrap();
    assert!(checks.contains("\"poincare_1d\""));
}

#[test]
fn shipped_config_parses() {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    let cfg = ExperimentConfig::load(&p).unwrap();
    cfg.validate().unwrap();
    let defaults = ExperimentConfig::default();
    assert_eq!(cfg.densities, defaults.densities);
    assert_eq!(cfg.theorems, defaults.theorems);
    assert_eq!(cfg.tolerances, defaults.tolerances);
}

#[test]
fn weights_and_evolve_subcommands() {
    let (code, text) = run(&["weights", "--density", "exponential:beta=2,n=2", "--points", "5"]);
    assert_eq!(code, 0);
    assert_eq!(text.lines().count(), 7);
    let tmp = tempfile::tempdir().unwrap();
    let (code, _) = run(&[
        "evolve",
        "--density",
        "barenblatt:a=1,p=2,n=2",
        "--cells",
        "100",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 2);
}

#[test]
fn bad_input_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("bad.toml");
    fs::write(&p, "densities = [\"gaussian:sigma=1,n=1\"]\nunknown_key = 1\n").unwrap();
    assert_eq!(run(&["run", "--config", p.to_str().unwrap()]).0, 2);
    assert_eq!(run(&["evolve", "--density", "nonsense"]).0, 2);
    assert_eq!(run(&["evolve", "--density", "gaussian:sigma=1,n=1", "--eps", "0.5"]).0, 2);
}

#[test]
fn solver_rejects_a_weight_that_is_not_stationary() {
    let d = IsotropicDensity::from_spec("cauchy:beta=3,n=1").unwrap();
    let k = closed_form_weight(&d).unwrap();
    assert!(build_solver(&d, &k, &GridSpec::new(100)).is_ok());
    match build_solver(&d, &k.scaled(2.0), &GridSpec::new(100)) {
        Err(Error::Hypothesis(_)) => {}
        other => panic!("expected a hypothesis error, got {:?}", other.map(|_| ())),
    }
}
