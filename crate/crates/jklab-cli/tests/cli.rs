use jklab_cli::config::ExperimentConfig;
use jklab_cli::runner;
use std::path::Path;
use std::process::{Command, Output};

fn jklab(args: &[&str], env_seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_jklab"));
    cmd.args(args).env_remove("JKLAB_SEED");
    if let Some(s) = env_seed {
        cmd.env("JKLAB_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const BASE: &str = r#"
name = "small"
seed = 5

[space]
builder = "lattice_torus"
dim = 1
side = 128
spacing = 1.0

[kernel]
form = "scale"
phi_j = { kind = "piecewise_power", breaks = [1.0], exponents = [1.0, 3.0] }

[scales]
phi_c = { kind = "piecewise_power", breaks = [], exponents = [2.0] }
"#;

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("exp.toml");
    std::fs::write(&path, format!("{BASE}{extra}")).unwrap();
    path.to_str().unwrap().to_string()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn list_is_sorted_and_names_examples() {
    let o = jklab(&["list"], None);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let mut sorted = lines.clone();
    sorted.sort();
    assert_eq!(lines, sorted);
    for name in ["example_1_1", "example_5_2", "example_5_3_ujs_phi"] {
        let line = lines.iter().find(|l| l.starts_with(name)).expect("listed");
        assert!(line.contains("Example "), "{line}");
    }
}

#[test]
fn unknown_experiment_exits_two() {
    let o = jklab(&["run", "no_such_experiment"], None);
    assert_eq!(code(&o), 2);
}

#[test]
fn unknown_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "colour = \"blue\"\n");
    let out = dir.path().join("out");
    assert_eq!(code(&jklab(&["run", &cfg, "--out", out.to_str().unwrap()], None)), 2);
    assert!(!out.exists());
}

#[test]
fn guard_violation_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[[checks]]\nkind = \"faber_krahn\"\nradii = [4.0, 64.0]\n");
    let out = dir.path().join("out");
    assert_eq!(code(&jklab(&["run", &cfg, "--out", out.to_str().unwrap()], None)), 2);
}

#[test]
fn resource_cap_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[limits]\nmax_points = 64\n[[checks]]\nkind = \"faber_krahn\"\nradii = [4.0]\n",
    );
    let out = dir.path().join("out");
    assert_eq!(code(&jklab(&["run", &cfg, "--out", out.to_str().unwrap()], None)), 3);

    let cfg = write_config(
        dir.path(),
        "[limits]\nmax_dense_points = 64\n[[checks]]\nkind = \"faber_krahn\"\nradii = [4.0]\n",
    );
    assert_eq!(code(&jklab(&["run", &cfg, "--out", out.to_str().unwrap()], None)), 3);
}

#[test]
fn failing_checker_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[[checks]]\nkind = \"faber_krahn\"\nradii = [2.0, 4.0, 8.0]\nthreshold = 1.0\n",
    );
    let out = dir.path().join("out");
    assert_eq!(code(&jklab(&["run", &cfg, "--out", out.to_str().unwrap()], None)), 1);
    let s = summary(&out);
    assert_eq!(s["all_pass"], false);
    assert_eq!(s["checks"][0]["status"], "fail");
}

#[test]
fn erroring_checker_is_reported_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[[checks]]\nkind = \"ujs\"\nradii = [1.0]\nx_stride = 0\n\n[[checks]]\nkind = \"faber_krahn\"\nradii = [2.0, 4.0]\n",
    );
    let out = dir.path().join("out");
    assert_eq!(code(&jklab(&["run", &cfg, "--out", out.to_str().unwrap()], None)), 1);
    let s = summary(&out);
    let checks = s["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 2);
    assert_eq!(checks[0]["check"], "faber_krahn");
    assert_eq!(checks[0]["status"], "pass");
    assert_eq!(checks[1]["check"], "ujs");
    assert_eq!(checks[1]["status"], "error");
}

#[test]
fn passing_run_writes_every_report_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[[checks]]\nkind = \"volume\"\nradii = [2.0, 4.0, 8.0]\n\n[[checks]]\nkind = \"exit_scaling\"\nradii = [2.0, 4.0, 8.0]\nmc_paths = 2000\nmc_radii = [2.0]\n",
    );
    let out = dir.path().join("out");
    let o = jklab(&["run", &cfg, "--out", out.to_str().unwrap(), "--workers", "2"], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let mut names: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    let expected = [
        "exit_scaling_1_E_phi.csv",
        "exit_scaling_1_E_phi_mc.csv",
        "summary.json",
        "timings.json",
        "verdicts.csv",
    ];
    assert_eq!(names, expected, "no temporary files are left behind");
    let s = summary(&out);
    let conditions: Vec<&str> = s["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["condition"].as_str().unwrap())
        .collect();
    let mut sorted = conditions.clone();
    sorted.sort();
    assert_eq!(conditions, sorted);
    assert!(conditions.contains(&"E_phi-mc"));
    let text = std::fs::read_to_string(dir.path().join("exp.toml")).unwrap();
    assert_eq!(s["config_sha256"], runner::sha256_hex(text.as_bytes()));
    let csv = std::fs::read_to_string(out.join("verdicts.csv")).unwrap();
    assert!(csv.starts_with("condition,worst_ratio,threshold,pass,seed,domain\n"));
}

#[test]
fn seed_precedence_flag_env_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[[checks]]\nkind = \"volume\"\nradii = [2.0, 4.0]\n");
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    assert_eq!(code(&jklab(&["run", &cfg, "--out", o], None)), 0);
    assert_eq!(summary(&out)["seed"], 5);
    assert_eq!(code(&jklab(&["run", &cfg, "--out", o], Some("17"))), 0);
    assert_eq!(summary(&out)["seed"], 17);
    assert_eq!(code(&jklab(&["run", &cfg, "--out", o, "--seed", "23"], Some("17"))), 0);
    assert_eq!(summary(&out)["seed"], 23);
    assert_eq!(code(&jklab(&["run", &cfg, "--out", o], Some("abc"))), 2);
}

#[test]
fn envelope_table_format() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("env");
    let o = jklab(&["envelope", "example_1_1", "--out", out.to_str().unwrap()], None);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(out.join("envelope.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,d,lower,upper,regime"));
    let mut rows = 0;
    for line in lines {
        let regime = line.rsplit(',').next().unwrap();
        assert!(["NearDiagonal", "SubGaussianTail", "JumpTail"].contains(&regime), "{line}");
        rows += 1;
    }
    assert_eq!(rows, 5 * 8);
}

/// With both lower indices of φ_j below 1 the envelope collapses onto
/// `p^(j)(t, d) = min(1/V(φ_j⁻¹(t)), t/(V(d) φ_j(d)))`; the oracle below uses
/// the closed-form torus volume `2⌊r⌋ + 1` and the closed-form inverse.
#[test]
fn envelope_collapses_to_jump_profile() {
    let text = BASE
        .replace("exponents = [1.0, 3.0]", "exponents = [0.5, 0.8]")
        .replace("[scales]", "[envelope_grid]\ntimes = [0.1, 0.5, 1.0, 3.0, 10.0]\ndistances = [0.0, 1.0, 2.0, 5.0, 9.0, 20.0, 30.0]\n\n[scales]");
    let cfg = ExperimentConfig::parse(&text).unwrap();
    let prep = runner::prepare(cfg, &text).unwrap();
    let csv = String::from_utf8(runner::envelope_csv(&prep).unwrap()).unwrap();
    let vol = |r: f64| 2.0 * r.floor() + 1.0;
    let phi_j = |r: f64| if r <= 1.0 { r.powf(0.5) } else { r.powf(0.8) };
    let inv = |t: f64| if t <= 1.0 { t * t } else { t.powf(1.25) };
    let mut lower_ratio = Vec::new();
    let mut upper_ratio = Vec::new();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (t, d): (f64, f64) = (f[0].parse().unwrap(), f[1].parse().unwrap());
        let (lower, upper): (f64, f64) = (f[2].parse().unwrap(), f[3].parse().unwrap());
        let on_diag = 1.0 / vol(inv(t));
        let pj = if d == 0.0 { on_diag } else { on_diag.min(t / (vol(d) * phi_j(d))) };
        lower_ratio.push(lower / pj);
        upper_ratio.push(upper / pj);
    }
    for r in [&lower_ratio, &upper_ratio] {
        let (lo, hi) = r.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!((hi / lo - 1.0).abs() < 1e-12, "ratios {r:?}");
    }
}

#[test]
fn phi_c_construction_directive() {
    let direct = BASE
        .replace("exponents = [1.0, 3.0]", "exponents = [1.5, 2.0]")
        .replace(
            "phi_c = { kind = \"piecewise_power\", breaks = [], exponents = [2.0] }",
            "phi_c_from_phi_j = true",
        );
    let cfg = ExperimentConfig::parse(&direct).unwrap();
    let prep = runner::prepare(cfg, &direct).unwrap();
    let phi_c = &prep.envelope.triple.phi_c;
    assert!((phi_c.eval(0.5) - 0.25).abs() < 1e-12);
    assert!(phi_c.eval(64.0) < 64.0 * 64.0);

    let shallow = direct.replace("exponents = [1.5, 2.0]", "exponents = [0.5, 2.0]");
    let cfg = ExperimentConfig::parse(&shallow).unwrap();
    let err = runner::prepare(cfg, &shallow).err().expect("rejected");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn both_phi_c_sources_rejected() {
    let text = BASE.replace("[scales]", "[scales]\nphi_c_from_phi_j = true");
    assert!(ExperimentConfig::parse(&text).is_err());
}
