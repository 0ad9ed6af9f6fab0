use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BASE: &str = r#"
[problem]
beta = 0.3
epsilon = 0.01

[perturbation]
expression = "(1+cos(y))*cosq(x,1)"
support_radius = 1.0

[discretization]
grid_points = 201
"#;

fn fixture(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn rbtrap(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbtrap"))
        .args(args)
        .arg("--config")
        .arg(config)
        .env_remove("RBTRAP_JOBS")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

#[test]
fn solve_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = fixture(&dir, "base.toml", BASE);
    let a = rbtrap(&["solve"], &cfg);
    let b = rbtrap(&["solve"], &cfg);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let report: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert!(report["mu"].as_f64().unwrap() > 0.0);
    assert!(report.get("timings").is_none());
    let timed = rbtrap(&["solve", "--timings"], &cfg);
    let report: serde_json::Value = serde_json::from_slice(&timed.stdout).unwrap();
    assert!(report["timings"]["solve_seconds"].as_f64().is_some());
}

#[test]
fn sweep_writes_csv_and_svg() {
    let dir = TempDir::new().unwrap();
    let cfg = fixture(&dir, "base.toml", BASE);
    let csv = dir.path().join("curve.csv");
    let svg = dir.path().join("curve.svg");
    let out = rbtrap(
        &[
            "sweep",
            "--beta-min",
            "0.1",
            "--beta-max",
            "0.4",
            "--steps",
            "4",
            "--out",
            csv.to_str().unwrap(),
            "--svg",
            svg.to_str().unwrap(),
        ],
        &cfg,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("beta,mu,omega_sq,leading_mu,status"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[4] == "ok"));
    let omega: Vec<f64> = rows
        .iter()
        .map(|r| r[2].parse::<f64>().unwrap().sqrt())
        .collect();
    assert!(omega.windows(2).all(|w| w[1] > w[0]), "{omega:?}");
    let svg = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(svg.matches("class=\"marker\"").count(), 4);
}

#[test]
fn sweep_respects_jobs_env() {
    let dir = TempDir::new().unwrap();
    let cfg = fixture(&dir, "base.toml", BASE);
    let run = |jobs: &str| {
        Command::new(env!("CARGO_BIN_EXE_rbtrap"))
            .args([
                "sweep",
                "--beta-min",
                "0.2",
                "--beta-max",
                "0.3",
                "--steps",
                "3",
                "--config",
            ])
            .arg(&cfg)
            .env("RBTRAP_JOBS", jobs)
            .output()
            .unwrap()
    };
    let (one, four) = (run("1"), run("4"));
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn field_export_has_metadata_and_header() {
    let dir = TempDir::new().unwrap();
    let cfg = fixture(&dir, "base.toml", BASE);
    let path = dir.path().join("field.csv");
    let out = rbtrap(
        &[
            "field",
            "--nx",
            "21",
            "--ny",
            "8",
            "--out",
            path.to_str().unwrap(),
        ],
        &cfg,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    for key in ["beta", "epsilon", "mu", "omega_sq", "N", "M", "X"] {
        assert!(
            text.lines().any(|l| l.starts_with(&format!("# {key} = "))),
            "missing {key}"
        );
    }
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "x,y,re_psi,im_psi,abs_psi");
    assert_eq!(
        text.lines().filter(|l| !l.starts_with('#')).count(),
        1 + 21 * 9
    );
}

#[test]
fn validate_passes_on_reference_problem() {
    let dir = TempDir::new().unwrap();
    let cfg = fixture(
        &dir,
        "ok.toml",
        &BASE.replace("grid_points = 201", "grid_points = 401"),
    );
    let out = rbtrap(&["validate"], &cfg);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(code(&out), 0, "{stdout}");
    assert!(!stdout.contains("FAILED"));
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let zero = fixture(&dir, "zero.toml", &BASE.replace("beta = 0.3", "beta = 0.0"));
    let out = rbtrap(&["solve"], &zero);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta=0 excluded"));
    let missing = fixture(
        &dir,
        "missing.toml",
        &BASE.replace("expression = \"(1+cos(y))*cosq(x,1)\"", ""),
    );
    let out = rbtrap(&["solve"], &missing);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing perturbation.expression"));
    let absent = dir.path().join("absent.toml");
    assert_eq!(code(&rbtrap(&["solve"], &absent)), 2);
    let range = rbtrap(
        &[
            "sweep",
            "--beta-min",
            "-0.1",
            "--beta-max",
            "0.1",
            "--steps",
            "3",
        ],
        &zero,
    );
    assert_eq!(code(&range), 2);
}

#[test]
fn non_convergence_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = fixture(
        &dir,
        "slow.toml",
        &format!("{BASE}\n[solver]\nmax_iter = 1\n"),
    );
    assert_eq!(code(&rbtrap(&["solve"], &cfg)), 3);
}

#[test]
fn window_or_contraction_exits_4() {
    let dir = TempDir::new().unwrap();
    let cfg = fixture(
        &dir,
        "strong.toml",
        &BASE.replace("epsilon = 0.01", "epsilon = 3.0"),
    );
    assert_eq!(code(&rbtrap(&["solve"], &cfg)), 4);
}

#[test]
fn negative_mean_exits_5() {
    let dir = TempDir::new().unwrap();
    let cfg = fixture(
        &dir,
        "neg.toml",
        &BASE.replace("(1+cos(y))*cosq(x,1)", "-cosq(x,1)"),
    );
    assert_eq!(code(&rbtrap(&["validate"], &cfg)), 5);
    assert_eq!(code(&rbtrap(&["solve"], &cfg)), 5);
}

#[test]
fn failed_check_exits_6() {
    let dir = TempDir::new().unwrap();
    let cfg = fixture(
        &dir,
        "coarse.toml",
        &BASE.replace("grid_points = 201", "grid_points = 51"),
    );
    let out = rbtrap(&["validate"], &cfg);
    assert_eq!(code(&out), 6, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAILED"));
}
