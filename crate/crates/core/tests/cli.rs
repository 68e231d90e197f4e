use std::path::Path;
use std::process::{Command, Output};

use nsfde::cli::io::{read_csv, read_measure, read_trajectory};
use serde::Deserialize;

fn nsfde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsfde")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = r#"
seed = 5
h = 0.1
[operator]
n_modes = 6
[solver]
dt = 0.01
t_end = 4.0
store_stride = 10
[measure]
trajectories = 4
burn_in = 1.0
thin = 1
draws = 40
"#;

#[test]
fn zero_coefficients_keep_zero_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "zero.toml",
        r#"
h = 0.1
[operator]
n_modes = 4
[coefficients]
f = "zero"
sigma = "zero"
kernel = "zero"
[solver]
dt = 0.01
t_end = 1.0
[initial]
time = "constant"
space = { shape = "zero" }
"#,
    );
    let out = dir.path().join("z.jsonl");
    let o = nsfde(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, records) = read_trajectory(&out).unwrap();
    assert_eq!(header.n_modes, 4);
    assert_eq!(records.len(), 101);
    assert!(records.iter().all(|r| r.coeffs.iter().all(|&c| c == 0.0) && r.seg_norm == 0.0));
}

#[test]
fn resolved_config_reproduces_run_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let first = dir.path().join("a.jsonl");
    assert!(nsfde(&["simulate", "--config", &cfg, "--out", first.to_str().unwrap()]).status.success());
    let resolved = dir.path().join("a.jsonl.resolved.toml");
    assert!(resolved.exists());
    let second = dir.path().join("b.jsonl");
    let o = nsfde(&["simulate", "--config", resolved.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
    assert_eq!(std::fs::read(&resolved).unwrap(), std::fs::read(dir.path().join("b.jsonl.resolved.toml")).unwrap());
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    nsfde(&["simulate", "--config", &cfg, "--seed", "5", "--out", a.to_str().unwrap()]);
    nsfde(&["simulate", "--config", &cfg, "--seed", "6", "--out", b.to_str().unwrap()]);
    let (ha, ra) = read_trajectory(&a).unwrap();
    let (hb, rb) = read_trajectory(&b).unwrap();
    assert_eq!((ha.seed, hb.seed), (5, 6));
    assert_ne!(ra.last().unwrap().coeffs, rb.last().unwrap().coeffs);
}

#[test]
fn t1_matches_closed_form() {
    let (mg, p, alpha, c) = (0.2f64, 3.0f64, 0.5f64, 0.4289f64);
    let o = nsfde(&["t1", "--Mg", "0.2", "--p", "3", "--alpha", "0.5", "--C1ma", "0.4289"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let t1: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("T1 = "))
        .expect("T1 line")
        .parse()
        .unwrap();
    let exact = ((1.0 - mg).powf(p) * alpha.powf(p) / (5f64.powf(p - 1.0) * mg.powf(p) * c.powf(p))).powf(1.0 / (alpha * p));
    assert!((t1 - exact).abs() <= 1e-12 * exact, "{t1} vs {exact}");
}

#[test]
fn t1_rejects_out_of_range_arguments() {
    assert_eq!(nsfde(&["t1", "--Mg", "1.5", "--p", "3", "--alpha", "0.5", "--C1ma", "1"]).status.code(), Some(1));
    assert_eq!(nsfde(&["t1", "--Mg", "0.5", "--p", "3"]).status.code(), Some(1));
}

#[test]
fn validate_and_check_conditions_on_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.toml", "");
    let resolved = dir.path().join("r.toml");
    let o = nsfde(&["validate", "--config", &cfg, "--resolved", resolved.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(std::fs::read_to_string(&resolved).unwrap().contains("n_modes = 32"));

    #[derive(Deserialize)]
    struct Row {
        condition: String,
        verdict: bool,
    }
    let out = dir.path().join("c.csv");
    assert!(nsfde(&["check-conditions", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let rows: Vec<Row> = read_csv(&out).unwrap();
    assert_eq!(rows.len(), 14);
    assert!(rows.iter().all(|r| r.verdict), "{:?}", rows.iter().filter(|r| !r.verdict).map(|r| &r.condition).collect::<Vec<_>>());
}

#[test]
fn invalid_configs_exit_one_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("[solver]\ndtt = 0.1\n", "solver"),
        ("[solver]\ndt = 0.03\n", "solver.dt"),
        ("[coefficients]\nMg = 1.2\n", "coefficients.Mg"),
        ("[coefficients]\nf = \"cosh\"\n", "coefficients.f"),
        ("[operator]\nkind = \"laplacian_2d\"\n", "operator.kind"),
    ];
    for (i, (text, key)) in cases.iter().enumerate() {
        let cfg = write(dir.path(), &format!("bad{i}.toml"), text);
        let o = nsfde(&["validate", "--config", &cfg]);
        let err = String::from_utf8_lossy(&o.stderr);
        assert_eq!(o.status.code(), Some(1), "{text}");
        assert!(err.contains(key), "{text}: {err}");
    }
}

#[test]
fn measure_pipeline_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let m = dir.path().join("m.jsonl");
    let o = nsfde(&["estimate-measure", "--config", &cfg, "--out", m.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (mu, config) = read_measure(&m).unwrap();
    assert_eq!(mu.meta.sources.len(), 4);
    assert!(!mu.segments.is_empty());
    assert!(config.contains("n_modes = 6"));

    let report = dir.path().join("r.csv");
    let o = nsfde(&["invariance-test", "--measure", m.to_str().unwrap(), "--t", "0.5", "--out", report.to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(0 | 1)));
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.starts_with("# format=nsfde-report version=1\nstatistic,estimate,stderr,threshold,verdict"));

    let tight = dir.path().join("t.csv");
    let o = nsfde(&["tightness", "--config", &cfg, "--R", "0.1,1,10", "--out", tight.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let picard = dir.path().join("p.csv");
    let o = nsfde(&["picard", "--config", &cfg, "--iters", "4", "--out", picard.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
