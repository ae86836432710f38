//! End-to-end runs of the `housemove` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

const FLAT: &str = r#"
seed = 3

[corridor]
lower = { kind = "constant", value = 0.0 }
upper = { kind = "constant", value = 1.0 }

[grid]
n_steps = 64

[sample]
paths = 200
case = { start = { kind = "on_lower" }, end = { kind = "on_upper" } }
method = "smc"
resample_threshold = 0.5
max_attempts = 100000
probes = [0.5]
stride = 1

[density]
target = "h"
t = 0.5
steps = 64
paths = 300
nodes = 8
min_ess = 5.0

[verify]
paths = 300
steps = 1024
table_paths = 300
table_nodes = 8
table_steps = 384
"#;

struct Env {
    dir: TempDir,
}

impl Env {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn config(&self, name: &str, text: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn housemove(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_housemove")).args(args).output().expect("binary runs")
}

fn run(config: &Path, out: &Path, args: &[&str]) -> Output {
    let mut all = vec!["--config", config.to_str().unwrap(), "--output", out.to_str().unwrap()];
    all.extend_from_slice(args);
    housemove(&all)
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn sample_writes_headed_files() {
    let env = Env::new();
    let cfg = env.config("c.toml", FLAT);
    let out = env.out("o");
    let o = run(&cfg, &out, &["sample"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["paths.csv", "weights.csv", "diagnostics.txt"] {
        let text = read(&out.join(f));
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("# housemove config_sha256=") && first.ends_with("seed=3"), "{first}");
    }
    let paths = read(&out.join("paths.csv"));
    assert_eq!(paths.lines().nth(1), Some("path_id,t,value"));
    assert_eq!(paths.lines().count(), 2 + 200 * 65);
    let weights = read(&out.join("weights.csv"));
    let total: f64 = weights.lines().skip(2).map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
    // The finest level lives in the corridor widened by ε = 0.2/2⁴ and is
    // pinned to the walls at both ends.
    for l in paths.lines().skip(2) {
        let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((-0.0125..=1.0125).contains(&f[2]), "{l}");
        if f[1] == 0.0 || f[1] == 1.0 {
            assert_eq!(f[2], f[1], "{l}");
        }
    }
}

#[test]
fn seed_determines_output() {
    let env = Env::new();
    let cfg = env.config("c.toml", FLAT);
    let (a, b, c) = (env.out("a"), env.out("b"), env.out("c"));
    run(&cfg, &a, &["sample", "--method", "limit"]);
    run(&cfg, &b, &["sample", "--method", "limit"]);
    run(&cfg, &c, &["sample", "--method", "limit", "--seed", "4"]);
    assert_eq!(read(&a.join("paths.csv")), read(&b.join("paths.csv")));
    assert_ne!(read(&a.join("paths.csv")), read(&c.join("paths.csv")));
    assert!(read(&c.join("paths.csv")).lines().next().unwrap().ends_with("seed=4"));
}

#[test]
fn configuration_errors_exit_2() {
    let env = Env::new();
    let cfg = env.config("c.toml", FLAT);
    let out = env.out("o");
    assert_eq!(run(&cfg, &out, &["verify", "--suite", "nope"]).status.code(), Some(2));
    assert_eq!(housemove(&["sample"]).status.code(), Some(2));
    assert_eq!(housemove(&["frobnicate"]).status.code(), Some(2));
    let bad = env.config("bad.toml", &FLAT.replace("seed = 3", "seed = 3\nextra = true"));
    assert_eq!(run(&bad, &out, &["sample"]).status.code(), Some(2));
    let crossing = env.config("x.toml", &FLAT.replace("value = 1.0", "value = -0.5"));
    let o = run(&crossing, &out, &["sample"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    let p_without_start = env.config("p.toml", &FLAT.replace("target = \"h\"", "target = \"p\""));
    assert_eq!(run(&p_without_start, &out, &["density"]).status.code(), Some(2));
    assert_eq!(run(&cfg, &out, &["transform"]).status.code(), Some(2));
}

#[test]
fn missing_report_is_an_io_failure() {
    let env = Env::new();
    let o = housemove(&["--output", env.out("none").to_str().unwrap(), "report"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn verify_then_report() {
    let env = Env::new();
    let cfg = env.config("c.toml", FLAT);
    let out = env.out("o");
    let o = run(&cfg, &out, &["verify", "--suite", "degeneration,reversal"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = read(&out.join("report.csv"));
    assert_eq!(csv.lines().nth(1), Some("name,verdict,statistics,thresholds,sample_sizes,seed"));
    assert!(csv.lines().nth(2).unwrap().starts_with("degeneration,PASS,"));
    assert!(!csv.contains("runtime"));
    assert!(read(&out.join("summary.txt")).contains("[reversal]"));
    let r = housemove(&["--output", out.to_str().unwrap(), "report"]);
    assert_eq!(r.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&r.stdout).contains("2 tests: 2 pass, 0 fail, 0 probe"));
}

#[test]
fn failing_assertion_exits_3_and_probes_do_not() {
    let env = Env::new();
    let cfg = env.config("c.toml", FLAT);
    // The dyadic-regression exponent of house-moving paths sits near 0.37.
    let o = run(&cfg, &env.out("h"), &["verify", "--suite", "holder_exponent"]);
    assert_eq!(o.status.code(), Some(3));
    let drift = env.config("d.toml", &format!("{FLAT}\n[drift]\nkind = \"linear\"\na = 0.0\nb = -1.0\n"));
    let o = run(&drift, &env.out("r"), &["verify", "--suite", "reversal"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(read(&env.out("r").join("report.csv")).contains("reversal,PROBE,"));
}

#[test]
fn density_writes_table_and_sidecar() {
    let env = Env::new();
    let cfg = env.config("c.toml", FLAT);
    let out = env.out("o");
    let o = run(&cfg, &out, &["density", "--target", "q_up", "--t", "0.25"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = read(&out.join("density_q_up.csv"));
    assert_eq!(table.lines().nth(1), Some("y,value,std_err"));
    assert_eq!(table.lines().count(), 2 + 8);
    let meta = read(&out.join("density_q_up.meta.txt"));
    assert!(meta.contains("target = q_up") && meta.contains("t = 0.25"));
    let o = run(&cfg, &out, &["density"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(read(&out.join("density_h.meta.txt")).contains("mass = "));
}

#[test]
fn transform_of_constant_volatility_is_linear() {
    let env = Env::new();
    let text = FLAT.to_string() + "\n[sde]\nnu = [1.0]\nsigma = [2.0]\nrange = [-1.0, 3.0]\n";
    let cfg = env.config("s.toml", &text);
    let out = env.out("o");
    let o = run(&cfg, &out, &["transform", "--points", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("mu(x) = 0.5"));
    let csv = read(&out.join("lamperti.csv"));
    for l in csv.lines().skip(2) {
        let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[1] - v[0] / 2.0).abs() < 1e-12 && (v[2] - 0.5).abs() < 1e-12, "{l}");
    }
}

#[test]
fn transform_of_state_dependent_volatility() {
    // σ(u) = 0.5 + 0.1u: L(u) = 10 ln(1 + 0.2u), μ = ν/σ − σ′/2.
    let env = Env::new();
    let text = FLAT.to_string() + "\n[sde]\nnu = [0.0, 0.1]\nsigma = [0.5, 0.1]\nrange = [-1.0, 2.0]\n";
    let cfg = env.config("s.toml", &text);
    let out = env.out("o");
    assert_eq!(run(&cfg, &out, &["transform", "--points", "7"]).status.code(), Some(0));
    for l in read(&out.join("lamperti.csv")).lines().skip(2) {
        let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        let u = v[0];
        assert!((v[1] - 10.0 * (1.0 + 0.2 * u).ln()).abs() < 1e-6, "{l}");
        assert!((v[2] - (0.1 * u / (0.5 + 0.1 * u) - 0.05)).abs() < 1e-6, "{l}");
    }
}
