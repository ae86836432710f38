//! Command-line front end: argument parsing, dispatch and output files.

use crate::conditioned::{
    sample_boundary_case, EpsilonSchedule, weighted_ensemble, BoundaryCase, HouseMovingSampler, LevelSampler, MeanderSampler, Record, RunSettings,
    WeightedEnsemble,
};
use crate::config::{config_hash, DensityTarget, Resolved, RunConfig, SampleMethod};
use crate::corridor::{Corridor, TimeGrid};
use crate::drift::{lamperti_transform, DriftModel};
use crate::error::{Error, Result};
use crate::reweighting::{estimate_p_kernel, estimate_q_down, estimate_q_up, kernel_grid, HouseMovingTables, MeanderTables, TransitionTables};
use crate::rng::RngStream;
use crate::verify::{self, Functional, ProbeSide, TestReport, Verdict};
use clap::{Parser, Subcommand};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SAMPLER: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Verification suites in the order `--suite all` runs them.
pub const SUITES: [&str; 10] = [
    "girsanov_consistency",
    "chapman_kolmogorov",
    "decomposition",
    "reversal",
    "boundary_avoidance",
    "moment_bounds",
    "holder_exponent",
    "rn_chain",
    "bessel_identification",
    "degeneration",
];

#[derive(Debug, Parser)]
#[command(name = "housemove", version, about = "Diffusion bridges conditioned to stay between two curves")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the configured worker count.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Override the configured output directory.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw conditioned paths and write paths.csv, weights.csv, diagnostics.txt.
    Sample {
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long, value_parser = parse_method)]
        method: Option<SampleMethod>,
    },
    /// Estimate a one-time or transition density on the kernel grid.
    Density {
        #[arg(long, value_parser = parse_target)]
        target: Option<DensityTarget>,
        #[arg(long)]
        t: Option<f64>,
    },
    /// Run verification suites and write report.csv and summary.txt.
    Verify {
        /// `all` or a comma-separated list of suite names.
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Tabulate the Lamperti map of the configured SDE.
    Transform {
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// Summarize the report.csv of a previous verify run.
    Report,
}

fn parse_method(s: &str) -> std::result::Result<SampleMethod, String> {
    match s {
        "smc" => Ok(SampleMethod::Smc),
        "rejection" => Ok(SampleMethod::Rejection),
        "limit" => Ok(SampleMethod::Limit),
        _ => Err(format!("unknown method `{s}` (smc, rejection, limit)")),
    }
}

fn parse_target(s: &str) -> std::result::Result<DensityTarget, String> {
    DensityTarget::parse(s).map_err(|e| e.to_string())
}

/// Exit code class of a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_) | Error::Config(_) | Error::Composition(_) | Error::Model(_) | Error::Argument(_) => EXIT_CONFIG,
        Error::Numeric { .. } | Error::RejectionBudget { .. } | Error::Degeneracy { .. } | Error::Starvation { .. } => EXIT_SAMPLER,
        Error::Io(_) => EXIT_IO,
    }
}

/// A loaded run: configuration, its hash and the resolved model.
struct Run {
    cfg: RunConfig,
    hash: String,
    res: Resolved,
    out: PathBuf,
}

impl Run {
    fn load(cli: &Cli) -> Result<Self> {
        let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required for this command".into()))?;
        let (mut cfg, text) = RunConfig::load(path)?;
        if let Some(s) = cli.seed {
            cfg.seed = s;
        }
        if let Some(w) = cli.workers {
            cfg.workers = w;
        }
        let res = cfg.resolve()?;
        let out = cli.output.clone().unwrap_or_else(|| cfg.output_dir.clone());
        Ok(Self { hash: config_hash(&text), cfg, res, out })
    }

    fn header(&self) -> String {
        format!("# housemove config_sha256={} seed={}", self.hash, self.cfg.seed)
    }

    fn root(&self) -> RngStream {
        RngStream::root(self.cfg.seed)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        std::fs::create_dir_all(&self.out)?;
        let mut w = BufWriter::new(File::create(self.out.join(name))?);
        writeln!(w, "{}", self.header())?;
        Ok(w)
    }
}

/// Parse arguments, run the command and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    if let Command::Report = cli.command {
        let dir = match (&cli.output, &cli.config) {
            (Some(o), _) => o.clone(),
            (None, Some(_)) => Run::load(cli)?.out,
            (None, None) => PathBuf::from("out"),
        };
        return report(&dir);
    }
    let r = Run::load(cli)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(r.cfg.workers).build().map_err(|e| Error::Io(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Sample { paths, method } => sample(&r, *paths, *method),
        Command::Density { target, t } => density(&r, *target, *t),
        Command::Verify { suite } => verify_suites(&r, suite),
        Command::Transform { points } => transform(&r, *points),
        Command::Report => unreachable!(),
    })
}

fn sample(r: &Run, paths: Option<usize>, method: Option<SampleMethod>) -> Result<i32> {
    let s = &r.cfg.sample;
    let paths = paths.unwrap_or(s.paths);
    let method = method.unwrap_or(s.method);
    let (k, grid) = (&r.res.corridor, &r.res.grid);
    let mut diag = String::new();
    let ensemble = match method {
        SampleMethod::Limit => {
            let e = limit_ensemble(&r.res, &s.case, paths, r.root().labeled("limit"))?;
            writeln!(diag, "method = limit (epsilon = 0 importance sampler)").unwrap();
            writeln!(diag, "case = {}", s.case.label()).unwrap();
            writeln!(diag, "paths = {paths}").unwrap();
            writeln!(diag, "ess = {:.4}", e.ess()).unwrap();
            e
        }
        SampleMethod::Smc | SampleMethod::Rejection => {
            let sampler = match method {
                SampleMethod::Smc => LevelSampler::Smc { resample_threshold: s.resample_threshold },
                _ => LevelSampler::Rejection { max_attempts: s.max_attempts },
            };
            let mut settings = RunSettings::new(paths, sampler).record(Record::Full).probes(s.probes.clone());
            settings.drift = Some(r.res.drift.clone());
            let run = sample_boundary_case(r.root().labeled("schedule"), grid, k, &s.case, &r.res.schedule, &settings)?;
            writeln!(diag, "method = {}", if matches!(method, SampleMethod::Smc) { "smc" } else { "rejection" }).unwrap();
            writeln!(diag, "case = {}", s.case.label()).unwrap();
            writeln!(diag, "paths = {paths}").unwrap();
            writeln!(diag, "level,eps,margin_lower,margin_upper,ess,min_ess,acceptance_rate,log_normalizer").unwrap();
            for (i, l) in run.levels.iter().enumerate() {
                let opt = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.6}"));
                writeln!(
                    diag,
                    "{i},{:.6},{:.6},{:.6},{:.4},{},{},{}",
                    l.eps,
                    l.margins.0,
                    l.margins.1,
                    l.ensemble.ess(),
                    opt(l.min_ess),
                    opt(l.acceptance_rate),
                    opt(l.log_normalizer)
                )
                .unwrap();
            }
            if !run.ks_by_level.is_empty() {
                let probes: Vec<String> = run.probe_times.iter().map(|t| format!("ks_t{t}")).collect();
                writeln!(diag, "level_pair,{}", probes.join(",")).unwrap();
                for (i, row) in run.ks_by_level.iter().enumerate() {
                    let v: Vec<String> = row.iter().map(|d| format!("{d:.6}")).collect();
                    writeln!(diag, "{}-{},{}", i, i + 1, v.join(",")).unwrap();
                }
            }
            for w in &run.warnings {
                writeln!(diag, "warning: {w}").unwrap();
                eprintln!("{w}");
            }
            run.levels.into_iter().last().expect("at least one level").ensemble
        }
    };
    if r.res.map.is_some() {
        writeln!(diag, "values are in the original state coordinates (inverse Lamperti map applied)").unwrap();
    }
    write_paths(r, &ensemble, s.stride)?;
    let mut w = r.create("diagnostics.txt")?;
    w.write_all(diag.as_bytes())?;
    w.flush()?;
    println!("wrote {} paths to {}", ensemble.len(), r.out.display());
    Ok(EXIT_OK)
}

/// Weighted ε = 0 ensemble for house-moving or the corridor meander.
fn limit_ensemble(res: &Resolved, case: &BoundaryCase, paths: usize, stream: RngStream) -> Result<WeightedEnsemble> {
    let (k, grid, d) = (&res.corridor, res.grid, res.drift.clone());
    if *case == BoundaryCase::housemoving() {
        let s = HouseMovingSampler::new(k, grid, grid.time(grid.n_steps() / 2), d)?;
        weighted_ensemble(&s, stream, paths, &Record::Full)
    } else if *case == BoundaryCase::meander() {
        weighted_ensemble(&MeanderSampler::new(k, grid, d)?, stream, paths, &Record::Full)
    } else {
        Err(Error::Config(format!("method `limit` supports house-moving and the corridor meander, not case {}", case.label())))
    }
}

fn write_paths(r: &Run, e: &WeightedEnsemble, stride: usize) -> Result<()> {
    let grid = e.grid();
    let back = |x: f64| r.res.map.as_ref().map_or(x, |m| m.l_inv(x));
    let mut w = r.create("paths.csv")?;
    writeln!(w, "path_id,t,value")?;
    for i in 0..e.len() {
        for (j, &node) in e.nodes().iter().enumerate() {
            if node % stride == 0 || node == grid.n_steps() {
                writeln!(w, "{},{},{}", i, grid.time(node), back(e.row(i)[j]))?;
            }
        }
    }
    w.flush()?;
    let weights = e.normalized_weights()?;
    let mut w = r.create("weights.csv")?;
    writeln!(w, "path_id,log_weight,weight")?;
    for (i, (lw, nw)) in e.log_weights().iter().zip(&weights).enumerate() {
        writeln!(w, "{i},{lw},{nw}")?;
    }
    w.flush()?;
    Ok(())
}

fn density(r: &Run, target: Option<DensityTarget>, t: Option<f64>) -> Result<i32> {
    let dc = &r.cfg.density;
    let target = target.unwrap_or(dc.target);
    let t = t.unwrap_or(dc.t);
    let (k, d) = (&r.res.corridor, &r.res.drift);
    let set = dc.settings();
    let stream = r.root().labeled("density");
    let mut meta: Vec<(String, String)> = vec![("target".into(), target.name().into()), ("t".into(), format!("{t}"))];
    let mut add = |key: &str, v: f64| meta.push((key.into(), format!("{v}")));
    let zero = DriftModel::Zero;

    enum Out {
        Density(crate::reweighting::DensityEstimate),
        Kernel(crate::reweighting::KernelTable),
    }
    let out = match (target, dc.start) {
        (DensityTarget::H | DensityTarget::HMu, Some([t1, y1])) => {
            let drift = if target == DensityTarget::H { &zero } else { d };
            let ys = kernel_grid(k, t, set.nodes);
            let tt = TransitionTables::estimate(k, drift, (t1, y1), t, &ys, &set, stream)?;
            add("q_down_start", tt.q_down_start.value);
            Out::Density(if target == DensityTarget::H { tt.h(k)? } else { tt.h_mu(k)? })
        }
        (DensityTarget::H | DensityTarget::HMu, None) => {
            let drift = if target == DensityTarget::H { &zero } else { d };
            let tabs = HouseMovingTables::estimate(k, drift, t, &set, stream)?;
            add("c", tabs.c().value);
            add("c_se", tabs.c().std_err);
            Out::Density(if target == DensityTarget::H { tabs.h(k)? } else { tabs.h_mu(k)? })
        }
        (DensityTarget::K | DensityTarget::KMu, _) => {
            let t_end = dc.t_end.unwrap_or(k.t_end());
            add("t_end", t_end);
            if target == DensityTarget::K {
                Out::Density(MeanderTables::estimate(k, &zero, t, t_end, &set, stream)?.k(k)?)
            } else {
                Out::Density(MeanderTables::estimate(k, d, t, t_end, &set, stream)?.k_mu(k)?)
            }
        }
        (DensityTarget::QUp, _) => Out::Kernel(estimate_q_up(k, t, &kernel_grid(k, t, set.nodes), &set, stream)?),
        (DensityTarget::QDown, _) => Out::Kernel(estimate_q_down(k, t, &kernel_grid(k, t, set.nodes), &set, stream)?),
        (DensityTarget::P, Some([t1, y1])) => Out::Kernel(estimate_p_kernel(k, (t1, y1), t, &kernel_grid(k, t, set.nodes), &set, stream)?),
        (DensityTarget::P, None) => return Err(Error::Config("target p needs density.start = [t1, y1]".into())),
    };
    if let Some([t1, y1]) = dc.start {
        meta.push(("start".into(), format!("[{t1}, {y1}]")));
    }
    for (key, v) in [("nodes", set.nodes), ("paths_per_node", set.paths), ("steps_per_unit_time", set.steps)] {
        meta.push((key.into(), v.to_string()));
    }
    let name = format!("density_{}", target.name());
    let mut w = r.create(&format!("{name}.csv"))?;
    match &out {
        Out::Density(e) => {
            meta.push(("mass".into(), format!("{}", e.mass)));
            meta.push(("mass_se".into(), format!("{}", e.mass_se)));
            e.write_csv(&mut w)?;
        }
        Out::Kernel(kt) => kt.write_csv(&mut w)?,
    }
    w.flush()?;
    let mut m = r.create(&format!("{name}.meta.txt"))?;
    for (key, v) in &meta {
        writeln!(m, "{key} = {v}")?;
        println!("{key} = {v}");
    }
    m.flush()?;
    Ok(EXIT_OK)
}

fn selected_suites(spec: &str) -> Result<Vec<&'static str>> {
    if spec.trim() == "all" {
        return Ok(SUITES.to_vec());
    }
    spec.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| SUITES.iter().copied().find(|&n| n == s).ok_or_else(|| Error::Config(format!("unknown suite `{s}`; known: {}", SUITES.join(", ")))))
        .collect::<Result<Vec<_>>>()
        .and_then(|v| if v.is_empty() { Err(Error::Config("no suite selected".into())) } else { Ok(v) })
}

/// Run one named suite on the configured corridor and drift.
pub fn run_suite(name: &str, cfg: &RunConfig, res: &Resolved) -> Result<TestReport> {
    let (k, d, v) = (&res.corridor, &res.drift, &cfg.verify);
    let set = v.table_settings();
    let stream = RngStream::root(cfg.seed).labeled(name);
    let mid = |t: f64| 0.5 * (k.lo(t) + k.hi(t));
    match name {
        "girsanov_consistency" => {
            let m = v.girsanov_event_margin * k.min_width();
            let event = Corridor::new(k.lower().affine(1.0, -m), k.upper().affine(1.0, m), k.t_start(), k.t_end())?;
            let case = &cfg.sample.case;
            let a = case.start_value(k, k.t_start());
            let b = case.end_value(k, k.t_end());
            verify::girsanov_consistency(d, Some(&event), a, b, &Functional::ValueAt(0.5), v.paths, v.steps, v.girsanov_window, stream)
        }
        "chapman_kolmogorov" => {
            let [s, t, u] = v.ck_times;
            verify::check_chapman_kolmogorov(d, k, (s, t, u), mid(s), mid(u), &set, stream)
        }
        "decomposition" => verify::check_decomposition(d, k, &v.decomposition_splits, &Functional::ValueAt(0.5), v.paths, &set, stream),
        "reversal" => verify::check_reversal(d, k, v.reversal_time, v.paths, &set, stream),
        "boundary_avoidance" => verify::check_boundary_avoidance(
            d,
            k,
            k.upper(),
            ProbeSide::Above,
            v.avoidance_time,
            v.avoidance_tolerance,
            &res.schedule,
            &res.grid,
            v.paths,
            stream,
        ),
        "moment_bounds" => verify::check_moment_bounds(k, &v.moment_orders, v.paths, v.steps, stream),
        "holder_exponent" => {
            let grid = TimeGrid::unit(v.steps);
            let s = HouseMovingSampler::new(k, grid, 0.5, d.clone())?;
            let e = weighted_ensemble(&s, stream.labeled("house-moving"), v.paths, &Record::Full)?;
            verify::estimate_holder_exponent(&e, (v.holder_levels[0], v.holder_levels[1]), cfg.seed)
        }
        "rn_chain" => verify::check_rn_chain(d, k, v.rn_time, &Functional::ValueAt(0.5 * v.rn_time), v.rn_probes, v.paths, &set, stream),
        "bessel_identification" => {
            // One-sided corridor: the configured lower wall with the upper wall moved out of reach.
            let lo = k.lo(k.t_start());
            let half = Corridor::new(k.lower().clone(), crate::corridor::Curve::constant(lo + 1e6), k.t_start(), k.t_end())?;
            let schedule = EpsilonSchedule::default_for(&half);
            verify::check_bessel_identification(&half, lo + 1.0, v.bessel_time, &schedule, &res.grid, v.paths, stream)
        }
        "degeneration" => verify::check_degeneration(k, 0.5, &set, v.paths, stream),
        _ => Err(Error::Config(format!("unknown suite `{name}`"))),
    }
}

fn verify_suites(r: &Run, spec: &str) -> Result<i32> {
    let names = selected_suites(spec)?;
    let mut reports = Vec::new();
    let mut code = EXIT_OK;
    for name in names {
        let rep = match run_suite(name, &r.cfg, &r.res) {
            Ok(rep) => rep,
            Err(e) => {
                eprintln!("{name}: {e}");
                let c = exit_code(&e);
                if c != EXIT_SAMPLER && code == EXIT_OK {
                    code = c;
                }
                TestReport::new(name, r.cfg.seed).note(format!("error: {e}")).verdict(Verdict::Fail)
            }
        };
        println!("{rep}");
        reports.push(rep);
    }
    let mut w = r.create("report.csv")?;
    writeln!(w, "{}", TestReport::CSV_HEADER)?;
    for rep in &reports {
        writeln!(w, "{}", rep.csv_row())?;
    }
    w.flush()?;
    let mut s = r.create("summary.txt")?;
    for rep in &reports {
        rep.write_record(&mut s)?;
        writeln!(s)?;
    }
    s.flush()?;
    if code == EXIT_OK && reports.iter().any(|rep| !rep.passed()) {
        code = EXIT_SAMPLER;
    }
    Ok(code)
}

fn transform(r: &Run, points: usize) -> Result<i32> {
    let m = r.cfg.sde.as_ref().ok_or_else(|| Error::Config("transform needs an [sde] section".into()))?;
    if points < 2 {
        return Err(Error::Argument("need at least 2 points".into()));
    }
    let tr = lamperti_transform(m)?;
    let [lo, hi] = m.range;
    let mut w = r.create("lamperti.csv")?;
    writeln!(w, "u,x,mu")?;
    for i in 0..points {
        let u = lo + (hi - lo) * i as f64 / (points - 1) as f64;
        let x = tr.map.l(u);
        writeln!(w, "{u},{x},{}", tr.drift.mu(x))?;
    }
    w.flush()?;
    println!("drift: {}", tr.drift);
    let k = &r.res.corridor;
    println!("t,lower,upper");
    for i in 0..=4 {
        let t = k.t_start() + (k.t_end() - k.t_start()) * i as f64 / 4.0;
        println!("{t},{},{}", k.lo(t), k.hi(t));
    }
    Ok(EXIT_OK)
}

/// One parsed row of report.csv.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub name: String,
    pub verdict: String,
    pub statistics: String,
}

pub fn read_report(path: &Path) -> Result<Vec<ReportRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let f: Vec<&str> = line.splitn(4, ',').collect();
        if f.len() < 3 {
            return Err(Error::Io(format!("malformed report row `{line}`")));
        }
        rows.push(ReportRow { name: f[0].into(), verdict: f[1].into(), statistics: f[2].into() });
    }
    Ok(rows)
}

fn report(dir: &Path) -> Result<i32> {
    let rows = read_report(&dir.join("report.csv"))?;
    let count = |v: &str| rows.iter().filter(|r| r.verdict == v).count();
    let mut s = String::new();
    for r in &rows {
        writeln!(s, "{:<32} {}", r.name, r.verdict).unwrap();
    }
    writeln!(s, "{} tests: {} pass, {} fail, {} probe", rows.len(), count("PASS"), count("FAIL"), count("PROBE")).unwrap();
    print!("{s}");
    std::fs::write(dir.join("report_summary.txt"), &s)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_selection() {
        assert_eq!(selected_suites("all").unwrap().len(), SUITES.len());
        assert_eq!(selected_suites("reversal, degeneration").unwrap(), vec!["reversal", "degeneration"]);
        assert!(matches!(selected_suites("reversal,nope"), Err(Error::Config(_))));
    }

    #[test]
    fn exit_classes() {
        assert_eq!(exit_code(&Error::Domain("x".into())), 2);
        assert_eq!(exit_code(&Error::starvation("a", "b")), 3);
        assert_eq!(exit_code(&Error::Io("x".into())), 4);
    }

    #[test]
    fn methods_parse() {
        assert_eq!(parse_method("limit").unwrap(), SampleMethod::Limit);
        assert!(parse_method("mcmc").is_err());
        assert!(Cli::try_parse_from(["housemove", "verify", "--suite", "reversal", "--seed", "3"]).is_ok());
    }
}
