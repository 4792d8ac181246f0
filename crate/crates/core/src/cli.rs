//! Command-line front end.
//!
//! Exit status is 0 on success, 2 on usage errors (bad flags, missing or
//! malformed config) and 1 on runtime failures. Every output is rendered in
//! memory before the first byte is written, so a failing command leaves no
//! partial files behind.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{estimate, FrequencyScale, Route, DEFAULT_KAPPA, DEFAULT_QUADRATURE_TOL};
use crate::gaussian_paths::{HurstParam, MixedSampler, SampleGrid, SamplerMethod};
use crate::limit_theory::{chaos_variance_terms, limit_constants, rho_bound, RhoAt, CHAOS_DEFAULT_TOL};
use crate::mixing_laws::MixingLaw;
use crate::montecarlo::{berry_esseen_summary, run_experiment, ExperimentConfig, ExperimentReport, VarianceTarget};
use crate::output::fmt_f64;
use crate::rng::RngSpec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "qvlab", version, about = "Randomized periodogram estimation of quadratic variation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one mixed path and write it as CSV.
    Paths(PathsArgs),
    /// Simulate one path and print the estimate as JSON.
    Estimate(EstimateArgs),
    /// Print the limit constants as JSON.
    Theory(TheoryArgs),
    /// Run a Monte Carlo experiment from a config file.
    Clt(ExperimentArgs),
    /// Run an experiment with H > 3/4 and compare KS decay with ρ(L).
    BerryEsseen(ExperimentArgs),
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be > 0 and finite, got {v}"))
    }
}

fn hurst(s: &str) -> std::result::Result<HurstParam, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    HurstParam::new(v).map_err(|e| e.to_string())
}

fn parse_with<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct PathArgs {
    #[arg(long = "H", value_parser = hurst, default_value = "0.75")]
    pub h: HurstParam,
    #[arg(long = "T", value_parser = positive, default_value = "1")]
    pub horizon: f64,
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Replicate index within the seed's stream family.
    #[arg(long, default_value_t = 0)]
    pub replicate: u64,
    #[arg(long, value_parser = parse_with::<SamplerMethod>, default_value = "circulant")]
    pub sampler: SamplerMethod,
    /// Simulate `X = W` instead of the mixed model.
    #[arg(long)]
    pub no_fbm: bool,
}

impl PathArgs {
    fn sample(&self) -> Result<crate::gaussian_paths::PathSample> {
        let grid = SampleGrid::new(self.horizon, self.n)?;
        let sampler = MixedSampler::new(grid, self.h, !self.no_fbm, self.sampler)?;
        Ok(sampler.sample(RngSpec::new(self.seed, self.replicate)))
    }
}

#[derive(Debug, Args)]
pub struct PathsArgs {
    #[command(flatten)]
    pub path: PathArgs,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Also write `path.dat` with columns `t X(t)`.
    #[arg(long)]
    pub emit_plot_data: bool,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub path: PathArgs,
    #[arg(long, value_parser = parse_with::<Route>, default_value = "fft")]
    pub route: Route,
    #[arg(long = "L", value_parser = positive)]
    pub l: f64,
    #[arg(long, value_parser = parse_with::<MixingLaw>, default_value = "gaussian")]
    pub law: MixingLaw,
    /// Absolute tolerance of the quadrature route.
    #[arg(long, value_parser = positive, default_value_t = DEFAULT_QUADRATURE_TOL)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[arg(long, value_parser = parse_with::<MixingLaw>)]
    pub law: MixingLaw,
    #[arg(long = "H", value_parser = hurst)]
    pub h: HurstParam,
    #[arg(long = "T", value_parser = positive, default_value = "1")]
    pub horizon: f64,
    /// Scale at which to report ρ(L) and, with `--a-terms`, the A-terms.
    #[arg(long = "L", value_parser = positive)]
    pub l: Option<f64>,
    #[arg(long, requires = "l")]
    pub a_terms: bool,
    #[arg(long, value_parser = positive, default_value_t = CHAOS_DEFAULT_TOL)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// TOML config; flags below override its values.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Also write two-column `.dat` files of the per-L summaries.
    #[arg(long)]
    pub emit_plot_data: bool,
    #[arg(long = "H", value_parser = hurst)]
    pub h: Option<HurstParam>,
    #[arg(long = "T", value_parser = positive)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub law: Option<String>,
    #[arg(long, value_parser = positive)]
    pub law_scale: Option<f64>,
    #[arg(long = "L-grid", value_delimiter = ',', value_parser = positive)]
    pub l_grid: Option<Vec<f64>>,
    #[arg(long = "M")]
    pub replications: Option<usize>,
    #[arg(long, value_parser = positive)]
    pub kappa: Option<f64>,
    #[arg(long, value_parser = parse_with::<Route>)]
    pub route: Option<Route>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_with::<SamplerMethod>)]
    pub sampler: Option<SamplerMethod>,
    #[arg(long, value_parser = parse_with::<VarianceTarget>)]
    pub variance_target: Option<VarianceTarget>,
    #[arg(long)]
    pub allow_assumption_violation: bool,
    #[arg(long)]
    pub no_fbm: bool,
}

impl ExperimentArgs {
    /// Loads the config file and applies the flag overrides.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = load_config(&self.config)?;
        if let Some(h) = self.h {
            cfg.h = h;
        }
        if let Some(t) = self.horizon {
            cfg.horizon = t;
        }
        if let Some(law) = &self.law {
            cfg.law = law.clone();
        }
        if let Some(s) = self.law_scale {
            cfg.law_scale = s;
        }
        if let Some(g) = &self.l_grid {
            cfg.l_grid = g.clone();
        }
        if let Some(m) = self.replications {
            cfg.replications = m;
        }
        if let Some(k) = self.kappa {
            cfg.kappa = k;
        }
        if let Some(r) = self.route {
            cfg.route = r;
        }
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(s) = self.sampler {
            cfg.sampler = s;
        }
        if let Some(v) = self.variance_target {
            cfg.variance_target = v;
        }
        if self.allow_assumption_violation {
            cfg.allow_assumption_violation = true;
        }
        if self.no_fbm {
            cfg.includes_fbm = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Reads and validates a TOML experiment config.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config {
        field: "config".into(),
        constraint: format!("cannot read {}: {e}", path.display()),
    })?;
    ExperimentConfig::from_toml_str(&text)
}

pub fn write_config(path: &Path, config: &ExperimentConfig) -> Result<()> {
    fs::write(path, config.to_toml_string()?)?;
    Ok(())
}

// Files produced by a command, written only once everything succeeded.
#[derive(Default)]
struct Outputs {
    stdout: Vec<u8>,
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    fn file(&mut self, dir: &Path, name: &str, bytes: Vec<u8>) {
        self.files.push((dir.join(name), bytes));
    }

    fn commit(self, stdout: &mut dyn Write) -> Result<()> {
        for (path, bytes) in &self.files {
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, bytes)?;
        }
        stdout.write_all(&self.stdout)?;
        Ok(())
    }
}

fn json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("plain data serializes");
    v.push(b'\n');
    v
}

fn plot_data(points: impl IntoIterator<Item = (f64, f64)>) -> Vec<u8> {
    let mut out = String::new();
    for (x, y) in points {
        out.push_str(&format!("{} {}\n", fmt_f64(x), fmt_f64(y)));
    }
    out.into_bytes()
}

fn cmd_paths(args: &PathsArgs) -> Result<Outputs> {
    let path = args.path.sample()?;
    let mut out = Outputs::default();
    let mut csv = Vec::new();
    path.write_csv(&mut csv)?;
    out.file(&args.out_dir, "path.csv", csv);
    if args.emit_plot_data {
        let grid = path.grid;
        let xs = path.x_values();
        out.file(
            &args.out_dir,
            "path.dat",
            plot_data(xs.iter().enumerate().map(|(k, &x)| (grid.time(k), x))),
        );
    }
    Ok(out)
}

fn cmd_estimate(args: &EstimateArgs) -> Result<Outputs> {
    let path = args.path.sample()?;
    let l = FrequencyScale::new(args.l)?;
    if let Some(w) = l.resolution_warning(&path.grid, DEFAULT_KAPPA) {
        log::warn!("{w}");
    }
    let result = estimate(&path, l, &args.law, args.route, args.tol)?;
    Ok(Outputs {
        stdout: json(&result),
        files: Vec::new(),
    })
}

fn cmd_theory(args: &TheoryArgs) -> Result<Outputs> {
    let mut c = limit_constants(&args.law, args.h, args.horizon)?;
    if let Some(l) = args.l {
        if args.h.value() > 0.75 {
            c.rho = Some(RhoAt {
                l,
                value: rho_bound(&args.law, args.h, args.horizon, l)?,
            });
        } else {
            log::info!("ρ(L) is only defined for H > 3/4; omitted");
        }
        if args.a_terms {
            c.chaos_terms = Some(chaos_variance_terms(&args.law, args.h, args.horizon, l, args.tol)?);
        }
    }
    Ok(Outputs {
        stdout: json(&c),
        files: Vec::new(),
    })
}

fn report_files(out: &mut Outputs, dir: &Path, stem: &str, report: &ExperimentReport, plots: bool) -> Result<()> {
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    out.file(dir, &format!("{stem}.csv"), csv);
    let mut js = Vec::new();
    report.write_json(&mut js)?;
    out.file(dir, &format!("{stem}.json"), js);
    if plots {
        let rows = &report.rows;
        out.file(dir, &format!("{stem}_mean.dat"), plot_data(rows.iter().map(|r| (r.l, r.mean))));
        out.file(dir, &format!("{stem}_variance.dat"), plot_data(rows.iter().map(|r| (r.l, r.variance))));
        if rows.iter().any(|r| r.ks.is_some()) {
            out.file(
                dir,
                &format!("{stem}_ks.dat"),
                plot_data(rows.iter().filter_map(|r| r.ks.map(|k| (r.l, k)))),
            );
        }
    }
    Ok(())
}

fn cmd_clt(args: &ExperimentArgs) -> Result<Outputs> {
    let cfg = args.resolve()?;
    let report = run_experiment(&cfg)?;
    let mut out = Outputs::default();
    report_files(&mut out, &args.out_dir, "clt", &report, args.emit_plot_data)?;
    Ok(out)
}

fn cmd_berry_esseen(args: &ExperimentArgs) -> Result<Outputs> {
    let cfg = args.resolve()?;
    if !(cfg.includes_fbm && cfg.h.value() > 0.75) {
        return Err(Error::HypothesisViolated(format!(
            "berry-esseen needs the mixed model with H ∈ (3/4, 1), got H = {}",
            cfg.h.value()
        )));
    }
    let report = run_experiment(&cfg)?;
    let summary = berry_esseen_summary(&report)?;
    let mut out = Outputs::default();
    report_files(&mut out, &args.out_dir, "berry_esseen", &report, args.emit_plot_data)?;
    let mut triples = String::from("L,ks,rho\n");
    for t in &summary.triples {
        triples.push_str(&format!("{},{},{}\n", fmt_f64(t.l), fmt_f64(t.ks), fmt_f64(t.rho)));
    }
    out.file(&args.out_dir, "berry_esseen_triples.csv", triples.into_bytes());
    if args.emit_plot_data {
        out.file(
            &args.out_dir,
            "berry_esseen_rho.dat",
            plot_data(summary.triples.iter().map(|t| (t.l, t.rho))),
        );
    }
    out.stdout = json(&summary);
    Ok(out)
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

/// Runs one invocation; returns the process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    let result = match &cli.command {
        Command::Paths(a) => cmd_paths(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Theory(a) => cmd_theory(a),
        Command::Clt(a) => cmd_clt(a),
        Command::BerryEsseen(a) => cmd_berry_esseen(a),
    }
    .and_then(|out| out.commit(stdout));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Entry point of the binary.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // unlocked handles: worker threads log to stderr while a command runs
    run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("qvlab").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn theory_prints_sigma_sq() {
        let (code, out, _) = call(&["theory", "--law", "gaussian", "--T", "1", "--H", "0.8"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!((v["sigma_sq"].as_f64().unwrap() - 1.7724538509055159).abs() < 1e-7);
    }

    #[test]
    fn usage_errors_exit_two() {
        let (code, out, _) = call(&["theory", "--law", "gaussian", "--H", "0.8", "--foo"]);
        assert_eq!((code, out.as_str()), (2, ""));
        let (code, _, err) = call(&["estimate", "--route", "fft", "--L", "0"]);
        assert_eq!(code, 2);
        assert!(err.contains("must be > 0"), "{err}");
        let (code, _, _) = call(&["clt", "--config", "/nonexistent/qvlab.toml"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn runtime_errors_exit_one() {
        let (code, out, err) = call(&["theory", "--law", "uniform", "--H", "0.8"]);
        assert_eq!((code, out.as_str()), (1, ""));
        assert!(err.contains("integrability"), "{err}");
    }

    #[test]
    fn estimate_is_deterministic() {
        let args = ["estimate", "--L", "20", "--n", "256", "--seed", "4", "--H", "0.7"];
        let (c1, a, _) = call(&args);
        let (c2, b, _) = call(&args);
        assert_eq!((c1, c2), (0, 0));
        let va: serde_json::Value = serde_json::from_str(&a).unwrap();
        let vb: serde_json::Value = serde_json::from_str(&b).unwrap();
        assert_eq!(va["value"], vb["value"]);
        assert_eq!(va["route"], "fft");
    }
}
