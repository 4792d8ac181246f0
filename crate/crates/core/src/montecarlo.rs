//! Monte Carlo harness for the normalized statistic `L^γ(Ê - T)`.
//!
//! Replicate `r` of the row at scale `L` draws its path from
//! `RngSpec { master_seed: derive_seed(master_seed, L.to_bits()), stream_index: r }`,
//! so every number in a report is a pure function of the config. Replicates
//! run on a rayon pool and are collected in replicate order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::estimators::{estimate, FrequencyScale, Route, DEFAULT_KAPPA, DEFAULT_QUADRATURE_TOL};
use crate::gaussian_paths::{HurstParam, MixedSampler, SampleGrid, SamplerMethod};
use crate::limit_theory::{
    mu_bias_unchecked, normalization_for, rho_bound, sigma_sq_unchecked, Center, LimitKind, Normalization, Regime,
};
use crate::mixing_laws::{verify_assumption1, AssumptionStatus, MixingLaw, ASSUMPTION_DEFAULT_TOL};
use crate::output::fmt_f64;
use crate::rng::{derive_seed, RngSpec};
use crate::summation::compensated_sum;

/// Smallest replication count accepted for distributional tests.
pub const MIN_REPLICATIONS: usize = 100;
/// Relative band within which an empirical variance "matches" a candidate.
pub const VARIANCE_MATCH_BAND: f64 = 0.2;
/// Added to `3/2 - 2H` to get the exponent margin of the growth check.
pub const GROWTH_EPSILON_MARGIN: f64 = 0.1;
/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "QVLAB_THREADS";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceTarget {
    /// Resolve between `σ²_T` and `σ²_T/2` from the data.
    #[default]
    Auto,
    SigmaSq,
    HalfSigmaSq,
    TwiceSigmaSq,
}

impl VarianceTarget {
    fn factor(self) -> Option<f64> {
        match self {
            VarianceTarget::Auto => None,
            VarianceTarget::SigmaSq => Some(1.0),
            VarianceTarget::HalfSigmaSq => Some(0.5),
            VarianceTarget::TwiceSigmaSq => Some(2.0),
        }
    }
}

impl FromStr for VarianceTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "sigma_sq" => Ok(Self::SigmaSq),
            "half_sigma_sq" => Ok(Self::HalfSigmaSq),
            "twice_sigma_sq" => Ok(Self::TwiceSigmaSq),
            other => Err(config_error(
                "variance_target",
                format!("expected auto, sigma_sq, half_sigma_sq or twice_sigma_sq, got `{other}`"),
            )),
        }
    }
}

fn config_error(field: &str, constraint: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        constraint: constraint.into(),
    }
}

fn default_horizon() -> f64 {
    1.0
}
fn default_scale() -> f64 {
    1.0
}
fn default_m() -> usize {
    2000
}
fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}
fn default_true() -> bool {
    true
}
fn default_quadrature_tol() -> f64 {
    DEFAULT_QUADRATURE_TOL
}
fn default_radius() -> f64 {
    0.5
}

/// Experiment configuration; also the flat TOML schema of config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub h: HurstParam,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    pub law: String,
    #[serde(default = "default_scale")]
    pub law_scale: f64,
    #[serde(rename = "L_grid")]
    pub l_grid: Vec<f64>,
    #[serde(rename = "M", default = "default_m")]
    pub replications: usize,
    /// Grid rule: `n(L)` is the smallest power of two with `L·T/n ≤ kappa`.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default)]
    pub route: Route,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_true")]
    pub includes_fbm: bool,
    #[serde(default)]
    pub allow_assumption_violation: bool,
    #[serde(default)]
    pub variance_target: VarianceTarget,
    #[serde(default)]
    pub sampler: SamplerMethod,
    /// Absolute tolerance of the quadrature route.
    #[serde(default = "default_quadrature_tol")]
    pub quadrature_tol: f64,
    /// Half-width of the band around `μ` in the concentration summary.
    #[serde(default = "default_radius")]
    pub concentration_radius: f64,
}

impl ExperimentConfig {
    /// Defaults for everything but the Hurst index, law and scale grid.
    pub fn new(h: HurstParam, law: &str, l_grid: Vec<f64>) -> Self {
        Self {
            h,
            horizon: default_horizon(),
            law: law.to_string(),
            law_scale: default_scale(),
            l_grid,
            replications: default_m(),
            kappa: default_kappa(),
            route: Route::default(),
            master_seed: 0,
            includes_fbm: true,
            allow_assumption_violation: false,
            variance_target: VarianceTarget::Auto,
            sampler: SamplerMethod::default(),
            quadrature_tol: default_quadrature_tol(),
            concentration_radius: default_radius(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let field = msg
                .split('`')
                .nth(1)
                .filter(|_| msg.contains("unknown field") || msg.contains("missing field"))
                .unwrap_or("config")
                .to_string();
            Error::Config {
                field,
                constraint: e.to_string().trim().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_error("config", e.to_string()))
    }

    pub fn mixing_law(&self) -> Result<MixingLaw> {
        let base: MixingLaw = self
            .law
            .parse()
            .map_err(|e: Error| config_error("law", e.to_string()))?;
        MixingLaw::new(base.kind(), base.scale() * self.law_scale).map_err(|e| config_error("law_scale", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(config_error("T", format!("must be positive and finite, got {}", self.horizon)));
        }
        self.mixing_law()?;
        if self.l_grid.is_empty() {
            return Err(config_error("L_grid", "must contain at least one scale"));
        }
        if let Some(bad) = self.l_grid.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(config_error("L_grid", format!("entries must be > 0 and finite, got {bad}")));
        }
        if self.l_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config_error("L_grid", "must be strictly increasing"));
        }
        if self.replications < MIN_REPLICATIONS {
            return Err(config_error(
                "M",
                format!("at least {MIN_REPLICATIONS} replications are needed, got {}", self.replications),
            ));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(config_error("kappa", format!("must be positive, got {}", self.kappa)));
        }
        if self.master_seed > i64::MAX as u64 {
            return Err(config_error("master_seed", "must fit in a signed 64-bit integer"));
        }
        if self.includes_fbm && self.h.is_brownian() {
            return Err(config_error("h", "the mixed model needs h > 1/2; set includes_fbm = false for X = W"));
        }
        if !(self.quadrature_tol > 0.0) {
            return Err(config_error("quadrature_tol", "must be positive"));
        }
        if !(self.concentration_radius > 0.0) {
            return Err(config_error("concentration_radius", "must be positive"));
        }
        Ok(())
    }

    /// Steps used at scale `l`.
    pub fn steps_for(&self, l: f64) -> usize {
        steps_for_scale(l, self.horizon, self.kappa)
    }

    pub fn normalization(&self) -> Normalization {
        normalization_for(self.h, self.includes_fbm)
    }

    pub fn row_seed(&self, l: f64) -> u64 {
        derive_seed(self.master_seed, l.to_bits())
    }
}

/// Smallest power of two `n ≥ 2` with `l·horizon/n ≤ kappa`.
pub fn steps_for_scale(l: f64, horizon: f64, kappa: f64) -> usize {
    let need = (l * horizon / kappa).ceil().max(2.0);
    (need as usize).next_power_of_two()
}

// Everything shared by the replicates of one row.
struct RowContext<'a> {
    config: &'a ExperimentConfig,
    law: MixingLaw,
    l: FrequencyScale,
    gamma: f64,
    seed: u64,
    sampler: MixedSampler,
}

impl<'a> RowContext<'a> {
    fn new(config: &'a ExperimentConfig, l: f64) -> Result<Self> {
        let law = config.mixing_law()?;
        let scale = FrequencyScale::new(l)?;
        let grid = SampleGrid::new(config.horizon, config.steps_for(l))?;
        let sampler = MixedSampler::new(grid, config.h, config.includes_fbm, config.sampler)?;
        Ok(Self {
            config,
            law,
            l: scale,
            gamma: config.normalization().gamma,
            seed: config.row_seed(l),
            sampler,
        })
    }

    fn replicate(&self, replicate: u64) -> Result<f64> {
        let path = self.sampler.sample(RngSpec::new(self.seed, replicate));
        let e = estimate(&path, self.l, &self.law, self.config.route, self.config.quadrature_tol).map_err(|source| {
            Error::Replicate {
                replicate,
                l: self.l.value(),
                source: Box::new(source),
            }
        })?;
        Ok(self.l.value().powf(self.gamma) * (e.value - self.config.horizon))
    }
}

/// One draw of `L^γ(Ê - T)`.
pub fn run_replication(config: &ExperimentConfig, l: f64, replicate: u64) -> Result<f64> {
    config.validate()?;
    RowContext::new(config, l)?.replicate(replicate)
}

/// One-sample Kolmogorov–Smirnov distance to `N(mean, variance)`.
pub fn ks_statistic(samples: &[f64], mean: f64, variance: f64) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "samples",
            reason: format!("need at least 2 samples, got {}", samples.len()),
        });
    }
    if !(variance > 0.0) {
        return Err(Error::InvalidParameter {
            name: "variance",
            reason: format!("must be positive, got {variance}"),
        });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sd = variance.sqrt();
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let f = normal_cdf((x - mean) / sd);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at level `alpha`.
pub fn ks_two_sample_critical(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n * m) as f64).sqrt()
}

/// Least-squares slope of `ln value` against `ln L`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "points",
            reason: format!("need at least 2 points, got {}", points.len()),
        });
    }
    if let Some((l, v)) = points.iter().find(|(l, v)| !(*l > 0.0 && *v > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "points",
            reason: format!("L and value must be positive, got ({l}, {v})"),
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = compensated_sum(xs.iter().copied()) / n;
    let my = compensated_sum(ys.iter().copied()) / n;
    let sxy = compensated_sum(xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)));
    let sxx = compensated_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    if sxx == 0.0 {
        return Err(Error::InvalidParameter {
            name: "points",
            reason: "all L values coincide".into(),
        });
    }
    Ok(sxy / sxx)
}

fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = compensated_sum(xs.iter().copied()) / n;
    let var = compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0);
    (mean, var)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthCheck {
    pub epsilon: f64,
    /// Mean of `|√L (Ê - T)|`, expected to grow with `L`.
    pub mean_abs_sqrt_l: f64,
    /// Mean of `|L^{1/2-ε} (Ê - T)|`, expected to shrink with `L`.
    pub mean_abs_l_half_minus_eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Concentration {
    pub radius: f64,
    /// Fraction of replicates within `radius` of `μ`.
    pub fraction_within: f64,
    pub growth: GrowthCheck,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    #[serde(rename = "L")]
    pub l: f64,
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_err: f64,
    /// KS distance to the limit law; absent for a degenerate limit.
    pub ks: Option<f64>,
    #[serde(rename = "M")]
    pub replications: usize,
    pub row_seed: u64,
    pub concentration: Option<Concentration>,
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceCandidate {
    pub name: String,
    pub value: f64,
    /// Empirical variance over candidate.
    pub ratio: f64,
    pub matches: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceResolution {
    #[serde(rename = "at_L")]
    pub at_l: f64,
    pub empirical: f64,
    pub candidates: Vec<VarianceCandidate>,
    /// Name of the single matching candidate, if exactly one matched.
    pub matched: Option<String>,
    /// `2σ²_T` is not a hypothesis of the ledger; its ratio is informational.
    pub twice_sigma_sq_ratio: f64,
    /// Variance used for the KS targets.
    pub chosen: String,
    pub chosen_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slopes {
    pub ks: Option<f64>,
    pub rho: Option<f64>,
    pub variance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryEcho {
    pub sigma_sq: f64,
    pub mu: f64,
    pub regime: Regime,
    pub gamma: f64,
    pub center: Center,
    pub limit: LimitKind,
    pub assumption: AssumptionStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub theory: TheoryEcho,
    pub grid_rule: String,
    pub rows: Vec<ExperimentRow>,
    pub variance_resolution: Option<VarianceResolution>,
    pub slopes: Slopes,
    pub threads: usize,
    pub wall_time: f64,
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| config_error(THREADS_ENV, format!("must be a positive integer, got `{v}`")))?;
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

/// Runs the experiment with the worker count from `QVLAB_THREADS`
/// (default: all cores).
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with_threads(config, threads_from_env()?)
}

pub fn run_experiment_with_threads(config: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentReport> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| config_error(THREADS_ENV, e.to_string()))?;
    let threads = pool.current_num_threads();
    pool.install(|| run_in_pool(config, threads))
}

fn run_in_pool(config: &ExperimentConfig, threads: usize) -> Result<ExperimentReport> {
    let start = Instant::now();
    let law = config.mixing_law()?;
    let check = verify_assumption1(&law, ASSUMPTION_DEFAULT_TOL)?;
    if !check.holds() && !config.allow_assumption_violation {
        return Err(Error::AssumptionViolated {
            law: law.to_string(),
            detail: format!(
                "status {:?}; set allow_assumption_violation = true to run anyway",
                check.status
            ),
        });
    }
    let norm = config.normalization();
    let sigma_sq = sigma_sq_unchecked(&law, config.horizon)?;
    let mu = if config.includes_fbm {
        match mu_bias_unchecked(&law, config.h, config.horizon) {
            Ok(v) => v,
            Err(e) if config.allow_assumption_violation && !check.holds() => {
                log::warn!("μ unavailable for {law}: {e}");
                f64::NAN
            }
            Err(e) => return Err(e),
        }
    } else {
        0.0
    };
    let center = match norm.center {
        Center::Zero => 0.0,
        Center::Mu => mu,
    };

    let mut samples = Vec::with_capacity(config.l_grid.len());
    let mut rows = Vec::with_capacity(config.l_grid.len());
    for &l in &config.l_grid {
        let row_start = Instant::now();
        let ctx = RowContext::new(config, l)?;
        let values: Vec<f64> = (0..config.replications as u64)
            .into_par_iter()
            .map(|r| ctx.replicate(r))
            .collect::<Result<_>>()?;
        let (mean, variance) = mean_and_variance(&values);
        let concentration = (norm.limit == LimitKind::Degenerate).then(|| concentration(config, l, mu, norm.gamma, &values));
        rows.push(ExperimentRow {
            l,
            n: config.steps_for(l),
            mean,
            variance,
            std_err: (variance / values.len() as f64).sqrt(),
            ks: None,
            replications: values.len(),
            row_seed: ctx.seed,
            concentration,
            wall_time: row_start.elapsed().as_secs_f64(),
        });
        samples.push(values);
    }

    let variance_resolution = (norm.limit == LimitKind::Gaussian).then(|| {
        let last = rows.last().expect("non-empty grid");
        resolve_variance(last.l, last.variance, sigma_sq, config.variance_target)
    });
    if let Some(res) = &variance_resolution {
        for (row, values) in rows.iter_mut().zip(&samples) {
            row.ks = Some(ks_statistic(values, center, res.chosen_value)?);
        }
    }

    let ks_points: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.ks.map(|k| (r.l, k))).collect();
    let ks = loglog_slope(&ks_points).ok();
    let rho = if config.includes_fbm && config.h.value() > 0.75 && check.holds() {
        let pts: Result<Vec<(f64, f64)>> = config
            .l_grid
            .iter()
            .map(|&l| Ok((l, rho_bound(&law, config.h, config.horizon, l)?)))
            .collect();
        loglog_slope(&pts?).ok()
    } else {
        None
    };
    let var_points: Vec<(f64, f64)> = rows.iter().map(|r| (r.l, r.variance)).collect();
    let variance = loglog_slope(&var_points).ok();

    Ok(ExperimentReport {
        config: config.clone(),
        theory: TheoryEcho {
            sigma_sq,
            mu,
            regime: norm.regime,
            gamma: norm.gamma,
            center: norm.center,
            limit: norm.limit,
            assumption: check.status,
        },
        grid_rule: format!("n(L) = smallest power of two >= 2 with L*T/n <= {}", config.kappa),
        rows,
        variance_resolution,
        slopes: Slopes { ks, rho, variance },
        threads,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn concentration(config: &ExperimentConfig, l: f64, mu: f64, gamma: f64, values: &[f64]) -> Concentration {
    let radius = config.concentration_radius;
    let within = values.iter().filter(|v| (*v - mu).abs() <= radius).count();
    let epsilon = 1.5 - 2.0 * config.h.value() + GROWTH_EPSILON_MARGIN;
    let raw = |v: f64| v / l.powf(gamma);
    let n = values.len() as f64;
    Concentration {
        radius,
        fraction_within: within as f64 / n,
        growth: GrowthCheck {
            epsilon,
            mean_abs_sqrt_l: compensated_sum(values.iter().map(|&v| (l.sqrt() * raw(v)).abs())) / n,
            mean_abs_l_half_minus_eps: compensated_sum(values.iter().map(|&v| (l.powf(0.5 - epsilon) * raw(v)).abs())) / n,
        },
    }
}

/// Compares an empirical variance with `σ²` and `σ²/2`.
///
/// A candidate matches when the ratio is within 20% of one. With
/// `VarianceTarget::Auto` the single match is chosen, and without a unique
/// match the candidate closest in `|ln ratio|`.
pub fn resolve_variance(at_l: f64, empirical: f64, sigma_sq: f64, target: VarianceTarget) -> VarianceResolution {
    let candidates: Vec<VarianceCandidate> = [("sigma_sq", sigma_sq), ("half_sigma_sq", 0.5 * sigma_sq)]
        .into_iter()
        .map(|(name, value)| {
            let ratio = empirical / value;
            VarianceCandidate {
                name: name.to_string(),
                value,
                ratio,
                matches: (ratio - 1.0).abs() <= VARIANCE_MATCH_BAND,
            }
        })
        .collect();
    let matching: Vec<&VarianceCandidate> = candidates.iter().filter(|c| c.matches).collect();
    let matched = (matching.len() == 1).then(|| matching[0].name.clone());
    let (chosen, chosen_value) = match target.factor() {
        Some(f) => {
            let name = match target {
                VarianceTarget::SigmaSq => "sigma_sq",
                VarianceTarget::HalfSigmaSq => "half_sigma_sq",
                _ => "twice_sigma_sq",
            };
            (name.to_string(), f * sigma_sq)
        }
        None => match matching.as_slice() {
            [one] => (one.name.clone(), one.value),
            _ => {
                let best = candidates
                    .iter()
                    .min_by(|a, b| a.ratio.ln().abs().total_cmp(&b.ratio.ln().abs()))
                    .expect("two candidates");
                (best.name.clone(), best.value)
            }
        },
    };
    VarianceResolution {
        at_l,
        empirical,
        candidates,
        matched,
        twice_sigma_sq_ratio: empirical / (2.0 * sigma_sq),
        chosen,
        chosen_value,
    }
}

impl ExperimentReport {
    /// CSV `L,n,mean,variance,ks,M`; a missing KS distance is written `NaN`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "L,n,mean,variance,ks,M")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_f64(r.l),
                r.n,
                fmt_f64(r.mean),
                fmt_f64(r.variance),
                r.ks.map_or_else(|| "NaN".to_string(), fmt_f64),
                r.replications
            )?;
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        fs::write(&csv, buf)?;
        let mut buf = Vec::new();
        self.write_json(&mut buf)?;
        fs::write(&json, buf)?;
        Ok((csv, json))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerryEsseenTriple {
    #[serde(rename = "L")]
    pub l: f64,
    pub ks: f64,
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerryEsseenSummary {
    pub triples: Vec<BerryEsseenTriple>,
    pub ks_slope: f64,
    pub rho_slope: f64,
    /// `ks_slope - rho_slope`.
    pub slope_gap: f64,
    pub ks_decreasing: bool,
}

/// `(L, KS, ρ(L))` for a supercritical report, with both log-log slopes.
pub fn berry_esseen_summary(report: &ExperimentReport) -> Result<BerryEsseenSummary> {
    let cfg = &report.config;
    if !(cfg.includes_fbm && cfg.h.value() > 0.75) {
        return Err(Error::HypothesisViolated(format!(
            "the Berry–Esseen comparison needs the mixed model with H ∈ (3/4, 1), got H = {}",
            cfg.h.value()
        )));
    }
    let law = cfg.mixing_law()?;
    let triples = report
        .rows
        .iter()
        .map(|r| {
            Ok(BerryEsseenTriple {
                l: r.l,
                ks: r.ks.unwrap_or(f64::NAN),
                rho: rho_bound(&law, cfg.h, cfg.horizon, r.l)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ks_slope = loglog_slope(&triples.iter().map(|t| (t.l, t.ks)).collect::<Vec<_>>())?;
    let rho_slope = loglog_slope(&triples.iter().map(|t| (t.l, t.rho)).collect::<Vec<_>>())?;
    Ok(BerryEsseenSummary {
        ks_decreasing: triples.windows(2).all(|w| w[1].ks < w[0].ks),
        triples,
        ks_slope,
        rho_slope,
        slope_gap: ks_slope - rho_slope,
    })
}

/// Runs a supercritical experiment and its Berry–Esseen comparison.
pub fn berry_esseen(config: &ExperimentConfig) -> Result<(ExperimentReport, BerryEsseenSummary)> {
    if !(config.includes_fbm && config.h.value() > 0.75) {
        return Err(Error::HypothesisViolated(format!(
            "the Berry–Esseen comparison needs the mixed model with H ∈ (3/4, 1), got H = {}",
            config.h.value()
        )));
    }
    let report = run_experiment(config)?;
    let summary = berry_esseen_summary(&report)?;
    Ok((report, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn cfg() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(HurstParam::new(0.9).unwrap(), "gaussian", vec![2.0, 4.0]);
        c.replications = 100;
        c
    }

    #[test]
    fn ks_fixtures() {
        assert_eq!(ks_statistic(&[1.0; 10], 1.0, 2.0).unwrap(), 0.5);
        let shifted: Vec<f64> = (0..200).map(|i| 3.0 + 0.001 * i as f64).collect();
        assert!(ks_statistic(&shifted, 0.0, 1.0).unwrap() > 0.9);
        assert!(ks_statistic(&[1.0], 0.0, 1.0).is_err());
        assert!(ks_statistic(&[1.0, 2.0], 0.0, 0.0).is_err());
    }

    #[test]
    fn ks_of_target_samples_is_small() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert!(ks_statistic(&xs, 0.0, 1.0).unwrap() <= 1.63 / 100.0);
    }

    #[test]
    fn slope_fixtures() {
        let pts: Vec<(f64, f64)> = [10.0, 100.0, 1000.0].iter().map(|&l: &f64| (l, l.powf(-0.3))).collect();
        assert!((loglog_slope(&pts).unwrap() + 0.3).abs() < 1e-12);
        let two = loglog_slope(&[(2.0, 3.0), (8.0, 12.0)]).unwrap();
        assert!((two - 1.0).abs() < 1e-12);
        assert!(loglog_slope(&[(1.0, 0.0), (2.0, 1.0)]).is_err());
        assert!(loglog_slope(&[(1.0, 1.0)]).is_err());
    }

    #[test]
    fn grid_rule() {
        assert_eq!(steps_for_scale(25.0, 1.0, 0.2), 128);
        assert_eq!(steps_for_scale(200.0, 1.0, 0.2), 1024);
        assert_eq!(steps_for_scale(0.01, 1.0, 0.2), 2);
        assert_eq!(steps_for_scale(12.8, 1.0, 0.2), 64);
    }

    #[test]
    fn variance_resolution_rules() {
        let r = resolve_variance(100.0, 0.95, 1.0, VarianceTarget::Auto);
        assert_eq!(r.matched.as_deref(), Some("sigma_sq"));
        let r = resolve_variance(100.0, 0.52, 1.0, VarianceTarget::Auto);
        assert_eq!(r.chosen, "half_sigma_sq");
        let r = resolve_variance(100.0, 2.1, 1.0, VarianceTarget::Auto);
        assert_eq!(r.matched, None);
        assert_eq!(r.chosen, "sigma_sq");
        assert!((r.twice_sigma_sq_ratio - 1.05).abs() < 1e-12);
        let r = resolve_variance(100.0, 2.1, 1.0, VarianceTarget::TwiceSigmaSq);
        assert_eq!(r.chosen_value, 2.0);
    }

    #[test]
    fn replication_is_deterministic() {
        let c = cfg();
        let a = run_replication(&c, 4.0, 17).unwrap();
        let b = run_replication(&c, 4.0, 17).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_ne!(a, run_replication(&c, 4.0, 18).unwrap());
    }

    #[test]
    fn pure_brownian_statistic() {
        let mut c = cfg();
        c.includes_fbm = false;
        let l = 4.0;
        let stat = run_replication(&c, l, 3).unwrap();
        let grid = SampleGrid::new(1.0, c.steps_for(l)).unwrap();
        let path = MixedSampler::new(grid, c.h, false, c.sampler)
            .unwrap()
            .sample(RngSpec::new(c.row_seed(l), 3));
        let e = crate::estimators::rp_fft(&path, FrequencyScale::new(l).unwrap(), &MixingLaw::gaussian()).value;
        assert_eq!(stat, l.sqrt() * (e - 1.0));
    }

    #[test]
    fn config_validation() {
        let mut c = cfg();
        c.l_grid = vec![4.0, 2.0];
        assert!(matches!(c.validate(), Err(Error::Config { field, .. }) if field == "L_grid"));
        let mut c = cfg();
        c.replications = 10;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.law = "laplace".into();
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.h = HurstParam::new(0.5).unwrap();
        assert!(c.validate().is_err());
        c.includes_fbm = false;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn toml_round_trip_and_defaults() {
        let minimal = "h = 0.8\nlaw = \"cauchy\"\nL_grid = [10.0, 20.0]\nM = 500\n";
        let c = ExperimentConfig::from_toml_str(minimal).unwrap();
        assert_eq!(c.horizon, 1.0);
        assert_eq!(c.route, Route::Fft);
        assert_eq!(c.steps_for(20.0), 128);
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, c);
        let err = ExperimentConfig::from_toml_str("h = 0.8\nlaw = \"cauchy\"\nL_grid = [1.0]\nfoo = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config { field, .. } if field == "foo"));
    }

    #[test]
    fn uniform_law_needs_override() {
        let mut c = cfg();
        c.law = "uniform".into();
        assert!(matches!(run_experiment_with_threads(&c, Some(2)), Err(Error::AssumptionViolated { .. })));
        c.allow_assumption_violation = true;
        let r = run_experiment_with_threads(&c, Some(2)).unwrap();
        assert_eq!(r.theory.assumption, AssumptionStatus::Fails);
        assert!(r.rows.iter().all(|row| row.ks.is_some()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn ks_is_a_distance(xs in proptest::collection::vec(-5.0f64..5.0, 2..60), m in -1.0f64..1.0, v in 0.1f64..4.0) {
            let d = ks_statistic(&xs, m, v).unwrap();
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert!(d >= 0.5 / xs.len() as f64 - 1e-12);
        }

        #[test]
        fn slope_recovers_power_laws(p in -2.0f64..2.0, c in 0.1f64..10.0) {
            let pts: Vec<(f64, f64)> = [3.0, 7.0, 20.0, 55.0].iter().map(|&l: &f64| (l, c * l.powf(p))).collect();
            prop_assert!((loglog_slope(&pts).unwrap() - p).abs() < 1e-10);
        }
    }
}
