//! Periodogram, realized quadratic variation and the randomized periodogram.
//!
//! Stochastic integrals are left-endpoint Riemann–Stieltjes sums: increment
//! `k` (1-based) sits at time `t_{k-1}`. The randomized periodogram
//!
//! ```text
//! Ê = ∫ I_T(X; Lx) g(x) dx = Σ ΔX_k² + 2 Σ_{i<j} φ(L (t_{j-1} - t_{i-1})) ΔX_i ΔX_j
//! ```
//!
//! is available by three routes that agree to rounding: direct quadrature
//! of the left side, the O(n²) double sum, and an FFT evaluation of the
//! same Toeplitz quadratic form.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fft::symmetric_toeplitz_apply;
use crate::gaussian_paths::{PathSample, SampleGrid};
use crate::mixing_laws::{LawKind, MixingLaw};
use crate::quadrature::{integrate_partitioned, Tolerance};
use crate::summation::{compensated_dot, compensated_sum, CompensatedSum};

/// Default resolution guard: `L·Δt ≤ κ`.
pub const DEFAULT_KAPPA: f64 = 0.2;

/// Default absolute tolerance of the quadrature route.
pub const DEFAULT_QUADRATURE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    DirectQuadrature,
    Kernel,
    #[default]
    Fft,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::DirectQuadrature => "direct-quadrature",
            Route::Kernel => "kernel",
            Route::Fft => "fft",
        }
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Route {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct-quadrature" | "quadrature" => Ok(Route::DirectQuadrature),
            "kernel" => Ok(Route::Kernel),
            "fft" => Ok(Route::Fft),
            other => Err(invalid(
                "route",
                format!("unknown route `{other}` (expected direct-quadrature, kernel or fft)"),
            )),
        }
    }
}

/// Frequency scale `L > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FrequencyScale(f64);

impl FrequencyScale {
    pub fn new(l: f64) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(invalid("L", format!("must be > 0 and finite, got {l}")));
        }
        Ok(Self(l))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Warning text when the kernel is sampled too coarsely, `L·Δt > κ`.
    pub fn resolution_warning(self, grid: &SampleGrid, kappa: f64) -> Option<String> {
        let ratio = self.0 * grid.dt();
        (ratio > kappa).then(|| {
            format!(
                "resolution guard: L·Δt = {ratio:.4} exceeds κ = {kappa} (L = {}, n = {}); \
                 the kernel φ(L·) is undersampled",
                self.0,
                grid.steps()
            )
        })
    }
}

impl TryFrom<f64> for FrequencyScale {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FrequencyScale> for f64 {
    fn from(l: FrequencyScale) -> f64 {
        l.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub value: f64,
    pub route: Route,
    #[serde(rename = "L")]
    pub l: f64,
    pub n: usize,
    /// Seconds.
    pub wall_time: f64,
}

fn warn_resolution(path: &PathSample, l: FrequencyScale) {
    if let Some(msg) = l.resolution_warning(&path.grid, DEFAULT_KAPPA) {
        log::warn!("{msg}");
    }
}

/// `|Σ_k e^{iλ t_{k-1}} ΔX_k|²`.
pub fn periodogram(path: &PathSample, lambda: f64) -> f64 {
    periodogram_of(&path.dx, path.grid.dt(), lambda)
}

fn periodogram_of(dx: &[f64], dt: f64, lambda: f64) -> f64 {
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for (k, &d) in dx.iter().enumerate() {
        let (s, c) = (lambda * (k as f64 * dt)).sin_cos();
        re.add(c * d);
        im.add(s * d);
    }
    let (re, im) = (re.value(), im.value());
    re * re + im * im
}

/// `Σ_k ΔX_k²`.
pub fn realized_qv(path: &PathSample) -> f64 {
    compensated_sum(path.dx.iter().map(|d| d * d))
}

/// The quadratic form `Σ_{i,j} φ(L |i - j| Δt) ΔX_i ΔX_j` by the double sum.
///
/// `l = 0` is accepted here (`φ ≡ 1`, giving `X_T²`). Lags are evaluated in
/// parallel and combined in lag order, so the result does not depend on the
/// thread count.
pub fn kernel_quadratic_form(dx: &[f64], dt: f64, l: f64, law: &MixingLaw) -> f64 {
    let n = dx.len();
    let lagged: Vec<f64> = (1..n)
        .into_par_iter()
        .with_min_len(64)
        .map(|lag| law.charfn(l * (lag as f64 * dt)) * compensated_dot(&dx[..n - lag], &dx[lag..]))
        .collect();
    let diagonal = compensated_dot(dx, dx);
    let off = compensated_sum(lagged);
    diagonal + 2.0 * off
}

/// Same quadratic form through a circulant embedding and FFT convolution.
pub fn fft_quadratic_form(dx: &[f64], dt: f64, l: f64, law: &MixingLaw) -> f64 {
    let column: Vec<f64> = (0..dx.len()).map(|k| law.charfn(l * (k as f64 * dt))).collect();
    let y = symmetric_toeplitz_apply(&column, dx);
    compensated_dot(dx, &y)
}

/// Randomized periodogram by the exact double sum.
pub fn rp_kernel(path: &PathSample, l: FrequencyScale, law: &MixingLaw) -> EstimateResult {
    warn_resolution(path, l);
    let start = Instant::now();
    let value = kernel_quadratic_form(&path.dx, path.grid.dt(), l.value(), law);
    EstimateResult {
        value,
        route: Route::Kernel,
        l: l.value(),
        n: path.grid.steps(),
        wall_time: start.elapsed().as_secs_f64(),
    }
}

/// Randomized periodogram by FFT, O(n log n).
pub fn rp_fft(path: &PathSample, l: FrequencyScale, law: &MixingLaw) -> EstimateResult {
    warn_resolution(path, l);
    let start = Instant::now();
    let value = fft_quadratic_form(&path.dx, path.grid.dt(), l.value(), law);
    EstimateResult {
        value,
        route: Route::Fft,
        l: l.value(),
        n: path.grid.steps(),
        wall_time: start.elapsed().as_secs_f64(),
    }
}

/// Randomized periodogram by quadrature of `∫ I_T(X; Lx) g(x) dx`.
///
/// On a uniform grid `I(λ)` is `2π/Δt`-periodic, so in `x` the integral
/// folds onto one half period `[0, P/2]`, `P = 2π/(LΔt)`, against the
/// periodized density. Where the law has thin tails the range is cut at the
/// point beyond which `P(|ξ| > x)·sup I < tol/2`, with `sup I ≤ (Σ|ΔX|)²`.
/// `tol` is absolute; the two-point law is evaluated exactly.
pub fn rp_quadrature(path: &PathSample, l: FrequencyScale, law: &MixingLaw, tol: f64) -> Result<EstimateResult> {
    if !(tol > 0.0) {
        return Err(invalid("tol", format!("must be positive, got {tol}")));
    }
    warn_resolution(path, l);
    let start = Instant::now();
    let dt = path.grid.dt();
    let n = path.grid.steps();
    let lv = l.value();
    let value = if law.kind() == LawKind::TwoPoint {
        periodogram_of(&path.dx, dt, lv * law.scale())
    } else {
        let period = 2.0 * PI / (lv * dt);
        let half = 0.5 * period;
        let sup_i = compensated_sum(path.dx.iter().map(|d| d.abs())).powi(2);
        let upper = match law.kind() {
            LawKind::Gaussian => half.min(gaussian_cut(law, 0.5 * tol / sup_i.max(f64::MIN_POSITIVE))),
            _ => half,
        };
        let mut points = oscillation_partition(upper, period / n as f64);
        if let Some(r) = law.support_radius() {
            // kinks of the folded density sit at ±r and 0 modulo P
            let reach = (r / period).ceil() as i64 + 1;
            for k in -reach..=reach {
                let shift = k as f64 * period;
                for p in [shift - r, shift, shift + r] {
                    if p > 0.0 && p < upper {
                        points.push(p);
                    }
                }
            }
            points.sort_by(f64::total_cmp);
            points.dedup();
        }
        let integrand = |x: f64| {
            let g = law.wrapped_density(x, period).unwrap_or(0.0);
            if g == 0.0 {
                0.0
            } else {
                periodogram_of(&path.dx, dt, lv * x) * g
            }
        };
        let budget = (points.len() * 64).max(20_000);
        let r = integrate_partitioned(integrand, &points, Tolerance::absolute(0.25 * tol).with_budget(budget))
            .map_err(|e| match e {
                Error::QuadratureBudget {
                    estimate,
                    error,
                    evaluations,
                } => Error::QuadratureBudget {
                    estimate: 2.0 * estimate,
                    error: 2.0 * error,
                    evaluations,
                },
                other => other,
            })?;
        2.0 * r.value
    };
    Ok(EstimateResult {
        value,
        route: Route::DirectQuadrature,
        l: lv,
        n,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

// Smallest x with P(|ξ| > x) ≤ mass for the Gaussian law, by bisection.
fn gaussian_cut(law: &MixingLaw, mass: f64) -> f64 {
    let mut hi = law.scale();
    while law.tail_mass(hi) > mass {
        hi *= 2.0;
        if hi > 1e6 * law.scale() {
            return hi;
        }
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if law.tail_mass(mid) > mass {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

// One panel per oscillation of I(Lx) in x (width P/n), at most 2^16 panels.
fn oscillation_partition(upper: f64, width: f64) -> Vec<f64> {
    let panels = ((upper / width).ceil() as usize).clamp(1, 1 << 16);
    (0..=panels).map(|i| upper * i as f64 / panels as f64).collect()
}

/// Dispatches to one route. `tol` only affects the quadrature route.
pub fn estimate(path: &PathSample, l: FrequencyScale, law: &MixingLaw, route: Route, tol: f64) -> Result<EstimateResult> {
    match route {
        Route::Kernel => Ok(rp_kernel(path, l, law)),
        Route::Fft => Ok(rp_fft(path, l, law)),
        Route::DirectQuadrature => rp_quadrature(path, l, law, tol),
    }
}
