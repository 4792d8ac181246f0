//! Symmetric randomization laws for the frequency `ξ`.
//!
//! A law enters the estimator only through its density `g` and its real,
//! even characteristic function `φ`. Both are closed-form callables; every
//! law carries an optional scale `s` (the law of `s·ξ`).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate, integrate_partitioned, integrate_to_infinity, Tolerance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawKind {
    /// Standard normal, `φ(t) = e^{-t²/2}`.
    Gaussian,
    /// Standard Cauchy, `φ(t) = e^{-|t|}`.
    Cauchy,
    /// Triangular density `(1 - |x|)₊`, `φ(t) = (sin(t/2) / (t/2))²`.
    Triangular,
    /// Uniform on `[-1, 1]`, `φ(t) = sin t / t`. Its characteristic function
    /// is not absolutely integrable.
    Uniform,
    /// `±1` with probability ½ each, `φ(t) = cos t`. Has no density; kept as
    /// a degenerate test law.
    TwoPoint,
}

impl LawKind {
    pub fn name(self) -> &'static str {
        match self {
            LawKind::Gaussian => "gaussian",
            LawKind::Cauchy => "cauchy",
            LawKind::Triangular => "triangular",
            LawKind::Uniform => "uniform",
            LawKind::TwoPoint => "two-point",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingLaw {
    kind: LawKind,
    scale: f64,
}

impl MixingLaw {
    pub fn new(kind: LawKind, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid("law scale", format!("must be positive and finite, got {scale}")));
        }
        Ok(Self { kind, scale })
    }

    pub fn gaussian() -> Self {
        Self {
            kind: LawKind::Gaussian,
            scale: 1.0,
        }
    }

    pub fn cauchy() -> Self {
        Self {
            kind: LawKind::Cauchy,
            scale: 1.0,
        }
    }

    pub fn triangular() -> Self {
        Self {
            kind: LawKind::Triangular,
            scale: 1.0,
        }
    }

    pub fn uniform() -> Self {
        Self {
            kind: LawKind::Uniform,
            scale: 1.0,
        }
    }

    pub fn two_point() -> Self {
        Self {
            kind: LawKind::TwoPoint,
            scale: 1.0,
        }
    }

    /// The four laws addressable by name.
    pub fn catalog() -> [MixingLaw; 4] {
        [Self::gaussian(), Self::cauchy(), Self::triangular(), Self::uniform()]
    }

    pub fn kind(&self) -> LawKind {
        self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn has_density(&self) -> bool {
        self.kind != LawKind::TwoPoint
    }

    /// Length over which `φ` decays or oscillates.
    pub fn charfn_scale(&self) -> f64 {
        1.0 / self.scale
    }

    /// `φ(t) = E cos(tξ)`.
    pub fn charfn(&self, t: f64) -> f64 {
        let u = (self.scale * t).abs();
        match self.kind {
            LawKind::Gaussian => (-0.5 * u * u).exp(),
            LawKind::Cauchy => (-u).exp(),
            LawKind::Triangular => {
                let v = 0.5 * u;
                let s = if v < 1e-4 { 1.0 - v * v / 6.0 } else { v.sin() / v };
                s * s
            }
            LawKind::Uniform => {
                if u < 1e-4 {
                    1.0 - u * u / 6.0
                } else {
                    u.sin() / u
                }
            }
            LawKind::TwoPoint => u.cos(),
        }
    }

    /// Density `g(x)`, or `None` for the two-point law.
    pub fn density(&self, x: f64) -> Option<f64> {
        let s = self.scale;
        let y = (x / s).abs();
        let base = match self.kind {
            LawKind::Gaussian => (-0.5 * y * y).exp() / (2.0 * PI).sqrt(),
            LawKind::Cauchy => 1.0 / (PI * (1.0 + y * y)),
            LawKind::Triangular => (1.0 - y).max(0.0),
            LawKind::Uniform => {
                if y <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            LawKind::TwoPoint => return None,
        };
        Some(base / s)
    }

    /// `P(|ξ| > a)`.
    pub fn tail_mass(&self, a: f64) -> f64 {
        let y = (a / self.scale).max(0.0);
        match self.kind {
            LawKind::Gaussian => erfc(y / 2f64.sqrt()),
            LawKind::Cauchy => 1.0 - 2.0 / PI * y.atan(),
            LawKind::Triangular => (1.0 - y).max(0.0).powi(2),
            LawKind::Uniform => (1.0 - y).max(0.0),
            LawKind::TwoPoint => {
                if y < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Radius of the support when it is compact.
    pub fn support_radius(&self) -> Option<f64> {
        match self.kind {
            LawKind::Triangular | LawKind::Uniform | LawKind::TwoPoint => Some(self.scale),
            LawKind::Gaussian | LawKind::Cauchy => None,
        }
    }

    /// Periodized density `Σ_k g(x + k·period)`.
    ///
    /// The Cauchy sum has a closed form; the Gaussian sum is cut once the
    /// remaining terms fall below `1e-17` of the accumulated value.
    pub fn wrapped_density(&self, x: f64, period: f64) -> Option<f64> {
        if !self.has_density() {
            return None;
        }
        let s = self.scale;
        match self.kind {
            LawKind::Cauchy => {
                let c = 2.0 * PI * s / period;
                let theta = 2.0 * PI * x / period;
                let e1 = (-c).exp();
                let e2 = e1 * e1;
                Some((1.0 - e2) / (1.0 + e2 - 2.0 * e1 * theta.cos()) / period)
            }
            LawKind::Gaussian => {
                let x0 = x - (x / period).round() * period;
                let mut total = self.density(x0)?;
                let mut k = 1.0;
                loop {
                    let right = self.density(x0 + k * period)?;
                    let left = self.density(x0 - k * period)?;
                    total += right + left;
                    if right + left <= 1e-17 * total {
                        break;
                    }
                    k += 1.0;
                }
                Some(total)
            }
            _ => {
                let radius = self.support_radius().unwrap_or(s);
                let lo = ((x - radius) / period).floor() as i64 - 1;
                let hi = ((x + radius) / period).ceil() as i64 + 1;
                let mut total = 0.0;
                for k in -hi..=-lo {
                    total += self.density(x + k as f64 * period)?;
                }
                Some(total)
            }
        }
    }

    /// `∫_0^∞ φ²(x) dx` where a closed form is known.
    pub fn sq_charfn_integral_closed_form(&self) -> Option<f64> {
        let s = self.scale;
        match self.kind {
            LawKind::Gaussian => Some(PI.sqrt() / (2.0 * s)),
            LawKind::Cauchy => Some(1.0 / (2.0 * s)),
            LawKind::Triangular => Some(2.0 * PI / (3.0 * s)),
            LawKind::Uniform => Some(PI / (2.0 * s)),
            LawKind::TwoPoint => None,
        }
    }

    /// `∫_c^∞ φ²(y) dy` where a closed form is known.
    pub fn sq_charfn_tail_closed_form(&self, c: f64) -> Option<f64> {
        let s = self.scale;
        match self.kind {
            LawKind::Gaussian => Some(PI.sqrt() / (2.0 * s) * erfc(s * c)),
            LawKind::Cauchy => Some((-2.0 * s * c).exp() / (2.0 * s)),
            _ => None,
        }
    }
}

impl fmt::Display for MixingLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.scale == 1.0 {
            write!(f, "{}", self.name())
        } else {
            write!(f, "{}:{}", self.name(), self.scale)
        }
    }
}

/// Parses `name` or `name:scale` with `name` one of
/// `gaussian | cauchy | triangular | uniform`.
impl FromStr for MixingLaw {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (name, scale) = match s.split_once(':') {
            Some((n, sc)) => {
                let scale: f64 = sc
                    .trim()
                    .parse()
                    .map_err(|_| invalid("law", format!("bad scale `{sc}` in `{s}`")))?;
                (n.trim(), scale)
            }
            None => (s.trim(), 1.0),
        };
        let kind = match name {
            "gaussian" => LawKind::Gaussian,
            "cauchy" => LawKind::Cauchy,
            "triangular" => LawKind::Triangular,
            "uniform" => LawKind::Uniform,
            other => {
                return Err(invalid(
                    "law",
                    format!("unknown law `{other}` (expected gaussian, cauchy, triangular or uniform)"),
                ))
            }
        };
        MixingLaw::new(kind, scale)
    }
}

/// `φ_ξ(t)`.
pub fn charfn(law: &MixingLaw, t: f64) -> f64 {
    law.charfn(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssumptionStatus {
    Holds,
    Fails,
    Undetermined,
}

/// Outcome of the integrability test of `|φ|` on `[0, ∞)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub status: AssumptionStatus,
    /// `∫_0^∞ |φ|` when the status is `Holds`.
    pub value: Option<f64>,
    /// Bound on the part of the integral not covered by the windows.
    pub tail_bound: Option<f64>,
    /// `∫|φ|` over `[0, d]` followed by the dyadic windows `[2^k d, 2^{k+1} d]`,
    /// `d` being the characteristic scale of `φ`.
    pub window_integrals: Vec<f64>,
}

impl AssumptionCheck {
    pub fn holds(&self) -> bool {
        self.status == AssumptionStatus::Holds
    }

    pub fn partial_sums(&self) -> Vec<f64> {
        self.window_integrals
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect()
    }
}

/// Dyadic windows examined before the test gives up.
pub const ASSUMPTION_MAX_WINDOWS: usize = 20;
/// Consecutive non-decaying windows that count as divergence evidence.
pub const ASSUMPTION_DIVERGENCE_STREAK: usize = 8;
const NON_DECAY_RATIO: f64 = 0.95;
const GEOMETRIC_RATIO: f64 = 0.75;

/// Tests `∫_0^∞ |φ(x)| dx < ∞` on dyadic windows.
///
/// * holds: window integrals drop below `tol` with geometric decay (the tail
///   is then bounded by the geometric series), or they decay with ratio at
///   most 0.75 over the last four windows when the window budget runs out;
/// * fails: eight consecutive windows stay above `tol` without decaying
///   (ratio above 0.95), the signature of a logarithmically divergent sum;
/// * undetermined: neither happened within the budget.
pub fn verify_assumption1(law: &MixingLaw, tol: f64) -> Result<AssumptionCheck> {
    if !(tol > 0.0) {
        return Err(invalid("tol", format!("must be positive, got {tol}")));
    }
    let d = law.charfn_scale();
    let abs_phi = |x: f64| law.charfn(x).abs();
    let quad_tol = Tolerance::absolute(0.01 * tol).with_budget(2_000_000);
    let head = integrate(abs_phi, 0.0, d, quad_tol)?.value;
    let mut windows = vec![head];
    let mut sum = head;
    let mut streak = 0;
    for k in 0..ASSUMPTION_MAX_WINDOWS {
        let lo = d * 2f64.powi(k as i32);
        let panels = 1usize << k.min(16);
        let points: Vec<f64> = (0..=panels).map(|i| lo + lo * i as f64 / panels as f64).collect();
        let w = integrate_partitioned(abs_phi, &points, quad_tol)?.value;
        let prev = *windows.last().unwrap();
        windows.push(w);
        sum += w;
        let ratio = if prev > 0.0 { w / prev } else { 0.0 };
        if k >= 1 && w >= tol && ratio >= NON_DECAY_RATIO {
            streak += 1;
        } else {
            streak = 0;
        }
        if streak >= ASSUMPTION_DIVERGENCE_STREAK {
            return Ok(AssumptionCheck {
                status: AssumptionStatus::Fails,
                value: None,
                tail_bound: None,
                window_integrals: windows,
            });
        }
        if k >= 1 && w <= tol && ratio < GEOMETRIC_RATIO {
            let tail = w * ratio / (1.0 - ratio);
            if tail <= tol {
                return Ok(AssumptionCheck {
                    status: AssumptionStatus::Holds,
                    value: Some(sum),
                    tail_bound: Some(tail),
                    window_integrals: windows,
                });
            }
        }
    }
    let recent: Vec<f64> = windows.windows(2).rev().take(4).map(|p| p[1] / p[0]).collect();
    if recent.len() == 4 && recent.iter().all(|r| *r < GEOMETRIC_RATIO) {
        let ratio = recent.iter().copied().fold(0.0, f64::max);
        let last = *windows.last().unwrap();
        let tail = last * ratio / (1.0 - ratio);
        return Ok(AssumptionCheck {
            status: AssumptionStatus::Holds,
            value: Some(sum + tail),
            tail_bound: Some(tail),
            window_integrals: windows,
        });
    }
    Ok(AssumptionCheck {
        status: AssumptionStatus::Undetermined,
        value: None,
        tail_bound: None,
        window_integrals: windows,
    })
}

/// Default accuracy of the integrability test run before theory operations.
pub const ASSUMPTION_DEFAULT_TOL: f64 = 1e-8;

/// Refuses laws whose characteristic function is not shown integrable.
pub fn require_assumption1(law: &MixingLaw) -> Result<AssumptionCheck> {
    let check = verify_assumption1(law, ASSUMPTION_DEFAULT_TOL)?;
    match check.status {
        AssumptionStatus::Holds => Ok(check),
        AssumptionStatus::Fails => Err(Error::AssumptionViolated {
            law: law.to_string(),
            detail: format!(
                "∫|φ| diverges: dyadic window integrals {:?} do not decay",
                &check.window_integrals[check.window_integrals.len().saturating_sub(4)..]
            ),
        }),
        AssumptionStatus::Undetermined => Err(Error::AssumptionViolated {
            law: law.to_string(),
            detail: "integrability of |φ| could not be established within the window budget".into(),
        }),
    }
}

/// `∫_a^∞ φ²(Tz) dz`.
pub fn tail_sq_integral(law: &MixingLaw, a: f64, horizon: f64) -> Result<f64> {
    if !(a >= 0.0) {
        return Err(invalid("a", format!("must be nonnegative, got {a}")));
    }
    if !(horizon > 0.0) {
        return Err(invalid("T", format!("must be positive, got {horizon}")));
    }
    require_assumption1(law)?;
    tail_sq_integral_unchecked(law, a, horizon)
}

pub(crate) fn tail_sq_integral_unchecked(law: &MixingLaw, a: f64, horizon: f64) -> Result<f64> {
    let c = a * horizon;
    if let Some(v) = law.sq_charfn_tail_closed_form(c) {
        return Ok(v / horizon);
    }
    let r = integrate_to_infinity(
        |y| law.charfn(y).powi(2),
        c,
        law.charfn_scale(),
        Tolerance::relative(1e-10).with_abs(1e-300),
    )?;
    Ok(r.value / horizon)
}
