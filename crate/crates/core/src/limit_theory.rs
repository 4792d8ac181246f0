//! Limit constants of the normalized estimator.
//!
//! With `ψ_L(s, t) = φ(L|t - s|)` on `[0, T]²` the fluctuation of the
//! estimator is a double integral against `X` whose variance involves
//! `‖ψ_L‖² = A₁ + A₂ + A₃`, the three pieces coming from the `W⊗W`, mixed and
//! `B^H⊗B^H` parts of the covariance. After scaling `x = L·(time lag)` and
//! `Λ = LT`:
//!
//! ```text
//! A₁ = (2/L) ∫_0^Λ (T - x/L) φ²(x) dx
//! A₂ = 4 α_H L^{-2H} ∫_0^Λ d^{2H-2} C(d) dd
//! C(d) = 2 [ (T - d/L) ∫_{d/2}^{d} φ(x) φ(d - x) dx + ∫_d^Λ φ(x) φ(x - d) (T - x/L) dx ]
//! A₃ = 2 α_H² L^{-2} ∫_{d>0} ∫ φ(|x|) φ(|x - d|) G(x/L, (x - d)/L) dx dd
//! G(p, q) = ∫ |r|^{2H-2} |r - (p - q)|^{2H-2} (T - range{0, p, r, r + q})₊ dr
//! ```
//!
//! `A₁` is one-dimensional, `A₂` two-dimensional and `A₃` a three-level
//! nested quadrature; every `|·|^{2H-2}` singularity is removed by a power
//! substitution.

use std::cell::Cell;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian_paths::HurstParam;
use crate::mixing_laws::{require_assumption1, tail_sq_integral_unchecked, MixingLaw};
use crate::quadrature::{
    integrate_partitioned, integrate_power_singular, integrate_to_infinity, QuadResult, Tolerance,
};

/// Tolerance of the one-dimensional constants.
pub const ONE_DIM_TOL: f64 = 1e-10;
/// Default relative tolerance of the A-terms.
pub const CHAOS_DEFAULT_TOL: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// H > 3/4.
    Supercritical,
    /// H = 3/4.
    Critical,
    /// 1/2 < H < 3/4.
    Subcritical,
    /// X = W.
    PureBm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Center {
    Zero,
    Mu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitKind {
    /// `L^γ(Ê - T)` converges in law to a normal.
    Gaussian,
    /// `L^γ(Ê - T)` converges in probability to the centre.
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub gamma: f64,
    pub center: Center,
    pub limit: LimitKind,
    pub regime: Regime,
}

fn pure_bm() -> Normalization {
    Normalization {
        gamma: 0.5,
        center: Center::Zero,
        limit: LimitKind::Gaussian,
        regime: Regime::PureBm,
    }
}

/// Rate `γ`, centring and limit type of `L^γ(Ê - T)`.
pub fn normalization(h: HurstParam) -> Normalization {
    let v = h.value();
    if h.is_brownian() {
        pure_bm()
    } else if v > 0.75 {
        Normalization {
            gamma: 0.5,
            center: Center::Zero,
            limit: LimitKind::Gaussian,
            regime: Regime::Supercritical,
        }
    } else if v == 0.75 {
        Normalization {
            gamma: 0.5,
            center: Center::Mu,
            limit: LimitKind::Gaussian,
            regime: Regime::Critical,
        }
    } else {
        Normalization {
            gamma: 2.0 * v - 1.0,
            center: Center::Mu,
            limit: LimitKind::Degenerate,
            regime: Regime::Subcritical,
        }
    }
}

/// As [`normalization`], but `includes_fbm = false` selects the Brownian
/// case whatever `h` is.
pub fn normalization_for(h: HurstParam, includes_fbm: bool) -> Normalization {
    if includes_fbm {
        normalization(h)
    } else {
        pure_bm()
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid("T", format!("must be positive and finite, got {horizon}")));
    }
    Ok(())
}

/// `σ²_T = 2T ∫_0^∞ φ²`.
pub fn sigma_sq(law: &MixingLaw, horizon: f64) -> Result<f64> {
    check_horizon(horizon)?;
    require_assumption1(law)?;
    sigma_sq_unchecked(law, horizon)
}

pub(crate) fn sigma_sq_unchecked(law: &MixingLaw, horizon: f64) -> Result<f64> {
    match law.sq_charfn_integral_closed_form() {
        Some(v) => Ok(2.0 * horizon * v),
        None => Ok(2.0 * horizon * sq_integral_by_quadrature(law)?),
    }
}

fn sq_integral_by_quadrature(law: &MixingLaw) -> Result<f64> {
    let r = integrate_to_infinity(
        |x| law.charfn(x).powi(2),
        0.0,
        law.charfn_scale(),
        Tolerance::relative(0.01 * ONE_DIM_TOL),
    )?;
    Ok(r.value)
}

/// `σ²_T` by quadrature even where a closed form exists.
pub fn sigma_sq_by_quadrature(law: &MixingLaw, horizon: f64) -> Result<f64> {
    check_horizon(horizon)?;
    require_assumption1(law)?;
    Ok(2.0 * horizon * sq_integral_by_quadrature(law)?)
}

/// `μ = 2 α_H T ∫_0^∞ φ(x) x^{2H-2} dx`.
pub fn mu_bias(law: &MixingLaw, h: HurstParam, horizon: f64) -> Result<f64> {
    check_horizon(horizon)?;
    require_assumption1(law)?;
    mu_bias_unchecked(law, h, horizon)
}

pub(crate) fn mu_bias_unchecked(law: &MixingLaw, h: HurstParam, horizon: f64) -> Result<f64> {
    if h.is_brownian() {
        return Ok(0.0);
    }
    let e = 2.0 * h.value() - 2.0;
    let s = law.charfn_scale();
    let tol = Tolerance::relative(0.1 * 1e-8);
    let head = integrate_power_singular(|x| law.charfn(x), 0.0, s, e, tol)?;
    let tail = integrate_to_infinity(
        |x| law.charfn(x) * x.powf(e),
        s,
        s,
        tol.with_abs(1e-3 * 1e-8 * head.value.abs()),
    )?;
    Ok(2.0 * h.alpha() * horizon * (head.value + tail.value))
}

/// `ρ(L) = max{L^{3/2-2H}, ∫_L^∞ φ²(Tz) dz}`, defined for `H > 3/4`.
pub fn rho_bound(law: &MixingLaw, h: HurstParam, horizon: f64, l: f64) -> Result<f64> {
    check_horizon(horizon)?;
    if !(h.value() > 0.75) {
        return Err(Error::HypothesisViolated(format!(
            "the Berry–Esseen bound ρ(L) requires H ∈ (3/4, 1), got H = {}",
            h.value()
        )));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(invalid("L", format!("must be > 0 and finite, got {l}")));
    }
    require_assumption1(law)?;
    let poly = l.powf(1.5 - 2.0 * h.value());
    let tail = tail_sq_integral_unchecked(law, l, horizon)?;
    Ok(poly.max(tail))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosVarianceTerms {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub quadrature_tol: f64,
    /// `(2T²/L) ∫_0^L φ²(Tz) dz`, the approximation of `A₁` that drops the
    /// `(T - x/L)` weight; it differs from `a1` by `O(1/L²)`.
    pub a1_unweighted: f64,
}

impl ChaosVarianceTerms {
    pub fn total(&self) -> f64 {
        self.a1 + self.a2 + self.a3
    }

    /// `L·(A₁ + A₂ + A₃)`.
    pub fn scaled_total(&self) -> f64 {
        self.l * self.total()
    }

    /// `L·(A₂ + A₃)`.
    pub fn scaled_fbm_part(&self) -> f64 {
        self.l * (self.a2 + self.a3)
    }
}

// Collects the worst relative error of inner quadratures that ran out of
// budget; their estimates are still used by the enclosing rule.
struct Inner {
    worst: Cell<f64>,
    // typical magnitude; errors are measured relative to at least this
    floor: f64,
}

impl Inner {
    fn new(floor: f64) -> Self {
        Self {
            worst: Cell::new(0.0),
            floor,
        }
    }

    fn tolerance(&self, rel: f64) -> Tolerance {
        Tolerance::relative(rel).with_abs(1e-3 * rel * self.floor)
    }

    fn value(&self, r: Result<QuadResult>) -> f64 {
        match r {
            Ok(q) => q.value,
            Err(Error::QuadratureBudget { estimate, error, .. }) => {
                let rel = error / estimate.abs().max(self.floor);
                self.worst.set(self.worst.get().max(rel));
                estimate
            }
            Err(_) => f64::NAN,
        }
    }

    fn check(&self, limit: f64) -> Result<()> {
        let worst = self.worst.get();
        if worst > limit {
            return Err(Error::QuadratureBudget {
                estimate: f64::NAN,
                error: worst,
                evaluations: 0,
            });
        }
        Ok(())
    }
}

// a, a ± s, a ± 2s, a ± 4s, ... around each anchor, clipped to (lo, hi).
fn anchored_points(lo: f64, hi: f64, anchors: &[f64], scale: f64) -> Vec<f64> {
    let mut pts = vec![lo, hi];
    for &a in anchors {
        if a > lo && a < hi {
            pts.push(a);
        }
        let mut w = scale;
        while a - w > lo || a + w < hi {
            for p in [a - w, a + w] {
                if p > lo && p < hi {
                    pts.push(p);
                }
            }
            w *= 2.0;
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// `A₁, A₂, A₃` at frequency scale `L`, each to relative tolerance `tol`.
pub fn chaos_variance_terms(
    law: &MixingLaw,
    h: HurstParam,
    horizon: f64,
    l: f64,
    tol: f64,
) -> Result<ChaosVarianceTerms> {
    check_horizon(horizon)?;
    if !(l > 0.0 && l.is_finite()) {
        return Err(invalid("L", format!("must be > 0 and finite, got {l}")));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(invalid("tol", format!("must lie in (0, 1), got {tol}")));
    }
    require_assumption1(law)?;
    let a1 = a1_term(law, horizon, l, tol)?;
    let a1_unweighted = 2.0 * horizon * horizon / l * (law_sq_head(law, l * horizon)? / horizon);
    let (a2, a3) = if h.is_brownian() {
        (0.0, 0.0)
    } else {
        (a2_term(law, h, horizon, l, tol)?, a3_term(law, h, horizon, l, tol)?)
    };
    Ok(ChaosVarianceTerms {
        a1,
        a2,
        a3,
        l,
        quadrature_tol: tol,
        a1_unweighted,
    })
}

/// [`chaos_variance_terms`] over several scales, evaluated in parallel.
pub fn chaos_variance_grid(
    law: &MixingLaw,
    h: HurstParam,
    horizon: f64,
    ls: &[f64],
    tol: f64,
) -> Result<Vec<ChaosVarianceTerms>> {
    ls.par_iter()
        .map(|&l| chaos_variance_terms(law, h, horizon, l, tol))
        .collect()
}

// ∫_0^c φ²(x) dx
fn law_sq_head(law: &MixingLaw, c: f64) -> Result<f64> {
    let pts = anchored_points(0.0, c, &[0.0], law.charfn_scale());
    Ok(integrate_partitioned(|x| law.charfn(x).powi(2), &pts, Tolerance::relative(ONE_DIM_TOL).with_budget(200_000))?.value)
}

fn a1_term(law: &MixingLaw, horizon: f64, l: f64, tol: f64) -> Result<f64> {
    let big = l * horizon;
    let pts = anchored_points(0.0, big, &[0.0], law.charfn_scale());
    let r = integrate_partitioned(
        |x| (horizon - x / l) * law.charfn(x).powi(2),
        &pts,
        Tolerance::relative(tol.min(ONE_DIM_TOL)).with_budget(200_000),
    )?;
    Ok(2.0 / l * r.value)
}

fn a2_term(law: &MixingLaw, h: HurstParam, horizon: f64, l: f64, tol: f64) -> Result<f64> {
    let big = l * horizon;
    let s = law.charfn_scale().min(big);
    let e = 2.0 * h.value() - 2.0;
    let inner = Inner::new(horizon * law.charfn_scale());
    let inner_tol = inner.tolerance(0.01 * tol);
    let c = |d: f64| -> f64 {
        let near = inner.value(integrate_partitioned(
            |x| law.charfn(x) * law.charfn(d - x),
            &[0.5 * d, d],
            inner_tol,
        ));
        let far_pts = anchored_points(d, big, &[d], law.charfn_scale());
        let far = inner.value(integrate_partitioned(
            |x| law.charfn(x) * law.charfn(x - d) * (horizon - x / l),
            &far_pts,
            inner_tol,
        ));
        2.0 * ((horizon - d / l) * near + far)
    };
    let outer_tol = Tolerance::relative(0.5 * tol).with_abs(1e-300);
    let head = integrate_power_singular(c, 0.0, s, e, outer_tol)?;
    let tail = if s < big {
        let pts = anchored_points(s, big, &[0.0], law.charfn_scale());
        integrate_partitioned(|d| d.powf(e) * c(d), &pts, outer_tol)?.value
    } else {
        0.0
    };
    inner.check(tol)?;
    Ok(4.0 * h.alpha() * l.powf(-2.0 * h.value()) * (head.value + tail))
}

// G(p, q) for p - q > 0.
fn g_kernel(p: f64, q: f64, horizon: f64, e: f64, tol: Tolerance, inner: &Inner) -> f64 {
    let dd = p - q;
    let lo = p.max(0.0) - q.min(0.0) - horizon;
    let hi = horizon - q.max(0.0) + p.min(0.0);
    if hi <= lo {
        return 0.0;
    }
    let weight = |r: f64| {
        let mx = 0f64.max(p).max(r).max(r + q);
        let mn = 0f64.min(p).min(r).min(r + q);
        (horizon - (mx - mn)).max(0.0)
    };
    let mut pts = vec![lo, hi];
    for b in [0.0, dd, p, -q] {
        if b > lo && b < hi {
            pts.push(b);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let singular = |x: f64| x == 0.0 || x == dd;
    let mut total = 0.0;
    let piece = |a: f64, b: f64| {
        // singular endpoint first
        let (x0, x1, sign) = if singular(b) && !singular(a) { (b, a, -1.0) } else { (a, b, 1.0) };
        if singular(x0) {
            let other = if x0 == 0.0 { dd } else { 0.0 };
            let h = |r: f64| (r - other).abs().powf(e) * weight(r);
            sign * inner.value(integrate_power_singular(h, x0, x1, e, tol))
        } else {
            inner.value(integrate_partitioned(
                |r: f64| r.abs().powf(e) * (r - dd).abs().powf(e) * weight(r),
                &[a, b],
                tol,
            ))
        }
    };
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if singular(a) && singular(b) {
            let m = 0.5 * (a + b);
            total += piece(a, m) + piece(m, b);
        } else {
            total += piece(a, b);
        }
    }
    total
}

fn a3_term(law: &MixingLaw, h: HurstParam, horizon: f64, l: f64, tol: f64) -> Result<f64> {
    let big = l * horizon;
    let scale = law.charfn_scale();
    let e = 2.0 * h.value() - 2.0;
    let g_scale = horizon.powf(4.0 * h.value() - 2.0);
    let inner = Inner::new(g_scale);
    let g_tol = inner.tolerance(0.01 * tol);
    let mid_tol = Tolerance::relative(0.1 * tol).with_abs(1e-4 * tol * g_scale * scale.min(big));
    let middle = |d: f64| -> f64 {
        let lo = d - big;
        let pts = anchored_points(lo, big, &[0.0, 0.5 * d, d], scale);
        inner.value(integrate_partitioned(
            |x| {
                let w = law.charfn(x) * law.charfn(x - d);
                if w == 0.0 {
                    0.0
                } else {
                    w * g_kernel(x / l, (x - d) / l, horizon, e, g_tol, &inner)
                }
            },
            &pts,
            mid_tol,
        ))
    };
    // F(d) ~ d^{4H-3} near 0 when H < 3/4 and ~ log d at H = 3/4.
    let v = h.value();
    let s = scale.min(2.0 * big);
    let outer_tol = Tolerance::relative(0.5 * tol).with_abs(1e-300);
    let head = if v < 0.75 {
        let ex = 4.0 * v - 3.0;
        integrate_power_singular(|d| middle(d) * d.powf(-ex), 0.0, s, ex, outer_tol)?.value
    } else if v == 0.75 {
        integrate_power_singular(|d| middle(d) * d.sqrt(), 0.0, s, -0.5, outer_tol)?.value
    } else {
        // d = u^k with k = 1/(4H-3) turns the d^{4H-3} cusp into u
        let k = (1.0 / (4.0 * v - 3.0)).min(16.0);
        integrate_partitioned(
            |u: f64| k * u.powf(k - 1.0) * middle(u.powf(k)),
            &[0.0, s.powf(1.0 / k)],
            outer_tol,
        )?
        .value
    };
    let tail = if s < 2.0 * big {
        let pts = anchored_points(s, 2.0 * big, &[0.0], scale);
        integrate_partitioned(middle, &pts, outer_tol)?.value
    } else {
        0.0
    };
    inner.check(tol)?;
    Ok(2.0 * h.alpha().powi(2) * (head + tail) / (l * l))
}

/// Every constant for one `(law, H, T)`, with the optional `ρ(L)` and
/// A-terms attached by the caller.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitConstants {
    pub law: String,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub alpha_h: f64,
    pub sigma_sq: f64,
    pub mu: f64,
    pub regime: Regime,
    pub gamma: f64,
    pub center: Center,
    pub limit: LimitKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<RhoAt>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chaos_terms: Option<ChaosVarianceTerms>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoAt {
    #[serde(rename = "L")]
    pub l: f64,
    pub value: f64,
}

pub fn limit_constants(law: &MixingLaw, h: HurstParam, horizon: f64) -> Result<LimitConstants> {
    let norm = normalization(h);
    Ok(LimitConstants {
        law: law.to_string(),
        h: h.value(),
        horizon,
        alpha_h: h.alpha(),
        sigma_sq: sigma_sq(law, horizon)?,
        mu: mu_bias(law, h, horizon)?,
        regime: norm.regime,
        gamma: norm.gamma,
        center: norm.center,
        limit: norm.limit,
        rho: None,
        chaos_terms: None,
    })
}
