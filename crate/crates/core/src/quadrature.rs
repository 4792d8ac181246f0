//! Globally adaptive Gauss–Kronrod (G10/K21) quadrature.
//!
//! The routines here back every one-dimensional integral in the crate: the
//! limit constants, the characteristic-function checks and the quadrature
//! route of the estimator. Integrable power singularities at an endpoint are
//! removed exactly by the substitution `u = (x - x0)^(1 + e)`, and
//! semi-infinite ranges are covered by geometrically growing windows with a
//! geometric tail bound.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::summation::CompensatedSum;

// Kronrod abscissae (descending, centre last) and weights; Gauss weights for
// the odd-indexed abscissae.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_292_418_766,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Requested accuracy: the run stops once the error bound is below
/// `max(abs, rel * |value|)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_subdivisions: usize,
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Self {
            abs: 0.0,
            rel,
            max_subdivisions: 20_000,
        }
    }

    pub fn absolute(abs: f64) -> Self {
        Self {
            abs,
            rel: 0.0,
            max_subdivisions: 20_000,
        }
    }

    pub fn with_abs(mut self, abs: f64) -> Self {
        self.abs = abs;
        self
    }

    pub fn with_budget(mut self, max_subdivisions: usize) -> Self {
        self.max_subdivisions = max_subdivisions;
        self
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }

    fn scaled(&self, factor: f64) -> Self {
        Self {
            abs: self.abs * factor,
            rel: self.rel * factor,
            max_subdivisions: self.max_subdivisions,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Clone, Copy, Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    // error is at the rounding floor; bisection cannot improve it
    roundoff: bool,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    let mut resabs = kronrod.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kronrod * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    let mut roundoff = false;
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let floor = 50.0 * f64::EPSILON * resabs;
        if error <= floor {
            error = floor;
            roundoff = true;
        }
    }
    if !value.is_finite() || !error.is_finite() {
        error = f64::INFINITY;
        roundoff = false;
    }
    Panel {
        a,
        b,
        value,
        error,
        roundoff,
    }
}

/// Adaptive integral of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<QuadResult> {
    integrate_partitioned(f, &[a, b], tol)
}

/// Adaptive integral over `[points[0], points[last]]`, starting from the
/// panels delimited by `points` (kinks, scale changes or oscillation periods
/// of the integrand belong there).
pub fn integrate_partitioned<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    tol: Tolerance,
) -> Result<QuadResult> {
    assert!(points.len() >= 2, "a partition needs at least two points");
    let mut heap = BinaryHeap::with_capacity(points.len() * 2);
    let mut frozen_value = CompensatedSum::new();
    let mut frozen_error = 0.0;
    let mut rounding_error = 0.0;
    let mut evaluations = 0usize;
    for w in points.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        heap.push(gk21(&f, w[0], w[1]));
        evaluations += 21;
    }
    let mut total_value: f64 = heap.iter().map(|p| p.value).sum();
    let mut total_error: f64 = heap.iter().map(|p| p.error).sum();
    let mut panels = heap.len();
    let mut refresh = 0usize;
    loop {
        if total_error + frozen_error <= tol.target(total_value + frozen_value.value()) {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        let tiny = (worst.b - worst.a).abs() <= 64.0 * f64::EPSILON * mid.abs().max(f64::MIN_POSITIVE);
        if tiny || worst.roundoff {
            frozen_value.add(worst.value);
            if worst.roundoff {
                rounding_error += worst.error;
            } else {
                frozen_error += worst.error;
            }
            total_value -= worst.value;
            total_error -= worst.error;
            continue;
        }
        if panels >= tol.max_subdivisions {
            heap.push(worst);
            let value = compensated_value(&heap) + frozen_value.value();
            let error = heap.iter().map(|p| p.error).sum::<f64>() + frozen_error + rounding_error;
            return Err(Error::QuadratureBudget {
                estimate: value,
                error,
                evaluations,
            });
        }
        let left = gk21(&f, worst.a, mid);
        let right = gk21(&f, mid, worst.b);
        evaluations += 42;
        panels += 1;
        total_value += left.value + right.value - worst.value;
        total_error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        refresh += 1;
        if refresh.is_multiple_of(256) {
            total_value = compensated_value(&heap);
            total_error = heap.iter().map(|p| p.error).sum();
        }
    }
    let value = compensated_value(&heap) + frozen_value.value();
    let error = heap.iter().map(|p| p.error).sum::<f64>() + frozen_error;
    if !value.is_finite() || error > tol.target(value) {
        return Err(Error::QuadratureBudget {
            estimate: value,
            error: error + rounding_error,
            evaluations,
        });
    }
    Ok(QuadResult {
        value,
        error: error + rounding_error,
        evaluations,
    })
}

fn compensated_value(heap: &BinaryHeap<Panel>) -> f64 {
    let mut acc = CompensatedSum::new();
    for p in heap.iter() {
        acc.add(p.value);
    }
    acc.value()
}

/// `∫_{x0}^{x1} |x - x0|^exponent h(x) dx` for `exponent > -1`.
///
/// The power factor is absorbed analytically, so `h` only needs to be
/// smooth near `x0`. `x1 < x0` is allowed (the integral is oriented).
pub fn integrate_power_singular<F: Fn(f64) -> f64>(
    h: F,
    x0: f64,
    x1: f64,
    exponent: f64,
    tol: Tolerance,
) -> Result<QuadResult> {
    assert!(exponent > -1.0, "power singularity must be integrable");
    if x0 == x1 {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let width = x1 - x0;
    let p = 1.0 + exponent;
    let factor = width * width.abs().powf(exponent) / p;
    let inv = 1.0 / p;
    let inner = integrate(
        |v: f64| h(x0 + width * v.powf(inv)),
        0.0,
        1.0,
        Tolerance {
            abs: tol.abs / factor.abs(),
            ..tol
        },
    )?;
    Ok(QuadResult {
        value: factor * inner.value,
        error: factor.abs() * inner.error,
        evaluations: inner.evaluations,
    })
}

/// `∫_a^∞ f(x) dx` over windows `[a, a + s], [a + s, a + 3s], ...` of doubling
/// width `s·2^k`; each window is pre-split into panels of width at most
/// `8·scale`. Stops once two successive windows are negligible and the
/// geometric tail bound fits the tolerance, or once the geometric
/// extrapolation of the remainder is self-consistent to the tolerance (the
/// remainder is then added).
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    scale: f64,
    tol: Tolerance,
) -> Result<QuadResult> {
    assert!(scale > 0.0, "window scale must be positive");
    const MAX_WINDOWS: usize = 96;
    const MAX_PANELS_PER_WINDOW: usize = 1 << 16;
    let mut total = CompensatedSum::new();
    let mut error = 0.0;
    let mut evaluations = 0;
    let mut start = a;
    let mut width = scale;
    let mut previous: Option<f64> = None;
    let mut previous_signed: Option<f64> = None;
    let mut previous_tail: Option<f64> = None;
    let mut quiet = 0;
    for _ in 0..MAX_WINDOWS {
        let end = start + width;
        let panels = ((width / (8.0 * scale)).ceil() as usize).clamp(1, MAX_PANELS_PER_WINDOW);
        let points: Vec<f64> = (0..=panels)
            .map(|i| start + width * i as f64 / panels as f64)
            .collect();
        let window_tol = Tolerance {
            abs: 0.25 * tol.abs + 0.1 * tol.rel * total.value().abs(),
            rel: 0.25 * tol.rel,
            max_subdivisions: tol.max_subdivisions.max(8 * panels),
        };
        let w = integrate_partitioned(&f, &points, window_tol)?;
        total.add(w.value);
        error += w.error;
        evaluations += w.evaluations;
        let allowed = tol.target(total.value());
        let magnitude = w.value.abs();
        let converged = match previous {
            Some(prev) if magnitude == 0.0 && prev == 0.0 => true,
            Some(prev) if prev > 0.0 => {
                let ratio = magnitude / prev;
                ratio < 0.75 && magnitude * ratio / (1.0 - ratio) <= 0.5 * allowed
            }
            _ => false,
        };
        if converged && magnitude <= 0.5 * allowed {
            quiet += 1;
        } else {
            quiet = 0;
        }
        if quiet >= 2 {
            return Ok(QuadResult {
                value: total.value(),
                error: error + magnitude,
                evaluations,
            });
        }
        // Geometric extrapolation of the remainder once two successive
        // extrapolations agree within the tolerance.
        let tail = match previous_signed {
            Some(prev) if prev != 0.0 && w.value * prev > 0.0 && w.value / prev < 0.75 => {
                let ratio = w.value / prev;
                Some(w.value * ratio / (1.0 - ratio))
            }
            _ => None,
        };
        if let (Some(tail), Some(prev_tail)) = (tail, previous_tail) {
            let mismatch = (prev_tail - (w.value + tail)).abs();
            if mismatch <= 0.25 * allowed {
                total.add(tail);
                return Ok(QuadResult {
                    value: total.value(),
                    error: error + mismatch,
                    evaluations,
                });
            }
        }
        previous_tail = tail;
        previous_signed = Some(w.value);
        previous = Some(magnitude);
        start = end;
        width *= 2.0;
    }
    Err(Error::QuadratureBudget {
        estimate: total.value(),
        error: f64::INFINITY,
        evaluations,
    })
}

/// Integral over `[a, b]` of `f`, where the domain is first cut at the
/// given interior points and each piece is integrated independently with a
/// share of the tolerance.
pub fn integrate_pieces<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    tol: Tolerance,
) -> Result<QuadResult> {
    let pieces = points.len().saturating_sub(1).max(1) as f64;
    let share = tol.scaled(1.0 / pieces);
    let mut value = CompensatedSum::new();
    let mut error = 0.0;
    let mut evaluations = 0;
    for w in points.windows(2) {
        let r = integrate(&f, w[0], w[1], share)?;
        value.add(r.value);
        error += r.error;
        evaluations += r.evaluations;
    }
    Ok(QuadResult {
        value: value.value(),
        error,
        evaluations,
    })
}
