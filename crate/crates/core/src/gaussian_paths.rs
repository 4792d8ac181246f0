//! Exact simulation of fractional Brownian motion and of the mixed process
//! `X = W + B^H` on uniform grids.
//!
//! Two samplers are provided for the fractional Gaussian noise (the
//! increments of `B^H`): circulant embedding (Davies–Harte), which is the
//! default and costs `O(n log n)` per path, and a dense Cholesky factor of the
//! increment covariance, kept as a correctness oracle.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fft;
use crate::output::fmt_f64;
use crate::rng::{RngSpec, Substream};

/// Relative size of a negative circulant eigenvalue that is still clipped to
/// zero; anything more negative is reported as an error.
pub const CIRCULANT_CLIP_TOLERANCE: f64 = 1e-12;

/// Largest grid the dense Cholesky sampler accepts.
pub const CHOLESKY_MAX_STEPS: usize = 1 << 13;

/// Hurst index `H ∈ [1/2, 1)`. The value 1/2 is the Brownian special case.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstParam(f64);

impl HurstParam {
    pub fn new(h: f64) -> Result<Self> {
        if !(0.5..1.0).contains(&h) {
            return Err(invalid("H", format!("Hurst index must lie in [1/2, 1), got {h}")));
        }
        Ok(Self(h))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `α_H = H(2H - 1)`, the constant in front of `|t - s|^{2H-2}`.
    pub fn alpha(self) -> f64 {
        self.0 * (2.0 * self.0 - 1.0)
    }

    pub fn is_brownian(self) -> bool {
        self.0 == 0.5
    }
}

impl TryFrom<f64> for HurstParam {
    type Error = Error;
    fn try_from(h: f64) -> Result<Self> {
        Self::new(h)
    }
}

impl From<HurstParam> for f64 {
    fn from(h: HurstParam) -> f64 {
        h.0
    }
}

/// Uniform grid `t_k = kT/n`, `k = 0..=n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    horizon: f64,
    steps: usize,
}

impl SampleGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid("T", format!("horizon must be positive and finite, got {horizon}")));
        }
        if steps < 2 {
            return Err(invalid("n", format!("need at least 2 steps, got {steps}")));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMethod {
    Cholesky,
    #[default]
    Circulant,
}

impl std::str::FromStr for SamplerMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cholesky" => Ok(Self::Cholesky),
            "circulant" => Ok(Self::Circulant),
            other => Err(invalid("method", format!("expected cholesky or circulant, got `{other}`"))),
        }
    }
}

/// `R_H(s, t) = ½(|t|^{2H} + |s|^{2H} - |t - s|^{2H})`.
pub fn fbm_covariance(s: f64, t: f64, h: HurstParam) -> f64 {
    let two_h = 2.0 * h.value();
    0.5 * (t.abs().powf(two_h) + s.abs().powf(two_h) - (t - s).abs().powf(two_h))
}

/// Autocovariance of unit-spacing fractional Gaussian noise at `lag`.
pub fn fgn_autocovariance(lag: usize, h: HurstParam) -> f64 {
    let two_h = 2.0 * h.value();
    let k = lag as f64;
    if lag == 0 {
        return 1.0;
    }
    0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).powf(two_h))
}

#[derive(Clone, Debug)]
enum Factor {
    Cholesky(DMatrix<f64>),
    Circulant { sqrt_eigenvalues: Vec<f64> },
}

/// Precomputed sampler of fBm increments for a fixed grid and Hurst index.
#[derive(Clone, Debug)]
pub struct FbmSampler {
    grid: SampleGrid,
    h: HurstParam,
    method: SamplerMethod,
    factor: Factor,
}

impl FbmSampler {
    pub fn new(grid: SampleGrid, h: HurstParam, method: SamplerMethod) -> Result<Self> {
        let n = grid.steps();
        let factor = match method {
            SamplerMethod::Cholesky => {
                if n > CHOLESKY_MAX_STEPS {
                    return Err(invalid(
                        "n",
                        format!("cholesky sampler is limited to {CHOLESKY_MAX_STEPS} steps, got {n}"),
                    ));
                }
                let gamma: Vec<f64> = (0..n).map(|k| fgn_autocovariance(k, h)).collect();
                let cov = DMatrix::from_fn(n, n, |i, j| gamma[i.abs_diff(j)]);
                let chol = cov.cholesky().ok_or_else(|| {
                    invalid("H", "increment covariance is not positive definite")
                })?;
                Factor::Cholesky(chol.unpack())
            }
            SamplerMethod::Circulant => {
                let half = n.next_power_of_two();
                let column: Vec<f64> = (0..2 * half)
                    .map(|k| fgn_autocovariance(if k <= half { k } else { 2 * half - k }, h))
                    .collect();
                Factor::Circulant {
                    sqrt_eigenvalues: circulant_sqrt_eigenvalues(&column)?,
                }
            }
        };
        Ok(Self {
            grid,
            h,
            method,
            factor,
        })
    }

    pub fn grid(&self) -> SampleGrid {
        self.grid
    }

    pub fn hurst(&self) -> HurstParam {
        self.h
    }

    pub fn method(&self) -> SamplerMethod {
        self.method
    }

    /// One vector of `n` increments `B^H_{t_k} - B^H_{t_{k-1}}`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.grid.steps();
        let scale = self.grid.dt().powf(self.h.value());
        match &self.factor {
            Factor::Cholesky(lower) => {
                let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                (lower * z).iter().map(|v| v * scale).collect()
            }
            Factor::Circulant { sqrt_eigenvalues } => {
                let mut buf: Vec<Complex64> = sqrt_eigenvalues
                    .iter()
                    .map(|&s| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(s * re, s * im)
                    })
                    .collect();
                fft::forward(buf.len()).process(&mut buf);
                buf.iter().take(n).map(|z| z.re * scale).collect()
            }
        }
    }
}

/// `sqrt(λ_k / m)` for the circulant with first column `column` (length m),
/// clipping negative eigenvalues only when they are negligible.
pub fn circulant_sqrt_eigenvalues(column: &[f64]) -> Result<Vec<f64>> {
    let m = column.len() as f64;
    let eig = fft::circulant_eigenvalues(column);
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -CIRCULANT_CLIP_TOLERANCE * max {
        return Err(Error::NegativeCirculantEigenvalue {
            min_eigenvalue: min,
            max_eigenvalue: max,
        });
    }
    Ok(eig.into_iter().map(|l| (l.max(0.0) / m).sqrt()).collect())
}

/// Increments of `B^H` on `grid`, drawn from the fractional substream of `rng`.
pub fn simulate_fbm(grid: SampleGrid, h: HurstParam, method: SamplerMethod, rng: RngSpec) -> Result<Vec<f64>> {
    let sampler = FbmSampler::new(grid, h, method)?;
    Ok(sampler.sample(&mut rng.generator(Substream::Fractional)))
}

/// One realization of `(W, B^H, X)` as increments on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSample {
    pub grid: SampleGrid,
    pub dw: Vec<f64>,
    pub dbh: Vec<f64>,
    pub dx: Vec<f64>,
    pub includes_fbm: bool,
}

impl PathSample {
    /// Builds a path whose mixed increments are given directly (no split
    /// into Brownian and fractional parts); used for deterministic inputs.
    pub fn from_increments(grid: SampleGrid, dx: Vec<f64>) -> Result<Self> {
        if dx.len() != grid.steps() {
            return Err(invalid(
                "dx",
                format!("expected {} increments, got {}", grid.steps(), dx.len()),
            ));
        }
        Ok(Self {
            grid,
            dw: dx.clone(),
            dbh: vec![0.0; dx.len()],
            dx,
            includes_fbm: false,
        })
    }

    /// Values `X_{t_0}, ..., X_{t_n}` with `X_0 = 0`.
    pub fn x_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dx.len() + 1);
        out.push(0.0);
        let mut acc = crate::summation::CompensatedSum::new();
        for &d in &self.dx {
            acc.add(d);
            out.push(acc.value());
        }
        out
    }

    pub fn terminal_value(&self) -> f64 {
        crate::summation::compensated_sum(self.dx.iter().copied())
    }

    /// CSV with header `k,t,dW,dBH,dX`; row `k` holds the increment over
    /// `[t_{k-1}, t_k]` and `t = t_k`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,t,dW,dBH,dX")?;
        for k in 0..self.dx.len() {
            writeln!(
                out,
                "{},{},{},{},{}",
                k + 1,
                fmt_f64(self.grid.time(k + 1)),
                fmt_f64(self.dw[k]),
                fmt_f64(self.dbh[k]),
                fmt_f64(self.dx[k])
            )?;
        }
        Ok(())
    }
}

/// Reusable sampler for mixed paths on one grid.
#[derive(Clone, Debug)]
pub struct MixedSampler {
    grid: SampleGrid,
    fbm: Option<FbmSampler>,
}

impl MixedSampler {
    pub fn new(grid: SampleGrid, h: HurstParam, includes_fbm: bool, method: SamplerMethod) -> Result<Self> {
        if includes_fbm && h.is_brownian() {
            return Err(invalid(
                "H",
                "the mixed model needs H > 1/2; use includes_fbm = false for the pure Brownian case",
            ));
        }
        let fbm = if includes_fbm {
            Some(FbmSampler::new(grid, h, method)?)
        } else {
            None
        };
        Ok(Self { grid, fbm })
    }

    pub fn grid(&self) -> SampleGrid {
        self.grid
    }

    pub fn sample(&self, rng: RngSpec) -> PathSample {
        let n = self.grid.steps();
        let sd = self.grid.dt().sqrt();
        let mut w_rng = rng.generator(Substream::Brownian);
        let dw: Vec<f64> = (0..n).map(|_| sd * w_rng.sample::<f64, _>(StandardNormal)).collect();
        let dbh = match &self.fbm {
            Some(s) => s.sample(&mut rng.generator(Substream::Fractional)),
            None => vec![0.0; n],
        };
        let dx = dw.iter().zip(&dbh).map(|(a, b)| a + b).collect();
        PathSample {
            grid: self.grid,
            dw,
            dbh,
            dx,
            includes_fbm: self.fbm.is_some(),
        }
    }
}

/// Mixed path `X = W + B^H` (or the pure Brownian path when `includes_fbm`
/// is false) using the circulant sampler.
pub fn simulate_mixed(grid: SampleGrid, h: HurstParam, rng: RngSpec, includes_fbm: bool) -> Result<PathSample> {
    simulate_mixed_with(grid, h, rng, includes_fbm, SamplerMethod::Circulant)
}

pub fn simulate_mixed_with(
    grid: SampleGrid,
    h: HurstParam,
    rng: RngSpec,
    includes_fbm: bool,
    method: SamplerMethod,
) -> Result<PathSample> {
    Ok(MixedSampler::new(grid, h, includes_fbm, method)?.sample(rng))
}
