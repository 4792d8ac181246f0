#![allow(dead_code)]

use qvlab::gaussian_paths::{fbm_covariance, FbmSampler, HurstParam, SampleGrid, SamplerMethod};
use qvlab::rng::{RngSpec, Substream};

/// Largest `|Ĉ_ij - R_H(t_i, t_j)| / se_ij` over the `B^H` covariance matrix
/// on `n` steps of `[0, 1]`, from `m` paths. The mean is known to be zero, so
/// `se_ij² = (R_ii R_jj + R_ij²) / m`.
pub fn covariance_z_max(h: f64, n: usize, m: u64, method: SamplerMethod, seed: u64) -> f64 {
    let h = HurstParam::new(h).unwrap();
    let grid = SampleGrid::new(1.0, n).unwrap();
    let sampler = FbmSampler::new(grid, h, method).unwrap();
    let mut acc = vec![0.0; n * n];
    let mut values = vec![0.0; n];
    for r in 0..m {
        let dbh = sampler.sample(&mut RngSpec::new(seed, r).generator(Substream::Fractional));
        let mut x = 0.0;
        for (v, d) in values.iter_mut().zip(&dbh) {
            x += d;
            *v = x;
        }
        for i in 0..n {
            for j in i..n {
                acc[i * n + j] += values[i] * values[j];
            }
        }
    }
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            let (ti, tj) = (grid.time(i + 1), grid.time(j + 1));
            let r = fbm_covariance(ti, tj, h);
            let se = ((fbm_covariance(ti, ti, h) * fbm_covariance(tj, tj, h) + r * r) / m as f64).sqrt();
            worst = worst.max((acc[i * n + j] / m as f64 - r).abs() / se);
        }
    }
    worst
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}
