//! FFT helpers for symmetric circulant matrices.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn forward(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

pub(crate) fn inverse(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

/// Eigenvalues of the symmetric circulant matrix whose first column is
/// `column` (the DFT of the column, which is real up to rounding).
pub(crate) fn circulant_eigenvalues(column: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex64> = column.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    forward(buf.len()).process(&mut buf);
    buf.into_iter().map(|z| z.re).collect()
}

/// Product of the symmetric Toeplitz matrix with first column `column`
/// (length n) and the vector `x` (length n), via a circulant embedding of
/// size `m ≥ 2n - 1` (a power of two).
pub(crate) fn symmetric_toeplitz_apply(column: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    assert_eq!(column.len(), n);
    if n == 0 {
        return Vec::new();
    }
    let m = (2 * n - 1).next_power_of_two();
    let mut c = vec![Complex64::new(0.0, 0.0); m];
    c[0].re = column[0];
    for k in 1..n {
        c[k].re = column[k];
        c[m - k].re = column[k];
    }
    let mut v = vec![Complex64::new(0.0, 0.0); m];
    for (slot, &xi) in v.iter_mut().zip(x) {
        slot.re = xi;
    }
    let fwd = forward(m);
    fwd.process(&mut c);
    fwd.process(&mut v);
    for (vi, ci) in v.iter_mut().zip(&c) {
        *vi *= ci;
    }
    inverse(m).process(&mut v);
    let scale = 1.0 / m as f64;
    v.truncate(n);
    v.into_iter().map(|z| z.re * scale).collect()
}
