use std::time::Instant;

use qvlab::estimators::{estimate, fft_quadratic_form, kernel_quadratic_form, FrequencyScale, Route};
use qvlab::gaussian_paths::{simulate_mixed, HurstParam, SampleGrid};
use qvlab::mixing_laws::MixingLaw;
use qvlab::rng::RngSpec;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn three_routes_agree() {
    let grid = SampleGrid::new(1.0, 1 << 10).unwrap();
    for (i, h) in [0.6, 0.75, 0.9].into_iter().enumerate() {
        let path = simulate_mixed(grid, HurstParam::new(h).unwrap(), RngSpec::new(100, i as u64), true).unwrap();
        for l in [10.0, 50.0, 150.0] {
            let l = FrequencyScale::new(l).unwrap();
            for law in [MixingLaw::gaussian(), MixingLaw::cauchy()] {
                let e = |route| estimate(&path, l, &law, route, 1e-10).unwrap().value;
                let (fft, kernel, quad) = (e(Route::Fft), e(Route::Kernel), e(Route::DirectQuadrature));
                assert!(rel(fft, kernel) <= 1e-9, "H={h} L={} {law}: fft {fft} kernel {kernel}", l.value());
                assert!(rel(quad, kernel) <= 1e-6, "H={h} L={} {law}: quad {quad} kernel {kernel}", l.value());
            }
        }
    }
}

#[test]
fn fft_matches_kernel_on_a_long_path() {
    let path = simulate_mixed(SampleGrid::new(1.0, 1 << 12).unwrap(), HurstParam::new(0.8).unwrap(), RngSpec::new(5, 5), true)
        .unwrap();
    let law = MixingLaw::gaussian();
    let k = kernel_quadratic_form(&path.dx, path.grid.dt(), 50.0, &law);
    let f = fft_quadratic_form(&path.dx, path.grid.dt(), 50.0, &law);
    assert!(rel(f, k) <= 1e-9, "{f} vs {k}");
}

#[test]
fn fft_is_fifty_times_faster_at_two_to_the_sixteen() {
    let path = simulate_mixed(SampleGrid::new(1.0, 1 << 16).unwrap(), HurstParam::new(0.8).unwrap(), RngSpec::new(6, 0), true)
        .unwrap();
    let law = MixingLaw::cauchy();
    let dt = path.grid.dt();
    let start = Instant::now();
    let k = kernel_quadratic_form(&path.dx, dt, 1000.0, &law);
    let kernel_time = start.elapsed().as_secs_f64();
    // best of several runs for the fast route
    let mut fft_time = f64::INFINITY;
    let mut f = 0.0;
    for _ in 0..5 {
        let start = Instant::now();
        f = fft_quadratic_form(&path.dx, dt, 1000.0, &law);
        fft_time = fft_time.min(start.elapsed().as_secs_f64());
    }
    assert!(rel(f, k) <= 1e-9);
    let ratio = kernel_time / fft_time;
    assert!(ratio >= 50.0, "speedup {ratio:.1} (kernel {kernel_time:.3}s, fft {fft_time:.5}s)");
}
