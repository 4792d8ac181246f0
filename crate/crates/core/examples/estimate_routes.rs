//! One path, three evaluation routes of the estimator, and their timing.
//!
//!     cargo run --release --example estimate_routes

use qvlab::estimators::{estimate, realized_qv, FrequencyScale, Route, DEFAULT_QUADRATURE_TOL};
use qvlab::gaussian_paths::{simulate_mixed, HurstParam, SampleGrid};
use qvlab::mixing_laws::MixingLaw;
use qvlab::rng::RngSpec;

fn main() -> qvlab::Result<()> {
    let h = HurstParam::new(0.8)?;
    let path = simulate_mixed(SampleGrid::new(1.0, 1 << 10)?, h, RngSpec::new(11, 0), true)?;
    println!("realized QV = {:.10}", realized_qv(&path));
    for law in [MixingLaw::gaussian(), MixingLaw::cauchy()] {
        for l in [10.0, 50.0, 200.0] {
            let l = FrequencyScale::new(l)?;
            for route in [Route::Fft, Route::Kernel, Route::DirectQuadrature] {
                let e = estimate(&path, l, &law, route, DEFAULT_QUADRATURE_TOL)?;
                println!(
                    "{:<9} L={:<5} {:<18} {:.12}  {:>9.3} ms",
                    law.to_string(),
                    l.value(),
                    route.name(),
                    e.value,
                    e.wall_time * 1e3
                );
            }
        }
    }

    // consistency: the error shrinks as L grows, with n following L
    println!();
    for l in [10.0, 40.0, 160.0, 640.0] {
        let n = ((l / 0.2) as usize).next_power_of_two();
        let path = simulate_mixed(SampleGrid::new(1.0, n)?, h, RngSpec::new(5, 0), true)?;
        let e = estimate(&path, FrequencyScale::new(l)?, &MixingLaw::gaussian(), Route::Fft, DEFAULT_QUADRATURE_TOL)?;
        println!("L={l:<5} n={n:<5} |E - T| = {:.6}", (e.value - 1.0).abs());
    }
    Ok(())
}
