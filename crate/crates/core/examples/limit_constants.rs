//! Limit constants for a few laws, and the A-term decomposition along L.
//!
//!     cargo run --release --example limit_constants

use std::time::Instant;

use qvlab::gaussian_paths::HurstParam;
use qvlab::limit_theory::{chaos_variance_terms, limit_constants, rho_bound, CHAOS_DEFAULT_TOL};
use qvlab::mixing_laws::MixingLaw;

fn main() -> qvlab::Result<()> {
    for law in [MixingLaw::gaussian(), MixingLaw::cauchy(), MixingLaw::triangular()] {
        for h in [0.6, 0.75, 0.9] {
            let c = limit_constants(&law, HurstParam::new(h)?, 1.0)?;
            println!(
                "{:<10} H={h:<4} sigma^2={:.10} mu={:.10} regime={:?} gamma={}",
                c.law, c.sigma_sq, c.mu, c.regime, c.gamma
            );
        }
    }

    let h = HurstParam::new(0.9)?;
    for l in [10.0, 100.0, 1000.0] {
        println!("rho(L={l}) = {:.6}", rho_bound(&MixingLaw::gaussian(), h, 1.0, l)?);
    }

    println!("\n   law        H      L     L*A1         L*(A2+A3)    L*(A1+A2+A3)   secs");
    for law in [MixingLaw::gaussian(), MixingLaw::cauchy()] {
        for h in [0.6, 0.8] {
            for l in [10.0, 100.0, 1000.0] {
                let start = Instant::now();
                let t = chaos_variance_terms(&law, HurstParam::new(h)?, 1.0, l, CHAOS_DEFAULT_TOL)?;
                println!(
                    "{:>9} {h:>6} {l:>6} {:>12.8} {:>12.8} {:>12.8} {:>8.2}",
                    law.to_string(),
                    l * t.a1,
                    t.scaled_fbm_part(),
                    t.scaled_total(),
                    start.elapsed().as_secs_f64()
                );
            }
        }
    }
    Ok(())
}
