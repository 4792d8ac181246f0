//! A small Monte Carlo run in each regime.
//!
//!     cargo run --release --example clt_experiment

use qvlab::gaussian_paths::HurstParam;
use qvlab::montecarlo::{run_experiment, ExperimentConfig};

fn main() -> qvlab::Result<()> {
    for (h, law) in [(0.9, "gaussian"), (0.75, "gaussian"), (0.6, "cauchy")] {
        let mut cfg = ExperimentConfig::new(HurstParam::new(h)?, law, vec![25.0, 50.0, 100.0]);
        cfg.replications = 400;
        cfg.master_seed = 2024;
        let report = run_experiment(&cfg)?;
        let th = &report.theory;
        println!(
            "H={h} {law}: regime {:?}, gamma={}, sigma^2={:.6}, mu={:.6}",
            th.regime, th.gamma, th.sigma_sq, th.mu
        );
        for r in &report.rows {
            let ks = r.ks.map_or("-".to_string(), |k| format!("{k:.4}"));
            println!(
                "  L={:<4} n={:<4} mean={:+.4} (se {:.4}) var={:.4} ks={ks}",
                r.l, r.n, r.mean, r.std_err, r.variance
            );
            if let Some(c) = &r.concentration {
                println!(
                    "         within {} of mu: {:.3}, |sqrt(L)(E-T)| = {:.4}, |L^(1/2-eps)(E-T)| = {:.4}",
                    c.radius, c.fraction_within, c.growth.mean_abs_sqrt_l, c.growth.mean_abs_l_half_minus_eps
                );
            }
        }
        if let Some(v) = &report.variance_resolution {
            for c in &v.candidates {
                println!("  var/{} = {:.3}{}", c.name, c.ratio, if c.matches { " (match)" } else { "" });
            }
            println!("  var/twice_sigma_sq = {:.3}, KS target: {}", v.twice_sigma_sq_ratio, v.chosen);
        }
        let mut csv = Vec::new();
        report.write_csv(&mut csv)?;
        print!("{}", String::from_utf8_lossy(&csv));
    }
    Ok(())
}
