//! KS distance of the normalized error against the rate bound ρ(L).
//!
//!     cargo run --release --example berry_esseen

use qvlab::gaussian_paths::HurstParam;
use qvlab::montecarlo::{berry_esseen, ExperimentConfig, VarianceTarget};

fn main() -> qvlab::Result<()> {
    let mut cfg = ExperimentConfig::new(HurstParam::new(0.9)?, "gaussian", vec![25.0, 50.0, 100.0, 200.0]);
    cfg.replications = 500;
    cfg.master_seed = 99;
    for target in [VarianceTarget::Auto, VarianceTarget::TwiceSigmaSq] {
        cfg.variance_target = target;
        let (_, summary) = berry_esseen(&cfg)?;
        println!("variance target {target:?}");
        for t in &summary.triples {
            println!("  L={:<5} KS={:.4} rho={:.4}", t.l, t.ks, t.rho);
        }
        println!(
            "  slopes: KS {:.3}, rho {:.3}, gap {:+.3}, KS decreasing: {}",
            summary.ks_slope, summary.rho_slope, summary.slope_gap, summary.ks_decreasing
        );
    }
    Ok(())
}
