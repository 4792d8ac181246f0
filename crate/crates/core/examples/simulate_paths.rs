//! Simulate mixed paths with both samplers and check the fBm variance.
//!
//!     cargo run --release --example simulate_paths

use qvlab::estimators::realized_qv;
use qvlab::gaussian_paths::{simulate_fbm, simulate_mixed_with, HurstParam, SampleGrid, SamplerMethod};
use qvlab::rng::RngSpec;

fn main() -> qvlab::Result<()> {
    let grid = SampleGrid::new(1.0, 1 << 12)?;
    for h in [0.6, 0.75, 0.9] {
        let h = HurstParam::new(h)?;
        for method in [SamplerMethod::Circulant, SamplerMethod::Cholesky] {
            let path = simulate_mixed_with(grid, h, RngSpec::new(7, 0), true, method)?;
            println!(
                "H={:<4} {:<9} X(T)={:+.6} realized QV={:.6}",
                h.value(),
                format!("{method:?}"),
                path.terminal_value(),
                realized_qv(&path)
            );
        }
    }

    // Var B^H(1) = 1 for every H
    let small = SampleGrid::new(1.0, 64)?;
    let h = HurstParam::new(0.9)?;
    let m = 4000;
    let mut acc = 0.0;
    for r in 0..m {
        let dbh = simulate_fbm(small, h, SamplerMethod::Circulant, RngSpec::new(1, r))?;
        let end: f64 = dbh.iter().sum();
        acc += end * end;
    }
    println!("\nempirical Var B^H(1) over {m} paths: {:.4}", acc / m as f64);

    let path = simulate_mixed_with(SampleGrid::new(1.0, 8)?, h, RngSpec::new(3, 0), true, SamplerMethod::Circulant)?;
    let mut csv = Vec::new();
    path.write_csv(&mut csv)?;
    print!("\n{}", String::from_utf8_lossy(&csv));
    Ok(())
}
