//! The law catalog: characteristic functions, the integrability check and
//! wrapped densities.
//!
//!     cargo run --release --example mixing_laws

use qvlab::mixing_laws::{verify_assumption1, MixingLaw, ASSUMPTION_DEFAULT_TOL};

fn main() -> qvlab::Result<()> {
    println!("{:<12} {:>10} {:>10} {:>10}  assumption", "law", "phi(0.5)", "phi(2)", "phi(10)");
    for law in MixingLaw::catalog() {
        let check = verify_assumption1(&law, ASSUMPTION_DEFAULT_TOL)?;
        println!(
            "{:<12} {:>10.6} {:>10.6} {:>10.6}  {:?} (value {:?})",
            law.to_string(),
            law.charfn(0.5),
            law.charfn(2.0),
            law.charfn(10.0),
            check.status,
            check.value
        );
    }

    let scaled: MixingLaw = "cauchy:2".parse()?;
    println!("\n{scaled}: phi(1) = {:.6}, tail mass beyond 5 = {:.6}", scaled.charfn(1.0), scaled.tail_mass(5.0));

    let period = 3.0;
    for law in [MixingLaw::gaussian(), MixingLaw::cauchy(), MixingLaw::triangular()] {
        let steps = 2000;
        let h = period / steps as f64;
        let mass: f64 = (0..steps)
            .map(|k| law.wrapped_density(-period / 2.0 + (k as f64 + 0.5) * h, period).unwrap() * h)
            .sum();
        println!("{law}: wrapped density on a period of {period} integrates to {mass:.8}");
    }
    Ok(())
}
