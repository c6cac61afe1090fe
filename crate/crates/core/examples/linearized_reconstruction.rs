//! Recover `g` from the derivative of `ε ↦ K[εg]` at zero, both from finite differences
//! and from the analytic derivative.

use spixct::metrics::interior_relative_error;
use spixct::phantom::generate_gaussian;
use spixct::singlepixel::{linearize_by_epsilon, linearized_reconstruction};
use spixct::spectral::SpectralConfig;
use spixct::Result;

fn main() -> Result<()> {
    let g = generate_gaussian(128, 1.0, 0.15, 1.0)?;
    let config = SpectralConfig::default();
    let epsilons = [1e-1, 1e-2, 1e-3, 1e-4];
    let study = linearize_by_epsilon(&g, &epsilons, 360)?;
    print!("{}", study.to_csv());

    for &eps in &epsilons {
        let single = linearize_by_epsilon(&g, &[eps], 360)?;
        let rec = linearized_reconstruction(&single.field, &config);
        println!("eps {eps:e}: interior error {:.5}", interior_relative_error(&rec, &g)?);
    }
    let analytic = linearized_reconstruction(&study.derivative, &config);
    println!("analytic: interior error {:.5}", interior_relative_error(&analytic, &g)?);
    Ok(())
}
