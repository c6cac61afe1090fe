//! Reconstruct `m · f` for growing `m`: larger attenuation makes the problem harder until
//! the iteration no longer recovers the phantom.

use spixct::phantom::generate_shepp_logan;
use spixct::singlepixel::single_pixel_forward;
use spixct::solver::{gauss_newton_reconstruct, SolverConfig};
use spixct::{Error, Result};

fn main() -> Result<()> {
    let base = generate_shepp_logan(64, 1.0)?;
    let config = SolverConfig { max_outer_iters: 15, ..SolverConfig::default() };
    println!("multiplier  iterations  rel_error  termination");
    for m in [1.0, 10.0, 20.0, 40.0] {
        let truth = base.scaled(m);
        let data = single_pixel_forward(&truth, config.n_angles_full)?;
        let report = match gauss_newton_reconstruct(&data, &config, Some(&truth)) {
            Ok((_, report)) => report,
            Err(Error::Diverged(report)) => *report,
            Err(e) => return Err(e),
        };
        let err = report.final_relative_error().unwrap_or(f64::NAN);
        println!("{m:>10}  {:>10}  {err:>9.4}  {}", report.iterations(), report.termination);
    }
    Ok(())
}
