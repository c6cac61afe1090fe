//! Reconstruct the Shepp-Logan phantom from noiseless `Kf` by Gauss-Newton.
//!
//! cargo run --release --example gauss_newton -- [n] [iterations]

use std::env;
use std::error::Error;

use spixct::phantom::generate_shepp_logan;
use spixct::singlepixel::single_pixel_forward;
use spixct::solver::{gauss_newton_reconstruct, SolverConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let args: Vec<String> = env::args().skip(1).collect();
    let n: usize = args.first().map_or(Ok(64), |s| s.parse())?;
    let iterations: usize = args.get(1).map_or(Ok(15), |s| s.parse())?;

    let truth = generate_shepp_logan(n, 1.0)?;
    let config = SolverConfig { max_outer_iters: iterations, ..SolverConfig::default() };
    let data = single_pixel_forward(&truth, config.n_angles_full)?;
    let (_, report) = gauss_newton_reconstruct(&data, &config, Some(&truth))?;
    print!("{}", report.to_csv());
    println!("final relative error {:.4}", report.final_relative_error().unwrap_or(f64::NAN));
    Ok(())
}
