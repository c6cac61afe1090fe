//! Final reconstruction error against relative noise level, with one shared seed so that
//! only the noise amplitude changes between runs.

use spixct::metrics::{add_relative_noise, NoiseSpec};
use spixct::phantom::generate_shepp_logan;
use spixct::singlepixel::single_pixel_forward;
use spixct::solver::{gauss_newton_reconstruct, SolverConfig};
use spixct::Result;

fn main() -> Result<()> {
    let truth = generate_shepp_logan(64, 1.0)?;
    let config = SolverConfig { max_outer_iters: 15, ..SolverConfig::default() };
    let clean = single_pixel_forward(&truth, config.n_angles_full)?;
    let mut base = None;
    println!("level   rel_error  ratio_to_0.1%");
    for level in [0.0, 0.001, 0.005, 0.01] {
        let data = add_relative_noise(&clean, &NoiseSpec::new(level, 7)?);
        let (_, report) = gauss_newton_reconstruct(&data, &config, Some(&truth))?;
        let err = report.final_relative_error().unwrap_or(f64::NAN);
        if level == 0.001 {
            base = Some(err);
        }
        let ratio = base.map_or(String::from("-"), |b| format!("{:.2}", err / b));
        println!("{level:<7} {err:.5}    {ratio}");
    }
    Ok(())
}
