mod common;

use std::sync::OnceLock;

use common::*;
use spixct::metrics::l2_norm;
use spixct::phantom::generate_gaussian;
use spixct::singlepixel::{frechet_adjoint, single_pixel_forward};
use spixct::solver::{gauss_newton_reconstruct, residual, SolveReport, SolverConfig, Termination};
use spixct::{ImageGrid, Lattice};

const ANGLES: usize = 64;

fn objective(f: &ImageGrid, data: &spixct::ScalarField) -> f64 {
    let (_, norm) = residual(f, data, ANGLES).unwrap();
    0.5 * norm * norm
}

#[test]
fn gradient_matches_central_differences() {
    let f = random_image(24, 31, 0.0, 0.5);
    let data = single_pixel_forward(&random_image(24, 32, 0.0, 0.5), ANGLES).unwrap();
    let (r, _) = residual(&f, &data, ANGLES).unwrap();
    let grad = frechet_adjoint(&f, &r, ANGLES).unwrap();
    let t = 1e-5;
    for k in 0..5 {
        let d = random_image(24, 100 + k, -1.0, 1.0);
        let d = d.scaled(1.0 / l2_norm(&d));
        let plus = f.with_values(f.values() + &(d.values() * t)).unwrap();
        let minus = f.with_values(f.values() - &(d.values() * t)).unwrap();
        let fd = (objective(&plus, &data) - objective(&minus, &data)) / (2.0 * t);
        let analytic = lattice_inner(&grad, &d);
        assert!((fd - analytic).abs() <= 1e-4 * analytic.abs(), "direction {k}: {fd} vs {analytic}");
    }
}

/// Noiseless Gaussian of amplitude 0.5 on 64², shared by the tests below.
fn gaussian_run() -> &'static (ImageGrid, ImageGrid, SolveReport) {
    static RUN: OnceLock<(ImageGrid, ImageGrid, SolveReport)> = OnceLock::new();
    RUN.get_or_init(|| {
        let truth = generate_gaussian(64, 1.0, 0.2, 0.5).unwrap();
        let config = SolverConfig { max_outer_iters: 20, ..SolverConfig::default() };
        let data = single_pixel_forward(&truth, config.n_angles_full).unwrap();
        let (f, report) = gauss_newton_reconstruct(&data, &config, Some(&truth)).unwrap();
        (truth, f, report)
    })
}

#[test]
fn small_gaussian_is_recovered_within_twenty_iterations() {
    let (truth, f, report) = gaussian_run();
    assert!(report.iterations() <= 20);
    let rel = l2_norm(&f.with_values(f.values() - truth.values()).unwrap()) / l2_norm(truth);
    assert!(rel < 0.05, "relative error {rel}");
    assert!((report.final_relative_error().unwrap() - rel).abs() < 1e-12);
}

#[test]
fn early_iterations_reduce_the_error() {
    let (_, _, report) = gaussian_run();
    let errors: Vec<f64> = report.records.iter().take(6).map(|r| r.error_norm.unwrap()).collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
}

#[test]
fn accepted_steps_never_raise_the_residual() {
    let (_, _, report) = gaussian_run();
    assert!(report.records.windows(2).all(|w| w[1].residual_norm <= w[0].residual_norm));
    assert!(report.records.iter().all(|r| r.residual_norm.is_finite()));
}

#[test]
fn data_at_zero_returns_zero() {
    let grid = spixct::Grid::new(32, 1.0).unwrap();
    let data = single_pixel_forward(&ImageGrid::zeros(grid), 32).unwrap();
    let config = SolverConfig { n_angles_full: 32, ..SolverConfig::default() };
    let (f, report) = gauss_newton_reconstruct(&data, &config, None).unwrap();
    assert!(report.iterations() <= 1);
    assert_eq!(report.termination, Termination::Converged);
    assert!(f.values().iter().all(|&v| v == 0.0));
}

#[test]
fn residual_examples() {
    let g = generate_gaussian(24, 1.0, 0.2, 1.0).unwrap();
    let zero = ImageGrid::zeros(*g.grid());
    let data = single_pixel_forward(&g, 32).unwrap();
    assert!(residual(&g, &data, 32).unwrap().1 <= 1e-12);
    assert!(residual(&zero, &single_pixel_forward(&zero, 32).unwrap(), 32).unwrap().1 <= 1e-12);
    assert!(residual(&zero, &data, 32).unwrap().1 > 0.0);
}
