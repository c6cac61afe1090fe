//! Dot-product tests for the sinogram transform, the pixel-ray field and `K'[f]`.

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spixct::projector::{image_inner, xray_adjoint, xray_forward, PixelRayOperator, RayGeometry, Sinogram};
use spixct::singlepixel::SinglePixel;
use spixct::{Grid, ImageGrid, Result};

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let grid = Grid::new(32, 1.0)?;
    let mut random = |shape: (usize, usize)| Array2::from_shape_fn(shape, |_| rng.random_range(-1.0..1.0));

    let f = ImageGrid::from_values(grid, random((32, 32)))?;
    let geometry = RayGeometry::for_grid(&grid, 60)?;
    let s = Sinogram::new(geometry, random((60, geometry.n_offsets())))?;
    let xf = xray_forward(&f, &geometry)?;
    let xts = xray_adjoint(&s, &f)?;
    let (lhs, rhs) = (xf.inner(&s), image_inner(&f, &xts));
    println!("sinogram  <Xf, s> = {lhs:+.15e}  <f, X's> = {rhs:+.15e}  rel {:.1e}", (lhs - rhs).abs() / lhs.abs());

    let op = PixelRayOperator::new(grid, 48)?;
    let w = Array3::from_shape_fn((48, 32, 32), |_| rng.random_range(-1.0..1.0));
    let lhs = op.field(&f)?.inner(&w);
    let rhs = image_inner(&f, &f.with_values(op.adjoint(&w)?)?);
    println!("pixel-ray <Pf, w> = {lhs:+.15e}  <f, P'w> = {rhs:+.15e}  rel {:.1e}", (lhs - rhs).abs() / lhs.abs());

    let base = ImageGrid::from_values(grid, Array2::from_shape_fn((32, 32), |_| rng.random_range(0.0..0.5)))?;
    let h = Array2::from_shape_fn((32, 32), |_| rng.random_range(-1.0..1.0));
    let r = Array2::from_shape_fn((32, 32), |_| rng.random_range(-1.0..1.0));
    let sp = SinglePixel::new(grid, 48)?;
    let lin = sp.linearize(&base)?;
    let area = grid.cell_area();
    let lhs = area * lin.apply(&h).iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
    let rhs = area * h.iter().zip(&lin.apply_adjoint(&r)).map(|(a, b)| a * b).sum::<f64>();
    println!("frechet   <Jh, r> = {lhs:+.15e}  <h, J'r> = {rhs:+.15e}  rel {:.1e}", (lhs - rhs).abs() / lhs.abs());
    Ok(())
}
