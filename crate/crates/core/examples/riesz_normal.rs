//! Compare `X'X f` with the direct Riesz-potential sum `2 ∫ f(y)/|x-y| dy`.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spixct::metrics::l2_norm;
use spixct::projector::{normal_operator, riesz_oracle, PixelRayOperator, RayGeometry};
use spixct::{Grid, ImageGrid, Lattice, Result};

fn main() -> Result<()> {
    let grid = Grid::new(24, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut f = ImageGrid::from_values(grid, Array2::from_shape_fn((24, 24), |_| rng.random_range(0.0..1.0)))?;
    f.apply_support_mask();
    let oracle = riesz_oracle(&f);
    let scale = l2_norm(&oracle);
    println!("angles  sinogram X'X  pixel-ray X'X   (relative L2 distance to the oracle)");
    for angles in [10, 20, 45, 90, 180, 360] {
        let sino = normal_operator(&f, &RayGeometry::for_grid(&grid, angles)?)?;
        let pixel = f.with_values(PixelRayOperator::new(grid, 2 * angles)?.normal(f.values()))?;
        let d1 = l2_norm(&sino.with_values(sino.values() - oracle.values())?) / scale;
        let d2 = l2_norm(&pixel.with_values(pixel.values() - oracle.values())?) / scale;
        println!("{angles:>6}  {d1:>12.6}  {d2:>13.6}");
    }
    Ok(())
}
