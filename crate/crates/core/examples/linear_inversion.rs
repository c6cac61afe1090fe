//! Recover an image from `X'X f` with `c_2 |D|`, and filtered back-projection of a sinogram.

use spixct::metrics::{interior_relative_error, l2_norm};
use spixct::phantom::{generate_gaussian, generate_shepp_logan};
use spixct::projector::{normal_operator, xray_forward, RayGeometry};
use spixct::spectral::{filtered_backprojection, invert_xray_normal, SpectralConfig, Taper};
use spixct::{ImageGrid, Lattice, Result};

fn main() -> Result<()> {
    let f = generate_gaussian(128, 1.0, 0.15, 1.0)?;
    let geometry = RayGeometry::for_grid(f.grid(), 180)?;
    let normal = normal_operator(&f, &geometry)?;
    for (pad, taper) in [(2, Taper::None), (4, Taper::None), (2, Taper::Cosine)] {
        let config = SpectralConfig::new(pad, taper)?;
        let back = invert_xray_normal(&normal, &config);
        println!("gaussian, pad {pad} {taper:?}: interior error {:.4}", interior_relative_error(&back, &f)?);
    }

    let sl = generate_shepp_logan(128, 1.0)?;
    let geometry = RayGeometry::for_grid(sl.grid(), 180)?;
    let sinogram = xray_forward(&sl, &geometry)?;
    let fbp = filtered_backprojection(&sinogram, &ImageGrid::zeros(*sl.grid()), &SpectralConfig::default())?;
    let full = l2_norm(&fbp.with_values(fbp.values() - sl.values())?) / l2_norm(&sl);
    println!("shepp-logan FBP: interior error {:.4}, full-image error {full:.4}", interior_relative_error(&fbp, &sl)?);
    let c = 64;
    println!("centre value {:.4} (true {:.4})", fbp.values()[[c, c]], sl.values()[[c, c]]);
    Ok(())
}
