//! Test images: Shepp-Logan, disks, Gaussians and general ellipse sets.
//!
//! All generators sample at pixel centres (no area averaging) and zero every pixel
//! outside the support disk of radius `0.95 * half_width`.

use crate::error::{invalid, Result};
use crate::grid::{Grid, ImageGrid};

/// One additive ellipse of a phantom, in physical coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseSpec {
    pub center: (f64, f64),
    pub semi_axes: (f64, f64),
    /// Counter-clockwise rotation of the first semi-axis from the x axis, radians.
    pub rotation: f64,
    pub additive_intensity: f64,
}

impl EllipseSpec {
    pub fn new(center: (f64, f64), semi_axes: (f64, f64), rotation: f64, intensity: f64) -> Result<Self> {
        let (a, b) = semi_axes;
        if !(a > 0.0 && b > 0.0) {
            return Err(invalid(format!("ellipse semi-axes must be positive, got ({a}, {b})")));
        }
        Ok(Self { center, semi_axes, rotation, additive_intensity: intensity })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let (s, c) = self.rotation.sin_cos();
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        let (a, b) = self.semi_axes;
        (u / a).powi(2) + (v / b).powi(2) <= 1.0
    }

    fn scaled(&self, factor: f64) -> Self {
        Self {
            center: (self.center.0 * factor, self.center.1 * factor),
            semi_axes: (self.semi_axes.0 * factor, self.semi_axes.1 * factor),
            ..*self
        }
    }
}

/// Rows of the ten-ellipse Shepp-Logan table on the unit square:
/// `(x0, y0, a, b, rotation in degrees, intensity)`.
///
/// Intensities follow the usual `1, -0.98, -0.02, ...` scaling, so the skull is 1 and the
/// brain tissue sits at 0.02. The same table is shipped in `fixtures/shepp_logan.csv`.
pub const SHEPP_LOGAN_TABLE: [[f64; 6]; 10] = [
    [0.0, 0.0, 0.69, 0.92, 0.0, 1.0],
    [0.0, -0.0184, 0.6624, 0.874, 0.0, -0.98],
    [0.22, 0.0, 0.11, 0.31, -18.0, -0.02],
    [-0.22, 0.0, 0.16, 0.41, 18.0, -0.02],
    [0.0, 0.35, 0.21, 0.25, 0.0, 0.01],
    [0.0, 0.1, 0.046, 0.046, 0.0, 0.01],
    [0.0, -0.1, 0.046, 0.046, 0.0, 0.01],
    [-0.08, -0.605, 0.046, 0.023, 0.0, 0.01],
    [0.0, -0.605, 0.023, 0.023, 0.0, 0.01],
    [0.06, -0.605, 0.023, 0.046, 0.0, 0.01],
];

pub fn shepp_logan_ellipses() -> Vec<EllipseSpec> {
    SHEPP_LOGAN_TABLE
        .iter()
        .map(|r| EllipseSpec {
            center: (r[0], r[1]),
            semi_axes: (r[2], r[3]),
            rotation: r[4].to_radians(),
            additive_intensity: r[5],
        })
        .collect()
}

/// Sum of ellipse indicator functions at each pixel centre, then support-masked.
pub fn generate_ellipses(grid: Grid, ellipses: &[EllipseSpec]) -> ImageGrid {
    let values = grid.sample(|x, y| {
        ellipses
            .iter()
            .filter(|e| e.contains(x, y))
            .map(|e| e.additive_intensity)
            .sum()
    });
    masked(grid, values)
}

/// The Shepp-Logan head phantom, with the unit-square table scaled to `half_width`.
pub fn generate_shepp_logan(n_pixels: usize, half_width: f64) -> Result<ImageGrid> {
    if n_pixels < 8 {
        return Err(invalid(format!("Shepp-Logan needs at least 8 pixels per side, got {n_pixels}")));
    }
    let grid = Grid::new(n_pixels, half_width)?;
    let ellipses: Vec<_> = shepp_logan_ellipses().iter().map(|e| e.scaled(half_width)).collect();
    Ok(generate_ellipses(grid, &ellipses))
}

/// `amplitude` inside the centred disk of `radius`, zero outside.
pub fn generate_disk(n_pixels: usize, half_width: f64, radius: f64, amplitude: f64) -> Result<ImageGrid> {
    let grid = Grid::new(n_pixels, half_width)?;
    if !(radius > 0.0 && radius <= half_width) {
        return Err(invalid(format!("disk radius {radius} must lie in (0, {half_width}]")));
    }
    let r2 = radius * radius;
    let values = grid.sample(|x, y| if x * x + y * y <= r2 { amplitude } else { 0.0 });
    Ok(masked(grid, values))
}

/// Centred Gaussian `amplitude * exp(-|x|^2 / (2 sigma^2))`, cut to zero below
/// `1e-12 * |amplitude|` and outside the support disk.
pub fn generate_gaussian(n_pixels: usize, half_width: f64, sigma: f64, amplitude: f64) -> Result<ImageGrid> {
    generate_gaussian_at(n_pixels, half_width, (0.0, 0.0), sigma, amplitude)
}

pub fn generate_gaussian_at(
    n_pixels: usize,
    half_width: f64,
    center: (f64, f64),
    sigma: f64,
    amplitude: f64,
) -> Result<ImageGrid> {
    let grid = Grid::new(n_pixels, half_width)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("Gaussian width must be positive, got {sigma}")));
    }
    let floor = 1e-12 * amplitude.abs();
    let values = grid.sample(|x, y| {
        let r2 = (x - center.0).powi(2) + (y - center.1).powi(2);
        let v = amplitude * (-r2 / (2.0 * sigma * sigma)).exp();
        if v.abs() < floor {
            0.0
        } else {
            v
        }
    });
    Ok(masked(grid, values))
}

fn masked(grid: Grid, values: ndarray::Array2<f64>) -> ImageGrid {
    let mut image = ImageGrid::from_values(grid, values).expect("generators produce finite values");
    image.apply_support_mask();
    image
}
