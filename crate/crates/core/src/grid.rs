//! Square pixel lattices and the values stored on them.
//!
//! Pixel `(i, j)` sits at the physical point `(-w + j*h, w - i*h)` where `w` is the half
//! width and `h = 2w/(n-1)` the pixel spacing, so row 0 is the top edge (`y = w`) and the
//! outermost pixel centres lie exactly on the boundary of `[-w, w]^2`.

use ndarray::Array2;

use crate::error::{invalid, Result};

/// Fraction of the half width used as the default support radius.
pub const DEFAULT_SUPPORT_FRACTION: f64 = 0.95;

/// Geometry of an `n x n` lattice covering `[-half_width, half_width]^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    half_width: f64,
}

impl Grid {
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("grid needs at least 2 pixels per side, got {n}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(invalid(format!("half_width must be positive, got {half_width}")));
        }
        Ok(Self { n, half_width })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }

    pub fn pixel_count(&self) -> usize {
        self.n * self.n
    }

    /// Area element used by every discrete integral over the lattice.
    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    pub fn y(&self, i: usize) -> f64 {
        self.half_width - i as f64 * self.spacing()
    }

    /// Physical coordinates of pixel `(row, col)`.
    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        (self.x(j), self.y(i))
    }

    pub fn zeros(&self) -> Array2<f64> {
        Array2::zeros((self.n, self.n))
    }

    /// Evaluate `func(x, y)` at every pixel centre.
    pub fn sample(&self, mut func: impl FnMut(f64, f64) -> f64) -> Array2<f64> {
        Array2::from_shape_fn((self.n, self.n), |(i, j)| func(self.x(j), self.y(i)))
    }

    pub(crate) fn check_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self != other {
            return Err(invalid(format!(
                "{what}: grid mismatch ({}x{} on half width {} vs {}x{} on half width {})",
                self.n, self.n, self.half_width, other.n, other.n, other.half_width
            )));
        }
        Ok(())
    }

    pub(crate) fn check_shape(&self, values: &Array2<f64>) -> Result<()> {
        if values.dim() != (self.n, self.n) {
            return Err(invalid(format!(
                "values of shape {:?} do not fit a {}x{} grid",
                values.dim(),
                self.n,
                self.n
            )));
        }
        Ok(())
    }
}

/// Anything that lives on a [`Grid`]: images and measured fields.
pub trait Lattice {
    fn grid(&self) -> &Grid;
    fn values(&self) -> &Array2<f64>;
}

/// A real function `f` sampled at pixel centres; the reconstruction unknown.
///
/// `support_radius` is the radius of the disk that hosts the object (the domain the
/// density is supported in). Generators zero everything outside it; operator outputs
/// such as filtered reconstructions may carry values on the whole square.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    grid: Grid,
    support_radius: f64,
    values: Array2<f64>,
}

impl ImageGrid {
    pub fn new(grid: Grid, support_radius: f64, values: Array2<f64>) -> Result<Self> {
        grid.check_shape(&values)?;
        if !(support_radius > 0.0 && support_radius <= grid.half_width()) {
            return Err(invalid(format!(
                "support radius {support_radius} must lie in (0, {}]",
                grid.half_width()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("image values must be finite, found {v}")));
        }
        Ok(Self { grid, support_radius, values })
    }

    /// Image on `grid` with the default support radius.
    pub fn from_values(grid: Grid, values: Array2<f64>) -> Result<Self> {
        Self::new(grid, DEFAULT_SUPPORT_FRACTION * grid.half_width(), values)
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            support_radius: DEFAULT_SUPPORT_FRACTION * grid.half_width(),
            values: grid.zeros(),
        }
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Same grid and support, new values.
    pub fn with_values(&self, values: Array2<f64>) -> Result<Self> {
        Self::new(self.grid, self.support_radius, values)
    }

    /// 0/1 indicator of the support disk.
    pub fn support_mask(&self) -> Array2<f64> {
        support_mask(&self.grid, self.support_radius)
    }

    /// Zero every pixel outside the support disk.
    pub fn apply_support_mask(&mut self) {
        let r2 = self.support_radius * self.support_radius;
        let grid = self.grid;
        for ((i, j), v) in self.values.indexed_iter_mut() {
            let (x, y) = grid.point(i, j);
            if x * x + y * y > r2 {
                *v = 0.0;
            }
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            support_radius: self.support_radius,
            values: &self.values * factor,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl Lattice for ImageGrid {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn values(&self) -> &Array2<f64> {
        &self.values
    }
}

/// Data sampled on the image lattice: `Kf(x)` per source location, or derivative data.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Array2<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Array2<f64>) -> Result<Self> {
        grid.check_shape(&values)?;
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self { grid, values: Array2::from_elem((grid.n(), grid.n()), value) }
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }
}

impl Lattice for ScalarField {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn values(&self) -> &Array2<f64> {
        &self.values
    }
}

pub(crate) fn support_mask(grid: &Grid, radius: f64) -> Array2<f64> {
    let r2 = radius * radius;
    grid.sample(|x, y| if x * x + y * y <= r2 { 1.0 } else { 0.0 })
}
