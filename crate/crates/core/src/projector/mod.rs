//! The discrete X-ray transform.
//!
//! Two discretisations of the same line integrals live here:
//!
//! * [`xray_forward`] tabulates `Xf` on parallel lines `{s θ⊥ + t θ}` (a [`Sinogram`]),
//!   with [`xray_adjoint`] its exact transpose and [`normal_operator`] their composition.
//! * [`PixelRayOperator`] integrates the line through every pixel centre in every
//!   direction, giving `Xf(x, θ)` as needed inside the single-pixel transform.
//!
//! Both use composite-midpoint quadrature of the bilinear interpolant of the image
//! (zero outside the lattice) with step `pixel_spacing / 2` by default. Adjoints replay
//! exactly the forward weights, so the dot-product identities hold to rounding.
//!
//! Angular weights: a sinogram stores `n_angles` directions `θ_k = πk/n_angles` on the
//! half circle. Since `Xf(x, θ) = Xf(x, -θ)`, each stands for two directions of the full
//! circle, so the sinogram inner product carries `2 · (π/n_angles) · Δs`
//! ([`RayGeometry::sample_weight`]). This makes `X'X` approximate `2 ∫ f(y)/|x-y| dy`.

mod pixelray;
mod riesz;

pub use pixelray::{pixel_ray_adjoint, pixel_ray_field, pixel_ray_normal, PixelRayField, PixelRayOperator};
pub use riesz::{riesz_oracle, riesz_self_term};

use std::f64::consts::{PI, SQRT_2};

use ndarray::Array2;

use crate::error::{invalid, Result};
use crate::grid::{Grid, ImageGrid, Lattice};

/// Parallel-beam sampling of the line space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayGeometry {
    n_angles: usize,
    n_offsets: usize,
    offset_extent: f64,
    step_along_ray: f64,
}

impl RayGeometry {
    pub fn new(n_angles: usize, n_offsets: usize, offset_extent: f64, step_along_ray: f64) -> Result<Self> {
        if n_angles == 0 {
            return Err(invalid("n_angles must be positive"));
        }
        if n_offsets < 2 {
            return Err(invalid(format!("need at least 2 offsets, got {n_offsets}")));
        }
        if !(offset_extent > 0.0 && offset_extent.is_finite()) {
            return Err(invalid(format!("offset_extent must be positive, got {offset_extent}")));
        }
        if !(step_along_ray > 0.0 && step_along_ray.is_finite()) {
            return Err(invalid(format!("step_along_ray must be positive, got {step_along_ray}")));
        }
        Ok(Self { n_angles, n_offsets, offset_extent, step_along_ray })
    }

    /// Default geometry for `grid`: offsets cover `[-w√2, w√2]` at half the pixel spacing
    /// (always including offset 0), with ray step `h/2`. Coarser offsets leave aliasing in
    /// `X'X` that `|D|` amplifies.
    pub fn for_grid(grid: &Grid, n_angles: usize) -> Result<Self> {
        let h = grid.spacing();
        let extent = grid.half_width() * SQRT_2;
        let half_count = (2.0 * extent / h).ceil() as usize;
        Self::new(n_angles, 2 * half_count + 1, extent, 0.5 * h)
    }

    pub fn n_angles(&self) -> usize {
        self.n_angles
    }

    pub fn n_offsets(&self) -> usize {
        self.n_offsets
    }

    pub fn offset_extent(&self) -> f64 {
        self.offset_extent
    }

    pub fn step_along_ray(&self) -> f64 {
        self.step_along_ray
    }

    pub fn angle(&self, k: usize) -> f64 {
        PI * k as f64 / self.n_angles as f64
    }

    pub fn offset_spacing(&self) -> f64 {
        2.0 * self.offset_extent / (self.n_offsets - 1) as f64
    }

    pub fn offset(&self, j: usize) -> f64 {
        -self.offset_extent + j as f64 * self.offset_spacing()
    }

    /// Weight of one sinogram sample in the line-space inner product: the half-circle
    /// angle step doubled for the full circle, times the offset step.
    pub fn sample_weight(&self) -> f64 {
        2.0 * PI / self.n_angles as f64 * self.offset_spacing()
    }

    pub(crate) fn check_covers(&self, grid: &Grid) -> Result<()> {
        let needed = grid.half_width() * SQRT_2;
        if self.offset_extent < needed * (1.0 - 1e-12) {
            return Err(invalid(format!(
                "offset_extent {} does not cover the image (needs >= {needed})",
                self.offset_extent
            )));
        }
        Ok(())
    }
}

/// Line integrals indexed by (angle, offset).
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    geometry: RayGeometry,
    values: Array2<f64>,
}

impl Sinogram {
    pub fn new(geometry: RayGeometry, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (geometry.n_angles, geometry.n_offsets) {
            return Err(invalid(format!(
                "sinogram values of shape {:?} do not match geometry {}x{}",
                values.dim(),
                geometry.n_angles,
                geometry.n_offsets
            )));
        }
        Ok(Self { geometry, values })
    }

    pub fn geometry(&self) -> &RayGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    /// `Σ a·b` weighted by [`RayGeometry::sample_weight`].
    pub fn inner(&self, other: &Sinogram) -> f64 {
        self.geometry.sample_weight() * dot(&self.values, &other.values)
    }
}

/// Euclidean dot product of two equally shaped arrays.
pub(crate) fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Image inner product `h^2 Σ a·b`.
pub fn image_inner(a: &ImageGrid, b: &ImageGrid) -> f64 {
    a.grid().cell_area() * dot(a.values(), b.values())
}

/// Visit the bilinear weights of one sample point given in fractional index coordinates
/// (`u` along columns, `v` along rows); corners outside the lattice are skipped.
#[inline]
fn bilinear(n: usize, u: f64, v: f64, scale: f64, mut visit: impl FnMut(usize, f64)) {
    let j0 = u.floor();
    let i0 = v.floor();
    if j0 < -1.0 || i0 < -1.0 || j0 >= n as f64 || i0 >= n as f64 {
        return;
    }
    let (fu, fv) = (u - j0, v - i0);
    let (j0, i0) = (j0 as isize, i0 as isize);
    let n = n as isize;
    let corners = [
        (i0, j0, (1.0 - fv) * (1.0 - fu)),
        (i0, j0 + 1, (1.0 - fv) * fu),
        (i0 + 1, j0, fv * (1.0 - fu)),
        (i0 + 1, j0 + 1, fv * fu),
    ];
    for (i, j, w) in corners {
        if i >= 0 && j >= 0 && i < n && j < n && w != 0.0 {
            visit((i * n + j) as usize, scale * w);
        }
    }
}

/// All (pixel, weight) pairs of the quadrature of the line `{s θ⊥ + t θ}`.
fn for_each_line_weight(grid: &Grid, theta: f64, s: f64, step: f64, mut visit: impl FnMut(usize, f64)) {
    let n = grid.n();
    let h = grid.spacing();
    let w = grid.half_width();
    let (sin, cos) = theta.sin_cos();
    // Any point of the padded square lies within this distance of the foot point.
    let reach = w * SQRT_2 + h;
    if s.abs() > reach {
        return;
    }
    let half_samples = (reach / step).ceil() as i64;
    let (px, py) = (-s * sin, s * cos);
    for m in -half_samples..half_samples {
        let t = (m as f64 + 0.5) * step;
        let x = px + t * cos;
        let y = py + t * sin;
        let u = (x + w) / h;
        let v = (w - y) / h;
        bilinear(n, u, v, step, &mut visit);
    }
}

/// Quadrature of one line integral `∫ f(s θ⊥ + t θ) dt`.
pub fn line_integral(image: &ImageGrid, theta: f64, offset: f64, step: f64) -> f64 {
    let data = image.values().as_slice().expect("standard layout");
    let mut acc = 0.0;
    for_each_line_weight(image.grid(), theta, offset, step, |idx, w| acc += w * data[idx]);
    acc
}

/// Sinogram of `image`: every entry is the midpoint quadrature of its line.
pub fn xray_forward(image: &ImageGrid, geometry: &RayGeometry) -> Result<Sinogram> {
    geometry.check_covers(image.grid())?;
    let grid = image.grid();
    let data = image.values().as_standard_layout();
    let data = data.as_slice().expect("standard layout");
    let mut values = Array2::zeros((geometry.n_angles, geometry.n_offsets));
    for ((k, j), out) in values.indexed_iter_mut() {
        let mut acc = 0.0;
        for_each_line_weight(grid, geometry.angle(k), geometry.offset(j), geometry.step_along_ray, |idx, w| {
            acc += w * data[idx]
        });
        *out = acc;
    }
    Sinogram::new(*geometry, values)
}

/// Exact transpose of [`xray_forward`] under the weighted inner products.
pub fn xray_adjoint(sinogram: &Sinogram, target: &ImageGrid) -> Result<ImageGrid> {
    sinogram.geometry().check_covers(target.grid())?;
    backproject(sinogram, target)
}

/// Backprojection onto any lattice; lines outside the sampled offsets contribute nothing,
/// which is exact when the sinogram came from an image inside its coverage.
pub(crate) fn backproject(sinogram: &Sinogram, target: &ImageGrid) -> Result<ImageGrid> {
    let geometry = sinogram.geometry();
    let grid = target.grid();
    let scale = geometry.sample_weight() / grid.cell_area();
    let mut out = vec![0.0; grid.pixel_count()];
    for ((k, j), &psi) in sinogram.values().indexed_iter() {
        if psi == 0.0 {
            continue;
        }
        let c = scale * psi;
        for_each_line_weight(grid, geometry.angle(k), geometry.offset(j), geometry.step_along_ray, |idx, w| {
            out[idx] += c * w
        });
    }
    let values = Array2::from_shape_vec((grid.n(), grid.n()), out).expect("pixel count");
    target.with_values(values)
}

/// `X'X f`, the discrete analogue of `2 ∫ f(y) / |x - y| dy`.
pub fn normal_operator(image: &ImageGrid, geometry: &RayGeometry) -> Result<ImageGrid> {
    xray_adjoint(&xray_forward(image, geometry)?, image)
}
