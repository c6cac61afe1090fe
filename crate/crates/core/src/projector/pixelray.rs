use std::collections::BTreeMap;
use std::f64::consts::{SQRT_2, TAU};

use ndarray::{Array2, Array3, Axis};

use crate::error::{invalid, Result};
use crate::grid::{Grid, ImageGrid, Lattice};

/// One stencil entry: `(Pf)[i, j] += weight * f[i + di, j + dj]`.
#[derive(Debug, Clone, Copy)]
struct Tap {
    di: isize,
    dj: isize,
    weight: f64,
}

/// `Xf(x, θ_k)` for every pixel centre `x` and every direction `θ_k = 2πk/n_full`.
///
/// The line through `x` is sampled at `x + s_m θ` with symmetric midpoint offsets
/// `s_m = (m + 1/2 - M/2) · step`, long enough to cross the whole lattice from any pixel.
/// Because the offsets do not depend on `x` and bilinear interpolation commutes with
/// whole-pixel shifts, the quadrature for one direction is a fixed sparse stencil applied
/// at every pixel. Directions `θ` and `θ + π` share the same line, so only the half circle
/// is integrated and the other half is filled by copying.
#[derive(Debug, Clone)]
pub struct PixelRayOperator {
    grid: Grid,
    n_angles_full: usize,
    step: f64,
    stencils: Vec<Vec<Tap>>,
}

impl PixelRayOperator {
    pub fn new(grid: Grid, n_angles_full: usize) -> Result<Self> {
        Self::with_step(grid, n_angles_full, 0.5 * grid.spacing())
    }

    pub fn with_step(grid: Grid, n_angles_full: usize, step: f64) -> Result<Self> {
        if n_angles_full < 2 || !n_angles_full.is_multiple_of(2) {
            return Err(invalid(format!("n_angles_full must be even and >= 2, got {n_angles_full}")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid(format!("ray step must be positive, got {step}")));
        }
        let n_half = n_angles_full / 2;
        let stencils = (0..n_half)
            .map(|k| build_stencil(&grid, TAU * k as f64 / n_angles_full as f64, step))
            .collect();
        Ok(Self { grid, n_angles_full, step, stencils })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_angles_full(&self) -> usize {
        self.n_angles_full
    }

    pub fn n_half(&self) -> usize {
        self.n_angles_full / 2
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn angle(&self, k: usize) -> f64 {
        TAU * k as f64 / self.n_angles_full as f64
    }

    /// Full-circle quadrature weight `2π / n_full`.
    pub fn angle_weight(&self) -> f64 {
        TAU / self.n_angles_full as f64
    }

    /// Accumulate `Xf(·, θ_k)` into `out` for half-circle index `k`.
    pub fn apply_angle(&self, k: usize, f: &[f64], out: &mut [f64]) {
        let n = self.grid.n();
        debug_assert_eq!(f.len(), n * n);
        debug_assert_eq!(out.len(), n * n);
        for tap in &self.stencils[k] {
            let (rows, cols) = (valid_range(n, tap.di), valid_range(n, tap.dj));
            let width = cols.end - cols.start;
            for i in rows {
                let src_row = (i as isize + tap.di) as usize;
                let src_col = (cols.start as isize + tap.dj) as usize;
                let dst = &mut out[i * n + cols.start..i * n + cols.start + width];
                let src = &f[src_row * n + src_col..src_row * n + src_col + width];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += tap.weight * s;
                }
            }
        }
    }

    /// Accumulate the transpose of [`apply_angle`](Self::apply_angle) into `out`.
    pub fn apply_angle_transpose(&self, k: usize, g: &[f64], out: &mut [f64]) {
        let n = self.grid.n();
        debug_assert_eq!(g.len(), n * n);
        debug_assert_eq!(out.len(), n * n);
        for tap in &self.stencils[k] {
            let (rows, cols) = (valid_range(n, tap.di), valid_range(n, tap.dj));
            let width = cols.end - cols.start;
            for i in rows {
                let dst_row = (i as isize + tap.di) as usize;
                let dst_col = (cols.start as isize + tap.dj) as usize;
                let src = &g[i * n + cols.start..i * n + cols.start + width];
                let dst = &mut out[dst_row * n + dst_col..dst_row * n + dst_col + width];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += tap.weight * s;
                }
            }
        }
    }

    /// `Xf(x_{ij}, θ_k)` at one pixel only; same value as [`apply_angle`](Self::apply_angle).
    pub fn ray_at(&self, k: usize, f: &Array2<f64>, i: usize, j: usize) -> f64 {
        let n = self.grid.n() as isize;
        let (i, j) = (i as isize, j as isize);
        self.stencils[k]
            .iter()
            .filter(|t| (0..n).contains(&(i + t.di)) && (0..n).contains(&(j + t.dj)))
            .map(|t| t.weight * f[[(i + t.di) as usize, (j + t.dj) as usize]])
            .sum()
    }

    /// Line integrals on the half circle, shape `(n_half, n, n)`.
    pub fn half_field(&self, values: &Array2<f64>) -> Array3<f64> {
        let n = self.grid.n();
        let f = values.as_standard_layout();
        let f = f.as_slice().expect("standard layout");
        let mut out = Array3::zeros((self.n_half(), n, n));
        for (k, mut plane) in out.axis_iter_mut(Axis(0)).enumerate() {
            self.apply_angle(k, f, plane.as_slice_mut().expect("contiguous plane"));
        }
        out
    }

    pub fn field(&self, image: &ImageGrid) -> Result<PixelRayField> {
        self.grid.check_same(image.grid(), "pixel_ray_field")?;
        let half = self.half_field(image.values());
        let n = self.grid.n();
        let n_half = self.n_half();
        let mut values = Array3::zeros((self.n_angles_full, n, n));
        for k in 0..n_half {
            values.index_axis_mut(Axis(0), k).assign(&half.index_axis(Axis(0), k));
            values.index_axis_mut(Axis(0), k + n_half).assign(&half.index_axis(Axis(0), k));
        }
        Ok(PixelRayField { grid: self.grid, values })
    }

    /// Exact transpose of [`field`](Self::field): `2π/n_full · Σ_k P_kᵀ w_k`.
    pub fn adjoint(&self, weights: &Array3<f64>) -> Result<Array2<f64>> {
        let n = self.grid.n();
        if weights.dim() != (self.n_angles_full, n, n) {
            return Err(invalid(format!(
                "weights of shape {:?} do not match ({}, {n}, {n})",
                weights.dim(),
                self.n_angles_full
            )));
        }
        let n_half = self.n_half();
        let mut out = vec![0.0; n * n];
        let mut folded = vec![0.0; n * n];
        for k in 0..n_half {
            let a = weights.index_axis(Axis(0), k);
            let b = weights.index_axis(Axis(0), k + n_half);
            for ((dst, x), y) in folded.iter_mut().zip(a.iter()).zip(b.iter()) {
                *dst = x + y;
            }
            self.apply_angle_transpose(k, &folded, &mut out);
        }
        let w = self.angle_weight();
        Ok(Array2::from_shape_vec((n, n), out.into_iter().map(|v| v * w).collect()).expect("pixel count"))
    }

    /// `∫ Xh(x, θ) dθ` over the full circle: the pixel-ray discretisation of `X'X`.
    pub fn normal(&self, values: &Array2<f64>) -> Array2<f64> {
        let n = self.grid.n();
        let h = values.as_standard_layout();
        let h = h.as_slice().expect("standard layout");
        let mut acc = vec![0.0; n * n];
        for k in 0..self.n_half() {
            self.apply_angle(k, h, &mut acc);
        }
        self.finish_mean(acc)
    }

    /// `2π · acc / n_half`, the common normalisation of angle sums over the half circle.
    pub(crate) fn finish_mean(&self, acc: Vec<f64>) -> Array2<f64> {
        let n = self.grid.n();
        let count = self.n_half() as f64;
        Array2::from_shape_vec((n, n), acc.into_iter().map(|v| v / count * TAU).collect()).expect("pixel count")
    }

    /// Transpose of [`normal`](Self::normal), built from the transposed stencils.
    pub fn normal_transpose(&self, values: &Array2<f64>) -> Array2<f64> {
        let n = self.grid.n();
        let g = values.as_standard_layout();
        let g = g.as_slice().expect("standard layout");
        let mut acc = vec![0.0; n * n];
        for k in 0..self.n_half() {
            self.apply_angle_transpose(k, g, &mut acc);
        }
        self.finish_mean(acc)
    }

    /// Number of stencil taps over all half-circle angles; a cost measure.
    pub fn tap_count(&self) -> usize {
        self.stencils.iter().map(Vec::len).sum()
    }
}

fn valid_range(n: usize, d: isize) -> std::ops::Range<usize> {
    let lo = (-d).max(0) as usize;
    let hi = (n as isize - d).min(n as isize).max(0) as usize;
    lo..hi.max(lo)
}

fn build_stencil(grid: &Grid, theta: f64, step: f64) -> Vec<Tap> {
    let n = grid.n() as isize;
    let h = grid.spacing();
    // Longest in-lattice distance plus the reach of the interpolation footprint.
    let reach = (grid.n() - 1) as f64 * h * SQRT_2 + h;
    let half_samples = (reach / step).ceil() as i64;
    let (sin, cos) = theta.sin_cos();
    let mut taps: BTreeMap<(isize, isize), f64> = BTreeMap::new();
    for m in -half_samples..half_samples {
        let s = (m as f64 + 0.5) * step;
        // Offsets in index units: columns follow +x, rows follow -y.
        let du = s * cos / h;
        let dv = -s * sin / h;
        let (j0, i0) = (du.floor(), dv.floor());
        let (fu, fv) = (du - j0, dv - i0);
        let (j0, i0) = (j0 as isize, i0 as isize);
        for (di, dj, w) in [
            (i0, j0, (1.0 - fv) * (1.0 - fu)),
            (i0, j0 + 1, (1.0 - fv) * fu),
            (i0 + 1, j0, fv * (1.0 - fu)),
            (i0 + 1, j0 + 1, fv * fu),
        ] {
            if w != 0.0 && di.abs() < n && dj.abs() < n {
                *taps.entry((di, dj)).or_insert(0.0) += step * w;
            }
        }
    }
    taps.into_iter().map(|((di, dj), weight)| Tap { di, dj, weight }).collect()
}

/// `Xf(x_i, θ_k)` on the full circle, stored as `(n_angles_full, n, n)`.
///
/// Slices `k` and `k + n_full/2` are identical copies.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelRayField {
    grid: Grid,
    values: Array3<f64>,
}

impl PixelRayField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_angles_full(&self) -> usize {
        self.values.dim().0
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[[k, i, j]]
    }

    /// `Δθ · h^2 · Σ a·w` over pixels and full-circle angles.
    pub fn inner(&self, weights: &Array3<f64>) -> f64 {
        let w = TAU / self.n_angles_full() as f64 * self.grid.cell_area();
        w * self.values.iter().zip(weights.iter()).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Direct ray integration from every pixel; see [`PixelRayOperator`].
pub fn pixel_ray_field(image: &ImageGrid, n_angles_full: usize) -> Result<PixelRayField> {
    PixelRayOperator::new(*image.grid(), n_angles_full)?.field(image)
}

/// Transpose of [`pixel_ray_field`] applied to a weight array shaped `(n_full, n, n)`.
pub fn pixel_ray_adjoint(like: &ImageGrid, weights: &Array3<f64>) -> Result<ImageGrid> {
    let n_full = weights.dim().0;
    let op = PixelRayOperator::new(*like.grid(), n_full)?;
    like.with_values(op.adjoint(weights)?)
}

/// The pixel-ray discretisation of `X'X`.
pub fn pixel_ray_normal(image: &ImageGrid, n_angles_full: usize) -> Result<ImageGrid> {
    let op = PixelRayOperator::new(*image.grid(), n_angles_full)?;
    image.with_values(op.normal(image.values()))
}
