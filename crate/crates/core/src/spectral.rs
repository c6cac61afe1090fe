//! The Fourier multiplier `|D| = (-Δ)^{1/2}` and the inversion `f = c_2 |D| X'X f`.
//!
//! `|D|` is applied by zero padding to `pad_factor · n` pixels per side, multiplying the
//! discrete Fourier transform by `|ξ|` (zero at the DC term), transforming back and
//! cropping. The optional cosine taper fills the padding with the edge values rolled off
//! to zero halfway across the gap instead of plain zeros.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use ndarray::{s, Array2};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};
use crate::grid::{Grid, ImageGrid, Lattice, ScalarField};
use crate::projector::{backproject, Sinogram};

/// Edge treatment of the padded field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Taper {
    #[default]
    None,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpectralConfig {
    pad_factor: usize,
    taper: Taper,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self { pad_factor: 2, taper: Taper::None }
    }
}

impl SpectralConfig {
    pub fn new(pad_factor: usize, taper: Taper) -> Result<Self> {
        if !(2..=4).contains(&pad_factor) {
            return Err(invalid(format!("pad_factor must be 2, 3 or 4, got {pad_factor}")));
        }
        Ok(Self { pad_factor, taper })
    }

    pub fn pad_factor(&self) -> usize {
        self.pad_factor
    }

    pub fn taper(&self) -> Taper {
        self.taper
    }
}

/// Measure of the unit sphere `S^d ⊂ R^{d+1}`: `|S^0| = 2`, `|S^1| = 2π`,
/// `|S^d| = 2π/(d-1) · |S^{d-2}|`.
pub fn unit_sphere_measure(d: usize) -> f64 {
    match d {
        0 => 2.0,
        1 => TAU,
        _ => TAU / (d - 1) as f64 * unit_sphere_measure(d - 2),
    }
}

/// `c_n = (2π |S^{n-2}|)^{-1}`, the constant with `f = c_n |D| X'X f` in `R^n`.
pub fn inversion_constant(dim: usize) -> f64 {
    assert!(dim >= 2, "inversion constant needs dimension >= 2");
    1.0 / (TAU * unit_sphere_measure(dim - 2))
}

/// Planned square 2-D transforms of one size.
struct Fft2 {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { size, forward: planner.plan_fft_forward(size), inverse: planner.plan_fft_inverse(size) }
    }

    fn run(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let m = self.size;
        plan.process(data);
        let mut column = vec![Complex64::new(0.0, 0.0); m];
        for j in 0..m {
            for i in 0..m {
                column[i] = data[i * m + j];
            }
            plan.process(&mut column);
            for i in 0..m {
                data[i * m + j] = column[i];
            }
        }
    }
}

/// Angular frequency of DFT bin `k` on `m` samples of spacing `h`.
fn frequency(k: usize, m: usize, h: f64) -> f64 {
    let signed = if k <= m / 2 { k as f64 } else { k as f64 - m as f64 };
    TAU * signed / (m as f64 * h)
}

/// `|D|` of a periodic field on an `m x m` lattice of spacing `h`.
///
/// This is the core of [`half_laplacian`]; on its own it treats the input as one period.
pub fn periodic_half_laplacian(values: &Array2<f64>, h: f64) -> Array2<f64> {
    let (m, m2) = values.dim();
    assert_eq!(m, m2, "periodic_half_laplacian needs a square field");
    let fft = Fft2::new(m);
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.run(&mut data, &fft.forward);
    let freqs: Vec<f64> = (0..m).map(|k| frequency(k, m, h)).collect();
    for (i, &fy) in freqs.iter().enumerate() {
        for (j, &fx) in freqs.iter().enumerate() {
            data[i * m + j] *= (fx * fx + fy * fy).sqrt();
        }
    }
    fft.run(&mut data, &fft.inverse);
    let norm = 1.0 / (m * m) as f64;
    let scale = values.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let imag = data.iter().fold(0.0_f64, |a, c| a.max(c.im.abs())) * norm;
    let real_scale = data.iter().fold(0.0_f64, |a, c| a.max(c.re.abs())) * norm;
    assert!(
        imag <= 1e-10 * real_scale.max(scale),
        "imaginary residue {imag:e} exceeds 1e-10 of {real_scale:e}"
    );
    Array2::from_shape_vec((m, m), data.iter().map(|c| c.re * norm).collect()).expect("square")
}

fn pad(values: &Array2<f64>, config: &SpectralConfig) -> (Array2<f64>, usize) {
    let n = values.nrows();
    let m = config.pad_factor * n;
    let lead = (m - n) / 2;
    let mut padded = Array2::zeros((m, m));
    padded.slice_mut(s![lead..lead + n, lead..lead + n]).assign(values);
    if config.taper == Taper::Cosine {
        // Distance (in pixels) at which the roll-off reaches zero: half the gap.
        let reach = ((m - n) / 2).max(1) as f64;
        for i in 0..m {
            for j in 0..m {
                let (ci, di) = clamp_to(i, lead, n);
                let (cj, dj) = clamp_to(j, lead, n);
                let d = di.max(dj) as f64;
                if d == 0.0 {
                    continue;
                }
                let w = if d >= reach { 0.0 } else { 0.5 * (1.0 + (PI * d / reach).cos()) };
                padded[[i, j]] = w * values[[ci, cj]];
            }
        }
    }
    (padded, lead)
}

/// Nearest in-image index for padded index `p` and the distance to it.
fn clamp_to(p: usize, lead: usize, n: usize) -> (usize, usize) {
    if p < lead {
        (0, lead - p)
    } else if p >= lead + n {
        (n - 1, p - (lead + n - 1))
    } else {
        (p - lead, 0)
    }
}

fn apply(values: &Array2<f64>, grid: &Grid, config: &SpectralConfig) -> Array2<f64> {
    let n = grid.n();
    let (padded, lead) = pad(values, config);
    let out = periodic_half_laplacian(&padded, grid.spacing());
    out.slice(s![lead..lead + n, lead..lead + n]).to_owned()
}

/// `(-Δ)^{1/2}` of an image, computed on the zero-padded (or tapered) lattice.
pub fn half_laplacian(image: &ImageGrid, config: &SpectralConfig) -> ImageGrid {
    let out = apply(image.values(), image.grid(), config);
    image.with_values(out).expect("finite transform of finite values")
}

/// `c_2 |D|` applied to `X'X f`, which recovers `f`.
pub fn invert_xray_normal(normal_image: &ImageGrid, config: &SpectralConfig) -> ImageGrid {
    let c2 = inversion_constant(2);
    let out = apply(normal_image.values(), normal_image.grid(), config) * c2;
    normal_image.with_values(out).expect("finite transform of finite values")
}

/// Back-project, then filter with `c_2 |D|`.
///
/// `X'ψ` is not compactly supported (it decays like `1/|x|`), so cutting it off at the
/// target square and filtering would smear the jump across the whole image. Instead the
/// backprojection is evaluated on a lattice `pad_factor` times wider with the same
/// spacing, filtered there and cropped back to `target`.
pub fn filtered_backprojection(sinogram: &Sinogram, target: &ImageGrid, config: &SpectralConfig) -> Result<ImageGrid> {
    let grid = target.grid();
    sinogram.geometry().check_covers(grid)?;
    let p = config.pad_factor;
    let n = grid.n();
    let wide = Grid::new(p * (n - 1) + 1, p as f64 * grid.half_width())?;
    let spread = backproject(sinogram, &ImageGrid::zeros(wide))?;
    let filtered = apply(spread.values(), &wide, config) * inversion_constant(2);
    let lead = (wide.n() - n) / 2;
    target.with_values(filtered.slice(s![lead..lead + n, lead..lead + n]).to_owned())
}

/// `-c_2 |D|` applied to a field of derivative data `∂_ε K[εg]`.
pub fn negative_inversion(field: &ScalarField, config: &SpectralConfig) -> Array2<f64> {
    apply(field.values(), field.grid(), config) * (-inversion_constant(2))
}
