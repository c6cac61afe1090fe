//! The nonlinear map `Kf(x) = ∫ e^{-Xf(x,θ)} dθ`, its Fréchet derivative and transpose,
//! and linearized inversion from derivative data.
//!
//! Angular integrals use the uniform full-circle rule on `n_angles_full` directions. The
//! line through `x` in direction `θ + π` is the same as for `θ`, so only the half circle
//! is evaluated.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use ndarray::{Array2, Array3, Axis};

use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, ImageGrid, Lattice, ScalarField};
use crate::metrics::l2_values;
use crate::projector::PixelRayOperator;
use crate::spectral::{negative_inversion, SpectralConfig};

/// Line integrals below this value would overflow `e^{-Xf}`.
pub const OVERFLOW_LIMIT: f64 = -700.0;

pub const MIN_ANGLES: usize = 16;

/// `K` on one lattice with one angular rule; caches the ray stencils.
#[derive(Debug, Clone)]
pub struct SinglePixel {
    op: PixelRayOperator,
}

impl SinglePixel {
    pub fn new(grid: Grid, n_angles_full: usize) -> Result<Self> {
        if n_angles_full < MIN_ANGLES || !n_angles_full.is_multiple_of(2) {
            return Err(invalid(format!("n_angles_full must be even and >= {MIN_ANGLES}, got {n_angles_full}")));
        }
        Ok(Self { op: PixelRayOperator::new(grid, n_angles_full)? })
    }

    pub fn grid(&self) -> &Grid {
        self.op.grid()
    }

    pub fn operator(&self) -> &PixelRayOperator {
        &self.op
    }

    pub fn n_angles_full(&self) -> usize {
        self.op.n_angles_full()
    }

    pub fn forward(&self, image: &ImageGrid) -> Result<ScalarField> {
        Ok(self.linearize(image)?.value)
    }

    /// `Kf` at the single pixel `(i, j)`, touching only the rays through it.
    pub fn value_at(&self, image: &ImageGrid, i: usize, j: usize) -> Result<f64> {
        self.grid().check_same(image.grid(), "single pixel transform")?;
        let n = self.grid().n();
        if i >= n || j >= n {
            return Err(invalid(format!("pixel ({i}, {j}) outside a {n}x{n} lattice")));
        }
        let mut acc = 0.0;
        for k in 0..self.op.n_half() {
            let t = self.op.ray_at(k, image.values(), i, j);
            if t < OVERFLOW_LIMIT {
                return Err(Error::Overflow { value: t, limit: OVERFLOW_LIMIT });
            }
            acc += (-t).exp();
        }
        Ok(acc / self.op.n_half() as f64 * TAU)
    }

    /// Evaluate `K` at `base` and keep `e^{-Xf}` for derivative products.
    pub fn linearize(&self, base: &ImageGrid) -> Result<Linearization<'_>> {
        self.grid().check_same(base.grid(), "single pixel transform")?;
        let mut attenuation = self.op.half_field(base.values());
        let lowest = attenuation.iter().copied().fold(f64::INFINITY, f64::min);
        if lowest < OVERFLOW_LIMIT {
            return Err(Error::Overflow { value: lowest, limit: OVERFLOW_LIMIT });
        }
        attenuation.mapv_inplace(|t| (-t).exp());
        let acc = attenuation.sum_axis(Axis(0));
        let value = self.op.finish_mean(acc.into_raw_vec_and_offset().0);
        Ok(Linearization { op: &self.op, attenuation, value: ScalarField::new(*self.grid(), value)? })
    }
}

/// `K[f]` together with `e^{-Xf(x,θ)}` on the half circle.
#[derive(Debug, Clone)]
pub struct Linearization<'a> {
    op: &'a PixelRayOperator,
    attenuation: Array3<f64>,
    value: ScalarField,
}

impl Linearization<'_> {
    pub fn value(&self) -> &ScalarField {
        &self.value
    }

    pub fn into_value(self) -> ScalarField {
        self.value
    }

    /// `K'[f] h = -∫ e^{-Xf} Xh dθ`.
    pub fn apply(&self, direction: &Array2<f64>) -> Array2<f64> {
        let n = self.op.grid().n();
        let h = direction.as_standard_layout();
        let h = h.as_slice().expect("standard layout");
        let mut acc = vec![0.0; n * n];
        let mut line = vec![0.0; n * n];
        for (k, e) in self.attenuation.axis_iter(Axis(0)).enumerate() {
            line.fill(0.0);
            self.op.apply_angle(k, h, &mut line);
            for ((a, l), e) in acc.iter_mut().zip(&line).zip(e.iter()) {
                *a += e * l;
            }
        }
        -self.op.finish_mean(acc)
    }

    /// Transpose of [`apply`](Self::apply) for the pixel-area inner product.
    pub fn apply_adjoint(&self, residual: &Array2<f64>) -> Array2<f64> {
        let n = self.op.grid().n();
        let r = residual.as_standard_layout();
        let r = r.as_slice().expect("standard layout");
        let mut acc = vec![0.0; n * n];
        let mut weighted = vec![0.0; n * n];
        for (k, e) in self.attenuation.axis_iter(Axis(0)).enumerate() {
            for ((w, e), r) in weighted.iter_mut().zip(e.iter()).zip(r) {
                *w = e * r;
            }
            self.op.apply_angle_transpose(k, &weighted, &mut acc);
        }
        -self.op.finish_mean(acc)
    }
}

pub fn single_pixel_forward(image: &ImageGrid, n_angles_full: usize) -> Result<ScalarField> {
    SinglePixel::new(*image.grid(), n_angles_full)?.forward(image)
}

pub fn frechet_derivative(base: &ImageGrid, direction: &ImageGrid, n_angles_full: usize) -> Result<ScalarField> {
    base.grid().check_same(direction.grid(), "frechet_derivative")?;
    let sp = SinglePixel::new(*base.grid(), n_angles_full)?;
    let lin = sp.linearize(base)?;
    ScalarField::new(*base.grid(), lin.apply(direction.values()))
}

pub fn frechet_adjoint(base: &ImageGrid, residual: &ScalarField, n_angles_full: usize) -> Result<ImageGrid> {
    base.grid().check_same(residual.grid(), "frechet_adjoint")?;
    let sp = SinglePixel::new(*base.grid(), n_angles_full)?;
    let lin = sp.linearize(base)?;
    base.with_values(lin.apply_adjoint(residual.values()))
}

/// `g = -c_2 |D| ∂K`, where `∂K` is derivative data at zero.
pub fn linearized_reconstruction(derivative_field: &ScalarField, config: &SpectralConfig) -> ImageGrid {
    let values = negative_inversion(derivative_field, config);
    ImageGrid::from_values(*derivative_field.grid(), values).expect("finite transform of finite values")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonRow {
    pub epsilon: f64,
    /// `‖(K[εg] - 2π)/ε - K'[0]g‖₂`.
    pub distance: f64,
    /// `distance / ‖K'[0]g‖₂`, `None` when the derivative vanishes.
    pub relative: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonStudy {
    /// Difference quotient at the smallest `ε`.
    pub field: ScalarField,
    /// The analytic `K'[0]g` the rows are measured against.
    pub derivative: ScalarField,
    pub rows: Vec<EpsilonRow>,
}

impl EpsilonStudy {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,distance,relative\n");
        for r in &self.rows {
            let rel = r.relative.map_or_else(|| "undefined".to_string(), |v| v.to_string());
            writeln!(out, "{},{},{}", r.epsilon, r.distance, rel).expect("write to string");
        }
        out
    }
}

/// Difference quotients `(K[εg] - 2π)/ε` for each `ε`, compared with `K'[0]g`.
pub fn linearize_by_epsilon(g: &ImageGrid, epsilons: &[f64], n_angles_full: usize) -> Result<EpsilonStudy> {
    if epsilons.is_empty() {
        return Err(invalid("at least one epsilon is required"));
    }
    if let Some(e) = epsilons.iter().find(|e| **e == 0.0 || !e.is_finite()) {
        return Err(invalid(format!("epsilon must be finite and nonzero, got {e}")));
    }
    if epsilons.windows(2).any(|w| w[1].abs() > w[0].abs()) {
        return Err(invalid("epsilons must be sorted by decreasing magnitude"));
    }
    let sp = SinglePixel::new(*g.grid(), n_angles_full)?;
    let grid = *g.grid();
    let h = grid.spacing();
    let zero = ImageGrid::zeros(grid);
    let derivative = sp.linearize(&zero)?.apply(g.values());
    let scale = l2_values(&derivative, h);
    let mut rows = Vec::with_capacity(epsilons.len());
    let mut field = None;
    for &eps in epsilons {
        let k = sp.forward(&g.scaled(eps))?;
        let quotient = k.values().mapv(|v| (v - TAU) / eps);
        let distance = l2_values(&(&quotient - &derivative), h);
        rows.push(EpsilonRow { epsilon: eps, distance, relative: (scale > 0.0).then(|| distance / scale) });
        field = Some(quotient);
    }
    Ok(EpsilonStudy {
        field: ScalarField::new(grid, field.expect("nonempty epsilons"))?,
        derivative: ScalarField::new(grid, derivative)?,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::phantom::{generate_disk, generate_gaussian};
    use crate::projector::image_inner;

    fn random(grid: Grid, seed: u64, lo: f64) -> ImageGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageGrid::from_values(grid, Array2::from_shape_fn((grid.n(), grid.n()), |_| rng.random_range(lo..1.0)))
            .unwrap()
    }

    #[test]
    fn zero_gives_two_pi() {
        let grid = Grid::new(17, 1.0).unwrap();
        let k = single_pixel_forward(&ImageGrid::zeros(grid), 36).unwrap();
        assert!(k.values().iter().all(|&v| v == TAU));
    }

    #[test]
    fn point_value_matches_the_full_field() {
        let g = random(Grid::new(20, 1.0).unwrap(), 3, 0.0);
        let sp = SinglePixel::new(*g.grid(), 32).unwrap();
        let k = sp.forward(&g).unwrap();
        for (i, j) in [(0, 0), (7, 12), (19, 3)] {
            assert!((sp.value_at(&g, i, j).unwrap() - k.values()[[i, j]]).abs() < 1e-13);
        }
        assert!(sp.value_at(&g, 20, 0).is_err());
    }

    #[test]
    fn angle_count_is_validated() {
        let grid = Grid::new(8, 1.0).unwrap();
        assert!(single_pixel_forward(&ImageGrid::zeros(grid), 14).is_err());
        assert!(single_pixel_forward(&ImageGrid::zeros(grid), 17).is_err());
    }

    #[test]
    fn very_negative_images_overflow() {
        let grid = Grid::new(16, 1.0).unwrap();
        let img = ImageGrid::from_values(grid, Array2::from_elem((16, 16), -1000.0)).unwrap();
        assert!(matches!(single_pixel_forward(&img, 16), Err(Error::Overflow { .. })));
    }

    #[test]
    fn monotone_in_the_image() {
        let grid = Grid::new(20, 1.0).unwrap();
        let f = random(grid, 3, 0.0);
        let k1 = single_pixel_forward(&f, 24).unwrap();
        let k2 = single_pixel_forward(&f.scaled(2.0), 24).unwrap();
        for (a, b) in k1.values().iter().zip(k2.values()) {
            assert!(*a < TAU && b < a);
        }
    }

    #[test]
    fn derivative_at_zero_is_negative_normal() {
        let grid = Grid::new(20, 1.0).unwrap();
        let h = random(grid, 4, -1.0);
        let d = frechet_derivative(&ImageGrid::zeros(grid), &h, 32).unwrap();
        let op = PixelRayOperator::new(grid, 32).unwrap();
        let n = op.normal(h.values());
        let scale = n.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (a, b) in d.values().iter().zip(n.iter()) {
            assert!((a + b).abs() <= 1e-12 * scale);
        }
        let zero = frechet_derivative(&h, &ImageGrid::zeros(grid), 32).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adjoint_identity_and_zero_residual() {
        let grid = Grid::new(16, 1.0).unwrap();
        let base = random(grid, 5, 0.0);
        let h = random(grid, 6, -1.0);
        let r = ScalarField::new(grid, random(grid, 7, -1.0).into_values()).unwrap();
        let jh = frechet_derivative(&base, &h, 40).unwrap();
        let jtr = frechet_adjoint(&base, &r, 40).unwrap();
        let lhs = grid.cell_area() * jh.values().iter().zip(r.values()).map(|(a, b)| a * b).sum::<f64>();
        let rhs = image_inner(&h, &jtr);
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()), "{lhs} vs {rhs}");
        let zero = frechet_adjoint(&base, &ScalarField::constant(grid, 0.0), 40).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adjoint_at_zero_is_negative_normal_transpose() {
        let grid = Grid::new(18, 1.0).unwrap();
        let r = random(grid, 8, -1.0);
        let field = ScalarField::new(grid, r.values().clone()).unwrap();
        let a = frechet_adjoint(&ImageGrid::zeros(grid), &field, 24).unwrap();
        let b = PixelRayOperator::new(grid, 24).unwrap().normal_transpose(r.values());
        let scale = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (x, y) in a.values().iter().zip(b.iter()) {
            assert!((x + y).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn finite_differences_converge_linearly() {
        let grid = Grid::new(24, 1.0).unwrap();
        let sp = SinglePixel::new(grid, 32).unwrap();
        let f = generate_gaussian(24, 1.0, 0.3, 0.5).unwrap();
        let h = random(grid, 9, -1.0);
        let lin = sp.linearize(&f).unwrap();
        let jh = lin.apply(h.values());
        let k0 = lin.value().values().clone();
        let dist = |eps: f64| {
            let fe = f.with_values(f.values() + &(h.values() * eps)).unwrap();
            let q = (sp.forward(&fe).unwrap().values() - &k0) / eps;
            l2_values(&(q - &jh), grid.spacing())
        };
        let ratio = dist(1e-3) / dist(5e-4);
        assert!((ratio - 2.0).abs() < 0.4, "{ratio}");
    }

    #[test]
    fn epsilon_study_validation_and_zero() {
        let grid = Grid::new(16, 1.0).unwrap();
        let zero = ImageGrid::zeros(grid);
        assert!(linearize_by_epsilon(&zero, &[], 16).is_err());
        assert!(linearize_by_epsilon(&zero, &[0.1, 0.0], 16).is_err());
        assert!(linearize_by_epsilon(&zero, &[0.01, 0.1], 16).is_err());
        let study = linearize_by_epsilon(&zero, &[0.1, -0.01], 16).unwrap();
        assert!(study.field.values().iter().all(|&v| v == 0.0));
        assert!(study.rows.iter().all(|r| r.distance == 0.0 && r.relative.is_none()));
    }

    #[test]
    fn epsilon_study_on_a_disk() {
        let g = generate_disk(32, 1.0, 0.5, 1.0).unwrap();
        let study = linearize_by_epsilon(&g, &[1e-1, 1e-2, 1e-3], 32).unwrap();
        for w in study.rows.windows(2) {
            let ratio = w[0].distance / w[1].distance;
            assert!((ratio - 10.0).abs() < 2.0, "{ratio}");
        }
        assert!(study.field.values().iter().all(|&v| v <= 0.0));
    }

    #[test]
    fn reconstruction_signs_agree_with_inversion() {
        let g = generate_gaussian(32, 1.0, 0.2, 1.0).unwrap();
        let cfg = SpectralConfig::default();
        let op = PixelRayOperator::new(*g.grid(), 32).unwrap();
        let normal = op.normal(g.values());
        let a = linearized_reconstruction(&ScalarField::new(*g.grid(), -&normal).unwrap(), &cfg);
        let b = crate::spectral::invert_xray_normal(&g.with_values(normal).unwrap(), &cfg);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-10);
        }
        let zero = linearized_reconstruction(&ScalarField::constant(*g.grid(), 0.0), &cfg);
        assert!(zero.values().iter().all(|&v| v == 0.0));
    }
}
