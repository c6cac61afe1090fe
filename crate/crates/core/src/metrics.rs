//! Discrete norms over the computational square, the relative noise model and the
//! empirical stability audit.

use std::fmt::Write as _;

use ndarray::{Array2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::grid::{support_mask, Grid, ImageGrid, Lattice, ScalarField, DEFAULT_SUPPORT_FRACTION};
use crate::singlepixel::SinglePixel;

pub(crate) fn l2_values(values: &Array2<f64>, h: f64) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() * h * h).sqrt()
}

/// Squared L² norm of the discrete gradient: central differences inside, one-sided on
/// the outermost ring.
fn gradient_sq(values: &Array2<f64>, h: f64) -> f64 {
    let (rows, cols) = values.dim();
    let diff = |a: f64, b: f64, span: usize| (a - b) / (span as f64 * h);
    let mut acc = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            let gx = match (j, cols) {
                (_, 1) => 0.0,
                (0, _) => diff(values[[i, 1]], values[[i, 0]], 1),
                (j, c) if j == c - 1 => diff(values[[i, j]], values[[i, j - 1]], 1),
                (j, _) => diff(values[[i, j + 1]], values[[i, j - 1]], 2),
            };
            let gy = match (i, rows) {
                (_, 1) => 0.0,
                (0, _) => diff(values[[1, j]], values[[0, j]], 1),
                (i, r) if i == r - 1 => diff(values[[i, j]], values[[i - 1, j]], 1),
                (i, _) => diff(values[[i + 1, j]], values[[i - 1, j]], 2),
            };
            acc += gx * gx + gy * gy;
        }
    }
    acc * h * h
}

/// `sqrt(h² Σ v²)`.
pub fn l2_norm<L: Lattice>(field: &L) -> f64 {
    l2_values(field.values(), field.grid().spacing())
}

/// `‖∇v‖₂` on the full square.
pub fn gradient_norm<L: Lattice>(field: &L) -> f64 {
    gradient_sq(field.values(), field.grid().spacing()).sqrt()
}

/// `sqrt(‖v‖₂² + ‖∇v‖₂²)` on the full square.
pub fn h1_norm<L: Lattice>(field: &L) -> f64 {
    let h = field.grid().spacing();
    let l2 = l2_values(field.values(), h);
    (l2 * l2 + gradient_sq(field.values(), h)).sqrt()
}

/// Pixels with `|x|, |y| ≤ 0.8 · half_width`, the central 80% of each axis.
pub fn interior_window(grid: &Grid) -> Array2<bool> {
    let limit = 0.8 * grid.half_width() + 1e-12 * grid.spacing();
    Array2::from_shape_fn((grid.n(), grid.n()), |(i, j)| {
        let (x, y) = grid.point(i, j);
        x.abs() <= limit && y.abs() <= limit
    })
}

/// `‖a - b‖ / ‖b‖` over the central window of [`interior_window`].
pub fn interior_relative_error<L: Lattice>(estimate: &L, truth: &L) -> Result<f64> {
    truth.grid().check_same(estimate.grid(), "interior_relative_error")?;
    let window = interior_window(truth.grid());
    let (mut err, mut norm) = (0.0, 0.0);
    Zip::from(&window).and(estimate.values()).and(truth.values()).for_each(|&w, a, b| {
        if w {
            err += (a - b) * (a - b);
            norm += b * b;
        }
    });
    if norm == 0.0 {
        return Err(invalid("reference vanishes on the interior window"));
    }
    Ok((err / norm).sqrt())
}

/// How the noise standard deviation is tied to `data - baseline`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseScaling {
    /// One σ for all pixels: `level · RMS(data - baseline)`.
    #[default]
    Global,
    /// `σ(x) = level · |data(x) - baseline|`.
    Pixelwise,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    relative_level: f64,
    seed: u64,
    baseline: f64,
    scaling: NoiseScaling,
}

impl NoiseSpec {
    /// Global scaling against the baseline `2π`.
    pub fn new(relative_level: f64, seed: u64) -> Result<Self> {
        if !(relative_level >= 0.0 && relative_level.is_finite()) {
            return Err(invalid(format!("noise level must be finite and >= 0, got {relative_level}")));
        }
        Ok(Self { relative_level, seed, baseline: std::f64::consts::TAU, scaling: NoiseScaling::Global })
    }

    pub fn with_baseline(mut self, baseline: f64) -> Self {
        self.baseline = baseline;
        self
    }

    pub fn with_scaling(mut self, scaling: NoiseScaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn relative_level(&self) -> f64 {
        self.relative_level
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    pub fn scaling(&self) -> NoiseScaling {
        self.scaling
    }
}

/// `data + η`, with `η` i.i.d. Gaussian drawn in row-major order from a ChaCha8 stream.
pub fn add_relative_noise(data: &ScalarField, spec: &NoiseSpec) -> ScalarField {
    if spec.relative_level == 0.0 {
        return data.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let values = data.values();
    let rms = (values.iter().map(|v| (v - spec.baseline).powi(2)).sum::<f64>() / values.len() as f64).sqrt();
    let noisy = values.mapv(|v| {
        let z: f64 = StandardNormal.sample(&mut rng);
        let sigma = match spec.scaling {
            NoiseScaling::Global => spec.relative_level * rms,
            NoiseScaling::Pixelwise => spec.relative_level * (v - spec.baseline).abs(),
        };
        v + sigma * z
    });
    ScalarField::new(*data.grid(), noisy).expect("finite noise on finite data")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRecord {
    /// Max-norm bound `M` of the pair.
    pub max_norm: f64,
    pub l2_diff: f64,
    pub h1_grad_diff: f64,
    pub data_h1_diff: f64,
    /// `data_h1_diff / l2_diff`, `None` for an identical pair.
    pub lower_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityAudit {
    pub records: Vec<StabilityRecord>,
    pub min_lower_ratio: Option<f64>,
    /// Least-squares slope of `ln data_h1_diff` against `ln l2_diff`.
    pub fitted_exponent: Option<f64>,
}

impl StabilityAudit {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("max_norm,l2_diff,h1_grad_diff,data_h1_diff,lower_ratio\n");
        for r in &self.records {
            let ratio = r.lower_ratio.map_or_else(|| "undefined".to_string(), |v| v.to_string());
            writeln!(out, "{},{},{},{},{}", r.max_norm, r.l2_diff, r.h1_grad_diff, r.data_h1_diff, ratio)
                .expect("write to string");
        }
        out
    }
}

pub fn stability_record(op: &SinglePixel, f1: &ImageGrid, f2: &ImageGrid) -> Result<StabilityRecord> {
    f1.grid().check_same(f2.grid(), "stability pair")?;
    let diff = f1.with_values(f1.values() - f2.values())?;
    let k1 = op.forward(f1)?;
    let k2 = op.forward(f2)?;
    let data_diff = ScalarField::new(*k1.grid(), k1.values() - k2.values())?;
    let l2_diff = l2_norm(&diff);
    let data_h1_diff = h1_norm(&data_diff);
    Ok(StabilityRecord {
        max_norm: f1.max_abs().max(f2.max_abs()),
        l2_diff,
        h1_grad_diff: gradient_norm(&diff),
        data_h1_diff,
        lower_ratio: (l2_diff > 0.0).then(|| data_h1_diff / l2_diff),
    })
}

pub fn stability_audit(pairs: &[(ImageGrid, ImageGrid)], n_angles_full: usize) -> Result<StabilityAudit> {
    let Some((first, _)) = pairs.first() else {
        return Ok(StabilityAudit { records: Vec::new(), min_lower_ratio: None, fitted_exponent: None });
    };
    let op = SinglePixel::new(*first.grid(), n_angles_full)?;
    let records = pairs.iter().map(|(a, b)| stability_record(&op, a, b)).collect::<Result<Vec<_>>>()?;
    let min_lower_ratio = records.iter().filter_map(|r| r.lower_ratio).reduce(f64::min);
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.l2_diff > 0.0 && r.data_h1_diff > 0.0)
        .map(|r| (r.l2_diff.ln(), r.data_h1_diff.ln()))
        .collect();
    Ok(StabilityAudit { records, min_lower_ratio, fitted_exponent: fit_slope(&points) })
}

/// A nonnegative sum of three Gaussian bumps inside the support disk, scaled to max 1.
fn random_bumps(grid: &Grid, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let w = grid.half_width();
    let bumps: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            let r = 0.45 * w * rng.random::<f64>().sqrt();
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            let sigma = w * rng.random_range(0.1..0.25);
            (r * phi.cos(), r * phi.sin(), sigma, rng.random_range(0.5..1.0))
        })
        .collect();
    let mut values = grid.sample(|x, y| {
        bumps.iter().map(|&(cx, cy, s, a)| a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp()).sum()
    });
    values *= &support_mask(grid, DEFAULT_SUPPORT_FRACTION * w);
    let peak = values.iter().fold(0.0_f64, |m, v| m.max(*v));
    values / peak
}

/// Seeded pairs `(M·b₁, M·b₂/2)` of random bump images; pair `i` uses
/// `max_norms[i % len]` as its max-norm `M`.
pub fn perturbation_pairs(grid: &Grid, max_norms: &[f64], count: usize, seed: u64) -> Vec<(ImageGrid, ImageGrid)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let m = max_norms[i % max_norms.len()];
            let a = random_bumps(grid, &mut rng) * m;
            let b = random_bumps(grid, &mut rng) * (0.5 * m);
            let image = |v| ImageGrid::from_values(*grid, v).expect("finite bumps");
            (image(a), image(b))
        })
        .collect()
}

/// Median of the values, `None` when empty.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(v[n / 2]),
        _ => Some(0.5 * (v[n / 2 - 1] + v[n / 2])),
    }
}

/// Least-squares slope, `None` without two distinct abscissae.
pub(crate) fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 1e-12 * n).then(|| sxy / sxx)
}

/// `‖f₁ - f₂‖₂ / ‖∇(f₁ - f₂)‖₂`: infinite for a nonzero difference with zero gradient,
/// `None` when the images coincide.
pub fn inverse_poincare_ratio(f1: &ImageGrid, f2: &ImageGrid) -> Result<Option<f64>> {
    f1.grid().check_same(f2.grid(), "inverse_poincare_ratio")?;
    let mut diff = f1.values().clone();
    Zip::from(&mut diff).and(f2.values()).for_each(|a, b| *a -= b);
    let h = f1.grid().spacing();
    let l2 = l2_values(&diff, h);
    let grad = gradient_sq(&diff, h).sqrt();
    Ok(match (l2 > 0.0, grad > 0.0) {
        (false, _) => None,
        (true, false) => Some(f64::INFINITY),
        (true, true) => Some(l2 / grad),
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    #[test]
    fn zero_and_constant_norms() {
        let grid = Grid::new(41, 1.0).unwrap();
        let z = ScalarField::constant(grid, 0.0);
        assert_eq!(l2_norm(&z), 0.0);
        assert_eq!(h1_norm(&z), 0.0);
        // The lattice sum h²·n² covers (2 + h)² rather than 4.
        let c = ScalarField::constant(grid, 1.5);
        let h = grid.spacing();
        assert!((l2_norm(&c) - 1.5 * (2.0 + h)).abs() < 1e-12);
        assert_eq!(h1_norm(&c), l2_norm(&c));
        assert!((l2_norm(&c) - 3.0).abs() / 3.0 < 2.0 * h);
    }

    #[test]
    fn sine_gradient_norm() {
        let grid = Grid::new(201, 1.0).unwrap();
        let f = ScalarField::new(grid, grid.sample(|x, _| (PI * x).sin())).unwrap();
        let (l2, h1) = (l2_norm(&f), h1_norm(&f));
        let ratio = (h1 * h1 - l2 * l2) / (PI * PI * l2 * l2);
        assert!((ratio - 1.0).abs() < 1e-2, "{ratio}");
    }

    #[test]
    fn noise_level_zero_and_determinism() {
        let grid = Grid::new(30, 1.0).unwrap();
        let data = ScalarField::new(grid, grid.sample(|x, y| 6.0 - x * x - y)).unwrap();
        let same = add_relative_noise(&data, &NoiseSpec::new(0.0, 3).unwrap());
        assert_eq!(same, data);
        let spec = NoiseSpec::new(0.01, 3).unwrap();
        assert_eq!(add_relative_noise(&data, &spec), add_relative_noise(&data, &spec));
        assert!(NoiseSpec::new(-0.1, 0).is_err());
    }

    #[test]
    fn noise_matches_requested_level() {
        let grid = Grid::new(101, 1.0).unwrap();
        let data = ScalarField::new(grid, grid.sample(|x, y| 6.0 - (x * x + y * y))).unwrap();
        let noisy = add_relative_noise(&data, &NoiseSpec::new(0.01, 11).unwrap());
        let eta = noisy.values() - data.values();
        let base = data.values().mapv(|v| v - std::f64::consts::TAU);
        let ratio = l2_values(&eta, 1.0) / l2_values(&base, 1.0);
        assert!((ratio - 0.01).abs() < 0.0015, "{ratio}");
    }

    #[test]
    fn pixelwise_noise_vanishes_at_baseline() {
        let grid = Grid::new(10, 1.0).unwrap();
        let data = ScalarField::constant(grid, std::f64::consts::TAU);
        let spec = NoiseSpec::new(0.5, 1).unwrap().with_scaling(NoiseScaling::Pixelwise);
        assert_eq!(add_relative_noise(&data, &spec), data);
    }

    #[test]
    fn poincare_ratio_cases() {
        let grid = Grid::new(64, 1.0).unwrap();
        let a = ImageGrid::from_values(grid, grid.sample(|x, y| (-(x * x + y * y) / 0.1).exp())).unwrap();
        assert_eq!(inverse_poincare_ratio(&a, &a).unwrap(), None);
        let c = ImageGrid::from_values(grid, Array2::from_elem((64, 64), 1.0)).unwrap();
        let z = ImageGrid::zeros(grid);
        assert_eq!(inverse_poincare_ratio(&c, &z).unwrap(), Some(f64::INFINITY));
        let ratio = |k: f64| {
            let f = grid.sample(|x, y| (k * PI * x).sin() * (-(x * x + y * y) / 0.2).exp());
            inverse_poincare_ratio(&a.with_values(f).unwrap(), &z).unwrap().unwrap()
        };
        let (r2, r4) = (ratio(2.0), ratio(4.0));
        assert!((r2 / r4 - 2.0).abs() < 0.3, "{r2} {r4}");
    }

    #[test]
    fn median_and_pairs() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        let grid = Grid::new(24, 1.0).unwrap();
        let pairs = perturbation_pairs(&grid, &[0.1, 0.2], 4, 7);
        assert_eq!(pairs, perturbation_pairs(&grid, &[0.1, 0.2], 4, 7));
        assert!((pairs[1].0.max_abs() - 0.2).abs() < 1e-12);
        assert!(pairs[1].1.max_abs() <= 0.1 + 1e-12);
    }

    #[test]
    fn slope_fit() {
        assert_eq!(fit_slope(&[(1.0, 2.0)]), None);
        assert_eq!(fit_slope(&[(1.0, 2.0), (1.0, 3.0)]), None);
        let s = fit_slope(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
    }
}
