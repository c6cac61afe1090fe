#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spixct::{Grid, ImageGrid, Lattice};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform in `range`, no mask.
pub fn random_array(n: usize, seed: u64, lo: f64, hi: f64) -> Array2<f64> {
    let mut r = rng(seed);
    Array2::from_shape_fn((n, n), |_| r.random_range(lo..hi))
}

pub fn random_image(n: usize, seed: u64, lo: f64, hi: f64) -> ImageGrid {
    let grid = Grid::new(n, 1.0).unwrap();
    let mut img = ImageGrid::from_values(grid, random_array(n, seed, lo, hi)).unwrap();
    img.apply_support_mask();
    img
}

pub fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `h^2 Σ a b`, written out here rather than borrowed from the library.
pub fn lattice_inner<L: Lattice>(a: &L, b: &L) -> f64 {
    let h = a.grid().spacing();
    h * h * dot(a.values(), b.values())
}

pub fn plain_norm(a: &Array2<f64>) -> f64 {
    dot(a, a).sqrt()
}

pub fn relative_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    plain_norm(&(a - b)) / plain_norm(b)
}

/// Relative difference restricted to `|x|, |y| ≤ frac · half_width`.
pub fn window_relative(estimate: &ImageGrid, truth: &ImageGrid, frac: f64) -> f64 {
    let g = truth.grid();
    let lim = frac * g.half_width() + 1e-9;
    let (mut e, mut t) = (0.0, 0.0);
    for ((i, j), &v) in truth.values().indexed_iter() {
        let (x, y) = g.point(i, j);
        if x.abs() <= lim && y.abs() <= lim {
            e += (estimate.values()[[i, j]] - v).powi(2);
            t += v * v;
        }
    }
    (e / t).sqrt()
}

/// Mean of `image` over the disk of radius `r` about the origin.
pub fn disk_mean(image: &ImageGrid, r: f64) -> f64 {
    let g = image.grid();
    let (mut s, mut c) = (0.0, 0usize);
    for ((i, j), &v) in image.values().indexed_iter() {
        let (x, y) = g.point(i, j);
        if x.hypot(y) <= r {
            s += v;
            c += 1;
        }
    }
    s / c as f64
}

/// Brute-force `2 Σ_y f(y) h^2 / |x - y|`, with the `y = x` cell integrated exactly
/// (`∫_{square} 1/|y| dy = 4 h ln(1 + √2)`).
pub fn riesz_sum(image: &ImageGrid) -> Array2<f64> {
    let g = image.grid();
    let n = g.n();
    let h = g.spacing();
    let own = 4.0 * h * (1.0 + 2f64.sqrt()).ln();
    let f = image.values();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let mut acc = 0.0;
        for a in 0..n {
            for b in 0..n {
                let v = f[[a, b]];
                if v == 0.0 {
                    continue;
                }
                acc += if (a, b) == (i, j) {
                    v * own
                } else {
                    let d = (((a as f64 - i as f64).powi(2) + (b as f64 - j as f64).powi(2)).sqrt()) * h;
                    v * h * h / d
                };
            }
        }
        2.0 * acc
    })
}
