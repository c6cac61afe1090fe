use std::f64::consts::SQRT_2;

use crate::grid::{ImageGrid, Lattice};

/// Above this many pixels per side the O(n^4) oracle logs a cost warning.
const COST_WARNING_SIDE: usize = 64;

/// `∫ |y|^{-1} dy` over one pixel square `[-h/2, h/2]^2`, i.e. `4 h ln(1 + √2)`.
pub fn riesz_self_term(h: f64) -> f64 {
    4.0 * h * (1.0 + SQRT_2).ln()
}

/// Brute-force `2 ∫ f(y) / |x - y| dy` by a direct double sum over pixels.
///
/// The singular `y = x` term uses the exact integral of `1/|y|` over the pixel square.
/// Intended as an independent check of the projector on small grids.
pub fn riesz_oracle(image: &ImageGrid) -> ImageGrid {
    let grid = *image.grid();
    let n = grid.n();
    if n > COST_WARNING_SIDE {
        log::warn!("riesz_oracle on {n}x{n} pixels costs O(n^4) = {:.1e} kernel evaluations", (n as f64).powi(4));
    }
    let h = grid.spacing();
    let area = grid.cell_area();
    let self_weight = riesz_self_term(h);
    let f = image.values();
    let sources: Vec<(f64, f64, f64)> = f
        .indexed_iter()
        .filter(|(_, &v)| v != 0.0)
        .map(|((i, j), &v)| {
            let (x, y) = grid.point(i, j);
            (x, y, v)
        })
        .collect();
    let values = grid.sample(|x, y| {
        let mut acc = 0.0;
        for &(sx, sy, v) in &sources {
            let r = ((x - sx).powi(2) + (y - sy).powi(2)).sqrt();
            if r > 0.5 * h {
                acc += v * area / r;
            } else {
                acc += v * self_weight;
            }
        }
        2.0 * acc
    });
    image.with_values(values).expect("finite sums of finite values")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn zero_in_zero_out() {
        let grid = Grid::new(10, 1.0).unwrap();
        let out = riesz_oracle(&ImageGrid::zeros(grid));
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_pixel_is_a_one_term_sum() {
        let grid = Grid::new(21, 1.0).unwrap();
        let h = grid.spacing();
        let mut v = grid.zeros();
        v[[10, 10]] = 1.0;
        let out = riesz_oracle(&ImageGrid::from_values(grid, v).unwrap());
        let (x, y) = grid.point(2, 17);
        let expected = 2.0 * h * h / (x * x + y * y).sqrt();
        assert_eq!(out.values()[[2, 17]], expected);
        assert_eq!(out.values()[[10, 10]], 2.0 * riesz_self_term(h));
    }

    #[test]
    fn self_term_matches_quadrature() {
        // Midpoint rule on a fine sub-grid of the unit pixel, avoiding the origin.
        let m = 2000;
        let d = 1.0 / m as f64;
        let mut acc = 0.0;
        for a in 0..m {
            for b in 0..m {
                let x = -0.5 + (a as f64 + 0.5) * d;
                let y = -0.5 + (b as f64 + 0.5) * d;
                acc += d * d / (x * x + y * y).sqrt();
            }
        }
        assert!((acc - riesz_self_term(1.0)).abs() < 2e-3, "{acc}");
    }
}
