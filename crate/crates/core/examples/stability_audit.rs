//! Ratios `‖Kf₁ - Kf₂‖_{H¹} / ‖f₁ - f₂‖_{L²}` for small and large seeded pairs.

use spixct::metrics::{median, perturbation_pairs, stability_audit};
use spixct::{Grid, Result};

fn main() -> Result<()> {
    let grid = Grid::new(48, 1.0)?;
    for (label, norms) in [("small", [0.05, 0.1, 0.2]), ("large", [5.0, 10.0, 20.0])] {
        let pairs = perturbation_pairs(&grid, &norms, 12, 3);
        let audit = stability_audit(&pairs, 128)?;
        let ratios: Vec<f64> = audit.records.iter().filter_map(|r| r.lower_ratio).collect();
        println!(
            "{label}: min {:.3}  median {:.3}  max {:.3}  exponent {:.3}",
            audit.min_lower_ratio.unwrap_or(f64::NAN),
            median(&ratios).unwrap_or(f64::NAN),
            ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            audit.fitted_exponent.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
