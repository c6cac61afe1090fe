//! Gauss-Newton reconstruction of `f` from single-pixel data `g`, minimizing
//! `½‖Kf - g‖²` over images supported in the support disk.
//!
//! Each outer step solves `(JᵀJ + λI) δ = -Jᵀ(Kf - g)` by conjugate gradients, with
//! `J = K'[f]` applied matrix-free and restricted to the support disk, then takes a
//! backtracking Armijo step along `δ`.

use std::fmt::{self, Write as _};
use std::time::{Duration, Instant};

use ndarray::{Array2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::grid::{support_mask, Grid, ImageGrid, Lattice, ScalarField, DEFAULT_SUPPORT_FRACTION};
use crate::metrics::l2_values;
use crate::singlepixel::{Linearization, SinglePixel};

const ARMIJO_SLOPE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepControl {
    /// Always take the full Gauss-Newton step.
    None,
    Backtracking { shrink: f64, max_halvings: usize },
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl::Backtracking { shrink: 0.5, max_halvings: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Damping {
    Fixed(f64),
    /// `factor · trace(JᵀJ)`, the trace estimated with seeded Rademacher probes at the
    /// first iterate.
    TraceScaled { factor: f64, probes: usize, seed: u64 },
}

impl Default for Damping {
    fn default() -> Self {
        Damping::TraceScaled { factor: 1e-6, probes: 4, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialGuess {
    #[default]
    Zero,
    Provided(ImageGrid),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub n_angles_full: usize,
    pub max_outer_iters: usize,
    pub cg_max_iters: usize,
    pub cg_tolerance: f64,
    pub damping: Damping,
    pub step_control: StepControl,
    /// Converged once `‖Kf - g‖ ≤ stop_tolerance · ‖Kf₀ - g‖`.
    pub stop_tolerance: f64,
    /// Stagnated once an accepted step lowers the residual by less than this fraction.
    pub stagnation_tolerance: f64,
    /// Weight of `½‖f‖²`; zero by default.
    pub tikhonov: f64,
    pub initial_guess: InitialGuess,
    /// Radius of the support disk; the default inscribed fraction of the grid when `None`.
    pub support_radius: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n_angles_full: 360,
            max_outer_iters: 30,
            cg_max_iters: 20,
            cg_tolerance: 1e-2,
            damping: Damping::default(),
            step_control: StepControl::default(),
            stop_tolerance: 1e-6,
            stagnation_tolerance: 1e-4,
            tikhonov: 0.0,
            initial_guess: InitialGuess::Zero,
            support_radius: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(invalid(format!("{name} must lie in (0, 1), got {v}")))
            }
        };
        unit("cg_tolerance", self.cg_tolerance)?;
        unit("stop_tolerance", self.stop_tolerance)?;
        if !(0.0..1.0).contains(&self.stagnation_tolerance) {
            return Err(invalid(format!("stagnation_tolerance must lie in [0, 1), got {}", self.stagnation_tolerance)));
        }
        if self.max_outer_iters == 0 || self.cg_max_iters == 0 {
            return Err(invalid("iteration limits must be at least 1"));
        }
        if !(self.tikhonov >= 0.0 && self.tikhonov.is_finite()) {
            return Err(invalid(format!("tikhonov weight must be >= 0, got {}", self.tikhonov)));
        }
        match self.damping {
            Damping::Fixed(v) if !(v >= 0.0 && v.is_finite()) => {
                return Err(invalid(format!("damping must be >= 0, got {v}")));
            }
            Damping::TraceScaled { factor, probes, .. } if !(factor >= 0.0 && factor.is_finite()) || probes == 0 => {
                return Err(invalid("trace-scaled damping needs a factor >= 0 and at least one probe"));
            }
            _ => {}
        }
        if let StepControl::Backtracking { shrink, .. } = self.step_control {
            unit("shrink factor", shrink)?;
        }
        if let Some(r) = self.support_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(invalid(format!("support radius must be positive, got {r}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    Stagnated,
    MaxIterations,
    Diverged,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::Stagnated => "stagnated",
            Termination::MaxIterations => "max_iterations",
            Termination::Diverged => "diverged",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub residual_norm: f64,
    /// `‖f_k - f_true‖₂` when the truth is known.
    pub error_norm: Option<f64>,
    pub step_norm: f64,
    pub step_length: f64,
    pub cg_iterations: usize,
    pub wall_time: Duration,
}

/// Per-iteration history; iteration 0 is the initial guess.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    pub damping: f64,
    /// `‖f_true‖₂`, for relative errors.
    pub truth_norm: Option<f64>,
}

impl SolveReport {
    pub fn final_record(&self) -> &IterationRecord {
        self.records.last().expect("a report always holds the initial record")
    }

    pub fn iterations(&self) -> usize {
        self.final_record().iteration
    }

    /// `‖f_k - f_true‖ / ‖f_true‖` for the last iterate.
    pub fn final_relative_error(&self) -> Option<f64> {
        relative(self.final_record().error_norm, self.truth_norm)
    }

    /// Everything except wall times, one row per iteration, with the termination reason
    /// in a trailing comment.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("iteration,residual_norm,error_norm,relative_error,step_norm,step_length,cg_iterations\n");
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.iteration,
                r.residual_norm,
                opt(r.error_norm),
                opt(relative(r.error_norm, self.truth_norm)),
                r.step_norm,
                r.step_length,
                r.cg_iterations
            )
            .expect("write to string");
        }
        writeln!(out, "# termination={} damping={}", self.termination, self.damping).expect("write to string");
        out
    }
}

fn relative(error: Option<f64>, norm: Option<f64>) -> Option<f64> {
    match (error, norm) {
        (Some(e), Some(n)) if n > 0.0 => Some(e / n),
        _ => None,
    }
}

/// `Kf - data` and its L² norm.
pub fn residual(f: &ImageGrid, data: &ScalarField, n_angles_full: usize) -> Result<(ScalarField, f64)> {
    f.grid().check_same(data.grid(), "residual")?;
    let k = SinglePixel::new(*f.grid(), n_angles_full)?.forward(f)?;
    residual_of(&k, data)
}

fn residual_of(k: &ScalarField, data: &ScalarField) -> Result<(ScalarField, f64)> {
    let r = k.values() - data.values();
    let norm = l2_values(&r, data.grid().spacing());
    Ok((ScalarField::new(*data.grid(), r)?, norm))
}

fn masked_dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Problem {
    mask: Array2<f64>,
    shift: f64,
}

impl Problem {
    /// `M(JᵀJ + shift)M v`.
    fn normal(&self, lin: &Linearization<'_>, v: &Array2<f64>) -> Array2<f64> {
        let mut out = lin.apply_adjoint(&lin.apply(v));
        Zip::from(&mut out).and(&self.mask).and(v).for_each(|o, m, v| *o = m * (*o + self.shift * v));
        out
    }

    /// Conjugate gradients from zero; returns the step and the iterations used.
    fn solve(&self, lin: &Linearization<'_>, rhs: &Array2<f64>, config: &SolverConfig) -> (Array2<f64>, usize) {
        let mut x = Array2::zeros(rhs.raw_dim());
        let mut r = rhs.clone();
        let mut p = r.clone();
        let mut rr = masked_dot(&r, &r);
        let target = config.cg_tolerance * config.cg_tolerance * rr;
        let mut used = 0;
        while used < config.cg_max_iters && rr > target && rr > 0.0 {
            let ap = self.normal(lin, &p);
            let pap = masked_dot(&p, &ap);
            if pap.is_nan() || pap <= 0.0 {
                break;
            }
            let alpha = rr / pap;
            x.scaled_add(alpha, &p);
            r.scaled_add(-alpha, &ap);
            let next = masked_dot(&r, &r);
            used += 1;
            p = &r + &(p * (next / rr));
            rr = next;
        }
        (x, used)
    }

    fn trace_estimate(&self, lin: &Linearization<'_>, probes: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acc = 0.0;
        for _ in 0..probes {
            let z = self.mask.mapv(|m| if rng.random::<bool>() { m } else { -m });
            let jz = lin.apply(&z);
            acc += masked_dot(&jz, &jz);
        }
        acc / probes as f64
    }
}

struct State<'a> {
    f: ImageGrid,
    lin: Linearization<'a>,
    residual: Array2<f64>,
    norm: f64,
}

fn evaluate<'a>(sp: &'a SinglePixel, f: ImageGrid, data: &ScalarField) -> Result<State<'a>> {
    let lin = sp.linearize(&f)?;
    let residual = lin.value().values() - data.values();
    let norm = l2_values(&residual, data.grid().spacing());
    Ok(State { f, lin, residual, norm })
}

/// Reconstruct `f` from data `g ≈ Kf`.
///
/// A non-finite residual ends the solve with [`Error::Diverged`] carrying the report.
pub fn gauss_newton_reconstruct(
    data: &ScalarField,
    config: &SolverConfig,
    truth: Option<&ImageGrid>,
) -> Result<(ImageGrid, SolveReport)> {
    config.validate()?;
    let grid: Grid = *data.grid();
    if let Some(t) = truth {
        grid.check_same(t.grid(), "truth")?;
    }
    let radius = config.support_radius.unwrap_or(DEFAULT_SUPPORT_FRACTION * grid.half_width());
    let mut start = match &config.initial_guess {
        InitialGuess::Zero => ImageGrid::new(grid, radius, grid.zeros())?,
        InitialGuess::Provided(f) => {
            grid.check_same(f.grid(), "initial guess")?;
            ImageGrid::new(grid, radius, f.values().clone())?
        }
    };
    start.apply_support_mask();
    let sp = SinglePixel::new(grid, config.n_angles_full)?;
    let h = grid.spacing();
    let error_of = |f: &ImageGrid| truth.map(|t| l2_values(&(f.values() - t.values()), h));
    let truth_norm = truth.map(|t| l2_values(t.values(), h));
    let clock = Instant::now();

    let mut state = evaluate(&sp, start, data)?;
    let mut records = vec![IterationRecord {
        iteration: 0,
        residual_norm: state.norm,
        error_norm: error_of(&state.f),
        step_norm: 0.0,
        step_length: 0.0,
        cg_iterations: 0,
        wall_time: clock.elapsed(),
    }];
    let report = |records: Vec<IterationRecord>, termination, damping| SolveReport {
        records,
        termination,
        damping,
        truth_norm,
    };
    if !state.norm.is_finite() {
        return Err(Error::Diverged(Box::new(report(records, Termination::Diverged, 0.0))));
    }
    let mask = support_mask(&grid, radius);
    let mut problem = Problem { mask, shift: 0.0 };
    let damping = match config.damping {
        Damping::Fixed(v) => v,
        Damping::TraceScaled { factor, probes, seed } => factor * problem.trace_estimate(&state.lin, probes, seed),
    };
    problem.shift = damping + config.tikhonov;
    let initial = state.norm;
    let mut termination = Termination::MaxIterations;

    for iteration in 1..=config.max_outer_iters {
        if state.norm == 0.0 || state.norm <= config.stop_tolerance * initial {
            termination = Termination::Converged;
            break;
        }
        let mut rhs = state.lin.apply_adjoint(&state.residual);
        if config.tikhonov > 0.0 {
            rhs.scaled_add(config.tikhonov, state.f.values());
        }
        rhs.zip_mut_with(&problem.mask, |g, m| *g *= -m);
        let (step, cg_iterations) = problem.solve(&state.lin, &rhs, config);
        let objective = |norm: f64, f: &ImageGrid| {
            0.5 * norm * norm + 0.5 * config.tikhonov * l2_values(f.values(), h).powi(2)
        };
        let current = objective(state.norm, &state.f);
        // Directional derivative of the objective along the step, in the pixel-area product.
        let slope = -masked_dot(&rhs, &step) * h * h;
        let (mut length, tries, shrink) = match config.step_control {
            StepControl::None => (1.0, 0, 1.0),
            StepControl::Backtracking { shrink, max_halvings } => (1.0, max_halvings, shrink),
        };
        let mut accepted = None;
        for attempt in 0..=tries {
            let mut trial = state.f.clone();
            trial.values_mut().scaled_add(length, &step);
            trial.apply_support_mask();
            match evaluate(&sp, trial, data) {
                Ok(next) if !next.norm.is_finite() => {
                    if config.step_control == StepControl::None {
                        records.push(IterationRecord {
                            iteration,
                            residual_norm: next.norm,
                            error_norm: error_of(&next.f),
                            step_norm: l2_values(&step, h) * length,
                            step_length: length,
                            cg_iterations,
                            wall_time: clock.elapsed(),
                        });
                        return Err(Error::Diverged(Box::new(report(records, Termination::Diverged, damping))));
                    }
                }
                Ok(next) => {
                    let sufficient = objective(next.norm, &next.f) <= current + ARMIJO_SLOPE * length * slope;
                    if config.step_control == StepControl::None || sufficient {
                        accepted = Some(next);
                        break;
                    }
                }
                Err(Error::Overflow { value, limit }) => {
                    if config.step_control == StepControl::None {
                        return Err(Error::Overflow { value, limit });
                    }
                }
                Err(e) => return Err(e),
            }
            if attempt < tries {
                length *= shrink;
            }
        }
        let Some(next) = accepted else {
            termination = Termination::Stagnated;
            break;
        };
        let previous = state.norm;
        state = next;
        records.push(IterationRecord {
            iteration,
            residual_norm: state.norm,
            error_norm: error_of(&state.f),
            step_norm: l2_values(&step, h) * length,
            step_length: length,
            cg_iterations,
            wall_time: clock.elapsed(),
        });
        log::debug!("gauss-newton {iteration}: residual {:.6e} step {length}", state.norm);
        if state.norm == 0.0 || state.norm <= config.stop_tolerance * initial {
            termination = Termination::Converged;
            break;
        }
        if previous - state.norm < config.stagnation_tolerance * previous {
            termination = Termination::Stagnated;
            break;
        }
    }
    Ok((state.f, report(records, termination, damping)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::generate_gaussian;

    fn small_config() -> SolverConfig {
        SolverConfig { n_angles_full: 32, max_outer_iters: 10, ..SolverConfig::default() }
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        for bad in [
            SolverConfig { cg_tolerance: 0.0, ..SolverConfig::default() },
            SolverConfig { stop_tolerance: 1.0, ..SolverConfig::default() },
            SolverConfig { max_outer_iters: 0, ..SolverConfig::default() },
            SolverConfig { damping: Damping::Fixed(-1.0), ..SolverConfig::default() },
            SolverConfig { step_control: StepControl::Backtracking { shrink: 1.5, max_halvings: 3 }, ..SolverConfig::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn residual_cases() {
        let grid = Grid::new(20, 1.0).unwrap();
        let zero = ImageGrid::zeros(grid);
        let k0 = ScalarField::constant(grid, std::f64::consts::TAU);
        assert_eq!(residual(&zero, &k0, 16).unwrap().1, 0.0);
        let g = generate_gaussian(20, 1.0, 0.3, 1.0).unwrap();
        let kg = SinglePixel::new(grid, 16).unwrap().forward(&g).unwrap();
        assert!(residual(&g, &kg, 16).unwrap().1 < 1e-12);
        assert!(residual(&zero, &kg, 16).unwrap().1 > 0.0);
    }

    #[test]
    fn exact_data_at_zero_stops_immediately() {
        let grid = Grid::new(16, 1.0).unwrap();
        let data = ScalarField::constant(grid, std::f64::consts::TAU);
        let (f, report) = gauss_newton_reconstruct(&data, &small_config(), None).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
        assert_eq!(report.termination, Termination::Converged);
        assert!(report.iterations() <= 1);
    }

    #[test]
    fn descends_and_is_deterministic() {
        let truth = generate_gaussian(24, 1.0, 0.3, 0.5).unwrap();
        let data = SinglePixel::new(*truth.grid(), 32).unwrap().forward(&truth).unwrap();
        let config = small_config();
        let (f, report) = gauss_newton_reconstruct(&data, &config, Some(&truth)).unwrap();
        for w in report.records.windows(2) {
            assert!(w[1].residual_norm <= w[0].residual_norm);
        }
        assert!(report.final_relative_error().unwrap() < 0.1, "{:?}", report.final_relative_error());
        let (f2, report2) = gauss_newton_reconstruct(&data, &config, Some(&truth)).unwrap();
        assert_eq!(f, f2);
        assert_eq!(report.to_csv(), report2.to_csv());
        let csv = report.to_csv();
        assert!(csv.starts_with("iteration,residual_norm"));
        assert!(csv.trim_end().lines().last().unwrap().starts_with("# termination="));
    }

    #[test]
    fn mismatched_truth_is_rejected() {
        let data = ScalarField::constant(Grid::new(16, 1.0).unwrap(), 1.0);
        let truth = ImageGrid::zeros(Grid::new(17, 1.0).unwrap());
        assert!(gauss_newton_reconstruct(&data, &small_config(), Some(&truth)).is_err());
    }
}
