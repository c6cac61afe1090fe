use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use crate::cli::config::{PhantomChoice, RunConfig};
use crate::error::{Error, Result};
use crate::grid::{Grid, ImageGrid, Lattice, ScalarField};
use crate::io::{encode_pgm, format_field, format_image, read_image, write_text, PgmEncoding};
use crate::metrics::{
    add_relative_noise, interior_relative_error, l2_norm, median, perturbation_pairs, stability_audit, NoiseSpec,
    StabilityRecord,
};
use crate::phantom::{generate_disk, generate_gaussian, generate_shepp_logan};
use crate::singlepixel::{linearize_by_epsilon, linearized_reconstruction, SinglePixel};
use crate::solver::{gauss_newton_reconstruct, SolveReport, Termination};

struct Output<'a> {
    config: &'a RunConfig,
}

impl Output<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.config.out.join(name)
    }

    fn header(&self) -> Vec<String> {
        vec![self.config.provenance()]
    }

    fn csv(&self, name: &str, body: &str) -> Result<()> {
        write_text(&self.path(name), &format!("# {}\n{body}", self.config.provenance()))
    }

    fn image(&self, name: &str, image: &ImageGrid) -> Result<()> {
        write_text(&self.path(&format!("{name}.csv")), &format_image(image, &self.header()))?;
        self.preview(name, image)
    }

    fn field(&self, name: &str, field: &ScalarField) -> Result<()> {
        write_text(&self.path(&format!("{name}.csv")), &format_field(field, &self.header()))?;
        self.preview(name, field)
    }

    fn preview<L: Lattice>(&self, name: &str, lattice: &L) -> Result<()> {
        let path = self.path(&format!("{name}.pgm"));
        let bytes = encode_pgm(lattice.values(), PgmEncoding::Binary, Some(&self.config.provenance()));
        fs::write(&path, bytes).map_err(|source| Error::Io { path, source })
    }
}

fn phantom(config: &RunConfig) -> Result<ImageGrid> {
    let (n, w) = (config.n, config.half_width);
    let base = match &config.phantom {
        PhantomChoice::SheppLogan => generate_shepp_logan(n, w)?,
        PhantomChoice::Disk => generate_disk(n, w, config.radius, 1.0)?,
        PhantomChoice::Gaussian => generate_gaussian(n, w, config.sigma, 1.0)?,
        PhantomChoice::Zero => ImageGrid::zeros(Grid::new(n, w)?),
        PhantomChoice::File(path) => read_image(path)?,
    };
    Ok(base.scaled(config.magnitude))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| v.to_string())
}

pub fn forward(config: &RunConfig) -> Result<()> {
    let out = Output { config };
    let image = phantom(config)?;
    let field = SinglePixel::new(*image.grid(), config.angles)?.forward(&image)?;
    out.image("phantom", &image)?;
    out.field("field", &field)
}

pub fn invert_linear(config: &RunConfig) -> Result<()> {
    let out = Output { config };
    let g = phantom(config)?;
    let study = linearize_by_epsilon(&g, &config.epsilons, config.angles)?;
    let (mode, data) = if config.analytic_derivative {
        ("analytic", &study.derivative)
    } else {
        ("finite", &study.field)
    };
    let reconstruction = linearized_reconstruction(data, &config.spectral);
    let mut table = String::from("epsilon,distance,relative,reconstruction_interior_error\n");
    for row in &study.rows {
        let single = linearize_by_epsilon(&g, &[row.epsilon], config.angles)?;
        let rec = linearized_reconstruction(&single.field, &config.spectral);
        let err = interior_relative_error(&rec, &g).ok();
        writeln!(table, "{},{},{},{}", row.epsilon, row.distance, opt(row.relative), opt(err)).expect("write");
    }
    out.field("derivative", data)?;
    out.image("reconstruction", &reconstruction)?;
    out.csv("epsilon_table.csv", &table)?;
    let summary = format!(
        "mode,interior_relative_error,max_abs\n{mode},{},{}\n",
        opt(interior_relative_error(&reconstruction, &g).ok()),
        reconstruction.max_abs()
    );
    out.csv("summary.csv", &summary)
}

/// One Gauss-Newton run; a diverged solve yields its report instead of an error.
fn solve(config: &RunConfig, truth: &ImageGrid, noise: &NoiseSpec) -> Result<(Option<ImageGrid>, SolveReport)> {
    let clean = SinglePixel::new(*truth.grid(), config.angles)?.forward(truth)?;
    let data = add_relative_noise(&clean, noise);
    match gauss_newton_reconstruct(&data, &config.solver, Some(truth)) {
        Ok((f, report)) => Ok((Some(f), report)),
        Err(Error::Diverged(report)) => Ok((None, *report)),
        Err(e) => Err(e),
    }
}

fn summary_row(report: &SolveReport) -> String {
    let last = report.final_record();
    format!("{},{},{},{}", opt(report.final_relative_error()), opt(last.error_norm), last.iteration, report.termination)
}

pub fn reconstruct(config: &RunConfig) -> Result<()> {
    let out = Output { config };
    let truth = phantom(config)?;
    let (f, report) = solve(config, &truth, &config.noise)?;
    out.csv("report.csv", &report.to_csv())?;
    out.csv(
        "summary.csv",
        &format!("noise,relative_error,error_norm,iterations,termination\n{},{}\n", config.noise.relative_level(), summary_row(&report)),
    )?;
    match f {
        Some(f) => out.image("reconstruction", &f),
        None => Err(Error::Diverged(Box::new(report))),
    }
}

pub fn noise_sweep(config: &RunConfig) -> Result<()> {
    let out = Output { config };
    let truth = phantom(config)?;
    let mut summary = String::from("level,relative_error,error_norm,iterations,termination\n");
    let mut failed = None;
    for (i, &level) in config.noise_levels.iter().enumerate() {
        let spec = NoiseSpec::new(level, config.seed)?.with_scaling(config.noise.scaling());
        let (_, report) = solve(config, &truth, &spec)?;
        out.csv(&format!("report_{i}.csv"), &report.to_csv())?;
        writeln!(summary, "{level},{}", summary_row(&report)).expect("write");
        if report.termination == Termination::Diverged && failed.is_none() {
            failed = Some(report);
        }
    }
    out.csv("summary.csv", &summary)?;
    match failed {
        Some(report) => Err(Error::Diverged(Box::new(report))),
        None => Ok(()),
    }
}

pub fn magnitude_sweep(config: &RunConfig) -> Result<()> {
    let out = Output { config };
    let base = phantom(config)?;
    let base_norm = l2_norm(&base);
    let mut summary = String::from("multiplier,relative_error,error_over_multiplier,iterations,termination\n");
    let mut curves = String::from("multiplier,iteration,relative_error,error_over_multiplier\n");
    for &m in &config.multipliers {
        let truth = base.scaled(m);
        let (_, report) = solve(config, &truth, &config.noise)?;
        for r in &report.records {
            let e = r.error_norm.unwrap_or(f64::NAN);
            writeln!(curves, "{m},{},{},{}", r.iteration, opt(relative(e, m * base_norm)), e / m).expect("write");
        }
        let last = report.final_record();
        let e = last.error_norm.unwrap_or(f64::NAN);
        writeln!(summary, "{m},{},{},{},{}", opt(relative(e, m * base_norm)), e / m, last.iteration, report.termination)
            .expect("write");
    }
    out.csv("curves.csv", &curves)?;
    out.csv("summary.csv", &summary)
}

fn relative(e: f64, norm: f64) -> Option<f64> {
    (norm > 0.0).then(|| e / norm)
}

pub fn stability_audit_cmd(config: &RunConfig) -> Result<()> {
    let out = Output { config };
    let grid = Grid::new(config.n, config.half_width)?;
    let mut records = String::from("bucket,max_norm,l2_diff,h1_grad_diff,data_h1_diff,lower_ratio\n");
    let mut summary = String::from("bucket,pairs,min_lower_ratio,median_lower_ratio,max_lower_ratio,fitted_exponent\n");
    for (bucket, norms, salt) in [("small", &config.audit_small, 0u64), ("large", &config.audit_large, 1u64)] {
        let mut pairs = perturbation_pairs(&grid, norms, config.audit_pairs, config.seed.wrapping_mul(2).wrapping_add(salt));
        let first = pairs[0].0.clone();
        pairs.push((first.clone(), first));
        let audit = stability_audit(&pairs, config.angles)?;
        for r in &audit.records {
            let StabilityRecord { max_norm, l2_diff, h1_grad_diff, data_h1_diff, lower_ratio } = *r;
            writeln!(records, "{bucket},{max_norm},{l2_diff},{h1_grad_diff},{data_h1_diff},{}", opt(lower_ratio))
                .expect("write");
        }
        let ratios: Vec<f64> = audit.records.iter().filter_map(|r| r.lower_ratio).collect();
        let max = ratios.iter().copied().reduce(f64::max);
        writeln!(
            summary,
            "{bucket},{},{},{},{},{}",
            audit.records.len(),
            opt(audit.min_lower_ratio),
            opt(median(&ratios)),
            opt(max),
            opt(audit.fitted_exponent)
        )
        .expect("write");
    }
    out.csv("records.csv", &records)?;
    out.csv("summary.csv", &summary)
}
