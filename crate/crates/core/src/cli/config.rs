//! Flat `key = value` run configuration, merged from a file and command-line flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::metrics::{NoiseScaling, NoiseSpec};
use crate::solver::{Damping, SolverConfig, StepControl};
use crate::spectral::{SpectralConfig, Taper};

/// Every accepted key with its default and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("phantom", "shepplogan", "shepplogan | disk | gaussian | zero | file:<path>"),
    ("n", "101", "pixels per side"),
    ("half_width", "1", "half side length of the square"),
    ("angles", "360", "directions on the full circle (even, >= 16)"),
    ("magnitude", "1", "multiplier applied to the phantom"),
    ("sigma", "0.15", "width of the gaussian phantom"),
    ("radius", "0.5", "radius of the disk phantom"),
    ("noise", "0", "relative noise level"),
    ("noise_scaling", "global", "global | pixelwise"),
    ("seed", "0", "seed for noise and random families"),
    ("out", ".", "existing output directory"),
    ("pad_factor", "2", "zero padding factor for |D| (2, 3 or 4)"),
    ("taper", "none", "none | cosine"),
    ("derivative", "finite", "finite | analytic"),
    ("epsilons", "0.1,0.01,0.001", "finite-difference steps, decreasing"),
    ("max_outer_iters", "30", "Gauss-Newton iterations"),
    ("cg_max_iters", "20", "conjugate gradient iterations per step"),
    ("cg_tolerance", "0.01", "relative CG residual"),
    ("damping", "auto", "auto | <value>"),
    ("damping_factor", "1e-6", "multiple of the trace estimate when damping = auto"),
    ("stop_tolerance", "1e-6", "relative residual for convergence"),
    ("stagnation_tolerance", "1e-4", "minimal relative residual decrease per step"),
    ("tikhonov", "0", "weight of the ½‖f‖² term"),
    ("backtracking", "true", "Armijo backtracking on/off"),
    ("shrink", "0.5", "backtracking shrink factor"),
    ("max_halvings", "10", "backtracking attempts"),
    ("noise_levels", "0,0.001,0.005,0.01", "levels for noise-sweep"),
    ("multipliers", "1,10,20,40", "multipliers for magnitude-sweep"),
    ("audit_pairs", "20", "pairs per bucket for stability-audit"),
    ("audit_small", "0.05,0.1,0.2", "max-norms of the small bucket"),
    ("audit_large", "5,10,20", "max-norms of the large bucket"),
];

pub fn default_of(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(k, _, _)| *k == key).map(|(_, d, _)| *d)
}

/// Parse `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { path: path.to_path_buf(), line: idx + 1, message };
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(format!("expected `key = value`, found `{line}`")));
        };
        let key = key.trim().replace('-', "_");
        if default_of(&key).is_none() {
            return Err(err(format!("unknown key `{key}`")));
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(err(format!("duplicate key `{key}`")));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum PhantomChoice {
    SheppLogan,
    Disk,
    Gaussian,
    Zero,
    File(PathBuf),
}

/// Every setting after merging defaults, file and flags, validated.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub phantom: PhantomChoice,
    pub n: usize,
    pub half_width: f64,
    pub angles: usize,
    pub magnitude: f64,
    pub sigma: f64,
    pub radius: f64,
    pub noise: NoiseSpec,
    pub seed: u64,
    pub out: PathBuf,
    pub spectral: SpectralConfig,
    pub analytic_derivative: bool,
    pub epsilons: Vec<f64>,
    pub solver: SolverConfig,
    pub noise_levels: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub audit_pairs: usize,
    pub audit_small: Vec<f64>,
    pub audit_large: Vec<f64>,
    /// Hex SHA-256 of the canonical `key=value` listing.
    pub hash: String,
}

struct Settings<'a>(&'a BTreeMap<String, String>);

impl Settings<'_> {
    fn raw(&self, key: &str) -> &str {
        self.0.get(key).map(String::as_str).expect("all keys resolved")
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.raw(key);
        raw.parse().map_err(|_| invalid(format!("{key}: cannot parse `{raw}`")))
    }

    fn float(&self, key: &str) -> Result<f64> {
        let v: f64 = self.get(key)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(invalid(format!("{key} must be finite")))
        }
    }

    fn list(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self.raw(key);
        let values = raw
            .split(',')
            .map(|t| t.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| invalid(format!("{key}: cannot parse list `{raw}`")))?;
        if values.is_empty() {
            return Err(invalid(format!("{key} must not be empty")));
        }
        Ok(values)
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.raw(key) {
            "true" | "yes" | "1" | "on" => Ok(true),
            "false" | "no" | "0" | "off" => Ok(false),
            other => Err(invalid(format!("{key}: expected true or false, got `{other}`"))),
        }
    }
}

impl RunConfig {
    /// Merge `file` then `flags` over the defaults and validate everything up front.
    pub fn resolve(
        command: &str,
        file: &BTreeMap<String, String>,
        flags: &BTreeMap<String, String>,
    ) -> Result<Self> {
        let mut merged: BTreeMap<String, String> =
            KEYS.iter().map(|(k, d, _)| (k.to_string(), d.to_string())).collect();
        for (k, v) in file.iter().chain(flags) {
            if default_of(k).is_none() {
                return Err(invalid(format!("unknown key `{k}`")));
            }
            merged.insert(k.clone(), v.clone());
        }
        // The output location is where results go, not part of the experiment.
        let mut canonical = format!("command={command}\n");
        for (k, v) in merged.iter().filter(|(k, _)| k.as_str() != "out") {
            writeln!(canonical, "{k}={v}").expect("write to string");
        }
        let hash: String = Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();

        let s = Settings(&merged);
        let phantom = match s.raw("phantom") {
            "shepplogan" => PhantomChoice::SheppLogan,
            "disk" => PhantomChoice::Disk,
            "gaussian" => PhantomChoice::Gaussian,
            "zero" => PhantomChoice::Zero,
            other => match other.strip_prefix("file:") {
                Some(path) if Path::new(path).is_file() => PhantomChoice::File(PathBuf::from(path)),
                Some(path) => return Err(invalid(format!("phantom file `{path}` does not exist"))),
                None => return Err(invalid(format!("unknown phantom `{other}`"))),
            },
        };
        let out = PathBuf::from(s.raw("out"));
        if !out.is_dir() {
            return Err(invalid(format!("output directory `{}` does not exist", out.display())));
        }
        let seed: u64 = s.get("seed")?;
        let scaling = match s.raw("noise_scaling") {
            "global" => NoiseScaling::Global,
            "pixelwise" => NoiseScaling::Pixelwise,
            other => return Err(invalid(format!("unknown noise_scaling `{other}`"))),
        };
        let noise = NoiseSpec::new(s.float("noise")?, seed)?.with_scaling(scaling);
        let taper = match s.raw("taper") {
            "none" => Taper::None,
            "cosine" => Taper::Cosine,
            other => return Err(invalid(format!("unknown taper `{other}`"))),
        };
        let spectral = SpectralConfig::new(s.get("pad_factor")?, taper)?;
        let analytic_derivative = match s.raw("derivative") {
            "finite" => false,
            "analytic" => true,
            other => return Err(invalid(format!("unknown derivative mode `{other}`"))),
        };
        let damping = match s.raw("damping") {
            "auto" => Damping::TraceScaled { factor: s.float("damping_factor")?, probes: 4, seed },
            _ => Damping::Fixed(s.float("damping")?),
        };
        let step_control = if s.flag("backtracking")? {
            StepControl::Backtracking { shrink: s.float("shrink")?, max_halvings: s.get("max_halvings")? }
        } else {
            StepControl::None
        };
        let angles: usize = s.get("angles")?;
        let solver = SolverConfig {
            n_angles_full: angles,
            max_outer_iters: s.get("max_outer_iters")?,
            cg_max_iters: s.get("cg_max_iters")?,
            cg_tolerance: s.float("cg_tolerance")?,
            damping,
            step_control,
            stop_tolerance: s.float("stop_tolerance")?,
            stagnation_tolerance: s.float("stagnation_tolerance")?,
            tikhonov: s.float("tikhonov")?,
            ..SolverConfig::default()
        };
        solver.validate()?;
        let config = Self {
            command: command.to_string(),
            phantom,
            n: s.get("n")?,
            half_width: s.float("half_width")?,
            angles,
            magnitude: s.float("magnitude")?,
            sigma: s.float("sigma")?,
            radius: s.float("radius")?,
            noise,
            seed,
            out,
            spectral,
            analytic_derivative,
            epsilons: s.list("epsilons")?,
            solver,
            noise_levels: s.list("noise_levels")?,
            multipliers: s.list("multipliers")?,
            audit_pairs: s.get("audit_pairs")?,
            audit_small: s.list("audit_small")?,
            audit_large: s.list("audit_large")?,
            hash,
        };
        if config.n < 8 {
            return Err(invalid("n must be at least 8"));
        }
        if config.angles < 16 || !config.angles.is_multiple_of(2) {
            return Err(invalid(format!("angles must be even and >= 16, got {}", config.angles)));
        }
        if config.noise_levels.iter().any(|v| *v < 0.0) {
            return Err(invalid("noise levels must be >= 0"));
        }
        if config.audit_pairs == 0 {
            return Err(invalid("audit_pairs must be at least 1"));
        }
        Ok(config)
    }

    /// The provenance line opening every output file (without the `#`).
    pub fn provenance(&self) -> String {
        format!("spixct {} config_hash={} seed={}", self.command, self.hash, self.seed)
    }
}
