//! The `spixct` command line: `spixct <subcommand> [--config <path>] [--key value ...]`.
//!
//! Settings come from the defaults in [`config::KEYS`], then the config file, then flags.
//! Exit codes: 0 success, 1 usage, 2 validation or I/O, 3 numeric failure.

pub mod commands;
pub mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::Path;

use clap::{Arg, ArgMatches, Command};

use crate::error::{Error, Result};
use config::{parse_config_text, RunConfig, KEYS};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

pub const SUBCOMMANDS: &[(&str, &str)] = &[
    ("forward", "simulate Kf for a phantom"),
    ("invert-linear", "recover g from the linearization of K at zero"),
    ("reconstruct", "Gauss-Newton reconstruction from (optionally noisy) data"),
    ("noise-sweep", "reconstruct across noise levels"),
    ("magnitude-sweep", "reconstruct scaled phantoms"),
    ("stability-audit", "empirical data-to-model distance ratios"),
];

pub fn command() -> Command {
    let mut cmd = Command::new("spixct")
        .about("Single-pixel X-ray transform toolkit")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true);
    for (name, about) in SUBCOMMANDS {
        let mut sub = Command::new(*name)
            .about(*about)
            .allow_negative_numbers(true)
            .arg(Arg::new("config").long("config").value_name("PATH").help("key = value settings file"));
        for (key, default, help) in KEYS {
            sub = sub.arg(Arg::new(*key).long(*key).value_name("VALUE").help(format!("{help} [default: {default}]")));
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::InvalidArgument(_) | Error::Parse { .. } | Error::Io { .. } => EXIT_VALIDATION,
        Error::Overflow { .. } | Error::Diverged(_) => EXIT_NUMERIC,
    }
}

fn resolve(name: &str, matches: &ArgMatches) -> Result<RunConfig> {
    let file = match matches.get_one::<String>("config") {
        Some(path) => {
            let path = Path::new(path);
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
            parse_config_text(&text, path)?
        }
        None => BTreeMap::new(),
    };
    let flags: BTreeMap<String, String> = KEYS
        .iter()
        .filter_map(|(key, _, _)| matches.get_one::<String>(key).map(|v| (key.to_string(), v.clone())))
        .collect();
    RunConfig::resolve(name, &file, &flags)
}

pub fn execute(config: &RunConfig) -> Result<()> {
    match config.command.as_str() {
        "forward" => commands::forward(config),
        "invert-linear" => commands::invert_linear(config),
        "reconstruct" => commands::reconstruct(config),
        "noise-sweep" => commands::noise_sweep(config),
        "magnitude-sweep" => commands::magnitude_sweep(config),
        "stability-audit" => commands::stability_audit_cmd(config),
        other => unreachable!("unregistered subcommand {other}"),
    }
}

/// Parse `args` (program name first), run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let outcome = resolve(name, sub).and_then(|config| {
        log::info!("{}", config.provenance());
        execute(&config)
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("spixct: error: {e}");
            exit_code(&e)
        }
    }
}
