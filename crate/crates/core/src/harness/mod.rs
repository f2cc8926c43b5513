//! Reproducible experiment runner behind the `roughmild` binary: config
//! parsing, driver and generator construction, and the `verify`, `solve`
//! and `montecarlo` commands. Each command writes versioned CSV files.

mod config;
mod montecarlo;
mod report;
mod solve;
mod verify;

use std::path::PathBuf;

pub use config::Config;
pub use montecarlo::{run_montecarlo, Experiment, MonteCarloOutcome};
pub use report::{num, render, write_table, CheckRow, Table, SCHEMA};
pub use solve::{build_solve, run_solve, SolveOutcome, SolveSetup};
pub use verify::{run_verify, verify_suites, SuiteReport, VerifyOutcome, SUITES};

use crate::drivers::{default_alpha, DriverFactory, DriverKind, DriverSample, DriverSpec, QSpectrum};
use crate::error::{Error, Result};
use crate::rough::{read_rough_path, Grid};
use crate::semigroup::Generator;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "ROUGHMILD_THREADS";

/// Every section and key any command understands.
pub const KNOWN_KEYS: &[(&str, &[&str])] = &[
    ("", &["seed"]),
    ("grid", &["horizon", "steps"]),
    ("driver", &["kind", "hurst", "spectrum", "fine_factor", "alpha", "file"]),
    (
        "semigroup",
        &["generator", "size", "spacing", "diffusivity", "entries", "matrix_file", "steps", "horizon"],
    ),
    ("verify", &["suites", "instances", "scaling_alpha", "scaling_beta", "driver_file"]),
    (
        "solve",
        &[
            "preset",
            "state_dim",
            "noise_dim",
            "diffusivity",
            "noise_scale",
            "alpha",
            "picard_tol",
            "max_picard_iters",
            "initial_window",
            "contraction_target",
            "quadrature",
            "initial_iterate",
        ],
    ),
    ("montecarlo", &["experiment", "n_seeds", "p", "resolutions", "control", "cov_steps"]),
];

/// Command-line overrides shared by all commands.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    /// Suppresses the timestamp line and wall-clock columns.
    pub reproducible: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { seed: None, out_dir: PathBuf::from("out"), reproducible: false }
    }
}

impl RunOptions {
    pub fn base_seed(&self, config: &Config) -> Result<u64> {
        match self.seed {
            Some(s) => Ok(s),
            None => config.get_or("", "seed", 0),
        }
    }
}

/// Sizes the global worker pool from `ROUGHMILD_THREADS` when set.
pub fn configure_threads() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Parameter(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Parameter(format!("cannot size worker pool: {e}")))?;
    Ok(Some(n))
}

pub fn grid_from(config: &Config) -> Result<Grid> {
    Grid::new(config.get_or("grid", "horizon", 1.0)?, config.get_or("grid", "steps", 256)?)
        .map_err(|e| Error::parse(config.line_of("grid", "steps").max(config.line_of("grid", "horizon")), e.to_string()))
}

/// Driver settings from `[driver]`; `default_dim` is used when no spectrum is given.
pub fn driver_spec_from(config: &Config, grid: Grid, default_dim: usize) -> Result<DriverSpec> {
    let kind: DriverKind = config.get_or("driver", "kind", DriverKind::GeometricFbm)?;
    let default_hurst = if kind == DriverKind::GeometricFbm { 0.4 } else { 0.5 };
    let hurst: f64 = config.get_or("driver", "hurst", default_hurst)?;
    if kind != DriverKind::GeometricFbm && hurst != 0.5 {
        return Err(Error::parse(config.line_of("driver", "hurst"), "Wiener drivers have hurst = 0.5"));
    }
    let spectrum = match config.get::<QSpectrum>("driver", "spectrum")? {
        Some(s) => s,
        None => QSpectrum::polynomial(2.0, default_dim)?,
    };
    Ok(DriverSpec {
        kind,
        spectrum,
        hurst,
        grid,
        fine_factor: config.get_or("driver", "fine_factor", 8)?,
        alpha: config.get_or("driver", "alpha", default_alpha(hurst))?,
    })
}

/// A driver read from `[driver] file`, or sampled from `spec` otherwise.
pub fn driver_from(config: &Config, spec: &DriverSpec, seed: u64) -> Result<DriverSample> {
    match config.get_str("driver", "file") {
        Some(path) => load_driver(&config.resolve_path(path)),
        None => DriverFactory::new(spec.clone())?.sample(seed),
    }
}

pub fn load_driver(path: &std::path::Path) -> Result<DriverSample> {
    let file = read_rough_path(std::io::BufReader::new(std::fs::File::open(path)?))?;
    match &file.meta {
        Some(meta) => DriverSample::from_parts(file.rough, meta),
        None => Ok(DriverSample { rough: file.rough, kind: DriverKind::GeometricFbm, hurst: f64::NAN, fine_factor: 1, seed: 0 }),
    }
}

pub fn generator_from(config: &Config) -> Result<Generator> {
    let name = config.get_str("semigroup", "generator").unwrap_or("laplacian1d");
    let line = config.line_of("semigroup", "generator");
    let size: usize = config.get_or("semigroup", "size", 8)?;
    let generator = match name {
        "zero" => Generator::Zero { size },
        "laplacian1d" => Generator::Laplacian1d {
            size,
            spacing: config.get_or("semigroup", "spacing", 1.0 / (size + 1) as f64)?,
            diffusivity: config.get_or("semigroup", "diffusivity", 1.0)?,
        },
        "nonnormal" => Generator::NonNormal { size },
        "diagonal" => {
            let entries = config
                .get_parsed_list::<f64>("semigroup", "entries")?
                .ok_or_else(|| Error::parse(line, "diagonal generator needs `entries`"))?;
            Generator::Diagonal(entries)
        }
        "custom" => {
            let file = config
                .get_str("semigroup", "matrix_file")
                .ok_or_else(|| Error::parse(line, "custom generator needs `matrix_file`"))?;
            Generator::custom_from_str(&std::fs::read_to_string(config.resolve_path(file))?)?
        }
        other => return Err(Error::parse(line, format!("unknown generator {other:?}"))),
    };
    if generator.size() == 0 {
        return Err(Error::parse(line, "generator size must be positive"));
    }
    Ok(generator)
}
