//! `montecarlo`: seed sweeps for moment scaling, rough/Itô coincidence and
//! the fBm covariance. Rows are emitted per seed (in seed order) followed by
//! aggregate rows.

use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;

use super::{driver_spec_from, grid_from, num, write_table, Config, RunOptions, Table, KNOWN_KEYS};
use crate::drivers::{
    coincidence_check, component_rng, fbm_covariance, fit_slope, sample_moments, sine_integrand, summarize_coincidence,
    DriverFactory, DriverKind, DriverSpec, FbmSampler, QSpectrum,
};
use crate::error::{Error, Result};
use crate::rough::Grid;
use crate::stats;

/// Below this many seeds aggregate rows carry `low_power=true`.
pub const LOW_POWER_SEEDS: usize = 100;
const MIN_SEEDS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Moments,
    Coincidence,
    FbmCovariance,
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moments" => Ok(Experiment::Moments),
            "coincidence" => Ok(Experiment::Coincidence),
            "fbm_covariance" => Ok(Experiment::FbmCovariance),
            other => Err(Error::Parameter(format!("unknown experiment {other:?}"))),
        }
    }
}

/// One aggregate line: a statistic with its standard error and, where a
/// scaling law is fitted, the slope.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub quantity: String,
    pub param: String,
    pub value: f64,
    pub reference: Option<f64>,
    pub standard_error: Option<f64>,
    pub slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloOutcome {
    pub experiment: Experiment,
    pub n_seeds: usize,
    pub low_power: bool,
    pub aggregates: Vec<Aggregate>,
    pub table: Table,
    pub files: Vec<PathBuf>,
}

impl MonteCarloOutcome {
    pub fn aggregate(&self, quantity: &str, param: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.quantity == quantity && a.param == param)
    }
}

const HEADER: [&str; 9] = ["row", "seed", "quantity", "param", "value", "reference", "standard_error", "slope", "low_power"];

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "NA".into())
}

struct SeedRow {
    seed: u64,
    quantity: String,
    param: String,
    value: f64,
}

pub fn run_montecarlo(config: &Config, opts: &RunOptions) -> Result<MonteCarloOutcome> {
    config.check_keys(KNOWN_KEYS)?;
    let base = opts.base_seed(config)?;
    let line = config.line_of("montecarlo", "experiment");
    let experiment: Experiment = config
        .get("montecarlo", "experiment")?
        .ok_or_else(|| Error::parse(line, "[montecarlo] needs an experiment"))?;
    let n_seeds: usize = config.get_or("montecarlo", "n_seeds", 100)?;
    if n_seeds < MIN_SEEDS {
        return Err(Error::parse(
            config.line_of("montecarlo", "n_seeds"),
            format!("n_seeds must be at least {MIN_SEEDS}, got {n_seeds}"),
        ));
    }
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|i| base + i).collect();
    let (rows, aggregates) = match experiment {
        Experiment::Moments => moments(config, &seeds)?,
        Experiment::Coincidence => coincidence(config, &seeds)?,
        Experiment::FbmCovariance => covariance(config, &seeds)?,
    };
    let low_power = n_seeds < LOW_POWER_SEEDS;
    let mut table = Table::new(&HEADER);
    for r in rows {
        table.push(vec![
            "seed".into(),
            r.seed.to_string(),
            r.quantity,
            r.param,
            num(r.value),
            "NA".into(),
            "NA".into(),
            "NA".into(),
            "NA".into(),
        ]);
    }
    for a in &aggregates {
        table.push(vec![
            "aggregate".into(),
            "NA".into(),
            a.quantity.clone(),
            a.param.clone(),
            num(a.value),
            opt(a.reference),
            opt(a.standard_error),
            opt(a.slope),
            low_power.to_string(),
        ]);
    }
    let name = match experiment {
        Experiment::Moments => "moments",
        Experiment::Coincidence => "coincidence",
        Experiment::FbmCovariance => "fbm_covariance",
    };
    let path = opts.out_dir.join(format!("montecarlo_{name}.csv"));
    write_table(&path, &table, config.hash(), opts.reproducible)?;
    Ok(MonteCarloOutcome { experiment, n_seeds, low_power, aggregates, table, files: vec![path] })
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    (stats::mean(values), stats::standard_error(values))
}

type Rows = (Vec<SeedRow>, Vec<Aggregate>);

fn moments(config: &Config, seeds: &[u64]) -> Result<Rows> {
    let grid = grid_from(config)?;
    let mut spec = driver_spec_from(config, grid, 2)?;
    if config.get_str("driver", "kind").is_none() {
        spec.kind = DriverKind::ItoWiener;
        spec.hurst = 0.5;
        spec.alpha = crate::drivers::default_alpha(0.5);
    }
    let p: u32 = config.get_or("montecarlo", "p", 2)?;
    let factory = DriverFactory::new(spec)?;
    let per_seed: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = seeds
        .par_iter()
        .map(|&s| sample_moments(&factory.sample(s)?.rough, p))
        .collect::<Result<_>>()?;
    let lags = per_seed[0].0.clone();
    let mut rows = Vec::new();
    for (seed, (_, m1, m2)) in seeds.iter().zip(&per_seed) {
        for (l, lag) in lags.iter().enumerate() {
            rows.push(SeedRow { seed: *seed, quantity: format!("first_level_p{p}"), param: format!("lag={}", num(*lag)), value: m1[l] });
            rows.push(SeedRow { seed: *seed, quantity: format!("second_level_p{p}"), param: format!("lag={}", num(*lag)), value: m2[l] });
        }
    }
    let mut aggregates = Vec::new();
    for (level, pick) in [("first_level", 1usize), ("second_level", 2)] {
        let mut means = Vec::new();
        for (l, lag) in lags.iter().enumerate() {
            let vals: Vec<f64> = per_seed.iter().map(|s| if pick == 1 { s.1[l] } else { s.2[l] }).collect();
            let (m, se) = mean_and_se(&vals);
            means.push(m);
            aggregates.push(Aggregate {
                quantity: format!("{level}_p{p}"),
                param: format!("lag={}", num(*lag)),
                value: m,
                reference: None,
                standard_error: Some(se),
                slope: None,
            });
        }
        let slope = fit_slope(&lags, &means);
        let expected = if pick == 1 { p as f64 / 2.0 } else { p as f64 };
        aggregates.push(Aggregate {
            quantity: format!("{level}_p{p}_slope"),
            param: "all_lags".into(),
            value: slope,
            reference: Some(expected),
            standard_error: None,
            slope: Some(slope),
        });
    }
    Ok((rows, aggregates))
}

fn coincidence_spec(config: &Config, finest: usize, kind: DriverKind) -> Result<DriverSpec> {
    let horizon = config.get_or("grid", "horizon", 1.0)?;
    let spectrum = match config.get::<QSpectrum>("driver", "spectrum")? {
        Some(s) => s,
        None => QSpectrum::identity(1)?,
    };
    Ok(DriverSpec {
        kind,
        spectrum,
        hurst: 0.5,
        grid: Grid::new(horizon, finest)?,
        fine_factor: config.get_or("driver", "fine_factor", 8)?,
        alpha: config.get_or("driver", "alpha", crate::drivers::default_alpha(0.5))?,
    })
}

fn coincidence(config: &Config, seeds: &[u64]) -> Result<Rows> {
    let resolutions: Vec<usize> = config
        .get_parsed_list("montecarlo", "resolutions")?
        .unwrap_or_else(|| vec![256, 1024, 4096]);
    let finest = *resolutions.iter().max().ok_or_else(|| Error::parse(config.line_of("montecarlo", "resolutions"), "no resolutions"))?;
    let mut factors = Vec::new();
    for r in &resolutions {
        if *r == 0 || finest % r != 0 {
            return Err(Error::parse(
                config.line_of("montecarlo", "resolutions"),
                format!("resolution {r} does not divide the finest resolution {finest}"),
            ));
        }
        factors.push(finest / r);
    }
    let kind: DriverKind = config.get_or("driver", "kind", DriverKind::ItoWiener)?;
    let mut runs = vec![("", kind)];
    if config.get_or("montecarlo", "control", false)? {
        runs.push(("control_", DriverKind::GeometricWiener));
    }
    let mut rows = Vec::new();
    let mut aggregates = Vec::new();
    for (prefix, kind) in runs {
        let factory = DriverFactory::new(coincidence_spec(config, finest, kind)?)?;
        let per_seed: Vec<_> = seeds
            .par_iter()
            .map(|&s| coincidence_check(&factory.sample(s)?, &factors, sine_integrand))
            .collect::<Result<_>>()?;
        for (seed, points) in seeds.iter().zip(&per_seed) {
            for p in points {
                rows.push(SeedRow { seed: *seed, quantity: format!("{prefix}gap"), param: format!("n={}", p.n_steps), value: p.gap });
            }
        }
        let summary = summarize_coincidence(&per_seed)?;
        for (r, n) in summary.n_steps.iter().enumerate() {
            aggregates.push(Aggregate {
                quantity: format!("{prefix}median_gap"),
                param: format!("n={n}"),
                value: summary.median_gap[r],
                reference: None,
                standard_error: None,
                slope: None,
            });
            aggregates.push(Aggregate {
                quantity: format!("{prefix}relative_gap"),
                param: format!("n={n}"),
                value: summary.relative_gap[r],
                reference: None,
                standard_error: None,
                slope: None,
            });
        }
        aggregates.push(Aggregate {
            quantity: format!("{prefix}integral_rms"),
            param: format!("n={finest}"),
            value: summary.integral_rms,
            reference: None,
            standard_error: None,
            slope: None,
        });
    }
    Ok((rows, aggregates))
}

fn covariance(config: &Config, seeds: &[u64]) -> Result<Rows> {
    let steps: usize = config.get_or("montecarlo", "cov_steps", 8)?;
    let grid = Grid::new(config.get_or("grid", "horizon", 1.0)?, steps)?;
    let hurst: f64 = config.get_or("driver", "hurst", 0.4)?;
    let spectrum = match config.get::<QSpectrum>("driver", "spectrum")? {
        Some(s) => s,
        None => QSpectrum::polynomial(2.0, 2)?,
    };
    let sampler = FbmSampler::new(grid, hurst)?;
    let d = spectrum.dim();
    // paths[seed][k] = component k on the grid
    let paths: Vec<Vec<Vec<f64>>> = seeds
        .par_iter()
        .map(|&s| {
            spectrum
                .eigenvalues()
                .iter()
                .enumerate()
                .map(|(k, lam)| {
                    let scale = lam.sqrt();
                    sampler.sample_scalar(&mut component_rng(s, k as u64)).into_iter().map(|v| scale * v).collect()
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    for (seed, path) in seeds.iter().zip(&paths) {
        for (k, comp) in path.iter().enumerate() {
            rows.push(SeedRow { seed: *seed, quantity: "terminal".into(), param: format!("k={k}"), value: comp[steps] });
        }
    }
    let mut aggregates = Vec::new();
    for k in 0..d {
        let lam = spectrum.eigenvalues()[k];
        for a in 1..=steps {
            for b in a..=steps {
                let products: Vec<f64> = paths.iter().map(|p| p[k][a] * p[k][b]).collect();
                let (m, se) = mean_and_se(&products);
                aggregates.push(Aggregate {
                    quantity: "covariance".into(),
                    param: format!("k={k};s={};t={}", num(grid.time(a)), num(grid.time(b))),
                    value: m,
                    reference: Some(lam * fbm_covariance(grid.time(a), grid.time(b), hurst)),
                    standard_error: Some(se),
                    slope: None,
                });
            }
        }
    }
    Ok((rows, aggregates))
}
