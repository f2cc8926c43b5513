//! Structural check suites: Chen, weak geometricity, the scaling lemma,
//! controlled-path norm inequalities, semigroup estimates and sewing rates.

use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{driver_spec_from, generator_from, grid_from, load_driver, write_table, CheckRow, Config, RunOptions, Table, KNOWN_KEYS};
use crate::controlled::ControlledPath;
use crate::drivers::{component_rng, sine_integrand, DriverFactory, DriverSample};
use crate::error::{Error, Result};
use crate::gubinelli::{sewing_rate_probe, sewing_slope};
use crate::rough::Grid;
use crate::semigroup::SemigroupTable;

pub const SUITES: [&str; 6] = ["chen", "geometric", "scaling", "norms", "semigroup", "sewing"];

const CHEN_TOL: f64 = 1e-10;
const GEOMETRIC_TOL: f64 = 1e-10;
const SEMIGROUP_LAW_TOL: f64 = 1e-10;
const ESTIMATE_REL_TOL: f64 = 1e-8;
/// Stream offset separating auxiliary randomness from driver components.
const AUX_STREAM: u64 = 1 << 32;

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub suite: String,
    pub rows: Vec<CheckRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOutcome {
    pub suites: Vec<SuiteReport>,
    pub files: Vec<PathBuf>,
}

impl VerifyOutcome {
    pub fn all_pass(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.suites.iter().flat_map(|s| s.rows.iter()).filter(|r| !r.pass)
    }
}

/// Runs the configured suites and writes `verify_<suite>.csv` per suite.
pub fn run_verify(config: &Config, opts: &RunOptions) -> Result<VerifyOutcome> {
    let suites = verify_suites(config, opts.base_seed(config)?)?;
    let mut files = Vec::new();
    for s in &suites {
        let path = opts.out_dir.join(format!("verify_{}.csv", s.suite));
        write_table(&path, &Table::from_checks(&s.rows), config.hash(), opts.reproducible)?;
        files.push(path);
    }
    Ok(VerifyOutcome { suites, files })
}

/// The suites without file output.
pub fn verify_suites(config: &Config, seed: u64) -> Result<Vec<SuiteReport>> {
    config.check_keys(KNOWN_KEYS)?;
    let names = config.get_list("verify", "suites").unwrap_or_else(|| SUITES.iter().map(|s| s.to_string()).collect());
    for n in &names {
        if !SUITES.contains(&n.as_str()) {
            return Err(Error::parse(config.line_of("verify", "suites"), format!("unknown suite {n:?}")));
        }
    }
    if names.is_empty() {
        return Ok(Vec::new());
    }
    let instances: u64 = config.get_or("verify", "instances", 4)?;
    let grid = grid_from(config)?;
    let spec = driver_spec_from(config, grid, 2)?;
    let needs_drivers = names.iter().any(|n| n != "semigroup");
    let samples: Vec<DriverSample> = if needs_drivers {
        let factory = DriverFactory::new(spec)?;
        (0..instances).map(|i| factory.sample(seed + i)).collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    names
        .iter()
        .map(|name| {
            let rows = match name.as_str() {
                "chen" => chen_suite(config, &samples)?,
                "geometric" => geometric_suite(&samples)?,
                "scaling" => scaling_suite(config, &samples)?,
                "norms" => norms_suite(&samples, seed)?,
                "semigroup" => semigroup_suite(config, instances, seed)?,
                "sewing" => sewing_suite(&samples)?,
                _ => unreachable!("suite names validated above"),
            };
            Ok(SuiteReport { suite: name.clone(), rows })
        })
        .collect()
}

fn instance_id(s: &DriverSample) -> String {
    format!("{}:seed={}", s.kind, s.seed)
}

fn chen_suite(config: &Config, samples: &[DriverSample]) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    for s in samples {
        let (defect, _) = s.rough.full_table().max_chen_defect(s.rough.first_level())?;
        rows.push(CheckRow::at_most("chen_defect", instance_id(s), defect, CHEN_TOL));
    }
    if let Some(path) = config.get_str("verify", "driver_file") {
        let path = config.resolve_path(path);
        let file = crate::rough::read_rough_path(std::io::BufReader::new(std::fs::File::open(&path)?))?;
        let table = file.table.unwrap_or_else(|| file.rough.full_table());
        let (defect, (s, u, t)) = table.max_chen_defect(file.rough.first_level())?;
        log::debug!("driver file {}: worst Chen triple ({s}, {u}, {t})", path.display());
        rows.push(CheckRow::at_most("chen_defect", format!("file:{}", path.display()), defect, CHEN_TOL));
        // the file must also load as a driver sample
        load_driver(&path)?;
    }
    Ok(rows)
}

fn geometric_suite(samples: &[DriverSample]) -> Result<Vec<CheckRow>> {
    Ok(samples
        .iter()
        .filter(|s| s.kind.is_geometric())
        .map(|s| CheckRow::at_most("geometric_defect", instance_id(s), s.rough.max_geometric_defect(), GEOMETRIC_TOL))
        .collect())
}

fn scaling_suite(config: &Config, samples: &[DriverSample]) -> Result<Vec<CheckRow>> {
    let alpha = config.get_or("verify", "scaling_alpha", 0.35)?;
    let beta = config.get_or("verify", "scaling_beta", 0.45)?;
    samples
        .iter()
        .map(|s| {
            let c = s.rough.scaling_bound_check(alpha, beta)?;
            Ok(CheckRow { pass: c.holds, ..CheckRow::at_most("scaling_bound", instance_id(s), c.lhs, c.rhs) })
        })
        .collect()
}

/// `Y = g(X)` with `g_i(x) = sin(a_i · x + b_i)`, `Y' = Dg(X)`, random `a`, `b`.
pub(crate) fn random_controlled(sample: &DriverSample, m: usize, seed: u64) -> Result<ControlledPath> {
    let rough = Arc::new(sample.rough.clone());
    let d = rough.dim();
    let mut rng = component_rng(seed, AUX_STREAM);
    let a: Vec<f64> = (0..m * d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let b: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    let x = rough.first_level();
    let phase = |i: usize, v: &[f64]| b[i] + (0..d).map(|k| a[i * d + k] * v[k]).sum::<f64>();
    let y = x.map(m, |_, v, o| {
        for (i, o) in o.iter_mut().enumerate() {
            *o = phase(i, v).sin();
        }
    })?;
    let yp = x.map(m * d, |_, v, o| {
        for i in 0..m {
            let c = phase(i, v).cos();
            for k in 0..d {
                o[i * d + k] = c * a[i * d + k];
            }
        }
    })?;
    ControlledPath::state(rough, y, yp)
}

fn norms_suite(samples: &[DriverSample], seed: u64) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let cp = random_controlled(s, 3, seed + i as u64)?;
        let n = cp.norms()?;
        let hx = s.rough.homogeneous_norm_range(s.rough.alpha(), 0, s.rough.grid().n_steps())?;
        let id = instance_id(s);
        rows.push(CheckRow::at_most("y_prime_sup", &id, n.sup_y_prime, n.pointed));
        rows.push(CheckRow::at_most("y_alpha", &id, n.y_alpha, n.pointed * (hx + 1.0)));
        rows.push(CheckRow::at_most("y_sup", &id, n.sup_y, n.full * (hx + 2.0)));
        rows.push(CheckRow::at_most("seminorm_le_pointed", &id, n.seminorm, n.pointed));
        rows.push(CheckRow::at_most("pointed_le_full", &id, n.pointed, n.full));
    }
    Ok(rows)
}

fn semigroup_suite(config: &Config, instances: u64, seed: u64) -> Result<Vec<CheckRow>> {
    let generator = generator_from(config)?;
    let grid = Grid::new(config.get_or("semigroup", "horizon", 1.0)?, config.get_or("semigroup", "steps", 32)?)?;
    let table = SemigroupTable::from_generator(&generator, grid)?;
    let m = table.size();
    let n = grid.n_steps();
    let mut rows = Vec::new();
    for i in 0..instances {
        let mut rng = component_rng(seed + i, AUX_STREAM + 1);
        let y: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let id = format!("y{i}");
        let orbit = table.orbit_lipschitz_check(&y)?;
        rows.push(CheckRow::at_most("orbit_lipschitz", &id, orbit.max_ratio, orbit.bound * (1.0 + ESTIMATE_REL_TOL)));
        let quad = table.quad_estimate_check(&y)?;
        rows.push(CheckRow::at_most("quad_estimate", &id, quad.max_ratio, quad.bound * (1.0 + ESTIMATE_REL_TOL)));
        let j = rng.random_range(0..=n);
        let k = rng.random_range(0..=n - j);
        let product = table.step_exponential(j) * table.step_exponential(k);
        let target = table.step_exponential(j + k);
        let rel = (target - product).amax() / target.amax().max(f64::MIN_POSITIVE);
        rows.push(CheckRow::at_most("semigroup_law", format!("j={j},k={k}"), rel, SEMIGROUP_LAW_TOL));
    }
    Ok(rows)
}

/// Slope of the dyadic sewing defects of `sin(X)` against `3α - 0.1`.
pub(crate) fn sewing_rate(sample: &DriverSample) -> Result<f64> {
    let rough = Arc::new(sample.rough.clone());
    let n = rough.grid().n_steps();
    if !n.is_power_of_two() || n < 32 {
        return Err(Error::Parameter(format!("sewing suite needs a power-of-two grid of at least 32 steps, got {n}")));
    }
    let cp = sine_integrand(rough.clone())?;
    let points = sewing_rate_probe(&cp, 0, n, n.trailing_zeros() as usize)?;
    Ok(sewing_slope(&points, rough.grid().step(), 4))
}

fn sewing_suite(samples: &[DriverSample]) -> Result<Vec<CheckRow>> {
    samples
        .iter()
        .map(|s| {
            let slope = sewing_rate(s)?;
            Ok(CheckRow::at_least("sewing_slope", instance_id(s), slope, 3.0 * s.rough.alpha() - 0.1))
        })
        .collect()
}

