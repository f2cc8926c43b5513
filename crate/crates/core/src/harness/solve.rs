//! `solve`: runs a preset through the windowed mild solver and writes the
//! solution file, a per-window residual table and a summary row.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use super::{driver_from, driver_spec_from, grid_from, num, write_table, Config, RunOptions, Table, KNOWN_KEYS};
use crate::controlled::write_controlled;
use crate::drivers::DriverSample;
use crate::error::{Error, Result};
use crate::rough::RoughPath;
use crate::semigroup::SemigroupTable;
use crate::solver::{solve_global, Preset, PresetParams, PresetProblem, SolveConfig, SolveReport};

/// Everything a solve needs, assembled from a config.
#[derive(Clone, Debug)]
pub struct SolveSetup {
    pub preset: Preset,
    pub problem: PresetProblem,
    pub driver: DriverSample,
    pub rough: Arc<RoughPath>,
    pub table: SemigroupTable,
    pub config: SolveConfig,
}

impl SolveSetup {
    pub fn solve(&self) -> Result<SolveReport> {
        solve_global(&self.table, &self.problem.field, &self.rough, &self.problem.xi, &self.config)
    }

    /// `|Y_T - ξ e^{σ X_{0,T}}| / |ξ e^{σ X_{0,T}}|` for the linear scalar
    /// preset on a geometric driver.
    pub fn closed_form_error(&self, report: &SolveReport) -> Option<f64> {
        if self.preset != Preset::LinearScalarGeometric || !self.driver.kind.is_geometric() {
            return None;
        }
        let sigma = self.problem.field.eval_f(0.0, &[1.0]).ok()?[0];
        let n = self.rough.grid().n_steps();
        let exact = self.problem.xi[0] * (sigma * self.rough.increment(0, n)[0]).exp();
        Some(((report.terminal()[0] - exact) / exact).abs())
    }
}

pub fn build_solve(config: &Config, seed: u64) -> Result<SolveSetup> {
    config.check_keys(KNOWN_KEYS)?;
    let line = config.line_of("solve", "preset");
    let preset: Preset = config
        .get("solve", "preset")?
        .ok_or_else(|| Error::parse(line, "[solve] needs a preset"))?;
    let defaults = preset.default_params();
    let grid = grid_from(config)?;
    let spec = driver_spec_from(config, grid, config.get_or("solve", "noise_dim", defaults.noise_dim)?)?;
    let driver = driver_from(config, &spec, seed)?;
    let params = PresetParams {
        state_dim: config.get_or("solve", "state_dim", defaults.state_dim)?,
        noise_dim: driver.rough.dim(),
        diffusivity: config.get_or("solve", "diffusivity", defaults.diffusivity)?,
        noise_scale: config.get_or("solve", "noise_scale", defaults.noise_scale)?,
    };
    let problem = preset.build(&params).map_err(|e| Error::parse(line, e.to_string()))?;
    let rough = Arc::new(driver.rough.clone());
    let table = SemigroupTable::from_generator(&problem.generator, *rough.grid())?;
    let base = SolveConfig::default();
    let solve_config = SolveConfig {
        alpha: config.get_or("solve", "alpha", rough.alpha())?,
        picard_tol: config.get_or("solve", "picard_tol", base.picard_tol)?,
        max_picard_iters: config.get_or("solve", "max_picard_iters", base.max_picard_iters)?,
        initial_window: config.get_or("solve", "initial_window", base.initial_window)?,
        contraction_target: config.get_or("solve", "contraction_target", base.contraction_target)?,
        quadrature: config.get_or("solve", "quadrature", problem.quadrature)?,
        initial_iterate: config.get_or("solve", "initial_iterate", base.initial_iterate)?,
    };
    solve_config.validate().map_err(|e| Error::parse(line, e.to_string()))?;
    Ok(SolveSetup { preset, problem, driver, rough, table, config: solve_config })
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub setup: SolveSetup,
    pub report: SolveReport,
    pub closed_form_error: Option<f64>,
    pub wall_time: f64,
    pub files: Vec<PathBuf>,
}

pub fn run_solve(config: &Config, opts: &RunOptions) -> Result<SolveOutcome> {
    let seed = opts.base_seed(config)?;
    let setup = build_solve(config, seed)?;
    let started = Instant::now();
    let report = setup.solve()?;
    let wall_time = started.elapsed().as_secs_f64();
    let closed_form_error = setup.closed_form_error(&report);

    std::fs::create_dir_all(&opts.out_dir)?;
    let solution_path = opts.out_dir.join("solution.txt");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&solution_path)?);
    write_controlled(&mut w, &report.solution)?;
    drop(w);

    let mut windows = Table::new(&[
        "window",
        "start",
        "end",
        "accepted",
        "iterations",
        "final_residual",
        "fixed_point_residual",
        "ball_norm",
    ]);
    let mut all: Vec<(bool, &crate::solver::WindowRecord)> =
        report.windows.iter().map(|w| (true, w)).chain(report.rejected.iter().map(|w| (false, w))).collect();
    all.sort_by_key(|(acc, w)| (w.start, !*acc, usize::MAX - w.end));
    for (i, (accepted, w)) in all.iter().enumerate() {
        windows.push(vec![
            i.to_string(),
            w.start.to_string(),
            w.end.to_string(),
            accepted.to_string(),
            w.picard_residuals.len().to_string(),
            num(w.picard_residuals.last().copied().unwrap_or(f64::NAN)),
            num(w.fixed_point_residual),
            num(w.ball_norm),
        ]);
    }
    let windows_path = opts.out_dir.join("solve_windows.csv");
    write_table(&windows_path, &windows, config.hash(), opts.reproducible)?;

    let mut summary = Table::new(&[
        "preset",
        "seed",
        "n_steps",
        "mild_residual",
        "strong_residual",
        "apriori_sup",
        "windows",
        "rejected_windows",
        "max_fixed_point_residual",
        "closed_form_rel_error",
        "wall_time",
    ]);
    summary.push(vec![
        setup.preset.name().into(),
        seed.to_string(),
        setup.rough.grid().n_steps().to_string(),
        num(report.mild_residual),
        num(report.strong_residual),
        num(report.apriori_sup),
        report.windows.len().to_string(),
        report.rejected.len().to_string(),
        num(report.max_fixed_point_residual()),
        closed_form_error.map(num).unwrap_or_else(|| "NA".into()),
        if opts.reproducible { "NA".into() } else { num(wall_time) },
    ]);
    let summary_path = opts.out_dir.join("solve_summary.csv");
    write_table(&summary_path, &summary, config.hash(), opts.reproducible)?;

    Ok(SolveOutcome {
        setup,
        report,
        closed_form_error,
        wall_time,
        files: vec![solution_path, windows_path, summary_path],
    })
}
