//! Mild solutions of `dY = (AY + f0(t,Y)) dt + f(t,Y) d𝐗`: the fixed-point
//! map `Φ = Ξ + Γ + Ψ`, windowed Picard iteration and residual checks.

use std::str::FromStr;
use std::sync::Arc;

use crate::controlled::{compose_smooth, compose_smooth_from, CoefficientField, ControlledNorms, ControlledPath};
use crate::convolution::{regular_convolution_path, rough_convolution_controlled, Quadrature};
use crate::error::{Error, Result};
use crate::gubinelli::rough_integral_path;
use crate::linalg;
use crate::rough::{Path, RoughPath};
use crate::semigroup::{Generator, SemigroupTable};

/// Consecutive slow iterations after which a window is rejected.
const SLOW_STREAK: usize = 3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InitialIterate {
    /// `Y ≡ η`, `Y'_t = f(t, η)`.
    #[default]
    Constant,
    /// `Y_t = S_{t-t0} η`, `Y'_t = f(t, Y_t)`.
    Orbit,
}

impl FromStr for InitialIterate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(InitialIterate::Constant),
            "orbit" => Ok(InitialIterate::Orbit),
            other => Err(Error::Parameter(format!("unknown initial iterate {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveConfig {
    /// Working Hölder exponent for the controlled norms.
    pub alpha: f64,
    /// Picard stops once `‖ΔY, ΔY'‖_{X,2α}` on the window drops below this.
    pub picard_tol: f64,
    pub max_picard_iters: usize,
    /// First window length as a fraction of the horizon; also the cap when
    /// windows grow back after a success.
    pub initial_window: f64,
    /// A window is rejected after repeated residual ratios above this.
    pub contraction_target: f64,
    pub quadrature: Quadrature,
    pub initial_iterate: InitialIterate,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            alpha: 0.4,
            picard_tol: 1e-10,
            max_picard_iters: 50,
            initial_window: 1.0,
            contraction_target: 0.9,
            quadrature: Quadrature::LeftEndpoint,
            initial_iterate: InitialIterate::Constant,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if !(self.alpha > 1.0 / 3.0 && self.alpha <= 0.5) {
            return bad(format!("alpha must lie in (1/3, 1/2], got {}", self.alpha));
        }
        if !(self.picard_tol > 0.0 && self.picard_tol.is_finite()) {
            return bad(format!("picard_tol must be positive, got {}", self.picard_tol));
        }
        if self.max_picard_iters == 0 {
            return bad("max_picard_iters must be positive".into());
        }
        if !(self.initial_window > 0.0 && self.initial_window <= 1.0) {
            return bad(format!("initial_window must lie in (0, 1], got {}", self.initial_window));
        }
        if !(self.contraction_target > 0.0 && self.contraction_target < 1.0) {
            return bad(format!("contraction_target must lie in (0, 1), got {}", self.contraction_target));
        }
        Ok(())
    }
}

/// One window of the global scheme, accepted or rejected.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowRecord {
    pub start: usize,
    pub end: usize,
    /// `‖Y^{k+1} - Y^k‖_{X,2α}` per Picard iteration.
    pub picard_residuals: Vec<f64>,
    /// `‖Φ(Y) - Y‖_{X,2α}` at the accepted iterate (NaN when rejected).
    pub fixed_point_residual: f64,
    /// `‖Y, Y'‖_{X,2α}` of the accepted iterate, monitored against the unit ball.
    pub ball_norm: f64,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    /// Solution with `Y'_t = f(t, Y_t)`.
    pub solution: ControlledPath,
    pub windows: Vec<WindowRecord>,
    pub rejected: Vec<WindowRecord>,
    /// `sup_t |Y_t - Φ(Y)_t|` for `Φ` over the whole horizon.
    pub mild_residual: f64,
    pub strong_residual: f64,
    pub norms: ControlledNorms,
    pub apriori_sup: f64,
}

impl SolveReport {
    pub fn terminal(&self) -> &[f64] {
        self.solution.y().at(self.solution.grid().n_steps())
    }

    pub fn max_fixed_point_residual(&self) -> f64 {
        self.windows.iter().map(|w| w.fixed_point_residual).fold(0.0, f64::max)
    }
}

fn check_problem(table: &SemigroupTable, field: &CoefficientField, xi: &[f64], rough: &RoughPath) -> Result<()> {
    let m = field.state_dim();
    if table.size() != m {
        return Err(Error::dim("generator size", m, table.size()));
    }
    if xi.len() != m {
        return Err(Error::dim("initial value", m, xi.len()));
    }
    if xi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial value".into()));
    }
    if field.noise_dim() != rough.dim() {
        return Err(Error::dim("driver dimension", field.noise_dim(), rough.dim()));
    }
    Ok(())
}

/// `Φ(Y) = Ξ + Γ(Y) + Ψ(Y)` with derivative `f(Y)`, for a state path whose
/// grid starts at absolute time `t0`. `Ξ_t = S_{t-t0} Y_{t0}`.
pub fn phi_map(
    table: &SemigroupTable,
    field: &CoefficientField,
    cp: &ControlledPath,
    t0: f64,
    quad: Quadrature,
) -> Result<ControlledPath> {
    let grid = *cp.grid();
    let m = field.state_dim();
    let eta = cp.y().at(0);
    let mut drift = Vec::with_capacity(grid.n_points() * m);
    for i in 0..grid.n_points() {
        drift.extend(field.eval_f0(t0 + grid.time(i), cp.y().at(i))?);
    }
    let gamma = regular_convolution_path(table, &Path::new(grid, m, drift)?, quad)?;
    let psi = rough_convolution_controlled(table, &compose_smooth_from(field, cp, t0)?)?;
    let mut values = psi.y().values().to_vec();
    for i in 0..grid.n_points() {
        let xi_i = table.apply(i, eta);
        let row = &mut values[i * m..(i + 1) * m];
        for c in 0..m {
            row[c] += xi_i[c] + gamma.at(i)[c];
        }
    }
    let (_, y_prime) = psi.into_parts();
    ControlledPath::state(cp.reference().clone(), Path::new(grid, m, values)?, y_prime)?.with_alpha(cp.alpha())
}

fn with_field_derivative(
    field: &CoefficientField,
    reference: Arc<RoughPath>,
    y: Path,
    t0: f64,
    alpha: f64,
) -> Result<ControlledPath> {
    let grid = *y.grid();
    let md = field.state_dim() * field.noise_dim();
    let mut yp = Vec::with_capacity(grid.n_points() * md);
    for i in 0..grid.n_points() {
        yp.extend(field.eval_f(t0 + grid.time(i), y.at(i))?);
    }
    ControlledPath::state(reference, y, Path::new(grid, md, yp)?)?.with_alpha(alpha)
}

/// Starting point of the Picard iteration on a window beginning at `t0` with value `eta`.
pub fn initial_iterate(
    table: &SemigroupTable,
    field: &CoefficientField,
    reference: Arc<RoughPath>,
    eta: &[f64],
    t0: f64,
    kind: InitialIterate,
    alpha: f64,
) -> Result<ControlledPath> {
    let grid = *reference.grid();
    let y = match kind {
        InitialIterate::Constant => Path::constant(grid, eta),
        InitialIterate::Orbit => {
            let rows: Vec<Vec<f64>> = (0..grid.n_points()).map(|i| table.apply(i, eta)).collect();
            Path::new(grid, eta.len(), rows.concat())?
        }
    };
    with_field_derivative(field, reference, y, t0, alpha)
}

/// Result of Picard iteration on one window.
#[derive(Clone, Debug)]
pub enum WindowOutcome {
    Converged {
        path: ControlledPath,
        record: WindowRecord,
    },
    Rejected {
        record: WindowRecord,
        reason: String,
    },
}

/// Picard iteration on `[t_start, t_end]` started from `eta`.
pub fn solve_window(
    table: &SemigroupTable,
    field: &CoefficientField,
    rough: &RoughPath,
    eta: &[f64],
    start: usize,
    end: usize,
    config: &SolveConfig,
) -> Result<WindowOutcome> {
    config.validate()?;
    check_problem(table, field, eta, rough)?;
    let reference = Arc::new(rough.restrict(start, end)?);
    let t0 = rough.grid().time(start);
    let mut record = WindowRecord {
        start,
        end,
        picard_residuals: Vec::new(),
        fixed_point_residual: f64::NAN,
        ball_norm: f64::NAN,
    };
    let reject = |record: WindowRecord, reason: String| Ok(WindowOutcome::Rejected { record, reason });

    let mut current = initial_iterate(table, field, reference.clone(), eta, t0, config.initial_iterate, config.alpha)?;
    let mut slow = 0;
    for _ in 0..config.max_picard_iters {
        let next = match phi_map(table, field, &current, t0, config.quadrature) {
            Ok(next) => next,
            Err(e @ (Error::CoefficientEvaluation { .. } | Error::NonFinite(_))) => {
                return reject(record, e.to_string());
            }
            Err(e) => return Err(e),
        };
        let residual = next.combine(1.0, &current, -1.0)?.seminorm()?;
        if !residual.is_finite() {
            record.picard_residuals.push(residual);
            return reject(record, "non-finite Picard residual".into());
        }
        if let Some(prev) = record.picard_residuals.last() {
            if residual > config.contraction_target * prev {
                slow += 1;
            } else {
                slow = 0;
            }
        }
        record.picard_residuals.push(residual);
        current = next;
        if residual < config.picard_tol {
            let y = current.into_parts().0;
            let path = with_field_derivative(field, reference.clone(), y, t0, config.alpha)?;
            let image = phi_map(table, field, &path, t0, config.quadrature)?;
            record.fixed_point_residual = image.combine(1.0, &path, -1.0)?.seminorm()?;
            record.ball_norm = path.seminorm()?;
            if record.ball_norm > 1.0 {
                log::debug!(
                    "window [{start}, {end}]: accepted iterate lies outside the unit ball (‖Y,Y'‖ = {:.3e})",
                    record.ball_norm
                );
            }
            return Ok(WindowOutcome::Converged { path, record });
        }
        if slow >= SLOW_STREAK {
            return reject(record, format!("{SLOW_STREAK} consecutive residual ratios above {}", config.contraction_target));
        }
    }
    let reason = format!("no convergence within {} Picard iterations", config.max_picard_iters);
    reject(record, reason)
}

/// Greedy windowed solve over the whole grid: halve on rejection, double
/// (up to the initial length) after success, restart each window from the
/// previous terminal value.
pub fn solve_global(
    table: &SemigroupTable,
    field: &CoefficientField,
    rough: &Arc<RoughPath>,
    xi: &[f64],
    config: &SolveConfig,
) -> Result<SolveReport> {
    config.validate()?;
    check_problem(table, field, xi, rough)?;
    log::debug!("initial value: |ξ|_D(A²) = {:.3e}", table.graph_norm(xi, 2)?);
    let grid = *rough.grid();
    let n = grid.n_steps();
    let m = field.state_dim();
    let cap = ((config.initial_window * n as f64).round() as usize).clamp(1, n);
    let mut len = cap;
    let mut start = 0;
    let mut values = Vec::with_capacity(grid.n_points() * m);
    values.extend_from_slice(xi);
    let mut windows = Vec::new();
    let mut rejected = Vec::new();
    while start < n {
        let end = (start + len).min(n);
        let eta = values[start * m..(start + 1) * m].to_vec();
        match solve_window(table, field, rough, &eta, start, end, config)? {
            WindowOutcome::Converged { path, record } => {
                values.extend_from_slice(&path.y().values()[m..]);
                windows.push(record);
                start = end;
                len = (2 * len).min(cap);
            }
            WindowOutcome::Rejected { record, reason } => {
                log::debug!("window [{start}, {end}] rejected: {reason}");
                if end - start == 1 {
                    return Err(Error::SolverFailure {
                        message: format!("window [{start}, {end}] is one step and still fails: {reason}"),
                        history: record.picard_residuals,
                    });
                }
                len = (end - start) / 2;
                rejected.push(record);
            }
        }
    }
    let y = Path::new(grid, m, values)?;
    let solution = with_field_derivative(field, rough.clone(), y, 0.0, config.alpha)?;
    let mild = mild_residual(table, field, &solution, config.quadrature)?;
    let strong = strong_residual(table, field, &solution)?;
    let norms = solution.norms()?;
    let apriori_sup = solution.y().sup_norm();
    Ok(SolveReport {
        solution,
        windows,
        rejected,
        mild_residual: mild,
        strong_residual: strong,
        norms,
        apriori_sup,
    })
}

/// `sup_t |Y_t - Φ(Y)_t|` with `Φ` taken over the full grid from `Y_0`.
pub fn mild_residual(
    table: &SemigroupTable,
    field: &CoefficientField,
    solution: &ControlledPath,
    quad: Quadrature,
) -> Result<f64> {
    let image = phi_map(table, field, solution, 0.0, quad)?;
    Ok(sup_distance(solution.y(), image.y()))
}

/// `sup_j |Y_{t_j} - Y_0 - Σ_{k<j} (A Y_k + f0(t_k, Y_k)) h - ∫_0^{t_j} f(Y) d𝐗|`
/// with the flat (semigroup-free) rough integral.
pub fn strong_residual(table: &SemigroupTable, field: &CoefficientField, solution: &ControlledPath) -> Result<f64> {
    let grid = *solution.grid();
    let m = field.state_dim();
    let h = grid.step();
    let rough_part = rough_integral_path(&compose_smooth(field, solution)?)?;
    let y = solution.y();
    let mut acc = y.at(0).to_vec();
    let mut worst = 0.0f64;
    let mut row = vec![0.0; m];
    for j in 1..grid.n_points() {
        let k = j - 1;
        let ay = table.apply_generator(y.at(k));
        let f0 = field.eval_f0(grid.time(k), y.at(k))?;
        for c in 0..m {
            acc[c] += (ay[c] + f0[c]) * h;
            row[c] = acc[c] + rough_part.at(j)[c];
        }
        worst = worst.max(linalg::diff_norm(y.at(j), &row));
    }
    Ok(worst)
}

fn sup_distance(a: &Path, b: &Path) -> f64 {
    (0..a.len()).map(|i| linalg::diff_norm(a.at(i), b.at(i))).fold(0.0, f64::max)
}

/// `sup_t |Y_t|` is finite and, when a bound is given, below it.
pub fn apriori_check(report: &SolveReport, bound: Option<f64>) -> bool {
    report.apriori_sup.is_finite() && bound.is_none_or(|k| report.apriori_sup <= k)
}

/// Named problem setups exposed to the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// `m = d = 1`, `A = 0`, `f0 = 0`, `f(y) = y`, `ξ = 1`; solved by `ξ e^{X_{0,t}}`
    /// for geometric drivers.
    LinearScalarGeometric,
    /// Dirichlet heat equation on `m` interior points, `f0 = tanh`, additive
    /// noise on the low sine modes.
    HeatAdditive,
    /// As `HeatAdditive` with noise proportional to the state.
    HeatMultiplicative,
    /// `A = 0`, `f0(y) = -y`, `f(y)_{ik} = σ cos(y_i + k)` (diagonal in `i = k`).
    RodeFlat,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear_scalar_geometric" => Ok(Preset::LinearScalarGeometric),
            "heat_additive" => Ok(Preset::HeatAdditive),
            "heat_multiplicative" => Ok(Preset::HeatMultiplicative),
            "rode_flat" => Ok(Preset::RodeFlat),
            other => Err(Error::Parameter(format!("unknown preset {other:?}"))),
        }
    }
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::LinearScalarGeometric => "linear_scalar_geometric",
            Preset::HeatAdditive => "heat_additive",
            Preset::HeatMultiplicative => "heat_multiplicative",
            Preset::RodeFlat => "rode_flat",
        }
    }

    pub fn default_params(&self) -> PresetParams {
        match self {
            Preset::LinearScalarGeometric => PresetParams { state_dim: 1, noise_dim: 1, diffusivity: 0.0, noise_scale: 1.0 },
            Preset::HeatAdditive | Preset::HeatMultiplicative => {
                PresetParams { state_dim: 32, noise_dim: 4, diffusivity: 0.1, noise_scale: 0.5 }
            }
            Preset::RodeFlat => PresetParams { state_dim: 2, noise_dim: 2, diffusivity: 0.0, noise_scale: 0.5 },
        }
    }

    pub fn build(&self, params: &PresetParams) -> Result<PresetProblem> {
        let PresetParams { state_dim: m, noise_dim: d, diffusivity, noise_scale: sigma } = *params;
        if m == 0 || d == 0 {
            return Err(Error::Parameter("preset dimensions must be positive".into()));
        }
        let node = move |i: usize| (i + 1) as f64 / (m + 1) as f64;
        let mode = move |i: usize, k: usize| (((k + 1) as f64) * std::f64::consts::PI * node(i)).sin() / (k + 1) as f64;
        let problem = match self {
            Preset::LinearScalarGeometric => {
                if (m, d) != (1, 1) {
                    return Err(Error::Parameter("linear_scalar_geometric is scalar (m = d = 1)".into()));
                }
                let field = CoefficientField::new(1, 1)
                    .with_diffusion(move |_, y, o| o[0] = sigma * y[0])
                    .with_diffusion_derivative(move |_, _, o| o[0] = sigma);
                PresetProblem { generator: Generator::Zero { size: 1 }, field, xi: vec![1.0], quadrature: Quadrature::LeftEndpoint }
            }
            Preset::HeatAdditive | Preset::HeatMultiplicative => {
                let generator = Generator::Laplacian1d { size: m, spacing: 1.0 / (m + 1) as f64, diffusivity };
                let base = CoefficientField::new(m, d).with_drift(|_, y, o| {
                    for (o, y) in o.iter_mut().zip(y) {
                        *o = y.tanh();
                    }
                });
                let field = if *self == Preset::HeatAdditive {
                    base.with_diffusion(move |_, _, o| {
                        for i in 0..m {
                            for k in 0..d {
                                o[i * d + k] = sigma * mode(i, k);
                            }
                        }
                    })
                    .with_diffusion_derivative(|_, _, o| o.fill(0.0))
                } else {
                    base.with_diffusion(move |_, y, o| {
                        for i in 0..m {
                            for k in 0..d {
                                o[i * d + k] = sigma * mode(i, k) * y[i];
                            }
                        }
                    })
                    .with_diffusion_derivative(move |_, _, o| {
                        o.fill(0.0);
                        for i in 0..m {
                            for k in 0..d {
                                o[(i * d + k) * m + i] = sigma * mode(i, k);
                            }
                        }
                    })
                };
                let xi = (0..m).map(|i| (std::f64::consts::PI * node(i)).sin()).collect();
                PresetProblem { generator, field, xi, quadrature: Quadrature::Trapezoid }
            }
            Preset::RodeFlat => {
                let field = CoefficientField::new(m, d)
                    .with_drift(|_, y, o| {
                        for (o, y) in o.iter_mut().zip(y) {
                            *o = -y;
                        }
                    })
                    .with_diffusion(move |_, y, o| {
                        o.fill(0.0);
                        for i in 0..m.min(d) {
                            o[i * d + i] = sigma * (y[i] + i as f64).cos();
                        }
                    })
                    .with_diffusion_derivative(move |_, y, o| {
                        o.fill(0.0);
                        for i in 0..m.min(d) {
                            o[(i * d + i) * m + i] = -sigma * (y[i] + i as f64).sin();
                        }
                    });
                PresetProblem { generator: Generator::Zero { size: m }, field, xi: vec![0.5; m], quadrature: Quadrature::LeftEndpoint }
            }
        };
        Ok(problem)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PresetParams {
    pub state_dim: usize,
    pub noise_dim: usize,
    pub diffusivity: f64,
    pub noise_scale: f64,
}

#[derive(Clone, Debug)]
pub struct PresetProblem {
    pub generator: Generator,
    pub field: CoefficientField,
    pub xi: Vec<f64>,
    pub quadrature: Quadrature,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rough::{enhance_piecewise_linear, Grid};

    fn smooth_driver(n: usize, d: usize, scale: f64) -> Arc<RoughPath> {
        let g = Grid::new(1.0, n).unwrap();
        let p = Path::from_fn(g, d, |t, o| {
            for (k, v) in o.iter_mut().enumerate() {
                *v = scale * ((k + 1) as f64 * 5.0 * t).sin();
            }
        })
        .unwrap();
        Arc::new(enhance_piecewise_linear(&p, 0.4).unwrap())
    }

    #[test]
    fn no_coefficients_gives_orbit() {
        let x = smooth_driver(32, 1, 1.0);
        let table = SemigroupTable::from_generator(&Generator::Diagonal(vec![-1.0, -2.0]), *x.grid()).unwrap();
        let field = CoefficientField::new(2, 1);
        let report = solve_global(&table, &field, &x, &[1.0, 1.0], &SolveConfig::default()).unwrap();
        for j in 0..=32 {
            let t = j as f64 / 32.0;
            let y = report.solution.y().at(j);
            assert!((y[0] - (-t).exp()).abs() < 1e-13 && (y[1] - (-2.0 * t).exp()).abs() < 1e-13);
        }
        assert!(report.solution.y_prime().values().iter().all(|v| *v == 0.0));
        assert_eq!(report.windows.len(), 1);
    }

    #[test]
    fn constant_drift_without_generator() {
        let x = smooth_driver(16, 1, 1.0);
        let table = SemigroupTable::from_generator(&Generator::Zero { size: 1 }, *x.grid()).unwrap();
        let field = CoefficientField::new(1, 1).with_drift(|_, _, o| o[0] = 2.0);
        let report = solve_global(&table, &field, &x, &[0.5], &SolveConfig::default()).unwrap();
        for j in 0..=16 {
            assert!((report.solution.y().at(j)[0] - (0.5 + 2.0 * j as f64 / 16.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let x = smooth_driver(16, 2, 1.0);
        let p = Preset::RodeFlat.build(&Preset::RodeFlat.default_params()).unwrap();
        let field = CoefficientField::new(2, 2)
            .with_drift(|_, y, o| o.copy_from_slice(y))
            .with_diffusion(|_, y, o| {
                o.fill(0.0);
                o[0] = y[0].sin();
                o[3] = y[1];
            });
        let table = SemigroupTable::from_generator(&p.generator, *x.grid()).unwrap();
        let report = solve_global(&table, &field, &x, &[0.0, 0.0], &SolveConfig::default()).unwrap();
        assert_eq!(report.apriori_sup, 0.0);
        assert!(apriori_check(&report, Some(0.0)));
    }

    #[test]
    fn derivative_equals_coefficient_at_solution() {
        let x = smooth_driver(32, 2, 0.5);
        let p = Preset::RodeFlat.build(&Preset::RodeFlat.default_params()).unwrap();
        let table = SemigroupTable::from_generator(&p.generator, *x.grid()).unwrap();
        let report = solve_global(&table, &p.field, &x, &p.xi, &SolveConfig::default()).unwrap();
        for j in 0..=32 {
            let f = p.field.eval_f(j as f64 / 32.0, report.solution.y().at(j)).unwrap();
            assert_eq!(report.solution.y_prime().at(j), &f[..]);
        }
        assert!(report.mild_residual < 1e-9);
        assert!(report.max_fixed_point_residual() < 1e-9);
    }

    #[test]
    fn config_validation() {
        let mut c = SolveConfig::default();
        assert!(c.validate().is_ok());
        c.alpha = 0.3;
        assert!(c.validate().is_err());
        c = SolveConfig { picard_tol: 0.0, ..SolveConfig::default() };
        assert!(c.validate().is_err());
        c = SolveConfig { initial_window: 0.0, ..SolveConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn presets_parse_and_build() {
        for name in ["linear_scalar_geometric", "heat_additive", "heat_multiplicative", "rode_flat"] {
            let p: Preset = name.parse().unwrap();
            assert_eq!(p.name(), name);
            let prob = p.build(&p.default_params()).unwrap();
            assert_eq!(prob.xi.len(), prob.field.state_dim());
            assert_eq!(prob.generator.size(), prob.field.state_dim());
        }
        assert!("heat".parse::<Preset>().is_err());
    }

    #[test]
    fn multiplicative_heat_derivative_matches_finite_differences() {
        let p = Preset::HeatMultiplicative.build(&PresetParams { state_dim: 5, noise_dim: 3, diffusivity: 0.1, noise_scale: 0.7 }).unwrap();
        let y = [0.3, -0.2, 1.1, 0.5, -0.9];
        let exact = p.field.eval_df(0.0, &y).unwrap();
        let fd = p.field.finite_difference_df(0.0, &y).unwrap();
        assert!(linalg::diff_norm(&exact, &fd) < 1e-8);
    }
}
