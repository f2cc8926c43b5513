use rayon::prelude::*;

use super::holder::{holder_norm_range, max_lag, HoelderReport};
use super::path::{Grid, Path};
use super::table::PairTable;
use crate::error::{Error, Result};
use crate::linalg;

/// A grid-sampled rough path: the first level `X` plus one second-level tensor
/// `𝕏_{t_i, t_{i+1}}` per step, stored row-major (`[a * d + b]`).
///
/// The second level over an arbitrary grid pair is obtained by Chen
/// composition, so every `RoughPath` satisfies Chen's relation by
/// construction (up to rounding).
#[derive(Clone, Debug, PartialEq)]
pub struct RoughPath {
    first_level: Path,
    step_areas: Vec<f64>,
    alpha: f64,
}

/// Outcome of comparing `⟦X⟧_α` with `‖X‖_β T^{β-α} + ‖𝕏‖_{2β} T^{2(β-α)}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

pub(crate) fn check_rough_exponent(alpha: f64) -> Result<()> {
    if alpha > 1.0 / 3.0 && alpha <= 0.5 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "rough path exponent must lie in (1/3, 1/2], got {alpha}"
        )))
    }
}

impl RoughPath {
    pub fn new(first_level: Path, step_areas: Vec<f64>, alpha: f64) -> Result<Self> {
        check_rough_exponent(alpha)?;
        let d = first_level.dim();
        let expected = first_level.grid().n_steps() * d * d;
        if step_areas.len() != expected {
            return Err(Error::dim("step areas", expected, step_areas.len()));
        }
        if let Some(pos) = step_areas.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "second level entry at step {}",
                pos / (d * d)
            )));
        }
        Ok(Self {
            first_level,
            step_areas,
            alpha,
        })
    }

    /// The zero rough path over `R^dim`.
    pub fn zero(grid: Grid, dim: usize, alpha: f64) -> Result<Self> {
        RoughPath::new(
            Path::zeros(grid, dim),
            vec![0.0; grid.n_steps() * dim * dim],
            alpha,
        )
    }

    pub fn first_level(&self) -> &Path {
        &self.first_level
    }

    pub fn grid(&self) -> &Grid {
        self.first_level.grid()
    }

    pub fn dim(&self) -> usize {
        self.first_level.dim()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn step_areas(&self) -> &[f64] {
        &self.step_areas
    }

    pub fn step_area(&self, k: usize) -> &[f64] {
        let dd = self.dim() * self.dim();
        &self.step_areas[k * dd..(k + 1) * dd]
    }

    pub fn increment(&self, i: usize, j: usize) -> Vec<f64> {
        self.first_level.increment(i, j)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        check_rough_exponent(alpha)?;
        Ok(Self {
            alpha,
            ..self.clone()
        })
    }

    /// The rough path on `[t_i0, t_i1]`, re-based to start at time zero.
    pub fn restrict(&self, i0: usize, i1: usize) -> Result<RoughPath> {
        let d = self.dim();
        Ok(RoughPath {
            first_level: self.first_level.slice(i0, i1)?,
            step_areas: self.step_areas[i0 * d * d..i1 * d * d].to_vec(),
            alpha: self.alpha,
        })
    }

    /// `𝕏_{t_i, t_j}` by left-folding step areas:
    /// `acc <- acc + 𝕏_{t_k,t_{k+1}} + X_{t_i,t_k} ⊗ X_{t_k,t_{k+1}}`.
    pub fn chen_reconstruct(&self, i: usize, j: usize) -> Result<Vec<f64>> {
        self.grid().check_index(i)?;
        self.grid().check_index(j)?;
        if i > j {
            return Err(Error::Parameter(format!(
                "chen_reconstruct needs i <= j, got ({i}, {j})"
            )));
        }
        let d = self.dim();
        let mut acc = vec![0.0; d * d];
        let mut from_start = vec![0.0; d];
        let mut step = vec![0.0; d];
        for k in i..j {
            self.fold_step(i, k, &mut acc, &mut from_start, &mut step);
        }
        Ok(acc)
    }

    #[inline]
    fn fold_step(&self, i: usize, k: usize, acc: &mut [f64], from_start: &mut [f64], step: &mut [f64]) {
        let x = &self.first_level;
        x.increment_into(i, k, from_start);
        x.increment_into(k, k + 1, step);
        for (a, s) in acc.iter_mut().zip(self.step_area(k)) {
            *a += s;
        }
        linalg::add_outer(acc, from_start, step, 1.0);
    }

    /// `𝕏_{t_i, t_j}` for `j = i..=last`, concatenated.
    pub(crate) fn chen_row(&self, i: usize, last: usize) -> Vec<f64> {
        let d = self.dim();
        let dd = d * d;
        let mut out = vec![0.0; (last - i + 1) * dd];
        let mut acc = vec![0.0; dd];
        let mut from_start = vec![0.0; d];
        let mut step = vec![0.0; d];
        for k in i..last {
            self.fold_step(i, k, &mut acc, &mut from_start, &mut step);
            out[(k + 1 - i) * dd..(k + 2 - i) * dd].copy_from_slice(&acc);
        }
        out
    }

    /// `‖𝕏‖_{2α}` as an exact grid supremum (Frobenius norm on tensors).
    pub fn second_level_norm(&self, alpha: f64) -> Result<f64> {
        self.second_level_norm_range(alpha, 0, self.grid().n_steps(), None)
    }

    pub fn second_level_norm_range(
        &self,
        alpha: f64,
        i0: usize,
        i1: usize,
        window: Option<f64>,
    ) -> Result<f64> {
        if !(alpha > 0.0 && alpha <= 0.5) {
            return Err(Error::Parameter(format!(
                "second level exponent must lie in (0, 1/2], got {alpha}"
            )));
        }
        self.grid().check_index(i1)?;
        if i1 <= i0 {
            return Err(Error::DegenerateInput(
                "second level norm needs at least two grid points".into(),
            ));
        }
        let step = self.grid().step();
        let lag = max_lag(i1 - i0, step, window);
        let denom: Vec<f64> = (0..=lag)
            .map(|l| (l as f64 * step).powf(2.0 * alpha))
            .collect();
        let dd = self.dim() * self.dim();
        Ok((i0..i1)
            .into_par_iter()
            .map(|i| {
                let last = (i + lag).min(i1);
                let row = self.chen_row(i, last);
                (1..=last - i)
                    .map(|l| linalg::norm(&row[l * dd..(l + 1) * dd]) / denom[l])
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max))
    }

    pub fn hoelder_report(&self, alpha: f64, window: Option<f64>) -> Result<HoelderReport> {
        let n = self.grid().n_steps();
        let x_norm = holder_norm_range(&self.first_level, alpha, 0, n, None)?;
        let xx_norm = self.second_level_norm(alpha)?;
        let (xw, xxw) = match window {
            Some(_) => (
                Some(holder_norm_range(&self.first_level, alpha, 0, n, window)?),
                Some(self.second_level_norm_range(alpha, 0, n, window)?),
            ),
            None => (None, None),
        };
        Ok(HoelderReport {
            alpha,
            x_norm,
            xx_norm,
            combined: x_norm + xx_norm,
            window,
            x_norm_windowed: xw,
            xx_norm_windowed: xxw,
        })
    }

    /// `⟦X⟧_α` on the index window `[i0, i1]`.
    pub fn homogeneous_norm_range(&self, alpha: f64, i0: usize, i1: usize) -> Result<f64> {
        Ok(holder_norm_range(&self.first_level, alpha, i0, i1, None)?
            + self.second_level_norm_range(alpha, i0, i1, None)?)
    }

    /// Signed defect `Sym(𝕏_{s,t}) - ½ X_{s,t} ⊗ X_{s,t}`.
    pub fn geometric_defect_tensor(&self, i: usize, j: usize) -> Result<Vec<f64>> {
        let xx = self.chen_reconstruct(i, j)?;
        let x = self.increment(i, j);
        let d = self.dim();
        let mut out = vec![0.0; d * d];
        for a in 0..d {
            for b in 0..d {
                out[a * d + b] = 0.5 * (xx[a * d + b] + xx[b * d + a]) - 0.5 * x[a] * x[b];
            }
        }
        Ok(out)
    }

    /// Frobenius norm of [`Self::geometric_defect_tensor`].
    pub fn geometric_defect(&self, i: usize, j: usize) -> Result<f64> {
        Ok(linalg::norm(&self.geometric_defect_tensor(i, j)?))
    }

    /// Largest geometric defect over all grid pairs.
    pub fn max_geometric_defect(&self) -> f64 {
        let n = self.grid().n_steps();
        let d = self.dim();
        let dd = d * d;
        (0..n)
            .into_par_iter()
            .map(|i| {
                let row = self.chen_row(i, n);
                let mut best = 0.0f64;
                let mut x = vec![0.0; d];
                for l in 1..=n - i {
                    self.first_level.increment_into(i, i + l, &mut x);
                    let xx = &row[l * dd..(l + 1) * dd];
                    let mut s = 0.0;
                    for a in 0..d {
                        for b in 0..d {
                            let v = 0.5 * (xx[a * d + b] + xx[b * d + a]) - 0.5 * x[a] * x[b];
                            s += v * v;
                        }
                    }
                    best = best.max(s.sqrt());
                }
                best
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Checks `⟦X⟧_α <= ‖X‖_β T^{β-α} + ‖𝕏‖_{2β} T^{2(β-α)}` on grid norms.
    pub fn scaling_bound_check(&self, alpha: f64, beta: f64) -> Result<ScalingCheck> {
        if !(alpha > 1.0 / 3.0 && alpha < beta && beta <= 0.5) {
            return Err(Error::Parameter(format!(
                "scaling check needs 1/3 < alpha < beta <= 1/2, got ({alpha}, {beta})"
            )));
        }
        let t = self.grid().horizon();
        let n = self.grid().n_steps();
        let x = &self.first_level;
        let lhs = holder_norm_range(x, alpha, 0, n, None)? + self.second_level_norm(alpha)?;
        let rhs = holder_norm_range(x, beta, 0, n, None)? * t.powf(beta - alpha)
            + self.second_level_norm(beta)? * t.powf(2.0 * (beta - alpha));
        let slack = rhs - lhs;
        Ok(ScalingCheck {
            lhs,
            rhs,
            slack,
            holds: slack >= -1e-12,
        })
    }

    /// Second level over every grid pair.
    pub fn full_table(&self) -> PairTable {
        let n = self.grid().n_steps();
        let d = self.dim();
        let rows: Vec<Vec<f64>> = (0..=n).into_par_iter().map(|i| self.chen_row(i, n)).collect();
        PairTable::from_rows(n + 1, d, rows)
    }

    /// The same rough path restricted to every `factor`-th grid point; step
    /// areas are Chen compositions of the fine ones.
    pub fn coarsen(&self, factor: usize) -> Result<RoughPath> {
        let first = self.first_level.subsample(factor)?;
        let n = first.grid().n_steps();
        let mut areas = Vec::with_capacity(n * self.dim() * self.dim());
        for c in 0..n {
            areas.extend(self.chen_reconstruct(c * factor, (c + 1) * factor)?);
        }
        RoughPath::new(first, areas, self.alpha)
    }

    /// Dilation `(X, 𝕏) -> (cX, c²𝕏)`.
    pub fn dilate(&self, c: f64) -> RoughPath {
        RoughPath {
            first_level: self.first_level.scaled(c),
            step_areas: self.step_areas.iter().map(|v| c * c * v).collect(),
            alpha: self.alpha,
        }
    }
}

/// Canonical lift of the piecewise-linear interpolation of `path`: each step
/// carries `½ X_{t_i,t_{i+1}} ⊗ X_{t_i,t_{i+1}}`, the exact iterated integral
/// of a linear segment. The result is weakly geometric.
pub fn enhance_piecewise_linear(path: &Path, alpha: f64) -> Result<RoughPath> {
    let d = path.dim();
    let n = path.grid().n_steps();
    let mut areas = vec![0.0; n * d * d];
    let mut inc = vec![0.0; d];
    for k in 0..n {
        path.increment_into(k, k + 1, &mut inc);
        linalg::add_outer(&mut areas[k * d * d..(k + 1) * d * d], &inc, &inc, 0.5);
    }
    RoughPath::new(path.clone(), areas, alpha)
}
