use rayon::prelude::*;

use super::path::Path;
use crate::error::{Error, Result};
use crate::linalg;

/// Global and windowed Hölder quantities of a rough path.
#[derive(Clone, Debug, PartialEq)]
pub struct HoelderReport {
    pub alpha: f64,
    /// `‖X‖_α`
    pub x_norm: f64,
    /// `‖𝕏‖_{2α}`
    pub xx_norm: f64,
    /// `⟦X⟧_α = x_norm + xx_norm`
    pub combined: f64,
    pub window: Option<f64>,
    pub x_norm_windowed: Option<f64>,
    pub xx_norm_windowed: Option<f64>,
}

/// Exact supremum of `value(i, j) / (t_j - t_i)^exponent` over grid pairs
/// `i0 <= i < j <= i1`, optionally restricted to `t_j - t_i <= window`.
pub(crate) fn pair_sup<F>(
    i0: usize,
    i1: usize,
    step: f64,
    exponent: f64,
    window: Option<f64>,
    value: F,
) -> f64
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let max_lag = max_lag(i1 - i0, step, window);
    let denom: Vec<f64> = (0..=max_lag)
        .map(|lag| (lag as f64 * step).powf(exponent))
        .collect();
    (i0..i1)
        .into_par_iter()
        .map(|i| {
            let last = (i + max_lag).min(i1);
            let mut best = 0.0f64;
            for j in i + 1..=last {
                best = best.max(value(i, j) / denom[j - i]);
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

pub(crate) fn max_lag(span: usize, step: f64, window: Option<f64>) -> usize {
    match window {
        None => span,
        Some(w) => (((w / step) * (1.0 + 1e-12)).floor() as usize).min(span),
    }
}

/// `‖X‖_α` (or `‖X‖_{α;h}` when `window = Some(h)`) as an exact grid supremum.
pub fn holder_norm(path: &Path, alpha: f64, window: Option<f64>) -> Result<f64> {
    holder_norm_range(path, alpha, 0, path.grid().n_steps(), window)
}

/// Hölder norm restricted to the index window `[i0, i1]`.
pub fn holder_norm_range(
    path: &Path,
    alpha: f64,
    i0: usize,
    i1: usize,
    window: Option<f64>,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Parameter(format!(
            "Hölder exponent must lie in (0, 1], got {alpha}"
        )));
    }
    path.grid().check_index(i1)?;
    if i1 <= i0 {
        return Err(Error::DegenerateInput(
            "Hölder norm needs at least two grid points".into(),
        ));
    }
    let step = path.grid().step();
    Ok(pair_sup(i0, i1, step, alpha, window, |i, j| {
        linalg::diff_norm(path.at(i), path.at(j))
    }))
}
