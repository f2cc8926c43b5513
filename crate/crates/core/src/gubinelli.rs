//! The rough integral `∫ Y d𝐗` of an operator-valued controlled path as the
//! compensated Riemann sum `Σ (Y_s X_{s,t} + Y'_s : 𝕏_{s,t})` on the working
//! grid, plus diagnostics for the local (sewing) error.

use crate::controlled::{ControlledPath, Role};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rough::Path;

pub(crate) fn require_operator(cp: &ControlledPath) -> Result<usize> {
    match cp.role() {
        Role::Operator { out_dim } => Ok(out_dim),
        Role::State => Err(Error::Contract(
            "rough integration needs an operator-valued controlled path".into(),
        )),
    }
}

/// `out += Y X + Y' : 𝕏` for a value `y ∈ L(R^d, R^m)`, derivative
/// `yp ∈ L(R^d, L(R^d, R^m))`, increment `x` and second level `xx`.
#[inline]
pub(crate) fn add_expansion(out: &mut [f64], y: &[f64], yp: &[f64], x: &[f64], xx: &[f64]) {
    let d = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &y[i * d..(i + 1) * d];
        let mut acc = 0.0;
        for b in 0..d {
            acc += row[b] * x[b];
        }
        let block = &yp[i * d * d..(i + 1) * d * d];
        for b in 0..d {
            for a in 0..d {
                acc += block[b * d + a] * xx[a * d + b];
            }
        }
        *o += acc;
    }
}

/// Compensated term of grid step `k`.
pub(crate) fn step_term(cp: &ControlledPath, k: usize, out: &mut [f64], x: &mut [f64]) {
    let rough = cp.reference();
    rough.first_level().increment_into(k, k + 1, x);
    add_expansion(out, cp.y().at(k), cp.y_prime().at(k), x, rough.step_area(k));
}

/// `Y_{t_i} X_{t_i,t_j} + Y'_{t_i} : 𝕏_{t_i,t_j}`, the one-interval term.
pub fn local_expansion(cp: &ControlledPath, i: usize, j: usize) -> Result<Vec<f64>> {
    let m = require_operator(cp)?;
    let rough = cp.reference();
    let xx = rough.chen_reconstruct(i, j)?;
    let x = rough.increment(i, j);
    let mut out = vec![0.0; m];
    add_expansion(&mut out, cp.y().at(i), cp.y_prime().at(i), &x, &xx);
    Ok(out)
}

/// `∫_{t_i}^{t_j} Y d𝐗` as the finest-grid compensated sum.
pub fn rough_integral(cp: &ControlledPath, i: usize, j: usize) -> Result<Vec<f64>> {
    let m = require_operator(cp)?;
    cp.grid().check_index(i)?;
    cp.grid().check_index(j)?;
    if i > j {
        return Err(Error::Parameter(format!("rough_integral needs i <= j, got ({i}, {j})")));
    }
    let mut out = vec![0.0; m];
    let mut x = vec![0.0; cp.noise_dim()];
    for k in i..j {
        step_term(cp, k, &mut out, &mut x);
    }
    Ok(out)
}

/// `t_j -> ∫_0^{t_j} Y d𝐗` on every grid point.
pub fn rough_integral_path(cp: &ControlledPath) -> Result<Path> {
    let m = require_operator(cp)?;
    let n = cp.grid().n_steps();
    let mut values = vec![0.0; (n + 1) * m];
    let mut acc = vec![0.0; m];
    let mut x = vec![0.0; cp.noise_dim()];
    for k in 0..n {
        step_term(cp, k, &mut acc, &mut x);
        values[(k + 1) * m..(k + 2) * m].copy_from_slice(&acc);
    }
    Path::new(*cp.grid(), m, values)
}

/// `(Z, Z') = (∫_0^· Y d𝐗, Y)`.
pub fn integral_as_controlled(cp: &ControlledPath) -> Result<ControlledPath> {
    let m = require_operator(cp)?;
    let z = rough_integral_path(cp)?;
    let z_prime = Path::new(*cp.grid(), m * cp.noise_dim(), cp.y().values().to_vec())?;
    let out = ControlledPath::state(cp.reference().clone(), z, z_prime)?.with_alpha(cp.alpha())?;
    log::debug!(
        "integral_as_controlled: empirical local-error constant {:.3e}",
        empirical_sewing_constant(cp)?
    );
    Ok(out)
}

/// One dyadic level of [`sewing_rate_probe`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SewingPoint {
    pub level: usize,
    /// Length of the subintervals at this level.
    pub scale: f64,
    /// Mean over subintervals of `|∫_u^v Y d𝐗 - Y_u X_{u,v} - Y'_u 𝕏_{u,v}|`.
    pub defect: f64,
}

/// Local sewing error per dyadic level of `[t_i, t_j]`. Level `ℓ` splits the
/// interval into `2^ℓ` pieces; the integral on each piece is the fine-grid
/// compensated sum.
pub fn sewing_rate_probe(cp: &ControlledPath, i: usize, j: usize, levels: usize) -> Result<Vec<SewingPoint>> {
    let m = require_operator(cp)?;
    cp.grid().check_index(j)?;
    let span = j.saturating_sub(i);
    if span == 0 || !span.is_power_of_two() || span < (1usize << levels) {
        return Err(Error::Parameter(format!(
            "sewing probe needs j - i a power of two >= 2^{levels}, got {span}"
        )));
    }
    let h = cp.grid().step();
    let mut out = Vec::with_capacity(levels + 1);
    let mut x = vec![0.0; cp.noise_dim()];
    for level in 0..=levels {
        let pieces = 1usize << level;
        let sub = span / pieces;
        let mut total = 0.0;
        for p in 0..pieces {
            let u = i + p * sub;
            let v = u + sub;
            let mut integral = vec![0.0; m];
            for k in u..v {
                step_term(cp, k, &mut integral, &mut x);
            }
            let local = local_expansion(cp, u, v)?;
            total += linalg::diff_norm(&integral, &local);
        }
        out.push(SewingPoint {
            level,
            scale: sub as f64 * h,
            defect: total / pieces as f64,
        });
    }
    Ok(out)
}

/// Log-log slope over the `last` finest levels whose subintervals span at
/// least two grid steps (single-step defects vanish identically).
pub fn sewing_slope(points: &[SewingPoint], step: f64, last: usize) -> f64 {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.scale > 1.5 * step)
        .map(|p| (p.scale, p.defect))
        .collect();
    let from = usable.len().saturating_sub(last);
    crate::stats::loglog_slope(&usable[from..])
}

/// `max |∫_s^t Y d𝐗 - Y_s X_{s,t} - Y'_s 𝕏_{s,t}| / |t-s|^{3α}` over grid
/// pairs, the measured counterpart of the local error constant.
pub fn empirical_sewing_constant(cp: &ControlledPath) -> Result<f64> {
    let m = require_operator(cp)?;
    let n = cp.grid().n_steps();
    let h = cp.grid().step();
    let d = cp.noise_dim();
    let rough = cp.reference();
    let mut best = 0.0f64;
    let mut x = vec![0.0; d];
    for i in 0..n {
        let row = rough.chen_row(i, n);
        let mut integral = vec![0.0; m];
        for j in i + 1..=n {
            step_term(cp, j - 1, &mut integral, &mut x);
            let mut local = vec![0.0; m];
            rough.first_level().increment_into(i, j, &mut x);
            add_expansion(&mut local, cp.y().at(i), cp.y_prime().at(i), &x, &row[(j - i) * d * d..(j - i + 1) * d * d]);
            let dt = (j - i) as f64 * h;
            best = best.max(linalg::diff_norm(&integral, &local) / dt.powf(3.0 * cp.alpha()));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controlled::{compose_smooth, CoefficientField};
    use crate::rough::{enhance_piecewise_linear, Grid, RoughPath};
    use std::sync::Arc;

    fn smooth_ref(n: usize, d: usize) -> Arc<RoughPath> {
        let g = Grid::new(1.0, n).unwrap();
        let p = Path::from_fn(g, d, |t, o| {
            for (k, v) in o.iter_mut().enumerate() {
                *v = ((k + 1) as f64 * 2.0 * t).sin();
            }
        })
        .unwrap();
        Arc::new(enhance_piecewise_linear(&p, 0.4).unwrap())
    }

    fn constant_integrand(x: Arc<RoughPath>, c: &[f64], m: usize) -> ControlledPath {
        let g = *x.grid();
        let d = x.dim();
        ControlledPath::operator(x, m, Path::constant(g, c), Path::zeros(g, m * d * d)).unwrap()
    }

    #[test]
    fn constant_integrand_telescopes() {
        let x = smooth_ref(32, 2);
        let c = [1.0, -2.0, 0.5, 3.0];
        let cp = constant_integrand(x.clone(), &c, 2);
        let v = rough_integral(&cp, 3, 29).unwrap();
        let inc = x.increment(3, 29);
        let want = [c[0] * inc[0] + c[1] * inc[1], c[2] * inc[0] + c[3] * inc[1]];
        assert!(linalg::diff_norm(&v, &want) < 1e-14);
    }

    #[test]
    fn state_valued_integrand_is_rejected() {
        let cp = ControlledPath::driver(smooth_ref(4, 1));
        assert!(matches!(rough_integral(&cp, 0, 4), Err(Error::Contract(_))));
        assert!(integral_as_controlled(&cp).is_err());
    }

    #[test]
    fn integral_of_x_dx_scalar() {
        let x = smooth_ref(64, 1);
        let cp = ControlledPath::driver(x.clone()).as_operator(1).unwrap();
        let v = rough_integral(&cp, 0, 64).unwrap()[0];
        let xt = x.first_level().at(64)[0];
        assert!((v - 0.5 * xt * xt).abs() < 1e-14);
    }

    #[test]
    fn integral_controlled_derivative_is_integrand() {
        let x = smooth_ref(16, 2);
        let field = CoefficientField::new(2, 2).with_diffusion(|_, y, o| {
            o[0] = y[0].sin();
            o[1] = y[1].cos();
            o[2] = y[0] * y[1];
            o[3] = 1.0;
        });
        let cp = compose_smooth(&field, &ControlledPath::driver(x)).unwrap();
        let z = integral_as_controlled(&cp).unwrap();
        assert_eq!(z.y_prime().values(), cp.y().values());
        assert_eq!(z.y().at(0), &[0.0, 0.0]);
    }

    #[test]
    fn zero_integrand_gives_zero() {
        let x = smooth_ref(8, 2);
        let cp = constant_integrand(x, &[0.0; 4], 2);
        let z = integral_as_controlled(&cp).unwrap();
        assert!(z.y().values().iter().all(|v| *v == 0.0));
        assert!(z.y_prime().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn probe_validates_range() {
        let cp = constant_integrand(smooth_ref(16, 1), &[1.0], 1);
        assert!(sewing_rate_probe(&cp, 0, 12, 2).is_err());
        assert!(sewing_rate_probe(&cp, 0, 8, 4).is_err());
        let pts = sewing_rate_probe(&cp, 0, 16, 4).unwrap();
        assert_eq!(pts.len(), 5);
        assert!(pts.iter().all(|p| p.defect == 0.0));
    }
}
