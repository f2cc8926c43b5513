//! Regular and rough convolutions against a cached semigroup:
//! `∫_0^t S_{t-s} g_s ds` and `∫_0^t S_{t-s} Y_s d𝐗_s`.

use std::str::FromStr;

use rayon::prelude::*;

use crate::controlled::{ControlledPath, ControlledNorms};
use crate::error::{Error, Result};
use crate::gubinelli::{add_expansion, require_operator};
use crate::linalg;
use crate::rough::{Grid, Path};
use crate::semigroup::SemigroupTable;

/// Weights of the regular convolution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Quadrature {
    /// `Σ_{k<j} S_{t_j - t_k} g_{t_k} h`.
    #[default]
    LeftEndpoint,
    /// `Σ_{k<j} ½ h (S_{t_j - t_k} g_{t_k} + S_{t_j - t_{k+1}} g_{t_{k+1}})`.
    Trapezoid,
}

impl FromStr for Quadrature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" | "left_endpoint" => Ok(Quadrature::LeftEndpoint),
            "trapezoid" => Ok(Quadrature::Trapezoid),
            other => Err(Error::Parameter(format!("unknown quadrature {other:?}"))),
        }
    }
}

fn check_compatible(table: &SemigroupTable, grid: &Grid, dim: usize) -> Result<()> {
    if dim != table.size() {
        return Err(Error::dim("convolution codomain", table.size(), dim));
    }
    let (h, th) = (grid.step(), table.grid().step());
    if (h - th).abs() > 1e-12 * th || grid.n_steps() > table.grid().n_steps() {
        return Err(Error::Parameter(format!(
            "path grid (h={h}, N={}) does not fit the semigroup table (h={th}, N={})",
            grid.n_steps(),
            table.grid().n_steps()
        )));
    }
    Ok(())
}

fn regular_at(table: &SemigroupTable, g: &Path, j: usize, quad: Quadrature) -> Vec<f64> {
    let h = table.grid().step();
    let mut out = vec![0.0; g.dim()];
    match quad {
        Quadrature::LeftEndpoint => {
            for k in 0..j {
                table.add_apply(j - k, g.at(k), &mut out);
            }
            out.iter_mut().for_each(|v| *v *= h);
        }
        Quadrature::Trapezoid => {
            if j > 0 {
                table.add_apply(j, g.at(0), &mut out);
                for k in 1..j {
                    let mut twice = vec![0.0; g.dim()];
                    table.add_apply(j - k, g.at(k), &mut twice);
                    for (o, t) in out.iter_mut().zip(&twice) {
                        *o += 2.0 * t;
                    }
                }
                table.add_apply(0, g.at(j), &mut out);
            }
            out.iter_mut().for_each(|v| *v *= 0.5 * h);
        }
    }
    out
}

/// `N_{t_j} = ∫_0^{t_j} S_{t_j-s} g_s ds` by quadrature.
pub fn regular_convolution(table: &SemigroupTable, g: &Path, j: usize, quad: Quadrature) -> Result<Vec<f64>> {
    check_compatible(table, g.grid(), g.dim())?;
    g.grid().check_index(j)?;
    Ok(regular_at(table, g, j, quad))
}

/// [`regular_convolution`] at every grid point.
pub fn regular_convolution_path(table: &SemigroupTable, g: &Path, quad: Quadrature) -> Result<Path> {
    check_compatible(table, g.grid(), g.dim())?;
    let rows: Vec<Vec<f64>> = (0..g.len()).into_par_iter().map(|j| regular_at(table, g, j, quad)).collect();
    Path::new(*g.grid(), g.dim(), rows.concat())
}

/// Compensated step vectors `g_k = Y_k X_{k,k+1} + Y'_k : 𝕏_{k,k+1}`, one
/// row of length `m` per grid step.
fn step_vectors(cp: &ControlledPath) -> Result<Vec<f64>> {
    let m = require_operator(cp)?;
    let rough = cp.reference();
    let n = cp.grid().n_steps();
    let mut g = vec![0.0; n * m];
    let mut x = vec![0.0; cp.noise_dim()];
    for (k, row) in g.chunks_mut(m).enumerate() {
        rough.first_level().increment_into(k, k + 1, &mut x);
        add_expansion(row, cp.y().at(k), cp.y_prime().at(k), &x, rough.step_area(k));
    }
    Ok(g)
}

fn twisted_sum(table: &SemigroupTable, g: &[f64], m: usize, j: usize) -> Vec<f64> {
    let mut out = vec![0.0; m];
    let mut term = vec![0.0; m];
    for k in 0..j {
        term.iter_mut().for_each(|v| *v = 0.0);
        table.add_apply(j - k, &g[k * m..(k + 1) * m], &mut term);
        for (o, t) in out.iter_mut().zip(&term) {
            *o += t;
        }
    }
    out
}

fn prepare(table: &SemigroupTable, cp: &ControlledPath) -> Result<(usize, Vec<f64>)> {
    let m = require_operator(cp)?;
    check_compatible(table, cp.grid(), m)?;
    Ok((m, step_vectors(cp)?))
}

/// `N_{t_j} = Σ_{k<j} S_{t_j - t_k} (Y_k X_{k,k+1} + Y'_k : 𝕏_{k,k+1})`.
pub fn rough_convolution(table: &SemigroupTable, cp: &ControlledPath, j: usize) -> Result<Vec<f64>> {
    let (m, g) = prepare(table, cp)?;
    cp.grid().check_index(j)?;
    Ok(twisted_sum(table, &g, m, j))
}

/// [`rough_convolution`] at every grid point.
pub fn rough_convolution_path(table: &SemigroupTable, cp: &ControlledPath) -> Result<Path> {
    let (m, g) = prepare(table, cp)?;
    let rows: Vec<Vec<f64>> = (0..cp.grid().n_points())
        .into_par_iter()
        .map(|j| twisted_sum(table, &g, m, j))
        .collect();
    Path::new(*cp.grid(), m, rows.concat())
}

/// The rough convolution as a controlled path with derivative `N' = Y`.
pub fn rough_convolution_controlled(table: &SemigroupTable, cp: &ControlledPath) -> Result<ControlledPath> {
    let n = rough_convolution_path(table, cp)?;
    let m = n.dim();
    let n_prime = Path::new(*cp.grid(), m * cp.noise_dim(), cp.y().values().to_vec())?;
    ControlledPath::state(cp.reference().clone(), n, n_prime)?.with_alpha(cp.alpha())
}

/// Norms of the rough convolution next to those of its integrand, for
/// comparing against the convolution estimate.
pub fn convolution_norm_report(
    table: &SemigroupTable,
    cp: &ControlledPath,
) -> Result<(ControlledNorms, ControlledNorms)> {
    let conv = rough_convolution_controlled(table, cp)?;
    let (out, inp) = (conv.norms()?, cp.norms()?);
    log::debug!(
        "rough convolution: ‖N,N'‖ = {:.3e}, ‖Y,Y'‖ = {:.3e}, ratio {:.3e}",
        out.full,
        inp.full,
        out.full / inp.full.max(f64::MIN_POSITIVE)
    );
    Ok((out, inp))
}

/// The split `N_{s,t} - I_{s,t} = term1 + term2` of the rough convolution
/// increment minus the plain rough integral.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    /// `∫_s^t (S_{t-r} - Id) Y_r d𝐗_r`.
    pub term1: Vec<f64>,
    /// `∫_0^s (S_{t-r} - S_{s-r}) Y_r d𝐗_r`.
    pub term2: Vec<f64>,
    /// `|term1 + term2 - (N_{s,t} - I_{s,t})|`.
    pub split_defect: f64,
}

/// Both terms as compensated sums of their twisted integrands, for `s = t_i`, `t = t_j`.
pub fn convolution_decomposition_probe(
    table: &SemigroupTable,
    cp: &ControlledPath,
    i: usize,
    j: usize,
) -> Result<Decomposition> {
    let (m, g) = prepare(table, cp)?;
    cp.grid().check_index(j)?;
    if i > j {
        return Err(Error::Parameter(format!("decomposition needs i <= j, got ({i}, {j})")));
    }
    let mut term1 = vec![0.0; m];
    let mut term2 = vec![0.0; m];
    let mut plain = vec![0.0; m];
    let mut buf = vec![0.0; m];
    for k in i..j {
        let gk = &g[k * m..(k + 1) * m];
        buf.iter_mut().for_each(|v| *v = 0.0);
        table.add_apply(j - k, gk, &mut buf);
        for c in 0..m {
            term1[c] += buf[c] - gk[c];
            plain[c] += gk[c];
        }
    }
    for k in 0..i {
        let gk = &g[k * m..(k + 1) * m];
        buf.iter_mut().for_each(|v| *v = 0.0);
        table.add_apply(j - k, gk, &mut buf);
        let mut earlier = vec![0.0; m];
        table.add_apply(i - k, gk, &mut earlier);
        for c in 0..m {
            term2[c] += buf[c] - earlier[c];
        }
    }
    let n_j = twisted_sum(table, &g, m, j);
    let n_i = twisted_sum(table, &g, m, i);
    let target: Vec<f64> = (0..m).map(|c| n_j[c] - n_i[c] - plain[c]).collect();
    let split: Vec<f64> = (0..m).map(|c| term1[c] + term2[c]).collect();
    let split_defect = linalg::diff_norm(&split, &target);
    Ok(Decomposition { term1, term2, split_defect })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gubinelli::rough_integral;
    use crate::rough::{enhance_piecewise_linear, RoughPath};
    use crate::semigroup::Generator;
    use std::sync::Arc;

    fn driver(n: usize, d: usize) -> Arc<RoughPath> {
        let g = Grid::new(1.0, n).unwrap();
        let p = Path::from_fn(g, d, |t, o| {
            for (k, v) in o.iter_mut().enumerate() {
                *v = ((k + 2) as f64 * 3.0 * t).sin() + t;
            }
        })
        .unwrap();
        Arc::new(enhance_piecewise_linear(&p, 0.4).unwrap())
    }

    fn integrand(x: Arc<RoughPath>, m: usize) -> ControlledPath {
        let d = x.dim();
        let xs = x.first_level().clone();
        let y = xs.map(m * d, |_, v, o| {
            for (p, c) in o.iter_mut().enumerate() {
                *c = (v[p % d] * (p + 1) as f64).cos();
            }
        });
        let yp = Path::zeros(*x.grid(), m * d * d);
        let mut yp_vals = yp.into_values();
        let y = y.unwrap();
        for i in 0..x.grid().n_points() {
            let v = xs.at(i);
            for p in 0..m * d {
                let a = p % d;
                yp_vals[(i * m * d + p) * d + a] = -((p + 1) as f64) * (v[a] * (p + 1) as f64).sin();
            }
        }
        let yp = Path::new(*x.grid(), m * d * d, yp_vals).unwrap();
        ControlledPath::operator(x, m, y, yp).unwrap()
    }

    #[test]
    fn zero_generator_reduces_to_rough_integral_bitwise() {
        let x = driver(64, 2);
        let cp = integrand(x.clone(), 3);
        let table = SemigroupTable::from_generator(&Generator::Zero { size: 3 }, *x.grid()).unwrap();
        for j in [0, 1, 17, 64] {
            assert_eq!(rough_convolution(&table, &cp, j).unwrap(), rough_integral(&cp, 0, j).unwrap());
        }
        let d = convolution_decomposition_probe(&table, &cp, 10, 40).unwrap();
        assert!(d.term1.iter().chain(&d.term2).all(|v| *v == 0.0));
    }

    #[test]
    fn regular_convolution_of_constant() {
        let g = Grid::new(1.0, 32).unwrap();
        let table = SemigroupTable::from_generator(&Generator::Zero { size: 2 }, g).unwrap();
        let c = Path::constant(g, &[1.5, -2.0]);
        let v = regular_convolution(&table, &c, 32, Quadrature::LeftEndpoint).unwrap();
        assert!(linalg::diff_norm(&v, &[1.5, -2.0]) < 1e-14);
        let v = regular_convolution(&table, &c, 16, Quadrature::Trapezoid).unwrap();
        assert!(linalg::diff_norm(&v, &[0.75, -1.0]) < 1e-14);
    }

    #[test]
    fn regular_convolution_decay_rates() {
        let a = -2.0;
        let g = Grid::new(1.0, 256).unwrap();
        let table = SemigroupTable::from_generator(&Generator::Diagonal(vec![a]), g).unwrap();
        let c = Path::constant(g, &[1.0]);
        let exact = ((a * 1.0f64).exp() - 1.0) / a;
        let left = regular_convolution(&table, &c, 256, Quadrature::LeftEndpoint).unwrap()[0];
        let trap = regular_convolution(&table, &c, 256, Quadrature::Trapezoid).unwrap()[0];
        assert!((left - exact).abs() < 2.0 / 256.0);
        assert!((trap - exact).abs() < 2.0 / (256.0 * 256.0));
    }

    #[test]
    fn zero_driver_gives_zero_convolution() {
        let g = Grid::new(1.0, 16).unwrap();
        let x = Arc::new(RoughPath::zero(g, 2, 0.4).unwrap());
        let cp = integrand(x, 2);
        let table = SemigroupTable::from_generator(&Generator::Diagonal(vec![-1.0, 0.3]), g).unwrap();
        let n = rough_convolution_path(&table, &cp).unwrap();
        assert!(n.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn controlled_convolution_derivative_is_integrand() {
        let x = driver(16, 2);
        let cp = integrand(x.clone(), 2);
        let table = SemigroupTable::from_generator(&Generator::NonNormal { size: 2 }, *x.grid()).unwrap();
        let n = rough_convolution_controlled(&table, &cp).unwrap();
        assert_eq!(n.y_prime().values(), cp.y().values());
        assert!(convolution_norm_report(&table, &cp).is_ok());
    }

    #[test]
    fn split_identity_holds() {
        let x = driver(64, 2);
        let cp = integrand(x.clone(), 3);
        let table = SemigroupTable::from_generator(&Generator::NonNormal { size: 3 }, *x.grid()).unwrap();
        for (i, j) in [(0, 64), (5, 9), (20, 20), (31, 63)] {
            let d = convolution_decomposition_probe(&table, &cp, i, j).unwrap();
            assert!(d.split_defect < 1e-10, "{i} {j} {}", d.split_defect);
        }
        let d = convolution_decomposition_probe(&table, &cp, 7, 7).unwrap();
        assert!(d.term1.iter().chain(&d.term2).all(|v| *v == 0.0));
    }

    #[test]
    fn mismatched_table_is_rejected() {
        let x = driver(16, 1);
        let cp = integrand(x, 2);
        let table = SemigroupTable::from_generator(&Generator::Zero { size: 3 }, Grid::new(1.0, 16).unwrap()).unwrap();
        assert!(rough_convolution(&table, &cp, 4).is_err());
        let table = SemigroupTable::from_generator(&Generator::Zero { size: 2 }, Grid::new(1.0, 8).unwrap()).unwrap();
        assert!(rough_convolution(&table, &cp, 4).is_err());
    }
}
