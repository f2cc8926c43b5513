//! Finite-dimensional generators `A`, cached step exponentials
//! `S_{kh} = exp(khA)`, graph norms on `D(A^n)` and direct checks of the
//! orbit and quadruple-increment estimates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rough::Grid;

/// Symmetry tolerance (relative to the largest entry) for the eigen route.
const SYMMETRY_TOL: f64 = 1e-13;
/// Growth constants of non-normal generators are fitted on a grid this much finer.
const GROWTH_REFINEMENT: usize = 4;

/// Shipped generators.
#[derive(Clone, Debug, PartialEq)]
pub enum Generator {
    Zero { size: usize },
    Diagonal(Vec<f64>),
    /// `ν (1, -2, 1) / Δx²` with homogeneous Dirichlet boundary.
    Laplacian1d { size: usize, spacing: f64, diffusivity: f64 },
    /// Upper bidiagonal test matrix with `a_ii = -1 - i/10`, `a_{i,i+1} = 3`;
    /// stable spectrum but transient growth, so `M > 1`.
    NonNormal { size: usize },
    Custom(DMatrix<f64>),
}

impl Generator {
    pub fn matrix(&self) -> DMatrix<f64> {
        match self {
            Generator::Zero { size } => DMatrix::zeros(*size, *size),
            Generator::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            Generator::Laplacian1d { size, spacing, diffusivity } => {
                let c = diffusivity / (spacing * spacing);
                DMatrix::from_fn(*size, *size, |i, j| {
                    if i == j {
                        -2.0 * c
                    } else if i.abs_diff(j) == 1 {
                        c
                    } else {
                        0.0
                    }
                })
            }
            Generator::NonNormal { size } => DMatrix::from_fn(*size, *size, |i, j| {
                if i == j {
                    -1.0 - 0.1 * i as f64
                } else if j == i + 1 {
                    3.0
                } else {
                    0.0
                }
            }),
            Generator::Custom(a) => a.clone(),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Generator::Zero { size } | Generator::Laplacian1d { size, .. } | Generator::NonNormal { size } => *size,
            Generator::Diagonal(d) => d.len(),
            Generator::Custom(a) => a.nrows(),
        }
    }

    /// Reads a square matrix from whitespace-separated row-major floats.
    pub fn custom_from_str(text: &str) -> Result<Generator> {
        let values = text
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| Error::Parameter(format!("matrix entry {tok:?} is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let n = (values.len() as f64).sqrt().round() as usize;
        if n == 0 || n * n != values.len() {
            return Err(Error::Parameter(format!(
                "matrix file holds {} entries, not a square count",
                values.len()
            )));
        }
        Ok(Generator::Custom(DMatrix::from_row_slice(n, n, &values)))
    }
}

/// `exp(tA)`; eigendecomposition for symmetric `A`, scaling and squaring otherwise.
pub fn exponential(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    if is_symmetric(a) {
        let eig = a.clone().symmetric_eigen();
        symmetric_exp(&eig, t)
    } else {
        (a * t).exp()
    }
}

fn is_symmetric(a: &DMatrix<f64>) -> bool {
    let scale = a.amax().max(1.0);
    linalg::is_symmetric(a, SYMMETRY_TOL * scale)
}

fn symmetric_exp(eig: &nalgebra::SymmetricEigen<f64, nalgebra::Dyn>, t: f64) -> DMatrix<f64> {
    let v = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * (t * eig.eigenvalues[j]).exp());
    scaled * v.transpose()
}

/// Result of an estimate check: the worst ratio and the bound it must respect.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateCheck {
    pub max_ratio: f64,
    pub bound: f64,
    pub holds: bool,
}

impl EstimateCheck {
    fn new(max_ratio: f64, bound: f64, rel_tol: f64) -> Self {
        EstimateCheck {
            max_ratio,
            bound,
            holds: max_ratio.is_finite() && max_ratio <= bound * (1.0 + rel_tol),
        }
    }

    pub fn slack(&self) -> f64 {
        self.bound - self.max_ratio
    }
}

/// Immutable table of `exp(khA)` for `k = 0..=N` together with fitted growth
/// constants `|exp(tA)| <= M e^{ωt}`.
#[derive(Clone, Debug)]
pub struct SemigroupTable {
    a: DMatrix<f64>,
    grid: Grid,
    exps: Vec<DMatrix<f64>>,
    growth_m: f64,
    growth_omega: f64,
    symmetric: bool,
    zero: bool,
}

impl SemigroupTable {
    pub fn build(a: DMatrix<f64>, grid: Grid) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::Parameter(format!(
                "generator must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("generator matrix".into()));
        }
        let n = grid.n_steps();
        let h = grid.step();
        let m = a.nrows();
        let symmetric = is_symmetric(&a);
        let zero = a.iter().all(|v| *v == 0.0);
        let exps: Vec<DMatrix<f64>> = if zero {
            vec![DMatrix::identity(m, m); n + 1]
        } else if symmetric {
            let eig = a.clone().symmetric_eigen();
            let mut exps: Vec<DMatrix<f64>> = (0..=n).map(|k| symmetric_exp(&eig, k as f64 * h)).collect();
            exps[0] = DMatrix::identity(m, m);
            exps
        } else {
            let mut exps: Vec<DMatrix<f64>> = (0..=n).map(|k| (&a * (k as f64 * h)).exp()).collect();
            exps[0] = DMatrix::identity(m, m);
            exps
        };

        let (growth_m, growth_omega) = if zero {
            (1.0, 0.0)
        } else {
            let abscissa = if symmetric {
                a.clone().symmetric_eigen().eigenvalues.max()
            } else {
                a.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
            };
            let omega = abscissa.max(0.0);
            let norms: Vec<(f64, f64)> = if symmetric {
                exps.iter().enumerate().map(|(k, e)| (k as f64 * h, linalg::operator_norm(e))).collect()
            } else {
                let fine = h / GROWTH_REFINEMENT as f64;
                (0..=n * GROWTH_REFINEMENT)
                    .map(|k| {
                        let t = k as f64 * fine;
                        (t, linalg::operator_norm(&(&a * t).exp()))
                    })
                    .collect()
            };
            let m_fit = norms.iter().map(|(t, s)| s * (-omega * t).exp()).fold(1.0, f64::max);
            (m_fit, omega)
        };
        log::debug!("semigroup: m={m} symmetric={symmetric} M={growth_m:.6} omega={growth_omega:.6}");

        Ok(SemigroupTable { a, grid, exps, growth_m, growth_omega, symmetric, zero })
    }

    pub fn from_generator(generator: &Generator, grid: Grid) -> Result<Self> {
        Self::build(generator.matrix(), grid)
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn size(&self) -> usize {
        self.a.nrows()
    }

    pub fn growth_m(&self) -> f64 {
        self.growth_m
    }

    pub fn growth_omega(&self) -> f64 {
        self.growth_omega
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// True when `A = 0`, so every step exponential is the identity.
    pub fn is_trivial(&self) -> bool {
        self.zero
    }

    /// `exp(khA)`.
    pub fn step_exponential(&self, k: usize) -> &DMatrix<f64> {
        &self.exps[k]
    }

    /// `M e^{ωT}` over the table's horizon.
    pub fn growth_bound(&self) -> f64 {
        self.growth_m * (self.growth_omega * self.grid.horizon()).exp()
    }

    /// `out += exp(khA) v`.
    pub fn add_apply(&self, k: usize, v: &[f64], out: &mut [f64]) {
        if self.zero {
            for (o, x) in out.iter_mut().zip(v) {
                *o += x;
            }
            return;
        }
        add_col_major(&self.exps[k], v, out);
    }

    pub fn apply(&self, k: usize, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.add_apply(k, v, &mut out);
        out
    }

    /// `A v`.
    pub fn apply_generator(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        add_col_major(&self.a, v, &mut out);
        out
    }

    /// `|y| + Σ_{j=1}^n |A^j y|`.
    pub fn graph_norm(&self, y: &[f64], order: usize) -> Result<f64> {
        if order > 3 {
            return Err(Error::Parameter(format!("graph norm order must be at most 3, got {order}")));
        }
        let mut total = linalg::norm(y);
        let mut power = y.to_vec();
        for _ in 0..order {
            power = self.apply_generator(&power);
            total += linalg::norm(&power);
        }
        Ok(total)
    }

    fn orbit(&self, y: &[f64]) -> Vec<Vec<f64>> {
        (0..=self.grid.n_steps()).map(|k| self.apply(k, y)).collect()
    }

    /// `max |S_t y - S_s y| / (|t-s| |y|_{D(A)})` over grid pairs, against `M e^{ωT}`.
    pub fn orbit_lipschitz_check(&self, y: &[f64]) -> Result<EstimateCheck> {
        self.check_vector(y)?;
        let denom_y = self.graph_norm(y, 1)?;
        let bound = self.growth_bound();
        if denom_y == 0.0 || self.zero {
            return Ok(EstimateCheck::new(0.0, bound, 1e-8));
        }
        let orbit = self.orbit(y);
        let h = self.grid.step();
        let n = self.grid.n_steps();
        let mut worst = 0.0f64;
        for s in 0..n {
            for t in s + 1..=n {
                let lhs = linalg::diff_norm(&orbit[t], &orbit[s]);
                worst = worst.max(lhs / ((t - s) as f64 * h * denom_y));
            }
        }
        Ok(EstimateCheck::new(worst, bound, 1e-8))
    }

    /// `max |S_{s-r,t-r} y - S_{s-q,t-q} y| / (|t-s| |r-q| |y|_{D(A²)})` over
    /// all grid quadruples `q < r <= s < t`, against `M e^{2ωT}`.
    pub fn quad_estimate_check(&self, y: &[f64]) -> Result<EstimateCheck> {
        use rayon::prelude::*;
        self.check_vector(y)?;
        let denom_y = self.graph_norm(y, 2)?;
        let bound = self.growth_m * (2.0 * self.growth_omega * self.grid.horizon()).exp();
        if denom_y == 0.0 || self.zero {
            return Ok(EstimateCheck::new(0.0, bound, 1e-8));
        }
        let orbit = self.orbit(y);
        let h = self.grid.step();
        let n = self.grid.n_steps();
        let m = y.len();
        let worst = (0..n)
            .into_par_iter()
            .map(|q| {
                let mut diff = vec![0.0; m];
                let mut worst = 0.0f64;
                for r in q + 1..=n {
                    for s in r..n {
                        for t in s + 1..=n {
                            for (c, d) in diff.iter_mut().enumerate() {
                                *d = orbit[t - r][c] - orbit[s - r][c] - orbit[t - q][c] + orbit[s - q][c];
                            }
                            let scale = (t - s) as f64 * (r - q) as f64 * h * h * denom_y;
                            worst = worst.max(linalg::norm(&diff) / scale);
                        }
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max);
        Ok(EstimateCheck::new(worst, bound, 1e-8))
    }

    fn check_vector(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.size() {
            return Err(Error::dim("semigroup vector", self.size(), y.len()));
        }
        Ok(())
    }
}

/// `out += M v` for a column-major matrix.
fn add_col_major(mat: &DMatrix<f64>, v: &[f64], out: &mut [f64]) {
    let rows = mat.nrows();
    let data = mat.as_slice();
    for (j, &vj) in v.iter().enumerate() {
        if vj == 0.0 {
            continue;
        }
        let col = &data[j * rows..(j + 1) * rows];
        for (o, c) in out.iter_mut().zip(col) {
            *o += c * vj;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(1.0, n).unwrap()
    }

    #[test]
    fn zero_generator_gives_identity() {
        let t = SemigroupTable::from_generator(&Generator::Zero { size: 3 }, grid(8)).unwrap();
        assert!(t.is_trivial());
        for k in 0..=8 {
            assert_eq!(t.step_exponential(k), &DMatrix::identity(3, 3));
        }
        assert_eq!((t.growth_m(), t.growth_omega()), (1.0, 0.0));
        assert_eq!(t.graph_norm(&[3.0, 4.0, 0.0], 3).unwrap(), 5.0);
        assert_eq!(t.orbit_lipschitz_check(&[1.0, 0.0, 0.0]).unwrap().max_ratio, 0.0);
    }

    #[test]
    fn diagonal_generator_is_entrywise_exponential() {
        let d = vec![-1.0, 0.5, -3.0];
        let t = SemigroupTable::from_generator(&Generator::Diagonal(d.clone()), grid(16)).unwrap();
        for k in 0..=16 {
            let e = t.step_exponential(k);
            for i in 0..3 {
                assert_relative_eq!(e[(i, i)], (d[i] * k as f64 / 16.0).exp(), max_relative = 1e-14);
            }
        }
        assert_relative_eq!(t.growth_omega(), 0.5);
    }

    #[test]
    fn laplacian_matches_known_spectrum() {
        let m = 8;
        let dx = 1.0 / (m + 1) as f64;
        let t = SemigroupTable::from_generator(
            &Generator::Laplacian1d { size: m, spacing: dx, diffusivity: 1.0 },
            Grid::new(0.05, 10).unwrap(),
        )
        .unwrap();
        // eigenvectors sin(jkπ/(m+1)) with eigenvalues -4 sin²(kπ/(2(m+1)))/Δx²
        let time = 0.05;
        let mut oracle = DMatrix::zeros(m, m);
        for k in 1..=m {
            let lambda = -4.0 * (k as f64 * PI / (2.0 * (m + 1) as f64)).sin().powi(2) / (dx * dx);
            let v = DVector::from_fn(m, |j, _| (((j + 1) * k) as f64 * PI / (m + 1) as f64).sin());
            let v = &v / v.norm();
            oracle += &v * v.transpose() * (lambda * time).exp();
        }
        assert!((t.step_exponential(10) - oracle).amax() < 1e-10);
    }

    #[test]
    fn graph_norm_examples() {
        let t = SemigroupTable::from_generator(&Generator::Diagonal(vec![-1.0]), grid(4)).unwrap();
        assert_eq!(t.graph_norm(&[1.0], 2).unwrap(), 3.0);
        assert!(t.graph_norm(&[1.0], 4).is_err());
    }

    #[test]
    fn non_normal_has_transient_growth() {
        let t = SemigroupTable::from_generator(&Generator::NonNormal { size: 4 }, grid(32)).unwrap();
        assert!(t.growth_m() > 1.0);
        assert_eq!(t.growth_omega(), 0.0);
        for k in 0..=32 {
            assert!(linalg::operator_norm(t.step_exponential(k)) <= t.growth_m() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn orbit_check_scalar_decay() {
        let t = SemigroupTable::from_generator(&Generator::Diagonal(vec![-1.0]), grid(64)).unwrap();
        let c = t.orbit_lipschitz_check(&[1.0]).unwrap();
        // sup |e^{-t} - e^{-s}| / (|t-s| * 2) is reached at the first step
        let h: f64 = 1.0 / 64.0;
        assert_relative_eq!(c.max_ratio, (1.0 - (-h).exp()) / (2.0 * h), max_relative = 1e-12);
        assert!(c.holds);
    }

    #[test]
    fn custom_matrix_parsing() {
        let g = Generator::custom_from_str("1 2\n3 4\n").unwrap();
        assert_eq!(g.matrix(), DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert!(Generator::custom_from_str("1 2 3").is_err());
        assert!(Generator::custom_from_str("1 x 3 4").is_err());
    }

    #[test]
    fn rejects_bad_generators() {
        assert!(SemigroupTable::build(DMatrix::zeros(2, 3), grid(2)).is_err());
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(SemigroupTable::build(a, grid(2)), Err(Error::NonFinite(_))));
    }
}
