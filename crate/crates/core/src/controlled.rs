//! Controlled rough paths `(Y, Y')`, their norms, and compositions with
//! smooth, linear and bilinear maps.
//!
//! Layout conventions (all flat, row-major):
//! - a state-valued path has values in `R^e` and `Y'` in `L(R^d, R^e)`,
//!   stored as `e x d` (`[p * d + a]`);
//! - an operator-valued path (role [`Role::Operator`]) has values in
//!   `L(R^d, R^m)` stored as `m x d` (`[i * d + b]`, `e = m d`), and `Y'` in
//!   `L(R^d, L(R^d, R^m))` stored as `[(i * d + b) * d + a]`, where `a` is the
//!   direction of differentiation and `b` the integration direction. The
//!   contraction `Y' : 𝕏` is `Σ_{a,b} Y'[i,b,a] 𝕏[a,b]`.

use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::rough::{holder_norm_range, Grid, Path, RoughPath};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    /// Values in the state space `R^e`.
    State,
    /// Values in `L(R^d, R^out_dim)`.
    Operator { out_dim: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlledPath {
    reference: Arc<RoughPath>,
    y: Path,
    y_prime: Path,
    role: Role,
    alpha: f64,
}

/// Norm levels of a controlled path plus the auxiliary quantities entering
/// the `‖Y'‖_∞`, `‖Y‖_α`, `‖Y‖_∞` estimates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlledNorms {
    /// `‖Y'‖_α`
    pub y_prime_alpha: f64,
    /// `‖R^Y‖_{2α}`
    pub remainder_2alpha: f64,
    /// `‖Y,Y'‖_{X,2α}`
    pub seminorm: f64,
    /// `|Y,Y'|_{X,2α} = |Y'_0| + seminorm`
    pub pointed: f64,
    /// `⟦Y,Y'⟧_{X,2α} = |Y_0| + pointed`
    pub full: f64,
    pub sup_y: f64,
    pub sup_y_prime: f64,
    pub y_alpha: f64,
}

impl ControlledPath {
    pub fn new(reference: Arc<RoughPath>, y: Path, y_prime: Path, role: Role) -> Result<Self> {
        if y.grid() != reference.grid() || y_prime.grid() != reference.grid() {
            return Err(Error::Contract(
                "controlled path must share the reference grid".into(),
            ));
        }
        let d = reference.dim();
        let e = y.dim();
        if let Role::Operator { out_dim } = role {
            if out_dim * d != e {
                return Err(Error::dim("operator-valued path", out_dim * d, e));
            }
        }
        if y_prime.dim() != e * d {
            return Err(Error::dim("Gubinelli derivative", e * d, y_prime.dim()));
        }
        let alpha = reference.alpha();
        Ok(Self {
            reference,
            y,
            y_prime,
            role,
            alpha,
        })
    }

    pub fn state(reference: Arc<RoughPath>, y: Path, y_prime: Path) -> Result<Self> {
        Self::new(reference, y, y_prime, Role::State)
    }

    pub fn operator(reference: Arc<RoughPath>, out_dim: usize, y: Path, y_prime: Path) -> Result<Self> {
        Self::new(reference, y, y_prime, Role::Operator { out_dim })
    }

    /// `(X, Id)`: the driver controlled by itself.
    pub fn driver(reference: Arc<RoughPath>) -> Self {
        let d = reference.dim();
        let mut id = vec![0.0; d * d];
        for a in 0..d {
            id[a * d + a] = 1.0;
        }
        let y = reference.first_level().clone();
        let y_prime = Path::constant(*reference.grid(), &id);
        Self::state(reference, y, y_prime).expect("driver shapes are consistent")
    }

    /// `(Y, 0)` for a path with no rough component.
    pub fn regular(reference: Arc<RoughPath>, y: Path) -> Result<Self> {
        let zeros = Path::zeros(*y.grid(), y.dim() * reference.dim());
        Self::state(reference, y, zeros)
    }

    /// Uses `alpha` as the working exponent for norms.
    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 0.5) {
            return Err(Error::Parameter(format!(
                "controlled path exponent must lie in (0, 1/2], got {alpha}"
            )));
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn reference(&self) -> &Arc<RoughPath> {
        &self.reference
    }

    pub fn y(&self) -> &Path {
        &self.y
    }

    pub fn y_prime(&self) -> &Path {
        &self.y_prime
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn grid(&self) -> &Grid {
        self.reference.grid()
    }

    pub fn value_dim(&self) -> usize {
        self.y.dim()
    }

    pub fn noise_dim(&self) -> usize {
        self.reference.dim()
    }

    /// Codomain dimension: `e` for state paths, `m` for `L(R^d, R^m)`.
    pub fn codomain_dim(&self) -> usize {
        match self.role {
            Role::State => self.value_dim(),
            Role::Operator { out_dim } => out_dim,
        }
    }

    pub fn into_parts(self) -> (Path, Path) {
        (self.y, self.y_prime)
    }

    /// `R^Y_{s,t} = Y_{s,t} - Y'_s X_{s,t}`.
    pub fn remainder(&self, i: usize, j: usize) -> Result<Vec<f64>> {
        self.grid().check_index(i)?;
        self.grid().check_index(j)?;
        if i > j {
            return Err(Error::Parameter(format!("remainder needs i <= j, got ({i}, {j})")));
        }
        let x = self.reference.increment(i, j);
        let mut r = self.y.increment(i, j);
        let corr = linalg::mat_vec(self.y_prime.at(i), &x, r.len());
        for (ri, ci) in r.iter_mut().zip(&corr) {
            *ri -= ci;
        }
        Ok(r)
    }

    fn remainder_norm(&self, i: usize, j: usize) -> f64 {
        let d = self.noise_dim();
        let x = self.reference.first_level();
        let (xi, xj) = (x.at(i), x.at(j));
        let (yi, yj) = (self.y.at(i), self.y.at(j));
        let yp = self.y_prime.at(i);
        let mut acc = 0.0;
        for p in 0..self.value_dim() {
            let row = &yp[p * d..(p + 1) * d];
            let mut corr = 0.0;
            for a in 0..d {
                corr += row[a] * (xj[a] - xi[a]);
            }
            let r = yj[p] - yi[p] - corr;
            acc += r * r;
        }
        acc.sqrt()
    }

    /// `‖R^Y‖_{2α}` on `[i0, i1]`.
    pub fn remainder_norm_range(&self, i0: usize, i1: usize) -> Result<f64> {
        self.grid().check_index(i1)?;
        if i1 <= i0 {
            return Err(Error::DegenerateInput("remainder norm needs two grid points".into()));
        }
        let step = self.grid().step();
        Ok(crate::rough::pair_sup_public(i0, i1, step, 2.0 * self.alpha, None, |i, j| {
            self.remainder_norm(i, j)
        }))
    }

    /// `‖Y'‖_α + ‖R^Y‖_{2α}` over the whole grid.
    pub fn seminorm(&self) -> Result<f64> {
        let n = self.grid().n_steps();
        Ok(holder_norm_range(&self.y_prime, self.alpha, 0, n, None)? + self.remainder_norm_range(0, n)?)
    }

    pub fn norms(&self) -> Result<ControlledNorms> {
        self.norms_range(0, self.grid().n_steps())
    }

    /// All norm levels restricted to the index window `[i0, i1]`; the
    /// "initial" values are taken at `i0`.
    pub fn norms_range(&self, i0: usize, i1: usize) -> Result<ControlledNorms> {
        let y_prime_alpha = holder_norm_range(&self.y_prime, self.alpha, i0, i1, None)?;
        let remainder_2alpha = self.remainder_norm_range(i0, i1)?;
        let y_alpha = holder_norm_range(&self.y, self.alpha, i0, i1, None)?;
        let seminorm = y_prime_alpha + remainder_2alpha;
        let pointed = linalg::norm(self.y_prime.at(i0)) + seminorm;
        let full = linalg::norm(self.y.at(i0)) + pointed;
        let sup = |p: &Path| (i0..=i1).map(|i| linalg::norm(p.at(i))).fold(0.0, f64::max);
        Ok(ControlledNorms {
            y_prime_alpha,
            remainder_2alpha,
            seminorm,
            pointed,
            full,
            sup_y: sup(&self.y),
            sup_y_prime: sup(&self.y_prime),
            y_alpha,
        })
    }

    fn check_compatible(&self, other: &ControlledPath) -> Result<()> {
        if !same_reference(&self.reference, &other.reference) {
            return Err(Error::Contract("controlled paths have different references".into()));
        }
        if self.role != other.role || self.value_dim() != other.value_dim() {
            return Err(Error::dim("controlled path combination", self.value_dim(), other.value_dim()));
        }
        Ok(())
    }

    /// `a (Y, Y') + b (Z, Z')`.
    pub fn combine(&self, a: f64, other: &ControlledPath, b: f64) -> Result<ControlledPath> {
        self.check_compatible(other)?;
        let lin = |p: &Path, q: &Path| {
            let v = p.values().iter().zip(q.values()).map(|(x, y)| a * x + b * y).collect();
            Path::new(*p.grid(), p.dim(), v)
        };
        Ok(ControlledPath {
            reference: self.reference.clone(),
            y: lin(&self.y, &other.y)?,
            y_prime: lin(&self.y_prime, &other.y_prime)?,
            role: self.role,
            alpha: self.alpha,
        })
    }

    /// Same values seen as an `L(R^d, R^out)`-valued path.
    pub fn as_operator(self, out_dim: usize) -> Result<ControlledPath> {
        let alpha = self.alpha;
        let mut cp = ControlledPath::new(self.reference, self.y, self.y_prime, Role::Operator { out_dim })?;
        cp.alpha = alpha;
        Ok(cp)
    }
}

pub(crate) fn same_reference(a: &Arc<RoughPath>, b: &Arc<RoughPath>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

pub type PointFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;

/// Declared regularity metadata; used for diagnostics only.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CoefficientBounds {
    pub lip_f0: Option<f64>,
    pub cb_f: Option<f64>,
    /// Whether `f` is declared bounded with bounded derivatives.
    pub bounded: bool,
}

/// Coefficients `f0(t, y) ∈ R^m`, `f(t, y) ∈ L(R^d, R^m)` and `D_y f`.
///
/// Evaluators must be reentrant; the solver may call them from several
/// threads. `D_y f` is stored as `(m d) x m` (`[(i * d + b) * m + k]`) and
/// falls back to central differences when no analytic derivative is given.
#[derive(Clone)]
pub struct CoefficientField {
    state_dim: usize,
    noise_dim: usize,
    drift: Option<PointFn>,
    diffusion: Option<PointFn>,
    diffusion_derivative: Option<PointFn>,
    pub bounds: CoefficientBounds,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("state_dim", &self.state_dim)
            .field("noise_dim", &self.noise_dim)
            .field("drift", &self.drift.is_some())
            .field("diffusion", &self.diffusion.is_some())
            .field("analytic_derivative", &self.diffusion_derivative.is_some())
            .field("bounds", &self.bounds)
            .finish()
    }
}

impl CoefficientField {
    /// The zero field on `R^m` driven by `R^d`.
    pub fn new(state_dim: usize, noise_dim: usize) -> Self {
        Self {
            state_dim,
            noise_dim,
            drift: None,
            diffusion: None,
            diffusion_derivative: None,
            bounds: CoefficientBounds {
                lip_f0: Some(0.0),
                cb_f: Some(0.0),
                bounded: true,
            },
        }
    }

    pub fn with_drift(mut self, f0: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.drift = Some(Arc::new(f0));
        self
    }

    pub fn with_diffusion(mut self, f: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.diffusion = Some(Arc::new(f));
        self.diffusion_derivative = None;
        self
    }

    pub fn with_diffusion_derivative(
        mut self,
        df: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.diffusion_derivative = Some(Arc::new(df));
        self
    }

    pub fn with_bounds(mut self, bounds: CoefficientBounds) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn has_drift(&self) -> bool {
        self.drift.is_some()
    }

    pub fn has_diffusion(&self) -> bool {
        self.diffusion.is_some()
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.diffusion.is_none() || self.diffusion_derivative.is_some()
    }

    fn eval(&self, func: &Option<PointFn>, len: usize, t: f64, y: &[f64], what: &str) -> Result<Vec<f64>> {
        if y.len() != self.state_dim {
            return Err(Error::dim("coefficient state", self.state_dim, y.len()));
        }
        let mut out = vec![0.0; len];
        if let Some(f) = func {
            f(t, y, &mut out);
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::CoefficientEvaluation {
                    t,
                    state: format!("{y:?}"),
                    detail: format!("{what} returned a non-finite value"),
                });
            }
        }
        Ok(out)
    }

    pub fn eval_f0(&self, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        self.eval(&self.drift, self.state_dim, t, y, "f0")
    }

    pub fn eval_f(&self, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        self.eval(&self.diffusion, self.state_dim * self.noise_dim, t, y, "f")
    }

    pub fn eval_df(&self, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        let m = self.state_dim;
        let md = m * self.noise_dim;
        if self.diffusion_derivative.is_some() || self.diffusion.is_none() {
            return self.eval(&self.diffusion_derivative, md * m, t, y, "D_y f");
        }
        self.finite_difference_df(t, y)
    }

    /// Central differences with step `ε^{1/3} (1 + |y|)`.
    pub fn finite_difference_df(&self, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        let m = self.state_dim;
        let md = m * self.noise_dim;
        let step = f64::EPSILON.cbrt() * (1.0 + linalg::norm(y));
        let mut out = vec![0.0; md * m];
        let mut yp = y.to_vec();
        for k in 0..m {
            yp[k] = y[k] + step;
            let fp = self.eval_f(t, &yp)?;
            yp[k] = y[k] - step;
            let fm = self.eval_f(t, &yp)?;
            yp[k] = y[k];
            let h2 = 2.0 * step;
            for p in 0..md {
                out[p * m + k] = (fp[p] - fm[p]) / h2;
            }
        }
        Ok(out)
    }
}

/// `(f(Y), f(Y)')` with `f(Y)_t = f(t, Y_t)` and `f(Y)'_t = D_y f(t, Y_t) Y'_t`.
/// The result is operator-valued in `L(R^d, R^m)`.
pub fn compose_smooth(field: &CoefficientField, cp: &ControlledPath) -> Result<ControlledPath> {
    compose_smooth_from(field, cp, 0.0)
}

/// [`compose_smooth`] for a path whose grid starts at absolute time `t0`.
pub fn compose_smooth_from(field: &CoefficientField, cp: &ControlledPath, t0: f64) -> Result<ControlledPath> {
    if cp.role != Role::State {
        return Err(Error::Contract("compose_smooth needs a state-valued path".into()));
    }
    let m = field.state_dim();
    let d = cp.noise_dim();
    if cp.value_dim() != m {
        return Err(Error::dim("compose_smooth state", m, cp.value_dim()));
    }
    if field.noise_dim() != d {
        return Err(Error::dim("compose_smooth noise", d, field.noise_dim()));
    }
    let grid = *cp.grid();
    let md = m * d;
    let mut y = Vec::with_capacity(grid.n_points() * md);
    let mut yp = vec![0.0; grid.n_points() * md * d];
    for i in 0..grid.n_points() {
        let t = t0 + grid.time(i);
        let yi = cp.y.at(i);
        y.extend(field.eval_f(t, yi)?);
        let df = field.eval_df(t, yi)?;
        let ypi = cp.y_prime.at(i);
        let out = &mut yp[i * md * d..(i + 1) * md * d];
        for p in 0..md {
            for k in 0..m {
                let c = df[p * m + k];
                if c == 0.0 {
                    continue;
                }
                for a in 0..d {
                    out[p * d + a] += c * ypi[k * d + a];
                }
            }
        }
    }
    let mut res = ControlledPath::operator(
        cp.reference.clone(),
        m,
        Path::new(grid, md, y)?,
        Path::new(grid, md * d, yp)?,
    )?;
    res.alpha = cp.alpha;
    Ok(res)
}

/// A linear map acting on the codomain of a controlled path, either constant
/// or given per grid point.
#[derive(Clone, Debug, PartialEq)]
pub enum LinearMap {
    Constant(DMatrix<f64>),
    TimeIndexed(Vec<DMatrix<f64>>),
}

impl LinearMap {
    fn at(&self, i: usize) -> &DMatrix<f64> {
        match self {
            LinearMap::Constant(m) => m,
            LinearMap::TimeIndexed(v) => &v[i],
        }
    }

    fn shape(&self) -> (usize, usize) {
        let m = self.at(0);
        (m.nrows(), m.ncols())
    }

    /// `|φ|`: largest operator norm over the family.
    pub fn norm(&self) -> f64 {
        match self {
            LinearMap::Constant(m) => linalg::operator_norm(m),
            LinearMap::TimeIndexed(v) => v.iter().map(linalg::operator_norm).fold(0.0, f64::max),
        }
    }

    /// Smallest `L` with `|φ(t) - φ(s)| <= L |t - s|^{2α}` on the grid.
    pub fn empirical_time_lipschitz(&self, grid: &Grid, alpha: f64) -> f64 {
        match self {
            LinearMap::Constant(_) => 0.0,
            LinearMap::TimeIndexed(v) => {
                let mut best = 0.0f64;
                for i in 0..v.len() {
                    for j in i + 1..v.len() {
                        let dt = grid.time(j) - grid.time(i);
                        best = best.max(linalg::operator_norm(&(&v[j] - &v[i])) / dt.powf(2.0 * alpha));
                    }
                }
                best
            }
        }
    }
}

/// Applies `φ` pointwise to `Y` and to every column of `Y'`. For
/// operator-valued paths `φ` acts on the codomain `R^m` of `L(R^d, R^m)`.
pub fn compose_linear(phi: &LinearMap, cp: &ControlledPath) -> Result<ControlledPath> {
    let n = cp.grid().n_points();
    if let LinearMap::TimeIndexed(v) = phi {
        if v.len() != n {
            return Err(Error::dim("time-indexed linear map", n, v.len()));
        }
        if v.iter().any(|m| m.shape() != v[0].shape()) {
            return Err(Error::Parameter("time-indexed family has inconsistent shapes".into()));
        }
    }
    let (rows, cols) = phi.shape();
    let codim = cp.codomain_dim();
    if cols != codim {
        return Err(Error::dim("linear map input", codim, cols));
    }
    let apply = |p: &Path| -> Result<Path> {
        let inner = p.dim() / codim;
        let mut out = vec![0.0; n * rows * inner];
        for i in 0..n {
            let m = phi.at(i);
            let src = p.at(i);
            let dst = &mut out[i * rows * inner..(i + 1) * rows * inner];
            for q in 0..rows {
                for k in 0..codim {
                    let c = m[(q, k)];
                    if c == 0.0 {
                        continue;
                    }
                    for c2 in 0..inner {
                        dst[q * inner + c2] += c * src[k * inner + c2];
                    }
                }
            }
        }
        Path::new(*p.grid(), rows * inner, out)
    };
    let role = match cp.role {
        Role::State => Role::State,
        Role::Operator { .. } => Role::Operator { out_dim: rows },
    };
    let mut res = ControlledPath::new(cp.reference.clone(), apply(&cp.y)?, apply(&cp.y_prime)?, role)?;
    res.alpha = cp.alpha;
    Ok(res)
}

/// Bilinear map `B: R^p x R^q -> R^o` with coefficients `[o][p][q]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bilinear {
    pub out: usize,
    pub left: usize,
    pub right: usize,
    pub coeffs: Vec<f64>,
}

impl Bilinear {
    pub fn new(out: usize, left: usize, right: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != out * left * right {
            return Err(Error::dim("bilinear coefficients", out * left * right, coeffs.len()));
        }
        Ok(Self {
            out,
            left,
            right,
            coeffs,
        })
    }

    /// Scalar product `B(y, z) = y z`.
    pub fn scalar_product() -> Self {
        Self::new(1, 1, 1, vec![1.0]).expect("shape")
    }

    pub fn apply(&self, y: &[f64], z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.out];
        for (o, v) in out.iter_mut().enumerate() {
            let block = &self.coeffs[o * self.left * self.right..(o + 1) * self.left * self.right];
            for p in 0..self.left {
                for q in 0..self.right {
                    *v += block[p * self.right + q] * y[p] * z[q];
                }
            }
        }
        out
    }

    /// Frobenius norm of the coefficients, an upper bound for `|B|`.
    pub fn norm_bound(&self) -> f64 {
        linalg::norm(&self.coeffs)
    }
}

/// `(B(Y, Z), B(Y', Z) + B(Y, Z'))`.
pub fn compose_bilinear(b: &Bilinear, cp1: &ControlledPath, cp2: &ControlledPath) -> Result<ControlledPath> {
    if cp1.role != Role::State || cp2.role != Role::State {
        return Err(Error::Contract("compose_bilinear needs state-valued paths".into()));
    }
    if !same_reference(&cp1.reference, &cp2.reference) {
        return Err(Error::Contract("controlled paths have different references".into()));
    }
    if cp1.value_dim() != b.left {
        return Err(Error::dim("bilinear left argument", b.left, cp1.value_dim()));
    }
    if cp2.value_dim() != b.right {
        return Err(Error::dim("bilinear right argument", b.right, cp2.value_dim()));
    }
    let d = cp1.noise_dim();
    let grid = *cp1.grid();
    let n = grid.n_points();
    let mut y = Vec::with_capacity(n * b.out);
    let mut yp = Vec::with_capacity(n * b.out * d);
    let mut col1 = vec![0.0; b.left];
    let mut col2 = vec![0.0; b.right];
    for i in 0..n {
        let (y1, y2) = (cp1.y.at(i), cp2.y.at(i));
        y.extend(b.apply(y1, y2));
        let (p1, p2) = (cp1.y_prime.at(i), cp2.y_prime.at(i));
        let mut block = vec![0.0; b.out * d];
        for a in 0..d {
            for (p, c) in col1.iter_mut().enumerate() {
                *c = p1[p * d + a];
            }
            for (q, c) in col2.iter_mut().enumerate() {
                *c = p2[q * d + a];
            }
            let u = b.apply(&col1, y2);
            let v = b.apply(y1, &col2);
            for o in 0..b.out {
                block[o * d + a] = u[o] + v[o];
            }
        }
        yp.extend(block);
    }
    let mut res = ControlledPath::state(
        cp1.reference.clone(),
        Path::new(grid, b.out, y)?,
        Path::new(grid, b.out * d, yp)?,
    )?;
    res.alpha = cp1.alpha;
    Ok(res)
}

/// `((Y, Z), (Y', Z'))` over the product space.
pub fn pair(cp1: &ControlledPath, cp2: &ControlledPath) -> Result<ControlledPath> {
    if !same_reference(&cp1.reference, &cp2.reference) {
        return Err(Error::Contract("pair needs a common reference rough path".into()));
    }
    if cp1.role != Role::State || cp2.role != Role::State {
        return Err(Error::Contract("pair needs state-valued paths".into()));
    }
    let grid = *cp1.grid();
    let (e1, e2) = (cp1.value_dim(), cp2.value_dim());
    let d = cp1.noise_dim();
    let mut y = Vec::with_capacity(grid.n_points() * (e1 + e2));
    let mut yp = Vec::with_capacity(grid.n_points() * (e1 + e2) * d);
    for i in 0..grid.n_points() {
        y.extend_from_slice(cp1.y.at(i));
        y.extend_from_slice(cp2.y.at(i));
        yp.extend_from_slice(cp1.y_prime.at(i));
        yp.extend_from_slice(cp2.y_prime.at(i));
    }
    let mut res = ControlledPath::state(
        cp1.reference.clone(),
        Path::new(grid, e1 + e2, y)?,
        Path::new(grid, (e1 + e2) * d, yp)?,
    )?;
    res.alpha = cp1.alpha;
    Ok(res)
}

/// Writes the reference rough path followed by a `controlled v1` section.
pub fn write_controlled<W: Write>(w: &mut W, cp: &ControlledPath) -> Result<()> {
    crate::rough::write_rough_path(w, &cp.reference, None, None)?;
    let (role, out) = match cp.role {
        Role::State => ("state", cp.value_dim()),
        Role::Operator { out_dim } => ("operator", out_dim),
    };
    writeln!(w, "controlled v1 role={role} dim={} out={out} alpha={:?}", cp.value_dim(), cp.alpha)?;
    for i in 0..cp.grid().n_points() {
        crate::rough::write_row(w, cp.y.at(i))?;
    }
    for i in 0..cp.grid().n_points() {
        crate::rough::write_row(w, cp.y_prime.at(i))?;
    }
    Ok(())
}

pub fn read_controlled<R: BufRead>(r: R) -> Result<ControlledPath> {
    let mut lines = crate::rough::Lines::new(r);
    let file = crate::rough::read_rough_path_from(&mut lines)?;
    let header = lines.expect_line("controlled header")?;
    let ln = lines.line_no;
    let fields = crate::rough::header_fields(&header, &["controlled", "v1"], ln)?;
    let role: String = crate::rough::field(&fields, "role", ln)?;
    let e: usize = crate::rough::field(&fields, "dim", ln)?;
    let out: usize = crate::rough::field(&fields, "out", ln)?;
    let alpha: f64 = crate::rough::field(&fields, "alpha", ln)?;
    let role = match role.as_str() {
        "state" => Role::State,
        "operator" => Role::Operator { out_dim: out },
        other => return Err(Error::parse(ln, format!("unknown role `{other}`"))),
    };
    let grid = *file.rough.grid();
    let d = file.rough.dim();
    let mut y = Vec::new();
    for _ in 0..grid.n_points() {
        y.extend(lines.floats(e, "controlled values")?);
    }
    let mut yp = Vec::new();
    for _ in 0..grid.n_points() {
        yp.extend(lines.floats(e * d, "Gubinelli derivative values")?);
    }
    let cp = ControlledPath::new(Arc::new(file.rough), Path::new(grid, e, y)?, Path::new(grid, e * d, yp)?, role)?;
    cp.with_alpha(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rough::enhance_piecewise_linear;

    fn reference(n: usize, d: usize) -> Arc<RoughPath> {
        let g = Grid::new(1.0, n).unwrap();
        let p = Path::from_fn(g, d, |t, o| {
            for (k, v) in o.iter_mut().enumerate() {
                *v = ((k + 2) as f64 * 3.0 * t).sin() * (0.5 + t);
            }
        })
        .unwrap();
        Arc::new(enhance_piecewise_linear(&p, 0.45).unwrap())
    }

    #[test]
    fn constant_path_has_zero_remainder() {
        let x = reference(16, 2);
        let y = Path::constant(*x.grid(), &[1.0, 2.0, 3.0]);
        let cp = ControlledPath::regular(x, y).unwrap();
        assert_eq!(cp.remainder(0, 16).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn driver_has_zero_remainder_and_seminorm() {
        let cp = ControlledPath::driver(reference(32, 3));
        for (i, j) in [(0, 32), (3, 17), (5, 5)] {
            assert!(linalg::norm(&cp.remainder(i, j).unwrap()) <= 1e-15);
        }
        let n = cp.norms().unwrap();
        assert_eq!(n.y_prime_alpha, 0.0);
        assert!(n.remainder_2alpha <= 1e-13);
        assert!(n.seminorm <= 1e-13);
        assert!(n.full >= n.pointed && n.pointed >= n.seminorm);
    }

    #[test]
    fn zero_derivative_seminorm_is_two_alpha_norm() {
        let x = reference(32, 2);
        let y = Path::from_fn(*x.grid(), 1, |t, o| o[0] = t * t).unwrap();
        let cp = ControlledPath::regular(x, y.clone()).unwrap();
        let n = cp.norms().unwrap();
        let want = holder_norm_range(&y, 2.0 * cp.alpha(), 0, 32, None).unwrap();
        assert!((n.seminorm - want).abs() <= 1e-14 * want);
    }

    #[test]
    fn remainder_order_error() {
        let cp = ControlledPath::driver(reference(4, 1));
        assert!(cp.remainder(3, 1).is_err());
    }

    #[test]
    fn shape_errors() {
        let x = reference(4, 2);
        let g = *x.grid();
        assert!(ControlledPath::state(x.clone(), Path::zeros(g, 3), Path::zeros(g, 5)).is_err());
        assert!(ControlledPath::operator(x.clone(), 2, Path::zeros(g, 3), Path::zeros(g, 6)).is_err());
        let other = Grid::new(2.0, 4).unwrap();
        assert!(ControlledPath::regular(x, Path::zeros(other, 1)).is_err());
    }

    fn sine_field(m: usize, d: usize) -> CoefficientField {
        CoefficientField::new(m, d).with_diffusion(move |t, y, out| {
            for i in 0..m {
                for b in 0..d {
                    let s: f64 = y.iter().enumerate().map(|(k, v)| v * (1.0 + (i + k + b) as f64 * 0.3)).sum();
                    out[i * d + b] = (s + t).sin();
                }
            }
        })
    }

    fn sine_field_derivative(m: usize, d: usize) -> CoefficientField {
        sine_field(m, d).with_diffusion_derivative(move |t, y, out| {
            for i in 0..m {
                for b in 0..d {
                    let s: f64 = y.iter().enumerate().map(|(k, v)| v * (1.0 + (i + k + b) as f64 * 0.3)).sum();
                    for k in 0..m {
                        out[(i * d + b) * m + k] = (s + t).cos() * (1.0 + (i + k + b) as f64 * 0.3);
                    }
                }
            }
        })
    }

    #[test]
    fn finite_differences_match_analytic_derivative() {
        use rand::{Rng, SeedableRng};
        let (m, d) = (3, 2);
        let field = sine_field_derivative(m, d);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let t: f64 = rng.random();
            let y: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
            let exact = field.eval_df(t, &y).unwrap();
            let fd = field.finite_difference_df(t, &y).unwrap();
            let scale = linalg::norm(&exact).max(1e-300);
            worst = worst.max(linalg::diff_norm(&exact, &fd) / scale);
        }
        assert!(worst <= 1e-5, "worst relative error {worst}");
    }

    #[test]
    fn non_finite_coefficient_reports_context() {
        let field = CoefficientField::new(1, 1).with_drift(|_, y, o| o[0] = 1.0 / y[0]);
        match field.eval_f0(0.5, &[0.0]) {
            Err(Error::CoefficientEvaluation { t, .. }) => assert_eq!(t, 0.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constant_coefficient_gives_constant_path() {
        let x = reference(16, 2);
        let cp = ControlledPath::driver(x.clone());
        let field = CoefficientField::new(2, 2).with_diffusion(|_, _, o| o.copy_from_slice(&[1.0, 2.0, 3.0, 4.0]));
        let out = compose_smooth(&field, &cp).unwrap();
        assert_eq!(out.role(), Role::Operator { out_dim: 2 });
        assert!(out.y_prime().values().iter().all(|v| v.abs() < 1e-9));
        assert!(out.y().values().chunks(4).all(|c| c == [1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn compose_smooth_rejects_operator_input() {
        let x = reference(4, 1);
        let g = *x.grid();
        let op = ControlledPath::operator(x, 1, Path::zeros(g, 1), Path::zeros(g, 1)).unwrap();
        assert!(matches!(compose_smooth(&CoefficientField::new(1, 1), &op), Err(Error::Contract(_))));
    }

    #[test]
    fn linear_map_acts_on_values_and_derivative() {
        let cp = ControlledPath::driver(reference(16, 2));
        let phi = DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 2.0, 0.25]);
        let lin = compose_linear(&LinearMap::Constant(phi.clone()), &cp).unwrap();
        for i in 0..=16 {
            let want = &phi * nalgebra::DVector::from_column_slice(cp.y().at(i));
            assert!((lin.y().at(i)[0] - want[0]).abs() < 1e-15);
            assert!((lin.y().at(i)[1] - want[1]).abs() < 1e-15);
        }
        // Y' = Id so φ(Y)' = φ
        assert_eq!(lin.y_prime().at(3), &[0.5, -1.0, 2.0, 0.25]);
    }

    #[test]
    fn identity_linear_map_is_noop() {
        let cp = ControlledPath::driver(reference(8, 2));
        let out = compose_linear(&LinearMap::Constant(DMatrix::identity(2, 2)), &cp).unwrap();
        assert_eq!(out, cp);
        let bad = LinearMap::Constant(DMatrix::identity(3, 3));
        assert!(compose_linear(&bad, &cp).is_err());
    }

    #[test]
    fn bilinear_unit() {
        let x = reference(16, 1);
        let y = ControlledPath::driver(x.clone());
        let one = ControlledPath::regular(x, Path::constant(*y.grid(), &[1.0])).unwrap();
        let out = compose_bilinear(&Bilinear::scalar_product(), &y, &one).unwrap();
        assert_eq!(out, y);
    }

    #[test]
    fn pair_with_zero_keeps_norms() {
        let x = reference(16, 2);
        let y = ControlledPath::driver(x.clone());
        let z = ControlledPath::regular(x, Path::zeros(*y.grid(), 3)).unwrap();
        let p = pair(&y, &z).unwrap();
        let (a, b) = (p.norms().unwrap(), y.norms().unwrap());
        assert!((a.full - b.full).abs() < 1e-14);
        assert!((a.seminorm - b.seminorm).abs() < 1e-14);
        let r = p.remainder(2, 9).unwrap();
        assert_eq!(&r[..2], y.remainder(2, 9).unwrap().as_slice());
        assert_eq!(&r[2..], &[0.0; 3]);
    }

    #[test]
    fn pair_rejects_mismatched_reference() {
        let y = ControlledPath::driver(reference(8, 1));
        let z = ControlledPath::driver(reference(8, 2));
        assert!(pair(&y, &z).is_err());
    }

    #[test]
    fn controlled_round_trip() {
        let x = reference(6, 2);
        let cp = compose_smooth(&sine_field(2, 2), &ControlledPath::driver(x)).unwrap();
        let mut buf = Vec::new();
        write_controlled(&mut buf, &cp).unwrap();
        let back = read_controlled(buf.as_slice()).unwrap();
        assert_eq!(back, cp);
    }
}
