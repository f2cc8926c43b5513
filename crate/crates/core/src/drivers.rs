//! Stochastic drivers: the Itô-enhanced Q-Wiener process, geometric
//! enhancements of Q-Wiener and Q-fractional Brownian motion, plus Monte
//! Carlo probes for moment scaling and rough/Itô coincidence.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::controlled::ControlledPath;
use crate::error::{Error, Result};
use crate::gubinelli::rough_integral;
use crate::linalg;
use crate::rough::{enhance_piecewise_linear, DriverMeta, Grid, Path, RoughPath};
use crate::stats;

/// Diagonal jitter tried once when the fBm covariance fails to factorize.
const CHOLESKY_JITTER: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DriverKind {
    ItoWiener,
    GeometricFbm,
    GeometricWiener,
}

impl DriverKind {
    pub fn name(&self) -> &'static str {
        match self {
            DriverKind::ItoWiener => "ito_wiener",
            DriverKind::GeometricFbm => "geometric_fbm",
            DriverKind::GeometricWiener => "geometric_wiener",
        }
    }

    pub fn is_geometric(&self) -> bool {
        !matches!(self, DriverKind::ItoWiener)
    }
}

impl fmt::Display for DriverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DriverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ito_wiener" => Ok(DriverKind::ItoWiener),
            "geometric_fbm" | "fbm" => Ok(DriverKind::GeometricFbm),
            "geometric_wiener" => Ok(DriverKind::GeometricWiener),
            other => Err(Error::Parameter(format!("unknown driver kind {other:?}"))),
        }
    }
}

/// Eigenvalues of the covariance operator `Q`, stored in descending order.
#[derive(Clone, Debug, PartialEq)]
pub struct QSpectrum {
    eigenvalues: Vec<f64>,
}

impl QSpectrum {
    pub fn new(mut eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::Parameter("spectrum needs at least one eigenvalue".into()));
        }
        if let Some(bad) = eigenvalues.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::Parameter(format!("eigenvalues must be positive and finite, got {bad}")));
        }
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        Ok(QSpectrum { eigenvalues })
    }

    /// `λ_k ∝ k^{-decay}`, `k = 1..=d`, normalized to unit trace.
    pub fn polynomial(decay: f64, d: usize) -> Result<Self> {
        if d == 0 || !decay.is_finite() {
            return Err(Error::Parameter(format!("polynomial spectrum needs d > 0 and finite decay, got d={d}, decay={decay}")));
        }
        let raw: Vec<f64> = (1..=d).map(|k| (k as f64).powf(-decay)).collect();
        let trace: f64 = raw.iter().sum();
        Self::new(raw.into_iter().map(|l| l / trace).collect())
    }

    /// `λ_k = 1` for `k = 1..=d`.
    pub fn identity(d: usize) -> Result<Self> {
        Self::new(vec![1.0; d])
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }
}

impl FromStr for QSpectrum {
    type Err = Error;

    /// `polynomial(decay=2, d=8)` or an explicit list such as `1.0, 0.5, 0.25`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(args) = s.strip_prefix("polynomial(").and_then(|r| r.strip_suffix(')')) {
            let mut decay = None;
            let mut d = None;
            for part in args.split(',') {
                let (k, v) = part
                    .split_once('=')
                    .ok_or_else(|| Error::Parameter(format!("expected key=value in spectrum, got {part:?}")))?;
                let v = v.trim();
                match k.trim() {
                    "decay" => decay = v.parse::<f64>().ok(),
                    "d" => d = v.parse::<usize>().ok(),
                    other => return Err(Error::Parameter(format!("unknown spectrum parameter {other:?}"))),
                }
            }
            let (Some(decay), Some(d)) = (decay, d) else {
                return Err(Error::Parameter(format!("polynomial spectrum needs numeric decay and d: {s:?}")));
            };
            return Self::polynomial(decay, d);
        }
        let list = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')).unwrap_or(s);
        let values = list
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|_| Error::Parameter(format!("bad eigenvalue {t:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        Self::new(values)
    }
}

/// A sampled rough driver with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct DriverSample {
    pub rough: RoughPath,
    pub kind: DriverKind,
    pub hurst: f64,
    /// Sub-steps per grid step used for the Wiener enhancements (1 for fBm).
    pub fine_factor: usize,
    pub seed: u64,
}

impl DriverSample {
    pub fn meta(&self) -> DriverMeta {
        let mut meta = DriverMeta::default();
        meta.insert("kind", self.kind);
        meta.insert("hurst", format!("{:?}", self.hurst));
        meta.insert("fine_factor", self.fine_factor);
        meta.insert("seed", self.seed);
        meta
    }

    /// Rebuilds a sample from a rough path and the metadata written by [`DriverSample::meta`].
    pub fn from_parts(rough: RoughPath, meta: &DriverMeta) -> Result<Self> {
        let get = |key: &str| {
            meta.get(key)
                .ok_or_else(|| Error::Parameter(format!("driver metadata lacks {key:?}")))
        };
        let num = |key: &str| -> Result<f64> {
            get(key)?.parse().map_err(|_| Error::Parameter(format!("driver metadata {key:?} is not a number")))
        };
        Ok(DriverSample {
            kind: get("kind")?.parse()?,
            hurst: num("hurst")?,
            fine_factor: num("fine_factor")? as usize,
            seed: num("seed")? as u64,
            rough,
        })
    }

    /// Same sample on a grid `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        Ok(DriverSample { rough: self.rough.coarsen(factor)?, ..self.clone() })
    }
}

/// A working exponent strictly inside `(1/3, H)`: `H - 0.05` when admissible.
pub fn default_alpha(hurst: f64) -> f64 {
    if hurst - 0.05 > 1.0 / 3.0 {
        hurst - 0.05
    } else {
        0.5 * (hurst + 1.0 / 3.0)
    }
}

/// Independent generator for one component of one seed.
pub fn component_rng(seed: u64, component: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(component);
    rng
}

fn brownian_increments(seed: u64, d: usize, n: usize, dt: f64) -> Vec<Vec<f64>> {
    let sd = dt.sqrt();
    (0..d)
        .map(|j| {
            let mut rng = component_rng(seed, j as u64);
            (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
        })
        .collect()
}

fn check_fine_factor(fine_factor: usize) -> Result<()> {
    if fine_factor < 8 || !fine_factor.is_power_of_two() {
        return Err(Error::Parameter(format!("fine_factor must be a power of two >= 8, got {fine_factor}")));
    }
    Ok(())
}

fn check_hurst(hurst: f64) -> Result<()> {
    if !(hurst > 1.0 / 3.0 && hurst <= 0.5) {
        return Err(Error::Parameter(format!("Hurst index must lie in (1/3, 1/2], got {hurst}")));
    }
    Ok(())
}

/// Q-Wiener process with the Itô enhancement
/// `𝕏_{t_i,t_{i+1}}[j,k] = √(λ_j λ_k) Σ_u β^j_{t_i,u} (β^k_{u+} - β^k_u)` over the
/// `fine_factor` sub-steps of each grid step.
pub fn sample_q_wiener(spectrum: &QSpectrum, grid: Grid, fine_factor: usize, seed: u64, alpha: f64) -> Result<DriverSample> {
    check_fine_factor(fine_factor)?;
    let d = spectrum.dim();
    let n = grid.n_steps();
    let dw = brownian_increments(seed, d, n * fine_factor, grid.step() / fine_factor as f64);
    let scale: Vec<f64> = spectrum.eigenvalues().iter().map(|l| l.sqrt()).collect();
    let mut first = vec![0.0; (n + 1) * d];
    let mut areas = vec![0.0; n * d * d];
    let mut local = vec![0.0; d];
    for i in 0..n {
        local.fill(0.0);
        let area = &mut areas[i * d * d..(i + 1) * d * d];
        for u in i * fine_factor..(i + 1) * fine_factor {
            for j in 0..d {
                for k in 0..d {
                    area[j * d + k] += local[j] * dw[k][u];
                }
            }
            for j in 0..d {
                local[j] += dw[j][u];
            }
        }
        for j in 0..d {
            for k in 0..d {
                area[j * d + k] *= scale[j] * scale[k];
            }
            first[(i + 1) * d + j] = first[i * d + j] + scale[j] * local[j];
        }
    }
    let rough = RoughPath::new(Path::new(grid, d, first)?, areas, alpha)?;
    Ok(DriverSample { rough, kind: DriverKind::ItoWiener, hurst: 0.5, fine_factor, seed })
}

/// Q-Wiener process with the piecewise-linear (Stratonovich-type)
/// enhancement on the fine grid, composed down to the working grid.
pub fn sample_q_wiener_geometric(
    spectrum: &QSpectrum,
    grid: Grid,
    fine_factor: usize,
    seed: u64,
    alpha: f64,
) -> Result<DriverSample> {
    check_fine_factor(fine_factor)?;
    let d = spectrum.dim();
    let nf = grid.n_steps() * fine_factor;
    let fine_grid = grid.refine(fine_factor)?;
    let dw = brownian_increments(seed, d, nf, fine_grid.step());
    let mut first = vec![0.0; (nf + 1) * d];
    for (j, lam) in spectrum.eigenvalues().iter().enumerate() {
        let s = lam.sqrt();
        for u in 0..nf {
            first[(u + 1) * d + j] = first[u * d + j] + s * dw[j][u];
        }
    }
    let fine = enhance_piecewise_linear(&Path::new(fine_grid, d, first)?, alpha)?;
    Ok(DriverSample { rough: fine.coarsen(fine_factor)?, kind: DriverKind::GeometricWiener, hurst: 0.5, fine_factor, seed })
}

/// Cached Cholesky factor of the fBm covariance on the positive grid times.
#[derive(Clone, Debug)]
pub struct FbmSampler {
    grid: Grid,
    hurst: f64,
    factor: DMatrix<f64>,
}

/// `½ (s^{2H} + t^{2H} - |t - s|^{2H})`.
pub fn fbm_covariance(s: f64, t: f64, hurst: f64) -> f64 {
    let e = 2.0 * hurst;
    0.5 * (s.powf(e) + t.powf(e) - (t - s).abs().powf(e))
}

impl FbmSampler {
    pub fn new(grid: Grid, hurst: f64) -> Result<Self> {
        check_hurst(hurst)?;
        let n = grid.n_steps();
        let cov = DMatrix::from_fn(n, n, |a, b| fbm_covariance(grid.time(a + 1), grid.time(b + 1), hurst));
        let chol = match Cholesky::<f64, Dyn>::new(cov.clone()) {
            Some(c) => c,
            None => {
                let jitter = CHOLESKY_JITTER * cov.diagonal().max();
                log::warn!("fBm covariance not positive definite; retrying with jitter {jitter:e}");
                let mut jittered = cov;
                for a in 0..n {
                    jittered[(a, a)] += jitter;
                }
                Cholesky::new(jittered).ok_or_else(|| {
                    Error::Cholesky(format!("fBm covariance (N={n}, H={hurst}) is not positive definite"))
                })?
            }
        };
        Ok(FbmSampler { grid, hurst, factor: chol.l() })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// One standard fBm path `B^H` on the grid, from the given generator.
    pub fn sample_scalar(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = self.grid.n_steps();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mut out = vec![0.0; n + 1];
        for a in 0..n {
            let row = self.factor.row(a);
            let mut acc = 0.0;
            for b in 0..=a {
                acc += row[b] * z[b];
            }
            out[a + 1] = acc;
        }
        out
    }

    /// `X = Σ √λ_k B^{H,k} e_k` with the piecewise-linear enhancement.
    pub fn sample(&self, spectrum: &QSpectrum, seed: u64, alpha: f64) -> Result<DriverSample> {
        let d = spectrum.dim();
        let n = self.grid.n_steps();
        let mut first = vec![0.0; (n + 1) * d];
        for (k, lam) in spectrum.eigenvalues().iter().enumerate() {
            let path = self.sample_scalar(&mut component_rng(seed, k as u64));
            let s = lam.sqrt();
            for (i, v) in path.iter().enumerate() {
                first[i * d + k] = s * v;
            }
        }
        let rough = enhance_piecewise_linear(&Path::new(self.grid, d, first)?, alpha)?;
        Ok(DriverSample { rough, kind: DriverKind::GeometricFbm, hurst: self.hurst, fine_factor: 1, seed })
    }
}

/// Geometric Q-fBm driver; builds a fresh [`FbmSampler`].
pub fn sample_q_fbm(spectrum: &QSpectrum, hurst: f64, grid: Grid, seed: u64, alpha: f64) -> Result<DriverSample> {
    FbmSampler::new(grid, hurst)?.sample(spectrum, seed, alpha)
}

/// Everything needed to draw drivers of one kind repeatedly.
#[derive(Clone, Debug)]
pub struct DriverSpec {
    pub kind: DriverKind,
    pub spectrum: QSpectrum,
    pub hurst: f64,
    pub grid: Grid,
    pub fine_factor: usize,
    pub alpha: f64,
}

/// Reusable sampler for a [`DriverSpec`]; the fBm factorization is done once.
#[derive(Clone, Debug)]
pub struct DriverFactory {
    spec: DriverSpec,
    fbm: Option<FbmSampler>,
}

impl DriverFactory {
    pub fn new(spec: DriverSpec) -> Result<Self> {
        let fbm = match spec.kind {
            DriverKind::GeometricFbm => Some(FbmSampler::new(spec.grid, spec.hurst)?),
            _ => {
                check_fine_factor(spec.fine_factor)?;
                None
            }
        };
        crate::rough::RoughPath::zero(spec.grid, 1, spec.alpha)?;
        Ok(DriverFactory { spec, fbm })
    }

    pub fn spec(&self) -> &DriverSpec {
        &self.spec
    }

    pub fn sample(&self, seed: u64) -> Result<DriverSample> {
        let s = &self.spec;
        match (s.kind, &self.fbm) {
            (DriverKind::GeometricFbm, Some(f)) => f.sample(&s.spectrum, seed, s.alpha),
            (DriverKind::ItoWiener, _) => sample_q_wiener(&s.spectrum, s.grid, s.fine_factor, seed, s.alpha),
            (DriverKind::GeometricWiener, _) => sample_q_wiener_geometric(&s.spectrum, s.grid, s.fine_factor, seed, s.alpha),
            (DriverKind::GeometricFbm, None) => unreachable!("factory always builds the fBm factor"),
        }
    }
}

/// Monte Carlo moments `E|X_{s,t}|^p` and `E|𝕏_{s,t}|^p` over dyadic lags.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentScaling {
    pub lags: Vec<f64>,
    pub first_level: Vec<f64>,
    pub second_level: Vec<f64>,
    pub first_slope: f64,
    pub second_slope: f64,
}

/// Moments of one sample: per dyadic lag `2^ℓ h ≤ T/2`, the averages of
/// `|X_{s,t}|^p` and `|𝕏_{s,t}|^p` over the disjoint intervals of that length.
pub fn sample_moments(x: &RoughPath, p: u32) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    if p == 0 || !p.is_multiple_of(2) {
        return Err(Error::Parameter(format!("moment order must be a positive even integer, got {p}")));
    }
    let n = x.grid().n_steps();
    let h = x.grid().step();
    let (mut lags, mut m1, mut m2) = (Vec::new(), Vec::new(), Vec::new());
    let mut lag = 1;
    while lag <= n / 2 {
        let count = n / lag;
        let (mut a1, mut a2) = (0.0, 0.0);
        for c in 0..count {
            let (i, j) = (c * lag, (c + 1) * lag);
            a1 += linalg::norm(&x.increment(i, j)).powi(p as i32);
            a2 += linalg::norm(&x.chen_reconstruct(i, j)?).powi(p as i32);
        }
        lags.push(lag as f64 * h);
        m1.push(a1 / count as f64);
        m2.push(a2 / count as f64);
        lag *= 2;
    }
    Ok((lags, m1, m2))
}

/// Averages [`sample_moments`] over seeds and fits log-log slopes.
pub fn moment_scaling_probe<F>(sampler: F, seeds: &[u64], p: u32) -> Result<MomentScaling>
where
    F: Fn(u64) -> Result<RoughPath> + Sync,
{
    if seeds.is_empty() {
        return Err(Error::Parameter("moment probe needs at least one seed".into()));
    }
    let per_seed: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> =
        seeds.par_iter().map(|&seed| sample_moments(&sampler(seed)?, p)).collect::<Result<_>>()?;
    let lags = per_seed[0].0.clone();
    let avg = |pick: fn(&(Vec<f64>, Vec<f64>, Vec<f64>)) -> &Vec<f64>| -> Vec<f64> {
        (0..lags.len())
            .map(|l| per_seed.iter().map(|s| pick(s)[l]).sum::<f64>() / per_seed.len() as f64)
            .collect()
    };
    let first_level = avg(|s| &s.1);
    let second_level = avg(|s| &s.2);
    Ok(MomentScaling {
        first_slope: fit_slope(&lags, &first_level),
        second_slope: fit_slope(&lags, &second_level),
        lags,
        first_level,
        second_level,
    })
}

pub(crate) fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    stats::loglog_slope(&xs.iter().copied().zip(ys.iter().copied()).collect::<Vec<_>>())
}

/// `Σ_{k<j} Y_{t_k} X_{t_k,t_{k+1}}` for an `L(R^d, R^m)`-valued path `y`.
pub fn ito_integral_leftpoint(y: &Path, rough: &RoughPath, j: usize) -> Result<Vec<f64>> {
    let d = rough.dim();
    if y.grid() != rough.grid() {
        return Err(Error::Contract("integrand and driver must share a grid".into()));
    }
    if !y.dim().is_multiple_of(d) {
        return Err(Error::dim("left-point integrand", d, y.dim()));
    }
    rough.grid().check_index(j)?;
    let m = y.dim() / d;
    let mut out = vec![0.0; m];
    let mut x = vec![0.0; d];
    for k in 0..j {
        rough.first_level().increment_into(k, k + 1, &mut x);
        linalg::add_mat_vec(&mut out, y.at(k), &x);
    }
    Ok(out)
}

/// `(sin(X), cos(X))` componentwise as an `L(R^d, R^d)`-valued diagonal
/// integrand, an adapted functional of the driver.
pub fn sine_integrand(rough: Arc<RoughPath>) -> Result<ControlledPath> {
    let d = rough.dim();
    let field = crate::controlled::CoefficientField::new(d, d)
        .with_diffusion(move |_, y, o| {
            o.fill(0.0);
            for i in 0..d {
                o[i * d + i] = y[i].sin();
            }
        })
        .with_diffusion_derivative(move |_, y, o| {
            o.fill(0.0);
            for i in 0..d {
                o[(i * d + i) * d + i] = y[i].cos();
            }
        });
    let alpha = rough.alpha();
    crate::controlled::compose_smooth(&field, &ControlledPath::driver(rough))?.with_alpha(alpha)
}

/// Rough and left-point integrals of one integrand at one resolution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoincidencePoint {
    pub n_steps: usize,
    /// First component of the rough integral over `[0, T]`.
    pub rough: f64,
    /// First component of the left-point integral over `[0, T]`.
    pub ito: f64,
    /// Euclidean distance between the two integral vectors.
    pub gap: f64,
}

/// Rough vs left-point integral of `integrand(driver)` on the driver grid
/// coarsened by each factor (one fine sample shared across resolutions).
pub fn coincidence_check<F>(driver: &DriverSample, factors: &[usize], integrand: F) -> Result<Vec<CoincidencePoint>>
where
    F: Fn(Arc<RoughPath>) -> Result<ControlledPath>,
{
    factors
        .iter()
        .map(|&factor| {
            let rough = Arc::new(driver.rough.coarsen(factor)?);
            let cp = integrand(rough.clone())?;
            let n = rough.grid().n_steps();
            let r = rough_integral(&cp, 0, n)?;
            let ito = ito_integral_leftpoint(cp.y(), &rough, n)?;
            Ok(CoincidencePoint { n_steps: n, rough: r[0], ito: ito[0], gap: linalg::diff_norm(&r, &ito) })
        })
        .collect()
}

/// Seed-level aggregate of [`coincidence_check`] per resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct CoincidenceSummary {
    pub n_steps: Vec<usize>,
    pub median_gap: Vec<f64>,
    /// Root mean square of the finest left-point integral over seeds.
    pub integral_rms: f64,
    /// `median_gap / integral_rms`.
    pub relative_gap: Vec<f64>,
}

pub fn summarize_coincidence(per_seed: &[Vec<CoincidencePoint>]) -> Result<CoincidenceSummary> {
    let first = per_seed.first().ok_or_else(|| Error::Parameter("no coincidence samples".into()))?;
    let n_steps: Vec<usize> = first.iter().map(|p| p.n_steps).collect();
    let median_gap: Vec<f64> = (0..n_steps.len())
        .map(|r| stats::median(&per_seed.iter().map(|s| s[r].gap).collect::<Vec<_>>()))
        .collect();
    let finest = n_steps
        .iter()
        .enumerate()
        .max_by_key(|(_, n)| **n)
        .map(|(r, _)| r)
        .unwrap_or(0);
    let integral_rms = (per_seed.iter().map(|s| s[finest].ito.powi(2)).sum::<f64>() / per_seed.len() as f64).sqrt();
    let relative_gap = median_gap.iter().map(|g| g / integral_rms).collect();
    Ok(CoincidenceSummary { n_steps, median_gap, integral_rms, relative_gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rough::chen_defect;

    fn grid(n: usize) -> Grid {
        Grid::new(1.0, n).unwrap()
    }

    #[test]
    fn spectrum_parsing_and_normalization() {
        let s: QSpectrum = "polynomial(decay=2, d=8)".parse().unwrap();
        assert_eq!(s.dim(), 8);
        assert!((s.trace() - 1.0).abs() < 1e-15);
        assert!(s.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
        let e: QSpectrum = "0.25, 1.0 0.5".parse().unwrap();
        assert_eq!(e.eigenvalues(), &[1.0, 0.5, 0.25]);
        assert!("polynomial(decay=2)".parse::<QSpectrum>().is_err());
        assert!("1.0, -0.5".parse::<QSpectrum>().is_err());
    }

    #[test]
    fn wiener_sample_is_chen_consistent_and_deterministic() {
        let s = QSpectrum::polynomial(2.0, 3).unwrap();
        let a = sample_q_wiener(&s, grid(32), 8, 7, 0.45).unwrap();
        let b = sample_q_wiener(&s, grid(32), 8, 7, 0.45).unwrap();
        assert_eq!(a, b);
        let table = a.rough.full_table();
        assert!(table.max_chen_defect(a.rough.first_level()).unwrap().0 < 1e-12);
        assert!(chen_defect(a.rough.first_level(), &table, 0, 11, 32).unwrap() < 1e-12);
        assert_ne!(a, sample_q_wiener(&s, grid(32), 8, 8, 0.45).unwrap());
    }

    #[test]
    fn wiener_rejects_bad_fine_factor() {
        let s = QSpectrum::identity(1).unwrap();
        assert!(sample_q_wiener(&s, grid(4), 4, 0, 0.45).is_err());
        assert!(sample_q_wiener(&s, grid(4), 12, 0, 0.45).is_err());
    }

    #[test]
    fn geometric_samples_have_no_defect() {
        let s = QSpectrum::polynomial(1.0, 2).unwrap();
        let w = sample_q_wiener_geometric(&s, grid(16), 8, 3, 0.45).unwrap();
        assert!(w.rough.max_geometric_defect() < 1e-12);
        let f = sample_q_fbm(&s, 0.4, grid(16), 3, 0.35).unwrap();
        assert!(f.rough.max_geometric_defect() < 1e-12);
        assert_eq!(f.kind, DriverKind::GeometricFbm);
    }

    #[test]
    fn fbm_factor_reproduces_covariance() {
        let sampler = FbmSampler::new(grid(8), 0.4).unwrap();
        let l = &sampler.factor;
        let cov = l * l.transpose();
        for a in 0..8 {
            for b in 0..8 {
                let want = fbm_covariance((a + 1) as f64 / 8.0, (b + 1) as f64 / 8.0, 0.4);
                assert!((cov[(a, b)] - want).abs() < 1e-13);
            }
        }
        assert!(FbmSampler::new(grid(8), 0.3).is_err());
    }

    #[test]
    fn meta_round_trip() {
        let s = QSpectrum::identity(2).unwrap();
        let a = sample_q_wiener(&s, grid(8), 8, 99, 0.45).unwrap();
        let b = DriverSample::from_parts(a.rough.clone(), &a.meta()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn left_point_integral_of_constant() {
        let s = QSpectrum::identity(2).unwrap();
        let a = sample_q_wiener(&s, grid(16), 8, 1, 0.45).unwrap();
        let y = Path::constant(*a.rough.grid(), &[1.0, 2.0, -1.0, 0.5]);
        let v = ito_integral_leftpoint(&y, &a.rough, 16).unwrap();
        let x = a.rough.increment(0, 16);
        let want = [x[0] + 2.0 * x[1], -x[0] + 0.5 * x[1]];
        assert!(linalg::diff_norm(&v, &want) < 1e-14);
    }

    #[test]
    fn constant_integrand_has_no_gap() {
        let s = QSpectrum::identity(1).unwrap();
        let a = sample_q_wiener(&s, grid(64), 8, 5, 0.45).unwrap();
        let pts = coincidence_check(&a, &[1, 4, 16], |x| {
            let g = *x.grid();
            ControlledPath::operator(x, 1, Path::constant(g, &[2.0]), Path::zeros(g, 1))
        })
        .unwrap();
        assert_eq!(pts.iter().map(|p| p.n_steps).collect::<Vec<_>>(), vec![64, 16, 4]);
        assert!(pts.iter().all(|p| p.gap == 0.0));
    }

    #[test]
    fn linear_path_moments_scale_like_lag() {
        let g = grid(64);
        let probe = moment_scaling_probe(
            |_| {
                let p = Path::from_fn(g, 1, |t, o| o[0] = t).unwrap();
                enhance_piecewise_linear(&p, 0.45)
            },
            &[0, 1],
            2,
        )
        .unwrap();
        assert!((probe.first_slope - 2.0).abs() < 1e-10);
        assert!((probe.second_slope - 4.0).abs() < 1e-10);
        assert!(moment_scaling_probe(|_| RoughPath::zero(g, 1, 0.45), &[0], 3).is_err());
    }
}
