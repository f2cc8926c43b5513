mod common;

use std::sync::Arc;

use common::{from_increments, grid, increments, smooth_driver};
use proptest::prelude::*;
use roughmild::controlled::{CoefficientField, ControlledPath};
use roughmild::drivers::{default_alpha, sample_q_wiener_geometric, sine_integrand, FbmSampler, QSpectrum};
use roughmild::gubinelli::{rough_integral, sewing_rate_probe, sewing_slope};
use roughmild::rough::{Path, RoughPath};

/// Geometric chain rule oracle: `∫_0^T sin(X) dX = cos(X_0) - cos(X_T)` per component.
fn sine_oracle_error(rough: Arc<RoughPath>) -> f64 {
    let n = rough.grid().n_steps();
    let cp = sine_integrand(rough.clone()).unwrap();
    let value = rough_integral(&cp, 0, n).unwrap();
    let x = rough.first_level();
    (0..rough.dim()).map(|k| (value[k] - (x.at(0)[k].cos() - x.at(n)[k].cos())).abs()).fold(0.0, f64::max)
}

/// The constant integrand `Id ∈ L(R^d, R^d)` with zero derivative.
fn identity_integrand(rough: Arc<RoughPath>) -> ControlledPath {
    let d = rough.dim();
    let id: Vec<f64> = (0..d * d).map(|i| if i % (d + 1) == 0 { 1.0 } else { 0.0 }).collect();
    let g = *rough.grid();
    ControlledPath::operator(rough, d, Path::constant(g, &id), Path::zeros(g, d * d * d)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn integral_is_additive((d, incs) in increments(40, 3), split in 0.0f64..1.0) {
        let rough = Arc::new(from_increments(&incs, d));
        let n = rough.grid().n_steps();
        let k = ((n as f64) * split) as usize;
        let cp = sine_integrand(rough).unwrap();
        let whole = rough_integral(&cp, 0, n).unwrap();
        let (a, b) = (rough_integral(&cp, 0, k).unwrap(), rough_integral(&cp, k, n).unwrap());
        for c in 0..d {
            prop_assert!((whole[c] - a[c] - b[c]).abs() <= 1e-13 * (1.0 + whole[c].abs()));
        }
    }

    #[test]
    fn integral_is_linear((d, incs) in increments(30, 2), s in -3.0f64..3.0, t in -3.0f64..3.0) {
        let rough = Arc::new(from_increments(&incs, d));
        let n = rough.grid().n_steps();
        let y = sine_integrand(rough.clone()).unwrap();
        let z = identity_integrand(rough);
        let lhs = rough_integral(&y.combine(s, &z, t).unwrap(), 0, n).unwrap();
        let (iy, iz) = (rough_integral(&y, 0, n).unwrap(), rough_integral(&z, 0, n).unwrap());
        for c in 0..d {
            prop_assert!((lhs[c] - s * iy[c] - t * iz[c]).abs() <= 1e-12 * (1.0 + lhs[c].abs()));
        }
    }

    #[test]
    fn identity_integrates_to_increment((d, incs) in increments(30, 3)) {
        let rough = Arc::new(from_increments(&incs, d));
        let n = rough.grid().n_steps();
        let v = rough_integral(&identity_integrand(rough.clone()), 0, n).unwrap();
        let x = rough.increment(0, n);
        for a in 0..d {
            prop_assert!((v[a] - x[a]).abs() <= 1e-12 * (1.0 + x[a].abs()));
        }
    }
}

#[test]
fn smooth_driver_matches_chain_rule() {
    let coarse = sine_oracle_error(smooth_driver(64, 2));
    let fine = sine_oracle_error(smooth_driver(256, 2));
    assert!(fine < 1e-4, "{fine}");
    // Third-order local error sums to second order globally.
    let rate = (coarse / fine).log2() / 2.0;
    assert!(rate > 1.8, "rate {rate}");
}

#[test]
fn fbm_driver_converges_to_chain_rule() {
    let hurst = 0.45;
    let n = 2048;
    let sampler = FbmSampler::new(grid(n), hurst).unwrap();
    let spectrum = QSpectrum::identity(1).unwrap();
    let mut ratios = Vec::new();
    for seed in 0..6 {
        let sample = sampler.sample(&spectrum, seed, default_alpha(hurst)).unwrap();
        let coarse = sine_oracle_error(Arc::new(sample.coarsen(16).unwrap().rough));
        let fine = sine_oracle_error(Arc::new(sample.rough));
        ratios.push(fine / coarse);
    }
    ratios.sort_by(f64::total_cmp);
    assert!(ratios[3] < 0.5, "{ratios:?}");
}

#[test]
fn sewing_rate_on_geometric_wiener() {
    let n = 1024;
    let alpha = default_alpha(0.5);
    let spectrum = QSpectrum::polynomial(2.0, 2).unwrap();
    for seed in 0..4 {
        let rough = Arc::new(sample_q_wiener_geometric(&spectrum, grid(n), 8, seed, alpha).unwrap().rough);
        let cp = sine_integrand(rough.clone()).unwrap();
        let points = sewing_rate_probe(&cp, 0, n, 10).unwrap();
        let slope = sewing_slope(&points, rough.grid().step(), 4);
        assert!(slope >= 3.0 * alpha - 0.1, "seed {seed}: {slope}");
    }
}

#[test]
fn linear_integrand_has_area_correction() {
    // Y = f(X) with f(x) = x in d = 1 gives ∫ X dX = X_T² / 2 exactly on geometric lifts.
    let rough = smooth_driver(17, 1);
    let field = CoefficientField::new(1, 1)
        .with_diffusion(|_, y, o| o[0] = y[0])
        .with_diffusion_derivative(|_, _, o| o[0] = 1.0);
    let x = rough.first_level().clone();
    let state = ControlledPath::state(rough.clone(), x, Path::constant(*rough.grid(), &[1.0])).unwrap();
    let cp = roughmild::controlled::compose_smooth(&field, &state).unwrap();
    let v = rough_integral(&cp, 0, 17).unwrap()[0];
    let xt = rough.first_level().at(17)[0];
    assert!((v - 0.5 * xt * xt).abs() < 1e-13);
}
