mod common;

use std::sync::Arc;

use common::{from_increments, grid, increments, smooth_driver};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use roughmild::controlled::ControlledPath;
use roughmild::convolution::{
    convolution_decomposition_probe, regular_convolution, regular_convolution_path, rough_convolution,
    rough_convolution_path, Quadrature,
};
use roughmild::drivers::sine_integrand;
use roughmild::gubinelli::rough_integral_path;
use roughmild::linalg::operator_norm;
use roughmild::rough::{holder_norm, Path, RoughPath};
use roughmild::semigroup::{exponential, Generator, SemigroupTable};

/// `exp(A)` from a 40-term Taylor series after scaling by `2^-s`, then squaring.
fn taylor_exp(a: &DMatrix<f64>) -> DMatrix<f64> {
    let s = (a.norm().max(1.0).log2().ceil() as i32 + 4).max(0);
    let scaled = a / 2f64.powi(s);
    let n = a.nrows();
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..40 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

fn random_matrix(entries: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| entries[(i * n + j) % entries.len()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn exponential_matches_taylor(entries in prop::collection::vec(-2.0f64..2.0, 1..16), n in 1usize..5, t in 0.0f64..1.5) {
        let a = random_matrix(&entries, n);
        let sym = (&a + a.transpose()) * 0.5;
        for m in [a, sym] {
            let e = exponential(&m, t);
            let oracle = taylor_exp(&(&m * t));
            prop_assert!((e - &oracle).amax() <= 1e-10 * oracle.amax().max(1.0));
        }
    }

    #[test]
    fn semigroup_law_on_random_pairs(entries in prop::collection::vec(-3.0f64..1.0, 1..16), n in 1usize..5, j in 0usize..=32, k in 0usize..=32) {
        let a = random_matrix(&entries, n);
        let table = SemigroupTable::build(a, grid(64)).unwrap();
        let product = table.step_exponential(j) * table.step_exponential(k);
        let target = table.step_exponential(j + k);
        prop_assert!((target - product).amax() <= 1e-10 * target.amax().max(1.0));
    }

    #[test]
    fn zero_generator_convolution_is_the_rough_integral((d, incs) in increments(24, 3)) {
        let rough = Arc::new(from_increments(&incs, d));
        let table = SemigroupTable::from_generator(&Generator::Zero { size: d }, *rough.grid()).unwrap();
        let cp = sine_integrand(rough).unwrap();
        let conv = rough_convolution_path(&table, &cp).unwrap();
        let integral = rough_integral_path(&cp).unwrap();
        prop_assert_eq!(conv.values(), integral.values());
    }

    #[test]
    fn split_identity_holds((d, incs) in increments(24, 2), i in 0usize..24, len in 0usize..24) {
        let rough = Arc::new(from_increments(&incs, d));
        let n = rough.grid().n_steps();
        let (i, j) = (i.min(n), (i + len).min(n));
        let generator = Generator::Diagonal((0..d).map(|k| -1.0 - k as f64).collect());
        let table = SemigroupTable::from_generator(&generator, *rough.grid()).unwrap();
        let dec = convolution_decomposition_probe(&table, &sine_integrand(rough).unwrap(), i, j).unwrap();
        prop_assert!(dec.split_defect <= 1e-10);
    }
}

#[test]
fn growth_envelope_and_graph_norm_envelope() {
    for generator in [
        Generator::Laplacian1d { size: 8, spacing: 1.0 / 9.0, diffusivity: 1.0 },
        Generator::NonNormal { size: 6 },
        Generator::Diagonal(vec![0.5, -2.0]),
    ] {
        let table = SemigroupTable::from_generator(&generator, grid(32)).unwrap();
        let (m, w) = (table.growth_m(), table.growth_omega());
        let y: Vec<f64> = (0..table.size()).map(|i| (i as f64 * 1.7).sin() + 0.3).collect();
        for k in 0..=32 {
            let t = table.grid().time(k);
            let env = m * (w * t).exp() * (1.0 + 1e-12);
            assert!(operator_norm(table.step_exponential(k)) <= env);
            // S commutes with A, so the same envelope holds in the D(A) graph norm.
            let moved = table.apply(k, &y);
            assert!(table.graph_norm(&moved, 1).unwrap() <= env * table.graph_norm(&y, 1).unwrap());
        }
    }
}

#[test]
fn generator_consistency_is_first_order() {
    let a = Generator::NonNormal { size: 4 }.matrix();
    let y = DVector::from_vec(vec![1.0, -0.5, 0.25, 2.0]);
    let t = 0.3;
    let st = exponential(&a, t);
    let target = &a * (&st * &y);
    let errors: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
        .iter()
        .map(|h| ((exponential(&a, t + h) * &y - &st * &y) / *h - &target).norm())
        .collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio - 2.0).abs() < 0.1, "{errors:?}");
    }
}

#[test]
fn integral_identity_is_second_order() {
    let a = Generator::Laplacian1d { size: 6, spacing: 1.0 / 7.0, diffusivity: 0.05 }.matrix();
    let y = DVector::from_vec(vec![1.0, 0.0, -1.0, 2.0, 0.5, 0.0]);
    let t = 1.0;
    let exact = exponential(&a, t) * &y - &y;
    let error = |n: usize| {
        let h = t / n as f64;
        let mut integral = DVector::zeros(6);
        for k in 0..=n {
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            integral += exponential(&a, k as f64 * h) * &y * (w * h);
        }
        (&a * integral - &exact).norm()
    };
    let (e1, e2, e3) = (error(16), error(32), error(64));
    assert!((e1 / e2 - 4.0).abs() < 0.2 && (e2 / e3 - 4.0).abs() < 0.2, "{e1} {e2} {e3}");
}

#[test]
fn regular_convolution_of_constant_matches_closed_form() {
    let lambda = -2.0;
    let table = |n: usize| SemigroupTable::from_generator(&Generator::Diagonal(vec![lambda]), grid(n)).unwrap();
    let exact = ((lambda * 1.0f64).exp() - 1.0) / lambda;
    let error = |n: usize, quad| {
        let g = Path::constant(grid(n), &[1.0]);
        (regular_convolution(&table(n), &g, n, quad).unwrap()[0] - exact).abs()
    };
    let left = error(64, Quadrature::LeftEndpoint) / error(128, Quadrature::LeftEndpoint);
    let trap = error(64, Quadrature::Trapezoid) / error(128, Quadrature::Trapezoid);
    assert!((left - 2.0).abs() < 0.1, "{left}");
    assert!((trap - 4.0).abs() < 0.1, "{trap}");
}

#[test]
fn regular_convolution_holder_bound() {
    let n = 128;
    let alpha = 0.4;
    let table = SemigroupTable::from_generator(&Generator::Laplacian1d { size: 8, spacing: 1.0 / 9.0, diffusivity: 1.0 }, grid(n)).unwrap();
    let g = Path::from_fn(grid(n), 8, |t, o| {
        for (i, v) in o.iter_mut().enumerate() {
            *v = ((i + 1) as f64 * 5.0 * t).cos();
        }
    })
    .unwrap();
    let conv = regular_convolution_path(&table, &g, Quadrature::LeftEndpoint).unwrap();
    let lhs = holder_norm(&conv, 2.0 * alpha, None).unwrap();
    let (m, w, t) = (table.growth_m(), table.growth_omega(), 1.0f64);
    let rhs = (1.0 + t) * m * (w * t).exp() * g.sup_norm() * t.powf(1.0 - 2.0 * alpha);
    assert!(lhs <= rhs, "{lhs} > {rhs}");
}

#[test]
fn decomposition_vanishes_for_trivial_cases() {
    let rough = smooth_driver(32, 2);
    let cp = sine_integrand(rough.clone()).unwrap();
    let zero = SemigroupTable::from_generator(&Generator::Zero { size: 2 }, grid(32)).unwrap();
    let dec = convolution_decomposition_probe(&zero, &cp, 8, 20).unwrap();
    assert!(dec.term1.iter().chain(&dec.term2).all(|v| *v == 0.0));
    let diag = SemigroupTable::from_generator(&Generator::Diagonal(vec![-1.0, -3.0]), grid(32)).unwrap();
    let same = convolution_decomposition_probe(&diag, &cp, 12, 12).unwrap();
    assert!(same.term1.iter().chain(&same.term2).all(|v| *v == 0.0));
}

/// `∫_0^1 e^{λ(1-r)} dX_r` for `X_r = sin(2r)`, by composite Simpson on a fine grid.
fn scalar_stochastic_convolution(lambda: f64) -> f64 {
    let n = 20_000;
    let h = 1.0 / n as f64;
    let f = |r: f64| (lambda * (1.0 - r)).exp() * 2.0 * (2.0 * r).cos();
    (0..=n)
        .map(|k| {
            let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            w * f(k as f64 * h)
        })
        .sum::<f64>()
        * h
        / 3.0
}

#[test]
fn rough_convolution_of_constant_converges_to_quadrature() {
    let lambda = -3.0;
    let exact = scalar_stochastic_convolution(lambda);
    let error = |n: usize| {
        let rough: Arc<RoughPath> = smooth_driver(n, 1);
        let table = SemigroupTable::from_generator(&Generator::Diagonal(vec![lambda]), grid(n)).unwrap();
        let g = *rough.grid();
        let cp = ControlledPath::operator(rough, 1, Path::constant(g, &[1.0]), Path::zeros(g, 1)).unwrap();
        (rough_convolution(&table, &cp, n).unwrap()[0] - exact).abs()
    };
    let (e1, e2) = (error(128), error(256));
    assert!(e2 < 2e-2 && (e1 / e2 - 2.0).abs() < 0.2, "{e1} {e2}");
}
