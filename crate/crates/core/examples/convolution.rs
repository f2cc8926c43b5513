//! Regular and rough convolutions against the heat semigroup, and the
//! split of the rough convolution increment into its two terms.

use std::sync::Arc;

use nalgebra::DMatrix;
use roughmild::controlled::{compose_linear, LinearMap};
use roughmild::convolution::{convolution_decomposition_probe, regular_convolution, rough_convolution, Quadrature};
use roughmild::drivers::{sample_q_fbm, sine_integrand, QSpectrum};
use roughmild::rough::{Grid, Path};
use roughmild::semigroup::{Generator, SemigroupTable};

fn main() -> anyhow::Result<()> {
    let (m, d, n) = (8, 2, 512);
    let grid = Grid::new(1.0, n)?;
    let table = SemigroupTable::from_generator(
        &Generator::Laplacian1d { size: m, spacing: 1.0 / (m + 1) as f64, diffusivity: 0.02 },
        grid,
    )?;

    let forcing = Path::from_fn(grid, m, |t, g| g.iter_mut().enumerate().for_each(|(i, v)| *v = (t + i as f64).cos()))?;
    for quad in [Quadrature::LeftEndpoint, Quadrature::Trapezoid] {
        let v = regular_convolution(&table, &forcing, n, quad)?;
        println!("{quad:?}: first entries {:.6} {:.6}", v[0], v[1]);
    }

    let driver = sample_q_fbm(&QSpectrum::polynomial(2.0, d)?, 0.45, grid, 3, 0.4)?;
    let rough = Arc::new(driver.rough);
    // Integrand Y_t = B sin(X_t), with sin acting diagonally and B: R^d -> R^m fixed.
    let b = DMatrix::from_fn(m, d, |i, k| ((i + 2 * k) % 5) as f64 * 0.2 - 0.4);
    let integrand = compose_linear(&LinearMap::Constant(b), &sine_integrand(rough)?)?;
    let conv = rough_convolution(&table, &integrand, n)?;
    println!("rough convolution at T: {:.5?}", &conv[..3]);

    let split = convolution_decomposition_probe(&table, &integrand, n / 2, n)?;
    println!("split defect {:.2e}  |term1| {:.4}  |term2| {:.4}", split.split_defect, l2(&split.term1), l2(&split.term2));
    Ok(())
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
