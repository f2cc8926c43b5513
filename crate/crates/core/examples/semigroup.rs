//! Cached matrix exponentials: growth constants of a symmetric heat
//! generator and of a non-normal one with transient growth.

use roughmild::rough::Grid;
use roughmild::semigroup::{Generator, SemigroupTable};

fn main() -> anyhow::Result<()> {
    let grid = Grid::new(1.0, 128)?;
    let m = 32;
    let heat = Generator::Laplacian1d { size: m, spacing: 1.0 / (m + 1) as f64, diffusivity: 0.05 };
    for (name, generator) in [("heat", heat), ("non-normal", Generator::NonNormal { size: 6 })] {
        let table = SemigroupTable::from_generator(&generator, grid)?;
        println!(
            "{name}: symmetric {} M {:.3} omega {:.3}",
            table.is_symmetric(),
            table.growth_m(),
            table.growth_omega()
        );
        let y: Vec<f64> = (0..table.size()).map(|i| (i as f64 * 0.4).sin()).collect();
        let s_half = table.apply(64, &y);
        println!("  |y| {:.4}  |S_0.5 y| {:.4}", norm(&y), norm(&s_half));
        println!("  graph norms {:.3} {:.3}", table.graph_norm(&y, 1)?, table.graph_norm(&y, 2)?);
        let est = table.quad_estimate_check(&y)?;
        println!("  |(S_t - Id) y| / t against |Ay|: ratio {:.4} bound {:.4}", est.max_ratio, est.bound);
    }
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
