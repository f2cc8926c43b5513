//! For an Itô Brownian rough path the rough integral of an adapted
//! integrand should agree with the left-point Itô sum as the grid refines.
//! The geometric lift serves as the control: it converges to Stratonovich.

use roughmild::drivers::{coincidence_check, sample_q_wiener, sample_q_wiener_geometric, sine_integrand, summarize_coincidence, QSpectrum};
use roughmild::rough::Grid;

fn main() -> anyhow::Result<()> {
    let spectrum = QSpectrum::polynomial(2.0, 2)?;
    let grid = Grid::new(1.0, 4096)?;
    let factors = [16, 4, 1];
    let (mut ito, mut strat) = (Vec::new(), Vec::new());
    for seed in 0..50 {
        let d = sample_q_wiener(&spectrum, grid, 8, seed, 0.45)?;
        ito.push(coincidence_check(&d, &factors, sine_integrand)?);
        let g = sample_q_wiener_geometric(&spectrum, grid, 8, seed, 0.45)?;
        strat.push(coincidence_check(&g, &factors, sine_integrand)?);
    }
    let ito = summarize_coincidence(&ito)?;
    let strat = summarize_coincidence(&strat)?;
    for k in 0..factors.len() {
        println!(
            "N={:5}  ito median gap {:.3e}  geometric median gap {:.3e}",
            ito.n_steps[k], ito.median_gap[k], strat.median_gap[k]
        );
    }
    Ok(())
}
