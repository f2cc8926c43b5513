//! Sampling Q-Wiener and Q-fBm rough paths, and checking moment scaling of
//! both levels against the Hurst index.

use roughmild::drivers::{default_alpha, moment_scaling_probe, DriverFactory, DriverKind, DriverSpec, QSpectrum};
use roughmild::rough::Grid;

fn main() -> anyhow::Result<()> {
    let grid = Grid::new(1.0, 256)?;
    let seeds: Vec<u64> = (0..200).collect();
    for (kind, hurst) in [(DriverKind::ItoWiener, 0.5), (DriverKind::GeometricWiener, 0.5), (DriverKind::GeometricFbm, 0.4)] {
        let factory = DriverFactory::new(DriverSpec {
            kind,
            spectrum: QSpectrum::polynomial(2.0, 4)?,
            hurst,
            grid,
            fine_factor: 8,
            alpha: default_alpha(hurst),
        })?;
        let sample = factory.sample(1)?;
        let scaling = moment_scaling_probe(|s| Ok(factory.sample(s)?.rough), &seeds, 2)?;
        println!(
            "{:16} geometric defect {:.2e}  slopes {:.3} {:.3} (expect {:.2} {:.2})",
            kind.name(),
            sample.rough.max_geometric_defect(),
            scaling.first_slope,
            scaling.second_slope,
            2.0 * hurst,
            4.0 * hurst
        );
    }
    Ok(())
}
