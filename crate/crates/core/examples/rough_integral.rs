//! The compensated Riemann sum: ∫ sin(X) dX against the chain rule on a
//! smooth path, then sewing rates on a Brownian rough path.

use std::sync::Arc;

use roughmild::drivers::{sample_q_wiener_geometric, sine_integrand, QSpectrum};
use roughmild::gubinelli::{rough_integral, sewing_rate_probe, sewing_slope};
use roughmild::rough::{enhance_piecewise_linear, Grid, Path};

fn main() -> anyhow::Result<()> {
    for n in [64, 256, 1024] {
        let path = Path::from_fn(Grid::new(1.0, n)?, 1, |t, x| x[0] = 2.0 * (3.0 * t).sin())?;
        let rough = Arc::new(enhance_piecewise_linear(&path, 0.45)?);
        let integral = rough_integral(&sine_integrand(rough.clone())?, 0, n)?[0];
        let exact = 1.0 - (2.0 * 3.0f64.sin()).cos();
        println!("N={n:5}  integral {integral:.10}  error {:.2e}", (integral - exact).abs());
    }

    let grid = Grid::new(1.0, 4096)?;
    let driver = sample_q_wiener_geometric(&QSpectrum::polynomial(2.0, 2)?, grid, 8, 7, 0.45)?;
    let cp = sine_integrand(Arc::new(driver.rough))?;
    let points = sewing_rate_probe(&cp, 0, 4096, 8)?;
    for p in &points {
        println!("level {}  scale {:.2e}  defect {:.3e}", p.level, p.scale, p.defect);
    }
    println!("log-log slope {:.3} (3 alpha = 1.35)", sewing_slope(&points, 1.0 / 4096.0, 4));
    Ok(())
}
