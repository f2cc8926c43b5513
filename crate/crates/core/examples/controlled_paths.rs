//! Controlled rough paths: the driver itself, a smooth function of it, and
//! the norms that control the remainder.

use std::sync::Arc;

use roughmild::controlled::{compose_smooth, CoefficientField, ControlledPath};
use roughmild::rough::{enhance_piecewise_linear, Grid, Path};

fn main() -> anyhow::Result<()> {
    let path = Path::from_fn(Grid::new(1.0, 256)?, 1, |t, x| x[0] = (8.0 * t).sin() + 0.5 * t)?;
    let rough = Arc::new(enhance_piecewise_linear(&path, 0.45)?);

    let x = ControlledPath::driver(rough.clone());
    println!("driver: {:?}", x.norms()?);

    // Y = exp(X), Y' = exp(X) as a 1x1 operator.
    let field = CoefficientField::new(1, 1)
        .with_diffusion(|_, y, o| o[0] = y[0].exp())
        .with_diffusion_derivative(|_, y, o| o[0] = y[0].exp());
    let y = compose_smooth(&field, &x)?;
    let norms = y.norms()?;
    println!("exp(X): |Y'|_a {:.4}  |R|_2a {:.4}  full {:.4}", norms.y_prime_alpha, norms.remainder_2alpha, norms.full);

    let finite = field.finite_difference_df(0.3, &[0.7])?;
    let exact = field.eval_df(0.3, &[0.7])?;
    println!("Df at 0.7: exact {:.8} finite difference {:.8}", exact[0], finite[0]);
    Ok(())
}
