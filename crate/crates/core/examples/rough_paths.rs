//! Lift a smooth path to a rough path, check Chen and the geometric
//! relation, measure Hölder norms and round-trip the path through a file.

use roughmild::rough::{enhance_piecewise_linear, holder_norm, read_rough_path, write_rough_path, Grid, Path};

fn main() -> anyhow::Result<()> {
    let grid = Grid::new(1.0, 200)?;
    let path = Path::from_fn(grid, 2, |t, x| {
        x[0] = (6.0 * t).sin();
        x[1] = t * t - (3.0 * t).cos();
    })?;
    let rough = enhance_piecewise_linear(&path, 0.45)?;

    let (chen, worst) = rough.full_table().max_chen_defect(rough.first_level())?;
    println!("max Chen defect       {chen:.2e} at {worst:?}");
    println!("max geometric defect  {:.2e}", rough.max_geometric_defect());
    println!("|X|_0.45              {:.4}", holder_norm(rough.first_level(), 0.45, None)?);
    println!("|XX|_0.90             {:.4}", rough.second_level_norm(0.45)?);

    // 𝕏_{0,T} from step areas, and the Lévy area as its antisymmetric part.
    let xx = rough.chen_reconstruct(0, 200)?;
    println!("XX_0T = {:?}", xx);
    println!("Levy area = {:.6}", 0.5 * (xx[1] - xx[2]));

    let check = rough.scaling_bound_check(0.4, 0.45)?;
    println!("scaling bound lhs {:.4} rhs {:.4} holds {}", check.lhs, check.rhs, check.holds);

    let mut buf = Vec::new();
    write_rough_path(&mut buf, &rough, None, None)?;
    let back = read_rough_path(buf.as_slice())?;
    println!("file round trip equal: {}", back.rough == rough);
    Ok(())
}
