//! Driving the experiment runner from a config string, as the binary does.

use roughmild::harness::{run_solve, Config, RunOptions};

const CONFIG: &str = "\
seed = 4
[grid]
steps = 256
[driver]
kind = geometric_fbm
hurst = 0.4
spectrum = 1
[solve]
preset = linear_scalar_geometric
";

fn main() -> anyhow::Result<()> {
    let config = Config::parse(CONFIG)?;
    let out_dir = std::env::temp_dir().join("roughmild-example");
    let opts = RunOptions { out_dir: out_dir.clone(), reproducible: true, ..RunOptions::default() };
    let outcome = run_solve(&config, &opts)?;
    println!("config hash {}", config.hash());
    println!("{outcome:#?}");
    println!("files in {}", out_dir.display());
    Ok(())
}
