#![allow(dead_code)]

use std::sync::Arc;

use proptest::prelude::*;
use roughmild::rough::{enhance_piecewise_linear, Grid, Path, RoughPath};

pub fn grid(n: usize) -> Grid {
    Grid::new(1.0, n).unwrap()
}

/// Smooth deterministic driver `X^k_t = sin((k + 2) t) + t k`, geometrically lifted.
pub fn smooth_driver(n: usize, d: usize) -> Arc<RoughPath> {
    let p = Path::from_fn(grid(n), d, |t, o| {
        for (k, v) in o.iter_mut().enumerate() {
            *v = ((k + 2) as f64 * t).sin() + t * k as f64;
        }
    })
    .unwrap();
    Arc::new(enhance_piecewise_linear(&p, 0.45).unwrap())
}

/// Piecewise-linear rough path through the given increments.
pub fn from_increments(incs: &[f64], d: usize) -> RoughPath {
    let n = incs.len() / d;
    let mut values = vec![0.0; (n + 1) * d];
    for i in 0..n {
        for k in 0..d {
            values[(i + 1) * d + k] = values[i * d + k] + incs[i * d + k];
        }
    }
    enhance_piecewise_linear(&Path::new(grid(n), d, values).unwrap(), 0.4).unwrap()
}

/// Strategy: (d, increments) with `n` in `[2, max_n]` steps.
pub fn increments(max_n: usize, max_d: usize) -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1..=max_d, 2..=max_n).prop_flat_map(|(d, n)| (Just(d), prop::collection::vec(-1.0f64..1.0, n * d)))
}

/// Perturbs the per-step areas away from geometric while keeping Chen.
pub fn with_random_areas(base: &RoughPath, noise: &[f64]) -> RoughPath {
    let areas: Vec<f64> = base.step_areas().iter().zip(noise.iter().cycle()).map(|(a, e)| a + e).collect();
    RoughPath::new(base.first_level().clone(), areas, base.alpha()).unwrap()
}
