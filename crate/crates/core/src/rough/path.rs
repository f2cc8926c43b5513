use crate::error::{Error, Result};

/// Uniform discretization of `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    horizon: f64,
    n_steps: usize,
}

impl Grid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Parameter(format!(
                "grid horizon must be positive and finite, got {horizon}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::Parameter("grid needs at least one step".into()));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_points(&self) -> usize {
        self.n_steps + 1
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.horizon
        } else {
            i as f64 * self.step()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.time(i)).collect()
    }

    /// Grid keeping every `factor`-th point.
    pub fn coarsen(&self, factor: usize) -> Result<Grid> {
        if factor == 0 || !self.n_steps.is_multiple_of(factor) {
            return Err(Error::Parameter(format!(
                "coarsening factor {factor} does not divide {} steps",
                self.n_steps
            )));
        }
        Grid::new(self.horizon, self.n_steps / factor)
    }

    /// Grid with `factor` times as many steps.
    pub fn refine(&self, factor: usize) -> Result<Grid> {
        Grid::new(self.horizon, self.n_steps * factor.max(1))
    }

    pub(crate) fn check_index(&self, i: usize) -> Result<()> {
        if i > self.n_steps {
            Err(Error::IndexOutOfRange {
                index: i,
                len: self.n_points(),
            })
        } else {
            Ok(())
        }
    }
}

/// Grid-sampled path in `R^dim`, stored point-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    grid: Grid,
    dim: usize,
    values: Vec<f64>,
}

impl Path {
    pub fn new(grid: Grid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("path dimension must be positive".into()));
        }
        let expected = grid.n_points() * dim;
        if values.len() != expected {
            return Err(Error::dim("path values", expected, values.len()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "path entry {} at grid point {}",
                values[pos],
                pos / dim
            )));
        }
        Ok(Self { grid, dim, values })
    }

    pub fn zeros(grid: Grid, dim: usize) -> Self {
        Self {
            grid,
            dim,
            values: vec![0.0; grid.n_points() * dim],
        }
    }

    pub fn constant(grid: Grid, value: &[f64]) -> Self {
        let mut values = Vec::with_capacity(grid.n_points() * value.len());
        for _ in 0..grid.n_points() {
            values.extend_from_slice(value);
        }
        Self {
            grid,
            dim: value.len(),
            values,
        }
    }

    /// Samples `f(t, out)` at every grid point.
    pub fn from_fn(grid: Grid, dim: usize, mut f: impl FnMut(f64, &mut [f64])) -> Result<Self> {
        let mut values = vec![0.0; grid.n_points() * dim];
        for (i, chunk) in values.chunks_mut(dim).enumerate() {
            f(grid.time(i), chunk);
        }
        Path::new(grid, dim, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.n_points()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// `X_{t_i, t_j} = X_{t_j} - X_{t_i}`.
    pub fn increment(&self, i: usize, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.increment_into(i, j, &mut out);
        out
    }

    pub fn increment_into(&self, i: usize, j: usize, out: &mut [f64]) {
        let (a, b) = (self.at(i), self.at(j));
        for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
            *o = y - x;
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values
            .chunks(self.dim)
            .map(crate::linalg::norm)
            .fold(0.0, f64::max)
    }

    /// Keeps every `factor`-th sample.
    pub fn subsample(&self, factor: usize) -> Result<Path> {
        let grid = self.grid.coarsen(factor)?;
        let mut values = Vec::with_capacity(grid.n_points() * self.dim);
        for i in 0..grid.n_points() {
            values.extend_from_slice(self.at(i * factor));
        }
        Ok(Path {
            grid,
            dim: self.dim,
            values,
        })
    }

    /// Pointwise map into a path of dimension `out_dim`.
    pub fn map(&self, out_dim: usize, mut f: impl FnMut(usize, &[f64], &mut [f64])) -> Result<Path> {
        let mut values = vec![0.0; self.len() * out_dim];
        for (i, chunk) in values.chunks_mut(out_dim).enumerate() {
            f(i, self.at(i), chunk);
        }
        Path::new(self.grid, out_dim, values)
    }

    pub fn scaled(&self, c: f64) -> Path {
        Path {
            grid: self.grid,
            dim: self.dim,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// Points `i0..=i1` on a grid re-based to start at time zero.
    pub fn slice(&self, i0: usize, i1: usize) -> Result<Path> {
        self.grid.check_index(i1)?;
        if i0 >= i1 {
            return Err(Error::Parameter(format!("slice needs i0 < i1, got ({i0}, {i1})")));
        }
        let grid = Grid::new((i1 - i0) as f64 * self.grid.step(), i1 - i0)?;
        Ok(Path {
            grid,
            dim: self.dim,
            values: self.values[i0 * self.dim..(i1 + 1) * self.dim].to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        let g = Grid::new(2.0, 7).unwrap();
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.time(7), 2.0);
        let ts = g.times();
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(Grid::new(0.0, 4).is_err());
        assert!(Grid::new(1.0, 0).is_err());
        assert!(Grid::new(f64::NAN, 4).is_err());
        assert!(Grid::new(1.0, 8).unwrap().coarsen(3).is_err());
    }

    #[test]
    fn path_rejects_non_finite() {
        let g = Grid::new(1.0, 1).unwrap();
        assert!(matches!(
            Path::new(g, 1, vec![0.0, f64::INFINITY]),
            Err(Error::NonFinite(_))
        ));
        assert!(Path::new(g, 1, vec![0.0]).is_err());
    }

    #[test]
    fn subsample_keeps_nodes() {
        let g = Grid::new(1.0, 8).unwrap();
        let p = Path::from_fn(g, 1, |t, o| o[0] = t * t).unwrap();
        let q = p.subsample(4).unwrap();
        assert_eq!(q.len(), 3);
        assert_eq!(q.at(1)[0], 0.25);
        assert_eq!(q.at(2)[0], 1.0);
    }
}
