use rayon::prelude::*;

use super::path::Path;
use crate::error::{Error, Result};
use crate::linalg;

/// Second-level tensors for every grid pair `i <= j`, as produced by
/// [`super::RoughPath::full_table`] or read from an external file.
#[derive(Clone, Debug, PartialEq)]
pub struct PairTable {
    n_points: usize,
    dim: usize,
    data: Vec<f64>,
}

impl PairTable {
    pub fn zeros(n_points: usize, dim: usize) -> Self {
        let pairs = n_points * (n_points + 1) / 2;
        Self {
            n_points,
            dim,
            data: vec![0.0; pairs * dim * dim],
        }
    }

    /// `rows[i]` holds the tensors for `j = i..n_points`.
    pub(crate) fn from_rows(n_points: usize, dim: usize, rows: Vec<Vec<f64>>) -> Self {
        let mut data = Vec::with_capacity(n_points * (n_points + 1) / 2 * dim * dim);
        for r in rows {
            data.extend(r);
        }
        Self {
            n_points,
            dim,
            data,
        }
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        // row r holds the n - r entries j = r..n
        let start = i * self.n_points - i * i.saturating_sub(1) / 2;
        (start + (j - i)) * self.dim * self.dim
    }

    fn check(&self, i: usize, j: usize) -> Result<()> {
        for idx in [i, j] {
            if idx >= self.n_points {
                return Err(Error::IndexOutOfRange {
                    index: idx,
                    len: self.n_points,
                });
            }
        }
        if i > j {
            return Err(Error::Parameter(format!("pair ({i}, {j}) is not ordered")));
        }
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> Result<&[f64]> {
        self.check(i, j)?;
        let o = self.offset(i, j);
        Ok(&self.data[o..o + self.dim * self.dim])
    }

    pub fn set(&mut self, i: usize, j: usize, value: &[f64]) -> Result<()> {
        self.check(i, j)?;
        let dd = self.dim * self.dim;
        if value.len() != dd {
            return Err(Error::dim("pair table entry", dd, value.len()));
        }
        let o = self.offset(i, j);
        self.data[o..o + dd].copy_from_slice(value);
        Ok(())
    }

    /// Largest Chen defect over all ordered triples, with its location.
    pub fn max_chen_defect(&self, first_level: &Path) -> Result<(f64, (usize, usize, usize))> {
        self.check_against(first_level)?;
        let n = self.n_points;
        let d = self.dim;
        let best = (0..n)
            .into_par_iter()
            .map(|s| {
                let mut best = (0.0f64, (s, s, s));
                let mut xsu = vec![0.0; d];
                let mut xut = vec![0.0; d];
                for u in s..n {
                    first_level.increment_into(s, u, &mut xsu);
                    let st_su = self.get(s, u).expect("checked");
                    for t in u..n {
                        first_level.increment_into(u, t, &mut xut);
                        let st = self.get(s, t).expect("checked");
                        let ut = self.get(u, t).expect("checked");
                        let mut acc = 0.0;
                        for a in 0..d {
                            for b in 0..d {
                                let k = a * d + b;
                                let v = st[k] - st_su[k] - ut[k] - xsu[a] * xut[b];
                                acc += v * v;
                            }
                        }
                        let v = acc.sqrt();
                        if v > best.0 || v.is_nan() {
                            best = (v, (s, u, t));
                        }
                    }
                }
                best
            })
            .reduce(|| (0.0, (0, 0, 0)), |a, b| if b.0 > a.0 || b.0.is_nan() { b } else { a });
        Ok(best)
    }

    fn check_against(&self, first_level: &Path) -> Result<()> {
        if first_level.len() != self.n_points {
            return Err(Error::dim("pair table points", self.n_points, first_level.len()));
        }
        if first_level.dim() != self.dim {
            return Err(Error::dim("pair table dimension", self.dim, first_level.dim()));
        }
        Ok(())
    }
}

/// `|𝕏_{s,t} - 𝕏_{s,u} - 𝕏_{u,t} - X_{s,u} ⊗ X_{u,t}|_F` for a table of
/// externally supplied second-level values.
pub fn chen_defect(first_level: &Path, table: &PairTable, s: usize, u: usize, t: usize) -> Result<f64> {
    table.check_against(first_level)?;
    if !(s <= u && u <= t) {
        return Err(Error::Parameter(format!(
            "chen_defect needs s <= u <= t, got ({s}, {u}, {t})"
        )));
    }
    let mut v = table.get(s, t)?.to_vec();
    for (x, y) in v.iter_mut().zip(table.get(s, u)?) {
        *x -= y;
    }
    for (x, y) in v.iter_mut().zip(table.get(u, t)?) {
        *x -= y;
    }
    linalg::add_outer(
        &mut v,
        &first_level.increment(s, u),
        &first_level.increment(u, t),
        -1.0,
    );
    Ok(linalg::norm(&v))
}
