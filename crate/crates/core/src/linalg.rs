//! Small dense helpers on flat row-major buffers.

use nalgebra::DMatrix;

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `out[a * n + b] += scale * u[a] * v[b]`
pub fn add_outer(out: &mut [f64], u: &[f64], v: &[f64], scale: f64) {
    let n = v.len();
    for (a, ua) in u.iter().enumerate() {
        let row = &mut out[a * n..(a + 1) * n];
        let s = scale * ua;
        for (o, vb) in row.iter_mut().zip(v) {
            *o += s * vb;
        }
    }
}

pub fn outer(u: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u.len() * v.len()];
    add_outer(&mut out, u, v, 1.0);
    out
}

/// `out += mat * v` with `mat` stored row-major as `rows x v.len()`.
pub fn add_mat_vec(out: &mut [f64], mat: &[f64], v: &[f64]) {
    let cols = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &mat[i * cols..(i + 1) * cols];
        *o += row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

pub fn mat_vec(mat: &[f64], v: &[f64], rows: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows];
    add_mat_vec(&mut out, mat, v);
    out
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(1.0);
    (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol * scale))
}
