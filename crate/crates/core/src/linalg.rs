//! Small dense-vector helpers. State and input vectors are plain slices.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `a + s * 1`, the uniform shift used by the axis-uniform interval.
pub fn shift(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x + s).collect()
}

/// `‖a + s·1‖₂` without allocating.
pub fn shifted_norm(a: &[f64], s: f64) -> f64 {
    a.iter().map(|x| (x + s) * (x + s)).sum::<f64>().sqrt()
}

/// `x + scale * d`
pub fn axpy(x: &[f64], scale: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + scale * b).collect()
}

/// Row-major `n×m` matrix times an `m`-vector.
pub fn mat_vec(rows: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    rows.iter().map(|r| dot(r, v)).collect()
}

/// Spectral norm of a row-major matrix, via the largest eigenvalue of `AᵀA`.
pub fn spectral_norm(rows: &[Vec<f64>]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let m = rows[0].len();
    let a = nalgebra::DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]);
    let ata = a.transpose() * &a;
    ata.symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(0.0_f64, f64::max)
        .sqrt()
}
