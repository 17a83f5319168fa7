use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Smallest Cholesky pivot accepted as positive.
pub const PIVOT_TOL: f64 = 1e-12;

/// Leading coefficients of `det(R)` in `r_ij` at or above this are treated as
/// a degenerate (near singular) configuration.
const LEADING_TOL: f64 = -1e-12;

/// Number of free correlations of a `p x p` correlation matrix.
pub fn n_correlations(p: usize) -> usize {
    p * p.saturating_sub(1) / 2
}

/// Cholesky factor, or `None` unless every pivot exceeds [`PIVOT_TOL`].
pub fn cholesky(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let chol = Cholesky::new(m.clone())?;
    chol.l_dirty()
        .diagonal()
        .iter()
        .all(|d| d * d > PIVOT_TOL)
        .then_some(chol)
}

pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    cholesky(m).is_some()
}

/// Symmetric, unit diagonal and positive definite.
pub fn is_correlation_matrix(m: &DMatrix<f64>) -> bool {
    m.is_square()
        && (0..m.nrows()).all(|i| (m[(i, i)] - 1.0).abs() < 1e-12)
        && m.iter().all(|v| v.abs() <= 1.0 + 1e-12)
        && (m - m.transpose()).amax() < 1e-12
        && is_positive_definite(m)
}

/// Upper-triangle entries `(0,1), (0,2), .., (p-2,p-1)` in row order.
pub fn upper_offdiag(m: &DMatrix<f64>) -> Vec<f64> {
    let p = m.nrows();
    let mut out = Vec::with_capacity(n_correlations(p));
    for i in 0..p {
        for j in (i + 1)..p {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Inverse of [`upper_offdiag`]: a symmetric unit-diagonal matrix.
pub fn from_upper_offdiag(p: usize, values: &[f64]) -> Result<DMatrix<f64>> {
    if values.len() != n_correlations(p) {
        return Err(Error::DimensionMismatch(format!(
            "{} correlations for p = {p}, expected {}",
            values.len(),
            n_correlations(p)
        )));
    }
    let mut m = DMatrix::identity(p, p);
    let mut it = values.iter();
    for i in 0..p {
        for j in (i + 1)..p {
            let v = *it.next().expect("length checked");
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Equicorrelation matrix with off-diagonal `rho`.
pub fn equicorrelation(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rho })
}

/// Interval of values for `r_ij` that keep the matrix positive definite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RBounds {
    pub lower: f64,
    pub upper: f64,
}

impl RBounds {
    pub fn contains(&self, r: f64) -> bool {
        r > self.lower && r < self.upper
    }
}

fn det_with(r: &DMatrix<f64>, i: usize, j: usize, value: f64) -> f64 {
    let mut m = r.clone();
    m[(i, j)] = value;
    m[(j, i)] = value;
    m.determinant()
}

/// Feasible interval for `r_ij` given all other correlations.
///
/// `det(R)` is quadratic in `r_ij` with a negative leading coefficient. The
/// quadratic is recovered exactly from its values at -1, 0 and 1, and its
/// roots, clipped to [-1, 1], bound the positive-definite region.
pub fn r_bounds(r: &DMatrix<f64>, i: usize, j: usize) -> Result<RBounds> {
    let p = r.nrows();
    if !r.is_square() || i >= p || j >= p || i == j {
        return Err(Error::DimensionMismatch(format!(
            "invalid entry ({i}, {j}) for a {p}x{p} matrix"
        )));
    }
    let f_m = det_with(r, i, j, -1.0);
    let f_0 = det_with(r, i, j, 0.0);
    let f_p = det_with(r, i, j, 1.0);
    let a = 0.5 * (f_p + f_m) - f_0;
    let b = 0.5 * (f_p - f_m);
    let c = f_0;
    if a >= LEADING_TOL {
        return Err(Error::NumericalDegeneracy(format!(
            "det(R) has leading coefficient {a:e} in r_{i}{j}"
        )));
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Err(Error::NumericalDegeneracy(format!(
            "no feasible value for r_{i}{j}: the remaining correlations are not positive definite"
        )));
    }
    let sq = disc.sqrt();
    let r1 = (-b + sq) / (2.0 * a);
    let r2 = (-b - sq) / (2.0 * a);
    Ok(RBounds {
        lower: r1.min(r2).max(-1.0),
        upper: r1.max(r2).min(1.0),
    })
}
