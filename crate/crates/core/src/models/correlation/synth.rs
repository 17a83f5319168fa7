//! Synthetic Gaussian data with a known correlation matrix.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

use super::linalg::{cholesky, is_correlation_matrix};

/// `n` iid rows from `N_p(0, true_r)`.
pub fn synth_data<R: Rng + ?Sized>(
    n: usize,
    true_r: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let p = true_r.nrows();
    if p < 2 {
        return Err(Error::DimensionMismatch(format!(
            "p = {p}: no correlations to estimate"
        )));
    }
    if !is_correlation_matrix(true_r) {
        return Err(Error::domain(
            "true correlation matrix must be symmetric, unit diagonal and positive definite",
        ));
    }
    let l = cholesky(true_r).expect("checked positive definite").l();
    let mut y = DMatrix::zeros(n, p);
    for mut row in y.row_iter_mut() {
        let z = DVector::from_fn(p, |_, _| StandardNormal.sample(rng));
        row.copy_from(&(&l * z).transpose());
    }
    Ok(y)
}

/// Sample correlation matrix of the columns of `y`.
pub fn sample_correlation(y: &DMatrix<f64>) -> DMatrix<f64> {
    let z = standardize(y);
    let n = y.nrows() as f64;
    let c = z.transpose() * &z / n;
    DMatrix::from_fn(
        c.nrows(),
        c.ncols(),
        |i, j| if i == j { 1.0 } else { c[(i, j)] },
    )
}

/// Centers each column and scales it to unit (population) variance.
/// Constant columns are only centered.
pub fn standardize(y: &DMatrix<f64>) -> DMatrix<f64> {
    let n = y.nrows().max(1) as f64;
    let mut out = y.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / n).sqrt();
        if sd > 0.0 {
            col /= sd;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::correlation::linalg::{equicorrelation, upper_offdiag};
    use crate::rng::stream_rng;

    #[test]
    fn identity_gives_small_correlations() {
        let mut rng = stream_rng(81, 0);
        let n = 4000;
        let y = synth_data(n, &DMatrix::identity(3, 3), &mut rng).unwrap();
        let bound = 4.0 / (n as f64).sqrt();
        assert!(upper_offdiag(&sample_correlation(&y))
            .iter()
            .all(|r| r.abs() < bound));
    }

    #[test]
    fn equicorrelation_is_recovered() {
        let mut rng = stream_rng(82, 0);
        let y = synth_data(2000, &equicorrelation(4, 0.5), &mut rng).unwrap();
        for r in upper_offdiag(&sample_correlation(&y)) {
            assert!((r - 0.5).abs() < 0.05, "{r}");
        }
    }

    #[test]
    fn invalid_inputs() {
        let mut rng = stream_rng(83, 0);
        assert!(matches!(
            synth_data(10, &DMatrix::identity(1, 1), &mut rng),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(synth_data(10, &equicorrelation(3, -0.7), &mut rng).is_err());
    }

    #[test]
    fn standardized_columns() {
        let y = DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        let z = standardize(&y);
        assert!(z.column(0).sum().abs() < 1e-12);
        assert!((z.column(0).norm_squared() / 3.0 - 1.0).abs() < 1e-12);
        assert!(z.column(1).iter().all(|&v| v == 0.0));
    }
}
