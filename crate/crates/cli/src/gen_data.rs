//! The `gen-data` command: synthetic `N(0, R)` observations for the
//! correlation model.

use std::path::Path;

use anyhow::{bail, Context};
use nalgebra::DMatrix;
use portkey::models::correlation::linalg::{equicorrelation, is_correlation_matrix};
use portkey::models::correlation::synth_data;
use portkey::stream_rng;

use crate::data::{read_matrix, write_matrix};

#[derive(Debug, Clone, PartialEq)]
pub enum Structure {
    Identity,
    Equicorrelated(f64),
    /// A `p x p` correlation matrix read from CSV.
    Custom(DMatrix<f64>),
}

impl Structure {
    pub fn from_csv(path: &Path) -> anyhow::Result<Self> {
        Ok(Structure::Custom(read_matrix(path)?))
    }

    pub fn matrix(&self, p: usize) -> anyhow::Result<DMatrix<f64>> {
        if p < 2 {
            bail!("p: need at least two variables, got {p}");
        }
        let r = match self {
            Structure::Identity => DMatrix::identity(p, p),
            Structure::Equicorrelated(rho) => {
                let lower = -1.0 / (p as f64 - 1.0);
                if !(*rho > lower && *rho < 1.0) {
                    bail!("rho: equicorrelation {rho} is not positive definite for p = {p}; need {lower} < rho < 1");
                }
                equicorrelation(p, *rho)
            }
            Structure::Custom(m) => {
                if m.nrows() != p || m.ncols() != p {
                    bail!(
                        "custom matrix is {}x{}, expected {p}x{p}",
                        m.nrows(),
                        m.ncols()
                    );
                }
                m.clone()
            }
        };
        if !is_correlation_matrix(&r) {
            bail!("matrix is not a positive definite correlation matrix");
        }
        Ok(r)
    }
}

/// Writes `n` rows of `N(0, R)` draws to `out`, columns `y1..yp`.
pub fn cmd_gen_data(
    n: usize,
    p: usize,
    structure: &Structure,
    seed: u64,
    out: &Path,
) -> anyhow::Result<()> {
    if n == 0 {
        bail!("n: need at least one observation");
    }
    let r = structure.matrix(p)?;
    let y = synth_data(n, &r, &mut stream_rng(seed, 0))?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_matrix(out, &y, "y")
}

#[cfg(test)]
mod tests {
    use super::*;
    use portkey::models::correlation::sample_correlation;

    #[test]
    fn identity_shape() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("y.csv");
        cmd_gen_data(10, 2, &Structure::Identity, 1, &out).unwrap();
        let y = read_matrix(&out).unwrap();
        assert_eq!((y.nrows(), y.ncols()), (10, 2));
    }

    #[test]
    fn equicorrelated_sample_correlations() {
        // sd of a sample correlation at rho = 0.5, n = 2000 is about
        // (1 - rho^2) / sqrt(n) = 0.017, so 0.05 is roughly 3 sd
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("y.csv");
        cmd_gen_data(2000, 4, &Structure::Equicorrelated(0.5), 7, &out).unwrap();
        let c = sample_correlation(&read_matrix(&out).unwrap());
        for i in 0..4 {
            for j in i + 1..4 {
                assert!((c[(i, j)] - 0.5).abs() < 0.05, "{}", c[(i, j)]);
            }
        }
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("y.csv");
        assert!(cmd_gen_data(10, 1, &Structure::Identity, 1, &out).is_err());
        assert!(cmd_gen_data(10, 4, &Structure::Equicorrelated(-0.5), 1, &out).is_err());
        let not_pd =
            DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0]);
        assert!(cmd_gen_data(10, 3, &Structure::Custom(not_pd), 1, &out).is_err());
        assert!(!out.exists());
    }
}
