//! Exact transition matrices on small finite state spaces.
//!
//! Used to verify reversibility of the acceptance family
//! `pi(y) q(y, x) / (pi(x) q(x, y) + pi(y) q(y, x) + d(x, y))` by direct
//! matrix checks.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::factory::{analytic_alpha_flipped, analytic_alpha_portkey};

/// Largest state space accepted by [`finite_state_transition_matrix`].
pub const MAX_STATES: usize = 50;

const STOCHASTIC_TOL: f64 = 1e-9;
const BOUND_RTOL: f64 = 1e-12;

/// How the extra denominator term `d(x, y)` is produced.
#[derive(Debug, Clone)]
pub enum AcceptanceMode {
    /// Portkey acceptance; `bounds[(x, y)]` is `c` for `pi(x) q(x, y)`.
    Portkey { bounds: DMatrix<f64> },
    /// Flipped portkey acceptance; `bounds[(x, y)]` is `c~` for
    /// `1 / (pi(x) q(x, y))`.
    Flipped { bounds: DMatrix<f64> },
    /// Arbitrary nonnegative `d(x, y)`, symmetric or not.
    Custom { d: DMatrix<f64> },
}

fn check_inputs(pi: &[f64], q: &DMatrix<f64>) -> Result<()> {
    let n = pi.len();
    if n == 0 || n > MAX_STATES {
        return Err(Error::DimensionMismatch(format!(
            "{n} states; need 1..={MAX_STATES}"
        )));
    }
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "proposal is {}x{}, expected {n}x{n}",
            q.nrows(),
            q.ncols()
        )));
    }
    if pi.iter().any(|&p| !(p > 0.0)) || (pi.iter().sum::<f64>() - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::domain("pi must be strictly positive and sum to one"));
    }
    for row in q.row_iter() {
        if row.iter().any(|&v| v < 0.0) || (row.sum() - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::domain(
                "proposal rows must be nonnegative and sum to one",
            ));
        }
    }
    Ok(())
}

fn check_square(m: &DMatrix<f64>, n: usize, what: &str) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "{what} is {}x{}, expected {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Builds the exact transition matrix of the accept/reject chain: off the
/// diagonal `P(x, y) = q(x, y) alpha(x, y)`, with the rejected mass on the
/// diagonal.
pub fn finite_state_transition_matrix(
    pi: &[f64],
    q: &DMatrix<f64>,
    beta: f64,
    mode: &AcceptanceMode,
) -> Result<DMatrix<f64>> {
    check_inputs(pi, q)?;
    let n = pi.len();
    match mode {
        AcceptanceMode::Portkey { bounds } | AcceptanceMode::Flipped { bounds } => {
            check_square(bounds, n, "bounds")?
        }
        AcceptanceMode::Custom { d } => {
            check_square(d, n, "d")?;
            if d.iter().any(|&v| v < 0.0) {
                return Err(Error::domain("d must be nonnegative"));
            }
        }
    }

    let mut p = DMatrix::<f64>::zeros(n, n);
    for x in 0..n {
        for y in 0..n {
            if x == y || q[(x, y)] == 0.0 || q[(y, x)] == 0.0 {
                continue;
            }
            let wx = pi[x] * q[(x, y)];
            let wy = pi[y] * q[(y, x)];
            let alpha = match mode {
                AcceptanceMode::Portkey { bounds } => {
                    let (cx, cy) = (bounds[(x, y)], bounds[(y, x)]);
                    if cx < wx * (1.0 - BOUND_RTOL) || cy < wy * (1.0 - BOUND_RTOL) {
                        return Err(Error::ModelContract(format!(
                            "bound for pair ({x}, {y}) is below pi q"
                        )));
                    }
                    analytic_alpha_portkey(cx, (wx / cx).min(1.0), cy, (wy / cy).min(1.0), beta)?
                }
                AcceptanceMode::Flipped { bounds } => {
                    let (cx, cy) = (bounds[(x, y)], bounds[(y, x)]);
                    if cx * wx < 1.0 - BOUND_RTOL || cy * wy < 1.0 - BOUND_RTOL {
                        return Err(Error::ModelContract(format!(
                            "reciprocal bound for pair ({x}, {y}) is below 1 / (pi q)"
                        )));
                    }
                    let (px, py) = ((1.0 / (cx * wx)).min(1.0), (1.0 / (cy * wy)).min(1.0));
                    analytic_alpha_flipped(cx, px, cy, py, beta)?
                }
                AcceptanceMode::Custom { d } => wy / (wx + wy + d[(x, y)]),
            };
            p[(x, y)] = q[(x, y)] * alpha;
        }
        let off: f64 = (0..n).filter(|&y| y != x).map(|y| p[(x, y)]).sum();
        p[(x, x)] = 1.0 - off;
    }
    Ok(p)
}

/// `max |pi(x) P(x, y) - pi(y) P(y, x)|` over all pairs.
pub fn detailed_balance_residual(pi: &[f64], p: &DMatrix<f64>) -> f64 {
    let n = pi.len();
    let mut worst = 0.0f64;
    for x in 0..n {
        for y in (x + 1)..n {
            worst = worst.max((pi[x] * p[(x, y)] - pi[y] * p[(y, x)]).abs());
        }
    }
    worst
}

/// Bounds `c(x, y) = scale(x, y) * pi(x) q(x, y)` (portkey) or
/// `c~(x, y) = scale(x, y) / (pi(x) q(x, y))` (flipped). Scales must be at
/// least one. Pairs with zero proposal mass get a bound of one.
pub fn scaled_bounds(
    pi: &[f64],
    q: &DMatrix<f64>,
    scale: &DMatrix<f64>,
    flipped: bool,
) -> DMatrix<f64> {
    DMatrix::from_fn(pi.len(), pi.len(), |x, y| {
        let w = pi[x] * q[(x, y)];
        if w == 0.0 {
            1.0
        } else if flipped {
            scale[(x, y)] / w
        } else {
            scale[(x, y)] * w
        }
    })
}

/// Second largest eigenvalue modulus of a `pi`-reversible transition
/// matrix, computed from its symmetrization `D^1/2 P D^-1/2`.
pub fn second_eigenvalue_modulus(pi: &[f64], p: &DMatrix<f64>) -> f64 {
    let n = pi.len();
    let s = DMatrix::from_fn(n, n, |x, y| {
        let v = (pi[x] / pi[y]).sqrt() * p[(x, y)];
        let w = (pi[y] / pi[x]).sqrt() * p[(y, x)];
        0.5 * (v + w)
    });
    let mut moduli: Vec<f64> = SymmetricEigen::new(s)
        .eigenvalues
        .iter()
        .map(|v| v.abs())
        .collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    moduli.get(1).copied().unwrap_or(0.0)
}
