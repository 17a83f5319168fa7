//! Closed-form acceptance probabilities and loop laws for the factories.
//!
//! These are the oracles the factories are checked against; they need the
//! coin probabilities numerically and are therefore validation-only.

use crate::error::{Error, Result};

/// Relative slack used when comparing quantities that are equal in exact
/// arithmetic.
const ORDERING_RTOL: f64 = 1e-12;

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("beta = {beta} not in (0, 1]")))
    }
}

fn check_pair(c: f64, p: f64, name: &str) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::domain(format!(
            "c_{name} = {c} must be positive and finite"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("p_{name} = {p} not in [0, 1]")));
    }
    Ok(())
}

/// Barker's acceptance `c_y p_y / (c_x p_x + c_y p_y)`.
pub fn alpha_barker(c_x: f64, p_x: f64, c_y: f64, p_y: f64) -> Result<f64> {
    analytic_alpha_portkey(c_x, p_x, c_y, p_y, 1.0)
}

/// Acceptance probability of the portkey two-coin factory:
/// `c_y p_y / (c_x p_x + c_y p_y + (1 - beta) / beta * (c_x + c_y))`.
pub fn analytic_alpha_portkey(c_x: f64, p_x: f64, c_y: f64, p_y: f64, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    check_pair(c_x, p_x, "x")?;
    check_pair(c_y, p_y, "y")?;
    let num = c_y * p_y;
    let den = c_x * p_x + num + (1.0 - beta) / beta * (c_x + c_y);
    if den == 0.0 {
        return Err(Error::domain(
            "both coins have probability zero at beta = 1",
        ));
    }
    Ok(num / den)
}

/// Acceptance probability of the flipped portkey factory, where the pairs
/// decompose reciprocal densities. The x-branch produces acceptance:
/// `c_x p_x / (c_x p_x + c_y p_y + (1 - beta) / beta * (c_x + c_y))`.
pub fn analytic_alpha_flipped(
    c_x_inv: f64,
    p_x_inv: f64,
    c_y_inv: f64,
    p_y_inv: f64,
    beta: f64,
) -> Result<f64> {
    analytic_alpha_portkey(c_y_inv, p_y_inv, c_x_inv, p_x_inv, beta)
}

/// Per-loop stopping probability `s_beta` of the (flipped) portkey factory.
pub fn stopping_probability(c_x: f64, p_x: f64, c_y: f64, p_y: f64, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    check_pair(c_x, p_x, "x")?;
    check_pair(c_y, p_y, "y")?;
    Ok((1.0 - beta) + beta * (c_y * p_y + c_x * p_x) / (c_x + c_y))
}

/// Mean number of factory loops, `1 / s_beta`.
pub fn expected_loops(c_x: f64, p_x: f64, c_y: f64, p_y: f64, beta: f64) -> Result<f64> {
    let s = stopping_probability(c_x, p_x, c_y, p_y, beta)?;
    if s == 0.0 {
        return Err(Error::domain(
            "expected loops are infinite: both coins have probability zero",
        ));
    }
    Ok(1.0 / s)
}

/// Outcome of checking the two acceptance orderings between a portkey
/// acceptance and Barker's acceptance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderingCheck {
    /// `alpha_beta <= beta * alpha_barker`
    pub lhs_ok: bool,
    /// `alpha_barker <= (1 + (1 - beta) / (delta * beta)) * alpha_beta`;
    /// only meaningful when both coin probabilities are at least `delta`.
    pub rhs_ok: bool,
}

fn ordering(alpha_beta: f64, alpha_b: f64, beta: f64, delta: f64) -> OrderingCheck {
    let upper = beta * alpha_b;
    let factor = 1.0 + (1.0 - beta) / (delta * beta);
    let scaled = factor * alpha_beta;
    OrderingCheck {
        lhs_ok: alpha_beta <= upper + ORDERING_RTOL * upper.abs(),
        rhs_ok: alpha_b <= scaled + ORDERING_RTOL * scaled.abs(),
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("delta = {delta} not in (0, 1]")))
    }
}

/// Checks the sandwich between the portkey acceptance and Barker's
/// acceptance for one `(x, y)` configuration.
pub fn ordering_check(
    c_x: f64,
    p_x: f64,
    c_y: f64,
    p_y: f64,
    beta: f64,
    delta: f64,
) -> Result<OrderingCheck> {
    check_delta(delta)?;
    let a_beta = analytic_alpha_portkey(c_x, p_x, c_y, p_y, beta)?;
    let a_b = alpha_barker(c_x, p_x, c_y, p_y)?;
    Ok(ordering(a_beta, a_b, beta, delta))
}

/// The same sandwich for the flipped factory, with pairs decomposing the
/// reciprocal densities.
pub fn ordering_check_flipped(
    c_x_inv: f64,
    p_x_inv: f64,
    c_y_inv: f64,
    p_y_inv: f64,
    beta: f64,
    delta: f64,
) -> Result<OrderingCheck> {
    check_delta(delta)?;
    let a_beta = analytic_alpha_flipped(c_x_inv, p_x_inv, c_y_inv, p_y_inv, beta)?;
    let a_b = analytic_alpha_flipped(c_x_inv, p_x_inv, c_y_inv, p_y_inv, 1.0)?;
    Ok(ordering(a_beta, a_b, beta, delta))
}
