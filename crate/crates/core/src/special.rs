//! Normal-distribution helpers that stay accurate deep in the tails.

use std::f64::consts::{PI, SQRT_2};

use libm::erfc;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use statrs::function::erf::erfc_inv;

/// Beyond this many standard deviations `erfc` is replaced by its
/// asymptotic expansion, and truncated sampling switches to rejection.
const TAIL_SWITCH: f64 = 30.0;

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal upper tail `1 - Phi(x)`.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// `ln(1 - Phi(x))`.
pub fn ln_norm_sf(x: f64) -> f64 {
    if x < TAIL_SWITCH {
        norm_sf(x).ln()
    } else {
        let x2 = x * x;
        let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
        -0.5 * x2 - x.ln() - 0.5 * (2.0 * PI).ln() + series.ln()
    }
}

/// `ln(Phi(b) - Phi(a))` for `a < b`.
pub fn ln_norm_interval(a: f64, b: f64) -> f64 {
    debug_assert!(a < b);
    if a >= 0.0 {
        let (la, lb) = (ln_norm_sf(a), ln_norm_sf(b));
        la + (-(lb - la).exp()).ln_1p()
    } else if b <= 0.0 {
        ln_norm_interval(-b, -a)
    } else {
        (1.0 - norm_sf(b) - norm_sf(-a)).ln()
    }
}

/// Standard normal quantile.
pub fn norm_inv_cdf(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// Inverse of the upper tail: `x` with `1 - Phi(x) = t`.
fn norm_inv_sf(t: f64) -> f64 {
    SQRT_2 * erfc_inv(2.0 * t)
}

/// Draws from the standard normal restricted to `[a, +inf)` for large `a`
/// by exponential-proposal rejection.
fn upper_tail_rejection<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    let exp = Exp::new(rate).expect("positive rate");
    loop {
        let z = a + exp.sample(rng);
        if z <= b && rng.random::<f64>().ln() <= -0.5 * (z - rate) * (z - rate) {
            return z;
        }
    }
}

/// Standard normal restricted to `[a, b]`.
fn std_truncated<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if b <= 0.0 {
        return -std_truncated(-b, -a, rng);
    }
    if a >= TAIL_SWITCH {
        return upper_tail_rejection(a, b, rng);
    }
    let u = rng.random::<f64>();
    let z = if a >= 0.0 {
        let (ta, tb) = (norm_sf(a), norm_sf(b));
        norm_inv_sf(ta - u * (ta - tb))
    } else {
        let (fa, fb) = (norm_cdf(a), norm_cdf(b));
        norm_inv_cdf(fa + u * (fb - fa))
    };
    z.clamp(a, b)
}

/// Draws from `N(mean, sd^2)` truncated to `[lo, hi]` by inverse CDF.
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    mean: f64,
    sd: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> f64 {
    let z = std_truncated((lo - mean) / sd, (hi - mean) / sd, rng);
    (mean + sd * z).clamp(lo, hi)
}
