//! Bernoulli factories for Barker-type acceptance events.
//!
//! Each factory receives two [`WeightedCoin`]s, `x` for the current point and
//! `y` for the proposal, and returns an accept/reject decision without ever
//! evaluating the acceptance probability itself. The number of passes
//! through the outer loop is reported alongside the decision.
//!
//! Loop counting: every pass through the outer loop counts once, including a
//! pass that ends at the portkey gate, so [`FactoryOutcome::loops`] is at
//! least one.

mod analytic;
mod coin;

use rand::Rng;

pub use analytic::{
    alpha_barker, analytic_alpha_flipped, analytic_alpha_portkey, expected_loops, ordering_check,
    ordering_check_flipped, stopping_probability, OrderingCheck,
};
pub use coin::{BernoulliCoin, PCoin, WeightedCoin};

use crate::error::{Error, Result};

/// Default loop budget for a single factory call.
pub const DEFAULT_MAX_LOOPS: u64 = 100_000_000;

/// Probability of the portkey gate letting a loop proceed.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PortkeyBeta(f64);

impl PortkeyBeta {
    /// `beta = 1`: no gate, plain two-coin behaviour.
    pub const ONE: PortkeyBeta = PortkeyBeta(1.0);

    pub fn new(beta: f64) -> Result<Self> {
        if beta > 0.0 && beta <= 1.0 {
            Ok(Self(beta))
        } else {
            Err(Error::domain(format!(
                "portkey beta = {beta} not in (0, 1]"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn is_one(self) -> bool {
        self.0 == 1.0
    }
}

impl Default for PortkeyBeta {
    fn default() -> Self {
        Self::ONE
    }
}

/// Result of one factory call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FactoryOutcome {
    pub accepted: bool,
    pub loops: u64,
}

/// `c_y / (c_x + c_y)` from log bounds.
fn y_branch_probability(log_c_x: f64, log_c_y: f64) -> f64 {
    1.0 / (1.0 + (log_c_x - log_c_y).exp())
}

/// Shared loop of the two-coin and portkey factories. A `None` gate skips
/// the gate draw entirely, so `beta = 1` consumes exactly the same random
/// numbers as the plain two-coin algorithm.
fn run_factory<R, CX, CY>(
    x: &WeightedCoin<CX>,
    y: &WeightedCoin<CY>,
    gate: Option<f64>,
    rng: &mut R,
    max_loops: u64,
) -> Result<FactoryOutcome>
where
    R: Rng + ?Sized,
    CX: PCoin,
    CY: PCoin,
{
    let select_y = y_branch_probability(x.log_c(), y.log_c());
    let mut loops = 0u64;
    loop {
        if loops >= max_loops {
            return Err(Error::LoopBudgetExceeded { max_loops });
        }
        loops += 1;
        if let Some(beta) = gate {
            if rng.random::<f64>() >= beta {
                return Ok(FactoryOutcome {
                    accepted: false,
                    loops,
                });
            }
        }
        if rng.random::<f64>() < select_y {
            if y.coin().sample(rng) {
                return Ok(FactoryOutcome {
                    accepted: true,
                    loops,
                });
            }
        } else if x.coin().sample(rng) {
            return Ok(FactoryOutcome {
                accepted: false,
                loops,
            });
        }
    }
}

/// Two-coin factory: accepts with probability
/// `c_y p_y / (c_x p_x + c_y p_y)`, i.e. Barker's acceptance when the
/// weighted coins decompose `pi(x) q(x, y)` and `pi(y) q(y, x)`.
pub fn two_coin<R, CX, CY>(
    x: &WeightedCoin<CX>,
    y: &WeightedCoin<CY>,
    rng: &mut R,
    max_loops: u64,
) -> Result<FactoryOutcome>
where
    R: Rng + ?Sized,
    CX: PCoin,
    CY: PCoin,
{
    run_factory(x, y, None, rng, max_loops)
}

/// Portkey two-coin factory. Each loop first passes a Bernoulli(beta) gate
/// that rejects on failure, which caps the mean loop count at
/// `1 / (1 - beta)`.
pub fn portkey_two_coin<R, CX, CY>(
    x: &WeightedCoin<CX>,
    y: &WeightedCoin<CY>,
    beta: PortkeyBeta,
    rng: &mut R,
    max_loops: u64,
) -> Result<FactoryOutcome>
where
    R: Rng + ?Sized,
    CX: PCoin,
    CY: PCoin,
{
    let gate = (!beta.is_one()).then_some(beta.get());
    run_factory(x, y, gate, rng, max_loops)
}

/// Flipped portkey factory. The weighted coins decompose the reciprocals
/// `1 / (pi(x) q(x, y))` and `1 / (pi(y) q(y, x))`; the branch polarity is
/// swapped, so success on the x-branch accepts.
pub fn flipped_portkey_two_coin<R, CX, CY>(
    x_inv: &WeightedCoin<CX>,
    y_inv: &WeightedCoin<CY>,
    beta: PortkeyBeta,
    rng: &mut R,
    max_loops: u64,
) -> Result<FactoryOutcome>
where
    R: Rng + ?Sized,
    CX: PCoin,
    CY: PCoin,
{
    // The first branch draw selects x with probability c_x / (c_x + c_y)
    // and x-success outputs 1: exactly the portkey loop with roles swapped.
    portkey_two_coin(y_inv, x_inv, beta, rng, max_loops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn wc(c: f64, p: f64) -> WeightedCoin<BernoulliCoin> {
        WeightedCoin::new(c, BernoulliCoin::new(p).unwrap()).unwrap()
    }

    struct Tally {
        accept: f64,
        mean_loops: f64,
        max_loops: u64,
    }

    fn tally(n: usize, mut f: impl FnMut() -> FactoryOutcome) -> Tally {
        let mut acc = 0usize;
        let mut total = 0u64;
        let mut max = 0u64;
        for _ in 0..n {
            let o = f();
            acc += o.accepted as usize;
            total += o.loops;
            max = max.max(o.loops);
        }
        Tally {
            accept: acc as f64 / n as f64,
            mean_loops: total as f64 / n as f64,
            max_loops: max,
        }
    }

    fn within_binomial(freq: f64, p: f64, n: usize, k: f64) -> bool {
        let sd = (p * (1.0 - p) / n as f64).sqrt().max(1e-12);
        (freq - p).abs() <= k * sd
    }

    #[test]
    fn two_coin_trivial_cases() {
        let mut rng = stream_rng(11, 0);
        let t = tally(10_000, || {
            two_coin(&wc(1.0, 1.0), &wc(1.0, 1.0), &mut rng, 10).unwrap()
        });
        assert_eq!(t.max_loops, 1);
        assert!(within_binomial(t.accept, 0.5, 10_000, 4.0));

        let t = tally(10_000, || {
            two_coin(&wc(1.0, 0.0), &wc(1.0, 1.0), &mut rng, 1000).unwrap()
        });
        assert_eq!(t.accept, 1.0);
    }

    #[test]
    fn two_coin_monte_carlo_matches_closed_form() {
        let n = 1_000_000;
        let mut rng = stream_rng(12, 0);
        let t = tally(n, || {
            two_coin(&wc(2.0, 0.5), &wc(1.0, 0.25), &mut rng, 10_000).unwrap()
        });
        assert!(
            within_binomial(t.accept, 0.2, n, 4.0),
            "accept {}",
            t.accept
        );
        // Geometric(1/2.4): variance (1 - s) / s^2
        let s: f64 = 1.0 / 2.4;
        let se = ((1.0 - s) / (s * s) / n as f64).sqrt();
        assert!(
            (t.mean_loops - 2.4).abs() < 4.0 * se,
            "loops {}",
            t.mean_loops
        );
    }

    #[test]
    fn portkey_examples() {
        let n = 200_000;
        let mut rng = stream_rng(13, 0);
        let half = PortkeyBeta::new(0.5).unwrap();
        let t = tally(n, || {
            portkey_two_coin(&wc(1.0, 1.0), &wc(1.0, 1.0), half, &mut rng, 100).unwrap()
        });
        assert!(within_binomial(t.accept, 0.25, n, 4.0));

        let b = PortkeyBeta::new(0.9).unwrap();
        let expect = analytic_alpha_portkey(2.0, 0.5, 1.0, 0.25, 0.9).unwrap();
        let t = tally(n, || {
            portkey_two_coin(&wc(2.0, 0.5), &wc(1.0, 0.25), b, &mut rng, 1000).unwrap()
        });
        assert!(within_binomial(t.accept, expect, n, 4.0));
    }

    #[test]
    fn portkey_loops_are_geometric() {
        let n = 400_000;
        let mut rng = stream_rng(17, 0);
        for (c_x, p_x, c_y, p_y, beta) in [
            (2.0, 0.5, 1.0, 0.25, 0.9),
            (10.0, 0.05, 0.5, 0.05, 0.99),
            (1.0, 0.95, 10.0, 0.25, 0.5),
        ] {
            let b = PortkeyBeta::new(beta).unwrap();
            let mut ones = 0usize;
            let t = tally(n, || {
                let o =
                    portkey_two_coin(&wc(c_x, p_x), &wc(c_y, p_y), b, &mut rng, 100_000).unwrap();
                ones += usize::from(o.loops == 1);
                o
            });
            let s = stopping_probability(c_x, p_x, c_y, p_y, beta).unwrap();
            let se = ((1.0 - s) / (s * s) / n as f64).sqrt();
            assert!(
                (t.mean_loops - 1.0 / s).abs() < 4.0 * se,
                "beta {beta}: loops {} vs {}",
                t.mean_loops,
                1.0 / s
            );
            assert!(within_binomial(ones as f64 / n as f64, s, n, 4.0));
        }
    }

    #[test]
    fn flipped_examples() {
        let n = 200_000;
        let mut rng = stream_rng(14, 0);
        let b = PortkeyBeta::new(0.8).unwrap();
        let t = tally(n, || {
            flipped_portkey_two_coin(&wc(4.0, 0.5), &wc(2.0, 0.5), b, &mut rng, 1000).unwrap()
        });
        assert!(
            within_binomial(t.accept, 4.0 / 9.0, n, 4.0),
            "accept {}",
            t.accept
        );

        let t = tally(n, || {
            flipped_portkey_two_coin(&wc(1.0, 1.0), &wc(1.0, 1.0), PortkeyBeta::ONE, &mut rng, 10)
                .unwrap()
        });
        assert!(within_binomial(t.accept, 0.5, n, 4.0));
    }

    #[test]
    fn flipped_beta_one_recovers_barker() {
        // pi(x) = 0.2, pi(y) = 0.6 under a symmetric q; decompose the
        // reciprocals with exact coins: c~ = 1 / pi, p~ = 1.
        let n = 200_000;
        let mut rng = stream_rng(15, 0);
        let (px, py) = (0.2, 0.6);
        let t = tally(n, || {
            flipped_portkey_two_coin(
                &wc(1.0 / px, 1.0),
                &wc(1.0 / py, 1.0),
                PortkeyBeta::ONE,
                &mut rng,
                10,
            )
            .unwrap()
        });
        assert!(within_binomial(t.accept, py / (px + py), n, 4.0));
    }

    #[test]
    fn beta_one_is_bit_identical_to_two_coin() {
        let (x, y) = (wc(3.0, 0.3), wc(0.7, 0.6));
        let mut r1 = stream_rng(99, 3);
        let mut r2 = stream_rng(99, 3);
        for _ in 0..10_000 {
            let a = two_coin(&x, &y, &mut r1, 1000).unwrap();
            let b = portkey_two_coin(&x, &y, PortkeyBeta::ONE, &mut r2, 1000).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn loop_budget_exceeded() {
        let mut rng = stream_rng(16, 0);
        let err = two_coin(&wc(1.0, 0.0), &wc(1.0, 0.0), &mut rng, 50).unwrap_err();
        assert!(matches!(err, Error::LoopBudgetExceeded { max_loops: 50 }));
        // the gate always terminates eventually
        let o = portkey_two_coin(
            &wc(1.0, 0.0),
            &wc(1.0, 0.0),
            PortkeyBeta::new(0.5).unwrap(),
            &mut rng,
            1000,
        )
        .unwrap();
        assert!(!o.accepted);
    }

    #[test]
    fn gate_rejection_counts_one_loop() {
        // beta tiny: almost every call stops at the first gate
        let mut rng = stream_rng(17, 0);
        let b = PortkeyBeta::new(1e-9).unwrap();
        let o = portkey_two_coin(&wc(1.0, 0.5), &wc(1.0, 0.5), b, &mut rng, 10).unwrap();
        assert_eq!(
            o,
            FactoryOutcome {
                accepted: false,
                loops: 1
            }
        );
    }

    #[test]
    fn extreme_bound_ratios_do_not_overflow() {
        let x = WeightedCoin::from_log_c(800.0, BernoulliCoin::new(0.5).unwrap()).unwrap();
        let y = WeightedCoin::from_log_c(-800.0, BernoulliCoin::new(0.5).unwrap()).unwrap();
        let mut rng = stream_rng(18, 0);
        for _ in 0..100 {
            assert!(!two_coin(&x, &y, &mut rng, 1000).unwrap().accepted);
            assert!(two_coin(&y, &x, &mut rng, 1000).unwrap().accepted);
        }
    }

    #[test]
    fn beta_validation() {
        assert!(PortkeyBeta::new(0.0).is_err());
        assert!(PortkeyBeta::new(1.0001).is_err());
        assert!(PortkeyBeta::new(f64::NAN).is_err());
        assert!(PortkeyBeta::new(1.0).unwrap().is_one());
    }
}
