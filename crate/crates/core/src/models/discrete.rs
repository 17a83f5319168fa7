//! Finite-state targets with exactly known coins, used for validation.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::factory::{BernoulliCoin, WeightedCoin};
use crate::kernel::TargetModel;

/// A target on `{0, .., n-1}` with unnormalized weights `pi`, a proposal
/// matrix `q` and per-pair bounds.
///
/// In direct mode `bounds[(x, y)]` is `c` with `pi(x) q(x, y) <= c`; in
/// flipped mode it is `c~` with `1 / (pi(x) q(x, y)) <= c~`.
#[derive(Debug, Clone)]
pub struct DiscreteTarget {
    pi: Vec<f64>,
    q: DMatrix<f64>,
    bounds: DMatrix<f64>,
    flipped: bool,
}

impl DiscreteTarget {
    pub fn new(pi: Vec<f64>, q: DMatrix<f64>, bounds: DMatrix<f64>, flipped: bool) -> Result<Self> {
        let n = pi.len();
        if n < 2 {
            return Err(Error::DimensionMismatch(format!(
                "{n} states; need at least 2"
            )));
        }
        if q.shape() != (n, n) || bounds.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "q and bounds must be {n}x{n}"
            )));
        }
        if pi.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::domain("pi must be positive and finite"));
        }
        for row in q.row_iter() {
            if row.iter().any(|&v| v < 0.0) || (row.sum() - 1.0).abs() > 1e-9 {
                return Err(Error::domain(
                    "proposal rows must be nonnegative and sum to one",
                ));
            }
        }
        if bounds.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::domain("bounds must be positive and finite"));
        }
        Ok(Self {
            pi,
            q,
            bounds,
            flipped,
        })
    }

    /// Uniform proposal over the other states, bounds `slack` times the
    /// exact value (`slack * pi q`, or `slack / (pi q)` when flipped).
    pub fn symmetric_uniform_proposal(pi: Vec<f64>, slack: f64, flipped: bool) -> Result<Self> {
        let n = pi.len();
        if n < 2 {
            return Err(Error::DimensionMismatch(format!(
                "{n} states; need at least 2"
            )));
        }
        if !(slack >= 1.0 && slack.is_finite()) {
            return Err(Error::domain(format!("slack = {slack} must be at least 1")));
        }
        let off = 1.0 / (n - 1) as f64;
        let q = DMatrix::from_fn(n, n, |x, y| if x == y { 0.0 } else { off });
        let bounds = DMatrix::from_fn(n, n, |x, _| {
            let w = pi[x] * off;
            if flipped {
                slack / w
            } else {
                slack * w
            }
        });
        Self::new(pi, q, bounds, flipped)
    }

    pub fn n_states(&self) -> usize {
        self.pi.len()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// `pi` scaled to sum to one.
    pub fn normalized_pi(&self) -> Vec<f64> {
        let total: f64 = self.pi.iter().sum();
        self.pi.iter().map(|p| p / total).collect()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn bounds(&self) -> &DMatrix<f64> {
        &self.bounds
    }
}

impl TargetModel for DiscreteTarget {
    type State = usize;
    type Coin = BernoulliCoin;

    fn initial_state(&self) -> usize {
        0
    }

    fn propose<R: Rng + ?Sized>(&self, from: &usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let row = self.q.row(*from);
        let mut acc = 0.0;
        let mut last = *from;
        for (y, &w) in row.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                last = y;
                if u < acc {
                    return y;
                }
            }
        }
        last
    }

    fn in_support(&self, state: &usize) -> bool {
        *state < self.pi.len()
    }

    fn weighted_coin(&self, from: &usize, to: &usize) -> Result<WeightedCoin<BernoulliCoin>> {
        let w = self.pi[*from] * self.q[(*from, *to)];
        let c = self.bounds[(*from, *to)];
        let p = if self.flipped { 1.0 / (w * c) } else { w / c };
        // contract violations (p > 1) are left for the kernel to report
        WeightedCoin::new(c, BernoulliCoin::unchecked(p))
    }

    fn flipped(&self) -> bool {
        self.flipped
    }

    fn log_density(&self, state: &usize) -> Option<f64> {
        Some(self.pi[*state].ln())
    }

    fn log_proposal_density(&self, from: &usize, to: &usize) -> Option<f64> {
        Some(self.q[(*from, *to)].ln())
    }
}
