use rand::Rng;

use crate::error::{Error, Result};

/// A source of independent Bernoulli(p) events whose `p` need not be
/// numerically known.
pub trait PCoin {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> bool;

    /// The success probability, when the coin is a validation coin that
    /// knows it. Production coins return `None`.
    fn known_p(&self) -> Option<f64> {
        None
    }
}

impl<C: PCoin + ?Sized> PCoin for &C {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        (**self).sample(rng)
    }

    fn known_p(&self) -> Option<f64> {
        (**self).known_p()
    }
}

/// Validation coin with an explicit probability.
///
/// The probability is stored as given so that a violated bound (p > 1) can
/// be surfaced by the kernel instead of silently clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliCoin {
    p: f64,
}

impl BernoulliCoin {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("coin probability {p} not in [0, 1]")));
        }
        Ok(Self { p })
    }

    /// Skips the range check. Used by validation targets that want the
    /// kernel's contract check to see an out-of-range probability.
    pub fn unchecked(p: f64) -> Self {
        Self { p }
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

impl PCoin for BernoulliCoin {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        rng.random::<f64>() < self.p
    }

    fn known_p(&self) -> Option<f64> {
        Some(self.p)
    }
}

/// The decomposition `c * p` of an unnormalized density value: a positive
/// bound `c` together with a coin of success probability `p`.
///
/// The bound is held on the log scale. Factories only ever use the ratio
/// `c_y / (c_x + c_y)`, so bounds known up to a common constant are fine,
/// and very large or very small bounds do not overflow.
#[derive(Debug, Clone)]
pub struct WeightedCoin<C> {
    log_c: f64,
    coin: C,
}

impl<C: PCoin> WeightedCoin<C> {
    pub fn new(c: f64, coin: C) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::domain(format!(
                "bound c = {c} must be positive and finite"
            )));
        }
        Ok(Self {
            log_c: c.ln(),
            coin,
        })
    }

    pub fn from_log_c(log_c: f64, coin: C) -> Result<Self> {
        if !log_c.is_finite() {
            return Err(Error::domain(format!("log bound {log_c} is not finite")));
        }
        Ok(Self { log_c, coin })
    }

    pub fn log_c(&self) -> f64 {
        self.log_c
    }

    pub fn c(&self) -> f64 {
        self.log_c.exp()
    }

    pub fn coin(&self) -> &C {
        &self.coin
    }

    /// Checks the coin's probability when it is known.
    pub fn validate(&self) -> Result<()> {
        match self.coin.known_p() {
            Some(p) if !(0.0..=1.0).contains(&p) => Err(Error::ModelContract(format!(
                "coin probability {p} outside [0, 1]; the bound c = {} is too small",
                self.c()
            ))),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn bernoulli_coin_frequency() {
        let coin = BernoulliCoin::new(0.3).unwrap();
        let mut rng = stream_rng(1, 0);
        let n = 100_000;
        let hits = (0..n).filter(|_| coin.sample(&mut rng)).count() as f64;
        let se = (0.3 * 0.7 / n as f64).sqrt();
        assert!((hits / n as f64 - 0.3).abs() < 4.0 * se);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(BernoulliCoin::new(1.5).is_err());
        assert!(BernoulliCoin::new(-0.1).is_err());
        let coin = BernoulliCoin::new(0.5).unwrap();
        assert!(WeightedCoin::new(0.0, coin).is_err());
        assert!(WeightedCoin::new(f64::INFINITY, coin).is_err());
        assert!(WeightedCoin::from_log_c(f64::NEG_INFINITY, coin).is_err());
    }

    #[test]
    fn validate_flags_out_of_range_probability() {
        let w = WeightedCoin::new(1.0, BernoulliCoin::unchecked(1.2)).unwrap();
        assert!(matches!(w.validate(), Err(Error::ModelContract(_))));
        let ok = WeightedCoin::new(2.0, BernoulliCoin::unchecked(0.2)).unwrap();
        assert!(ok.validate().is_ok());
        assert!((ok.c() - 2.0).abs() < 1e-15);
    }
}
