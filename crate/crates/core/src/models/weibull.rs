//! Gamma mixture of Weibulls.
//!
//! The target is `pi(theta) = E_nu[Weibull(theta; lambda, k)]` with
//! `lambda ~ Gamma(shape, rate)` and `lambda` the Weibull scale. The
//! mixture density has no closed form, but every conditional density obeys
//! `pi(theta | lambda) <= k / (e theta)`, so `pi(theta)` factors as that
//! envelope times a coin that is easy to flip: draw `lambda ~ nu` and accept
//! with probability `pi(theta | lambda) / envelope`.
//!
//! Proposals are a Gaussian random walk on `theta`; they are symmetric, so
//! `q` does not enter the decomposition.

use std::f64::consts::E;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::factory::{PCoin, WeightedCoin};
use crate::kernel::TargetModel;

#[derive(Debug, Clone)]
pub struct WeibullMixtureTarget {
    k: f64,
    gamma_shape: f64,
    gamma_rate: f64,
    proposal_sd: f64,
    initial_theta: f64,
    mixing: Gamma<f64>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{name} = {v} must be positive and finite"
        )))
    }
}

impl WeibullMixtureTarget {
    pub fn new(
        k: f64,
        gamma_shape: f64,
        gamma_rate: f64,
        proposal_sd: f64,
        initial_theta: f64,
    ) -> Result<Self> {
        positive("k", k)?;
        positive("gamma_shape", gamma_shape)?;
        positive("gamma_rate", gamma_rate)?;
        positive("proposal_sd", proposal_sd)?;
        positive("initial_theta", initial_theta)?;
        let mixing =
            Gamma::new(gamma_shape, 1.0 / gamma_rate).map_err(|e| Error::domain(e.to_string()))?;
        Ok(Self {
            k,
            gamma_shape,
            gamma_rate,
            proposal_sd,
            initial_theta,
            mixing,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn gamma_shape(&self) -> f64 {
        self.gamma_shape
    }

    pub fn gamma_rate(&self) -> f64 {
        self.gamma_rate
    }

    pub fn proposal_sd(&self) -> f64 {
        self.proposal_sd
    }

    pub fn initial_theta(&self) -> f64 {
        self.initial_theta
    }

    /// The coin for `pi(theta) / envelope(theta)`.
    pub fn coin_at(&self, theta: f64) -> WeibullCoin {
        WeibullCoin {
            theta,
            k: self.k,
            mixing: self.mixing,
        }
    }
}

impl Default for WeibullMixtureTarget {
    /// `k = 10`, `nu = Gamma(shape 10, rate 100)`, proposal variance 4,
    /// started at `theta = 0.1`, the mean of `nu`.
    fn default() -> Self {
        Self::new(10.0, 10.0, 100.0, 2.0, 0.1).expect("valid defaults")
    }
}

/// Weibull density with scale `lambda` and shape `k`.
pub fn weibull_density(theta: f64, lambda: f64, k: f64) -> f64 {
    if theta <= 0.0 {
        return 0.0;
    }
    let z = theta / lambda;
    k / lambda * z.powf(k - 1.0) * (-z.powf(k)).exp()
}

/// `k / (e theta)`: the maximum over `lambda` of the Weibull density at
/// `theta`.
pub fn weibull_envelope(theta: f64, k: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::domain(format!("theta = {theta} must be positive")));
    }
    positive("k", k)?;
    Ok(k / (E * theta))
}

/// Coin with success probability `pi(theta) / envelope(theta)`.
#[derive(Debug, Clone, Copy)]
pub struct WeibullCoin {
    theta: f64,
    k: f64,
    mixing: Gamma<f64>,
}

impl PCoin for WeibullCoin {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        let lambda = self.mixing.sample(rng);
        // pi(theta | lambda) / envelope = e u exp(-u), u = (theta / lambda)^k
        let ln_u = self.k * (self.theta.ln() - lambda.ln());
        let ratio = (1.0 + ln_u - ln_u.exp()).exp();
        rng.random::<f64>() < ratio
    }
}

/// One flip of the `pi(theta) / envelope` coin.
pub fn weibull_p_coin<R: Rng + ?Sized>(
    theta: f64,
    model: &WeibullMixtureTarget,
    rng: &mut R,
) -> bool {
    model.coin_at(theta).sample(rng)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureMoments {
    pub mean: f64,
    pub variance: f64,
}

/// Mean and variance of `theta` under the mixture.
pub fn mixture_moments(model: &WeibullMixtureTarget) -> MixtureMoments {
    let (a, b, k) = (model.gamma_shape, model.gamma_rate, model.k);
    let m1 = a / b;
    let m2 = a * (a + 1.0) / (b * b);
    let g1 = gamma(1.0 + 1.0 / k);
    let g2 = gamma(1.0 + 2.0 / k);
    MixtureMoments {
        mean: g1 * m1,
        variance: m2 * g2 - (m1 * g1).powi(2),
    }
}

impl TargetModel for WeibullMixtureTarget {
    type State = f64;
    type Coin = WeibullCoin;

    fn initial_state(&self) -> f64 {
        self.initial_theta
    }

    fn propose<R: Rng + ?Sized>(&self, from: &f64, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        from + self.proposal_sd * z
    }

    fn in_support(&self, theta: &f64) -> bool {
        *theta > 0.0
    }

    fn weighted_coin(&self, from: &f64, _to: &f64) -> Result<WeightedCoin<WeibullCoin>> {
        WeightedCoin::new(weibull_envelope(*from, self.k)?, self.coin_at(*from))
    }
}
