//! Full conditionals of `mu` and `sigma2` as flipped factory targets.
//!
//! Both conditionals contain the reciprocal of the intractable constant
//! `L(mu, sigma2) = [Phi((1 - mu) / sigma) - Phi((-1 - mu) / sigma)]^l * P(Z pd)`
//! where `Z` has independent `TN(-1, 1, mu, sigma2)` off-diagonal entries.
//! So the reciprocal conditional is `c~ * P(Z pd)`: a tractable bound times
//! the success probability of [`PdCoin`].

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::factory::{PCoin, WeightedCoin};
use crate::kernel::TargetModel;
use crate::special::{ln_norm_interval, sample_truncated_normal};

use super::linalg::{is_positive_definite, upper_offdiag};

/// Draws the `p(p-1)/2` off-diagonal entries iid `TN(-1, 1, mu, sigma^2)`
/// and reports whether the resulting unit-diagonal matrix is positive
/// definite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdCoin {
    mu: f64,
    sigma: f64,
    dim: usize,
}

impl PdCoin {
    pub fn new(mu: f64, sigma2: f64, dim: usize) -> Self {
        Self {
            mu,
            sigma: sigma2.sqrt(),
            dim,
        }
    }
}

impl PCoin for PdCoin {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        let p = self.dim;
        let mut z = DMatrix::identity(p, p);
        for i in 0..p {
            for j in (i + 1)..p {
                let v = sample_truncated_normal(self.mu, self.sigma, -1.0, 1.0, rng);
                z[(i, j)] = v;
                z[(j, i)] = v;
            }
        }
        is_positive_definite(&z)
    }

    fn known_p(&self) -> Option<f64> {
        (self.dim <= 2).then_some(1.0)
    }
}

pub fn pd_coin<R: Rng + ?Sized>(mu: f64, sigma2: f64, p: usize, rng: &mut R) -> bool {
    PdCoin::new(mu, sigma2, p).sample(rng)
}

/// `ln[Phi((1 - mu) / sigma) - Phi((-1 - mu) / sigma)]`.
pub fn ln_unit_mass(mu: f64, sigma: f64) -> f64 {
    ln_norm_interval((-1.0 - mu) / sigma, (1.0 - mu) / sigma)
}

fn sum_sq_dev(offdiag: &[f64], mu: f64) -> f64 {
    offdiag.iter().map(|r| (r - mu) * (r - mu)).sum()
}

/// Log of the tractable part of the `mu` conditional: the Gaussian factors
/// of the correlations and the `N(0, tau2)` prior.
pub fn ln_mu_kernel(mu: f64, sigma2: f64, offdiag: &[f64], tau2: f64) -> f64 {
    -sum_sq_dev(offdiag, mu) / (2.0 * sigma2) - mu * mu / (2.0 * tau2)
}

/// Log of the tractable part of the `sigma2` conditional, including the
/// `sigma^-l` normalizers and the `IG(a0, b0)` prior.
pub fn ln_sigma2_kernel(sigma2: f64, mu: f64, offdiag: &[f64], a0: f64, b0: f64) -> f64 {
    let l = offdiag.len() as f64;
    -sum_sq_dev(offdiag, mu) / (2.0 * sigma2) - (a0 + 0.5 * l + 1.0) * sigma2.ln() - b0 / sigma2
}

/// `ln c~_mu`, the log bound for the reciprocal `mu` conditional.
pub fn ln_mu_tilde_bound(mu: f64, sigma2: f64, offdiag: &[f64], tau2: f64) -> f64 {
    let l = offdiag.len() as f64;
    -ln_mu_kernel(mu, sigma2, offdiag, tau2) + l * ln_unit_mass(mu, sigma2.sqrt())
}

/// `c~_mu` for the current correlation matrix `r`. Overflows to infinity
/// where the log form does not; kernels use the log form.
pub fn mu_tilde_bound(mu: f64, sigma2: f64, r: &DMatrix<f64>, tau2: f64) -> f64 {
    ln_mu_tilde_bound(mu, sigma2, &upper_offdiag(r), tau2).exp()
}

/// `ln c~_sigma2`, mirroring the `mu` construction.
pub fn ln_sigma2_tilde_bound(sigma2: f64, mu: f64, offdiag: &[f64], a0: f64, b0: f64) -> f64 {
    let l = offdiag.len() as f64;
    -ln_sigma2_kernel(sigma2, mu, offdiag, a0, b0) + l * ln_unit_mass(mu, sigma2.sqrt())
}

/// The `mu` full conditional given the correlations and `sigma2`.
#[derive(Debug, Clone, Copy)]
pub struct MuConditional<'a> {
    pub offdiag: &'a [f64],
    pub dim: usize,
    pub sigma2: f64,
    pub tau2: f64,
    pub proposal_sd: f64,
    pub current: f64,
}

impl TargetModel for MuConditional<'_> {
    type State = f64;
    type Coin = PdCoin;

    fn initial_state(&self) -> f64 {
        self.current
    }

    fn propose<R: Rng + ?Sized>(&self, from: &f64, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        from + self.proposal_sd * z
    }

    fn in_support(&self, mu: &f64) -> bool {
        mu.is_finite()
    }

    fn weighted_coin(&self, from: &f64, _to: &f64) -> Result<WeightedCoin<PdCoin>> {
        WeightedCoin::from_log_c(
            ln_mu_tilde_bound(*from, self.sigma2, self.offdiag, self.tau2),
            PdCoin::new(*from, self.sigma2, self.dim),
        )
    }

    fn flipped(&self) -> bool {
        true
    }
}

/// The `sigma2` full conditional given the correlations and `mu`.
#[derive(Debug, Clone, Copy)]
pub struct Sigma2Conditional<'a> {
    pub offdiag: &'a [f64],
    pub dim: usize,
    pub mu: f64,
    pub a0: f64,
    pub b0: f64,
    pub proposal_sd: f64,
    pub current: f64,
}

impl TargetModel for Sigma2Conditional<'_> {
    type State = f64;
    type Coin = PdCoin;

    fn initial_state(&self) -> f64 {
        self.current
    }

    fn propose<R: Rng + ?Sized>(&self, from: &f64, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        from + self.proposal_sd * z
    }

    fn in_support(&self, sigma2: &f64) -> bool {
        *sigma2 > 0.0 && sigma2.is_finite()
    }

    fn weighted_coin(&self, from: &f64, _to: &f64) -> Result<WeightedCoin<PdCoin>> {
        WeightedCoin::from_log_c(
            ln_sigma2_tilde_bound(*from, self.mu, self.offdiag, self.a0, self.b0),
            PdCoin::new(self.mu, *from, self.dim),
        )
    }

    fn flipped(&self) -> bool {
        true
    }
}
