//! Bayesian estimation of a constrained correlation matrix.
//!
//! Observations are `y_k ~ N(0, R)` iid. The free correlations `r_ij` have a
//! hierarchical prior `N(mu, sigma2)` truncated to the positive-definite
//! region, with `mu ~ N(0, tau2)` and `sigma2 ~ IG(a0, b0)`. The prior
//! normalizing constant depends on `(mu, sigma2)` and is intractable, so the
//! `mu` and `sigma2` updates run flipped portkey factories while each `r_ij`
//! gets a plain Metropolis step (the constant cancels there).

pub mod conditionals;
pub mod linalg;
pub mod synth;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::factory::{PortkeyBeta, DEFAULT_MAX_LOOPS};
use crate::kernel::{step, ChainState, KernelKind, StepRecord};
use crate::rng::SeedRecord;

pub use conditionals::{
    ln_mu_tilde_bound, ln_sigma2_tilde_bound, mu_tilde_bound, pd_coin, MuConditional, PdCoin,
    Sigma2Conditional,
};
pub use linalg::{r_bounds, RBounds};
pub use synth::{sample_correlation, standardize, synth_data};

/// Hyperparameters of the hierarchical prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationPrior {
    pub tau2: f64,
    pub a0: f64,
    pub b0: f64,
}

impl Default for CorrelationPrior {
    fn default() -> Self {
        Self {
            tau2: 1.0,
            a0: 3.0,
            b0: 0.5,
        }
    }
}

/// Proposal scales and factory settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationTuning {
    pub proposal_sd_r: f64,
    pub proposal_sd_mu: f64,
    pub proposal_sd_sigma2: f64,
    pub beta_mu: PortkeyBeta,
    pub beta_sigma2: PortkeyBeta,
    /// Factory for the `mu` and `sigma2` updates: `FlippedPortkey`, or
    /// `TwoCoin` for plain Barker.
    pub kernel: KernelKind,
    pub max_loops: u64,
}

impl Default for CorrelationTuning {
    fn default() -> Self {
        Self {
            proposal_sd_r: 0.02,
            proposal_sd_mu: 0.3,
            proposal_sd_sigma2: 0.05,
            beta_mu: PortkeyBeta::new(0.9).expect("valid"),
            beta_sigma2: PortkeyBeta::new(0.9).expect("valid"),
            kernel: KernelKind::FlippedPortkey,
            max_loops: DEFAULT_MAX_LOOPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationState {
    pub r: DMatrix<f64>,
    pub mu: f64,
    pub sigma2: f64,
}

impl CorrelationState {
    /// `R = I`, `mu = 0`, `sigma2 = 0.1`.
    pub fn initial(p: usize) -> Self {
        Self {
            r: DMatrix::identity(p, p),
            mu: 0.0,
            sigma2: 0.1,
        }
    }
}

/// Outcome of one factory-driven update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ComponentStep {
    pub accepted: bool,
    /// Zero when the proposal left the support and no factory ran.
    pub loops: u64,
}

impl ComponentStep {
    fn from_record<S>(rec: &StepRecord<S>) -> Self {
        Self {
            accepted: rec.accepted,
            loops: rec.loops(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SweepRecord {
    /// Correlation updates accepted in this sweep.
    pub r_accepted: usize,
    pub mu: ComponentStep,
    pub sigma2: ComponentStep,
}

#[derive(Debug, Clone)]
pub struct CorrelationModel {
    data: DMatrix<f64>,
    scatter: DMatrix<f64>,
    prior: CorrelationPrior,
    tuning: CorrelationTuning,
    state: CorrelationState,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{name} = {v} must be positive and finite"
        )))
    }
}

impl CorrelationModel {
    /// Builds the model from an `n x p` data matrix, used as given. Callers
    /// wanting unit-scale columns apply [`standardize`] first.
    pub fn new(
        data: DMatrix<f64>,
        prior: CorrelationPrior,
        tuning: CorrelationTuning,
    ) -> Result<Self> {
        let p = data.ncols();
        if p < 2 {
            return Err(Error::DimensionMismatch(format!(
                "p = {p}: need at least two columns"
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("data contain non-finite values"));
        }
        check_positive("tau2", prior.tau2)?;
        check_positive("a0", prior.a0)?;
        check_positive("b0", prior.b0)?;
        check_positive("proposal_sd_r", tuning.proposal_sd_r)?;
        check_positive("proposal_sd_mu", tuning.proposal_sd_mu)?;
        check_positive("proposal_sd_sigma2", tuning.proposal_sd_sigma2)?;
        if !matches!(
            tuning.kernel,
            KernelKind::FlippedPortkey | KernelKind::TwoCoin
        ) {
            return Err(Error::ModelContract(format!(
                "kernel `{}` cannot update mu and sigma2; use flipped_portkey or two_coin",
                tuning.kernel
            )));
        }
        if tuning.max_loops == 0 {
            return Err(Error::domain("max_loops must be positive"));
        }
        let scatter = data.transpose() * &data;
        Ok(Self {
            data,
            scatter,
            prior,
            tuning,
            state: CorrelationState::initial(p),
        })
    }

    /// Replaces the current state after checking its invariants.
    pub fn with_state(mut self, state: CorrelationState) -> Result<Self> {
        if state.r.shape() != (self.dim(), self.dim()) {
            return Err(Error::DimensionMismatch(format!(
                "R must be {0}x{0}",
                self.dim()
            )));
        }
        if !linalg::is_correlation_matrix(&state.r) {
            return Err(Error::domain(
                "R must be a positive-definite correlation matrix",
            ));
        }
        check_positive("sigma2", state.sigma2)?;
        if !state.mu.is_finite() {
            return Err(Error::domain("mu must be finite"));
        }
        self.state = state;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn n_obs(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_correlations(&self) -> usize {
        linalg::n_correlations(self.dim())
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn prior(&self) -> &CorrelationPrior {
        &self.prior
    }

    pub fn tuning(&self) -> &CorrelationTuning {
        &self.tuning
    }

    pub fn state(&self) -> &CorrelationState {
        &self.state
    }

    /// `-n/2 ln|R| - tr(R^-1 S) / 2`, or `None` when `R` is not numerically
    /// positive definite.
    fn log_likelihood(&self, r: &DMatrix<f64>) -> Option<f64> {
        let chol = linalg::cholesky(r)?;
        let ln_det: f64 = 2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|d| d.ln())
                .sum::<f64>();
        let trace = chol.solve(&self.scatter).trace();
        Some(-0.5 * self.n_obs() as f64 * ln_det - 0.5 * trace)
    }

    /// Metropolis update of `r_ij` from its full conditional. Returns whether
    /// the proposal was accepted.
    pub fn r_update<R: Rng + ?Sized>(&mut self, i: usize, j: usize, rng: &mut R) -> Result<bool> {
        let (i, j) = (i.min(j), i.max(j));
        let bounds = r_bounds(&self.state.r, i, j)?;
        let current = self.state.r[(i, j)];
        let z: f64 = StandardNormal.sample(rng);
        let proposal = current + self.tuning.proposal_sd_r * z;
        if !bounds.contains(proposal) {
            return Ok(false);
        }
        let mut next = self.state.r.clone();
        next[(i, j)] = proposal;
        next[(j, i)] = proposal;
        let Some(ll_next) = self.log_likelihood(&next) else {
            return Ok(false);
        };
        let ll_cur = self.log_likelihood(&self.state.r).ok_or_else(|| {
            Error::LinearAlgebra(format!("current R is not positive definite at r_{i}{j}"))
        })?;
        let (mu, s2) = (self.state.mu, self.state.sigma2);
        let prior = |r: f64| -(r - mu) * (r - mu) / (2.0 * s2);
        let log_ratio = ll_next + prior(proposal) - ll_cur - prior(current);
        let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
        if accept {
            self.state.r = next;
        }
        Ok(accept)
    }

    /// One flipped portkey step on `mu`.
    pub fn mu_update<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<ComponentStep> {
        let offdiag = linalg::upper_offdiag(&self.state.r);
        let target = MuConditional {
            offdiag: &offdiag,
            dim: self.dim(),
            sigma2: self.state.sigma2,
            tau2: self.prior.tau2,
            proposal_sd: self.tuning.proposal_sd_mu,
            current: self.state.mu,
        };
        let rec = step(
            &target,
            &ChainState::new(self.state.mu),
            self.tuning.kernel,
            self.tuning.beta_mu,
            rng,
            self.tuning.max_loops,
        )?;
        self.state.mu = rec.next.value;
        Ok(ComponentStep::from_record(&rec))
    }

    /// One flipped portkey step on `sigma2`.
    pub fn sigma2_update<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<ComponentStep> {
        let offdiag = linalg::upper_offdiag(&self.state.r);
        let target = Sigma2Conditional {
            offdiag: &offdiag,
            dim: self.dim(),
            mu: self.state.mu,
            a0: self.prior.a0,
            b0: self.prior.b0,
            proposal_sd: self.tuning.proposal_sd_sigma2,
            current: self.state.sigma2,
        };
        let rec = step(
            &target,
            &ChainState::new(self.state.sigma2),
            self.tuning.kernel,
            self.tuning.beta_sigma2,
            rng,
            self.tuning.max_loops,
        )?;
        self.state.sigma2 = rec.next.value;
        Ok(ComponentStep::from_record(&rec))
    }

    /// Updates every `r_ij` with `i < j` in row order, then `mu`, then
    /// `sigma2`.
    pub fn gibbs_sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<SweepRecord> {
        let p = self.dim();
        let mut r_accepted = 0;
        for i in 0..p {
            for j in (i + 1)..p {
                r_accepted += usize::from(self.r_update(i, j, rng)?);
            }
        }
        let mu = self.mu_update(rng)?;
        let sigma2 = self.sigma2_update(rng)?;
        Ok(SweepRecord {
            r_accepted,
            mu,
            sigma2,
        })
    }
}

/// State after each sweep of [`run_gibbs`].
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSample {
    /// Upper-triangle correlations in row order.
    pub r: Vec<f64>,
    pub mu: f64,
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTrace {
    pub samples: Vec<CorrelationSample>,
    pub sweeps: Vec<SweepRecord>,
    pub seed: SeedRecord,
}

impl CorrelationTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mu(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.mu).collect()
    }

    pub fn sigma2(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.sigma2).collect()
    }

    /// Series of the `k`-th upper-triangle correlation.
    pub fn r_series(&self, k: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.r[k]).collect()
    }

    pub fn mu_loops(&self) -> impl Iterator<Item = u64> + '_ {
        self.sweeps.iter().map(|s| s.mu.loops).filter(|&l| l > 0)
    }

    pub fn sigma2_loops(&self) -> impl Iterator<Item = u64> + '_ {
        self.sweeps
            .iter()
            .map(|s| s.sigma2.loops)
            .filter(|&l| l > 0)
    }
}

/// Runs `n_sweeps` Gibbs sweeps from the model's current state. The model is
/// left at the final state.
pub fn run_gibbs(
    model: &mut CorrelationModel,
    n_sweeps: usize,
    seed: SeedRecord,
) -> Result<CorrelationTrace> {
    if n_sweeps == 0 {
        return Err(Error::domain("n_sweeps must be at least 1"));
    }
    let mut rng = seed.rng();
    let mut samples = Vec::with_capacity(n_sweeps);
    let mut sweeps = Vec::with_capacity(n_sweeps);
    for k in 0..n_sweeps {
        let rec = model.gibbs_sweep(&mut rng).map_err(|e| Error::AtStep {
            step: k as u64,
            source: Box::new(e),
        })?;
        let s = model.state();
        samples.push(CorrelationSample {
            r: linalg::upper_offdiag(&s.r),
            mu: s.mu,
            sigma2: s.sigma2,
        });
        sweeps.push(rec);
    }
    Ok(CorrelationTrace {
        samples,
        sweeps,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::special::norm_cdf;

    fn no_data(p: usize) -> DMatrix<f64> {
        DMatrix::zeros(0, p)
    }

    #[test]
    fn p2_sweep_updates_each_component_once() {
        let mut rng = stream_rng(91, 0);
        let y = synth_data(50, &linalg::equicorrelation(2, 0.3), &mut rng).unwrap();
        let mut m =
            CorrelationModel::new(y, CorrelationPrior::default(), CorrelationTuning::default())
                .unwrap();
        let rec = m.gibbs_sweep(&mut rng).unwrap();
        assert!(rec.r_accepted <= 1);
        // mu is unconstrained, so its factory always runs
        assert!(rec.mu.loops >= 1);
    }

    #[test]
    fn sweeps_keep_r_positive_definite() {
        let mut rng = stream_rng(92, 0);
        let y = synth_data(200, &linalg::equicorrelation(5, 0.8), &mut rng).unwrap();
        let tuning = CorrelationTuning {
            proposal_sd_r: 0.2,
            ..Default::default()
        };
        let mut m = CorrelationModel::new(y, CorrelationPrior::default(), tuning).unwrap();
        for _ in 0..300 {
            m.gibbs_sweep(&mut rng).unwrap();
            assert!(linalg::is_correlation_matrix(&m.state().r));
            assert!(m.state().sigma2 > 0.0);
        }
    }

    #[test]
    fn out_of_bounds_proposal_is_rejected() {
        let y = no_data(3);
        let tuning = CorrelationTuning {
            proposal_sd_r: 1e3,
            ..Default::default()
        };
        let mut m = CorrelationModel::new(y, CorrelationPrior::default(), tuning).unwrap();
        let before = m.state().clone();
        let mut rng = stream_rng(93, 0);
        // a step of 1e3 sd lands outside (-1, 1) except with negligible probability
        for _ in 0..50 {
            assert!(!m.r_update(0, 1, &mut rng).unwrap());
        }
        assert_eq!(m.state(), &before);
    }

    #[test]
    fn index_order_does_not_matter() {
        let mut rng = stream_rng(94, 0);
        let y = synth_data(30, &linalg::equicorrelation(3, 0.4), &mut rng).unwrap();
        let mut a =
            CorrelationModel::new(y, CorrelationPrior::default(), CorrelationTuning::default())
                .unwrap();
        let mut b = a.clone();
        let (mut ra, mut rb) = (stream_rng(95, 0), stream_rng(95, 0));
        for _ in 0..100 {
            assert_eq!(
                a.r_update(0, 2, &mut ra).unwrap(),
                b.r_update(2, 0, &mut rb).unwrap()
            );
        }
        assert_eq!(a.state(), b.state());
    }

    /// With no data and fixed `mu, sigma2`, `r_12` of a 2x2 matrix follows
    /// `N(mu, sigma2)` truncated to (-1, 1); compared by chi-square against
    /// the exact bin probabilities.
    #[test]
    fn no_data_r_marginal_is_truncated_prior() {
        let (mu, sigma2) = (0.0, 0.25);
        let tuning = CorrelationTuning {
            proposal_sd_r: 0.6,
            ..Default::default()
        };
        let mut m = CorrelationModel::new(no_data(2), CorrelationPrior::default(), tuning)
            .unwrap()
            .with_state(CorrelationState {
                r: DMatrix::identity(2, 2),
                mu,
                sigma2,
            })
            .unwrap();
        let mut rng = stream_rng(96, 0);
        let bins = 10;
        let mut counts = vec![0usize; bins];
        let (burn, thin, kept) = (1_000, 10, 20_000);
        for k in 0..(burn + thin * kept) {
            m.r_update(0, 1, &mut rng).unwrap();
            if k >= burn && (k - burn) % thin == 0 {
                let r = m.state().r[(0, 1)];
                counts[(((r + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1)] += 1;
            }
        }
        let sigma = sigma2.sqrt();
        let mass = norm_cdf((1.0 - mu) / sigma) - norm_cdf((-1.0 - mu) / sigma);
        let mut chi2 = 0.0;
        for (b, &c) in counts.iter().enumerate() {
            let lo = -1.0 + 2.0 * b as f64 / bins as f64;
            let hi = lo + 2.0 / bins as f64;
            let p = (norm_cdf((hi - mu) / sigma) - norm_cdf((lo - mu) / sigma)) / mass;
            let e = p * kept as f64;
            chi2 += (c as f64 - e).powi(2) / e;
        }
        // chi-square with 9 degrees of freedom, 0.001 critical value
        assert!(chi2 < 27.88, "chi2 = {chi2}, counts {counts:?}");
    }

    #[test]
    fn beta_one_runs_barker_for_mu() {
        let mut rng = stream_rng(97, 0);
        let y = synth_data(100, &linalg::equicorrelation(3, 0.5), &mut rng).unwrap();
        let tuning = CorrelationTuning {
            beta_mu: PortkeyBeta::ONE,
            beta_sigma2: PortkeyBeta::ONE,
            ..Default::default()
        };
        let mut m = CorrelationModel::new(y, CorrelationPrior::default(), tuning).unwrap();
        let t = run_gibbs(&mut m, 200, SeedRecord::new(1, 0)).unwrap();
        assert_eq!(t.len(), 200);
        assert!(t.mu_loops().all(|l| l >= 1));
    }

    #[test]
    fn beta_one_matches_two_coin_bit_for_bit() {
        let mut rng = stream_rng(99, 0);
        let y = synth_data(100, &linalg::equicorrelation(3, 0.5), &mut rng).unwrap();
        let portkey = CorrelationTuning {
            beta_mu: PortkeyBeta::ONE,
            beta_sigma2: PortkeyBeta::ONE,
            ..Default::default()
        };
        let two_coin = CorrelationTuning {
            kernel: KernelKind::TwoCoin,
            ..portkey
        };
        let mut a = CorrelationModel::new(y.clone(), CorrelationPrior::default(), portkey).unwrap();
        let mut b = CorrelationModel::new(y, CorrelationPrior::default(), two_coin).unwrap();
        let ta = run_gibbs(&mut a, 300, SeedRecord::new(2, 3)).unwrap();
        let tb = run_gibbs(&mut b, 300, SeedRecord::new(2, 3)).unwrap();
        assert_eq!(ta, tb);
    }

    #[test]
    fn chains_are_reproducible() {
        let mut rng = stream_rng(98, 0);
        let y = synth_data(100, &linalg::equicorrelation(3, 0.5), &mut rng).unwrap();
        let m = CorrelationModel::new(y, CorrelationPrior::default(), CorrelationTuning::default())
            .unwrap();
        let a = run_gibbs(&mut m.clone(), 100, SeedRecord::new(5, 1)).unwrap();
        let b = run_gibbs(&mut m.clone(), 100, SeedRecord::new(5, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_configuration() {
        assert!(CorrelationModel::new(
            no_data(1),
            CorrelationPrior::default(),
            CorrelationTuning::default()
        )
        .is_err());
        let bad = CorrelationPrior {
            tau2: 0.0,
            ..Default::default()
        };
        assert!(CorrelationModel::new(no_data(3), bad, CorrelationTuning::default()).is_err());
        let m = CorrelationModel::new(
            no_data(3),
            CorrelationPrior::default(),
            CorrelationTuning::default(),
        )
        .unwrap();
        let bad_state = CorrelationState {
            r: linalg::equicorrelation(3, -0.6),
            mu: 0.0,
            sigma2: 0.1,
        };
        assert!(m.clone().with_state(bad_state).is_err());
        assert!(run_gibbs(&mut m.clone(), 0, SeedRecord::new(0, 0)).is_err());
        let explicit = CorrelationTuning {
            kernel: KernelKind::BarkerExplicit,
            ..Default::default()
        };
        assert!(CorrelationModel::new(no_data(3), CorrelationPrior::default(), explicit).is_err());
    }
}
