//! Barker-type Markov chains driven by Bernoulli factories.
//!
//! A [`TargetModel`] supplies proposals and the weighted-coin decomposition of
//! `pi(x) q(x, y)` (or of its reciprocal in flipped mode). [`step`] turns one
//! proposal plus one factory call into a chain transition, and [`run_chain`]
//! iterates it from the model's initial state.

pub mod finite;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::factory::{
    flipped_portkey_two_coin, portkey_two_coin, two_coin, FactoryOutcome, PCoin, PortkeyBeta,
    WeightedCoin,
};
use crate::rng::SeedRecord;

/// Contract a statistical model fulfills to be sampled by the factory
/// kernels.
pub trait TargetModel {
    type State: Clone;
    type Coin: PCoin;

    fn initial_state(&self) -> Self::State;

    /// Draws `y ~ q(from, .)`.
    fn propose<R: Rng + ?Sized>(&self, from: &Self::State, rng: &mut R) -> Self::State;

    /// Proposals outside the support are rejected without a factory call.
    fn in_support(&self, state: &Self::State) -> bool;

    /// Weighted coin for `pi(from) q(from, to)`, or for its reciprocal when
    /// [`TargetModel::flipped`] is true. Models with a symmetric proposal may
    /// leave `q` out of the decomposition.
    fn weighted_coin(
        &self,
        from: &Self::State,
        to: &Self::State,
    ) -> Result<WeightedCoin<Self::Coin>>;

    /// Whether [`TargetModel::weighted_coin`] decomposes reciprocal densities.
    fn flipped(&self) -> bool {
        false
    }

    /// Unnormalized log density, available for validation targets only.
    fn log_density(&self, _state: &Self::State) -> Option<f64> {
        None
    }

    /// `log q(from, to)`. `None` means the proposal is symmetric.
    fn log_proposal_density(&self, _from: &Self::State, _to: &Self::State) -> Option<f64> {
        None
    }
}

/// The acceptance mechanism used by a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    /// Barker's acceptance evaluated from the exact density.
    BarkerExplicit,
    /// Two-coin factory. On a flipped model this runs the two-coin loop on
    /// the reciprocal decomposition, which is still Barker's acceptance.
    TwoCoin,
    Portkey,
    FlippedPortkey,
    /// Metropolis-Hastings acceptance evaluated from the exact density.
    MhExplicit,
}

impl KernelKind {
    pub const ALL: [KernelKind; 5] = [
        KernelKind::BarkerExplicit,
        KernelKind::TwoCoin,
        KernelKind::Portkey,
        KernelKind::FlippedPortkey,
        KernelKind::MhExplicit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::BarkerExplicit => "barker_explicit",
            KernelKind::TwoCoin => "two_coin",
            KernelKind::Portkey => "portkey",
            KernelKind::FlippedPortkey => "flipped_portkey",
            KernelKind::MhExplicit => "mh_explicit",
        }
    }

    pub fn uses_factory(self) -> bool {
        matches!(
            self,
            KernelKind::TwoCoin | KernelKind::Portkey | KernelKind::FlippedPortkey
        )
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KernelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::domain(format!("unknown kernel kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState<S> {
    pub value: S,
    pub step_index: u64,
}

impl<S> ChainState<S> {
    pub fn new(value: S) -> Self {
        Self {
            value,
            step_index: 0,
        }
    }
}

/// One transition of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<S> {
    pub next: ChainState<S>,
    pub accepted: bool,
    /// `None` when no factory ran: explicit kernels and out-of-support
    /// proposals.
    pub outcome: Option<FactoryOutcome>,
}

impl<S> StepRecord<S> {
    /// Factory loops spent on this step; zero when no factory ran.
    pub fn loops(&self) -> u64 {
        self.outcome.map_or(0, |o| o.loops)
    }
}

/// Output of [`run_chain`]. All sequences have one entry per step.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace<S> {
    pub states: Vec<S>,
    pub accepted: Vec<bool>,
    /// Factory loops per step, zero where no factory ran.
    pub loops: Vec<u64>,
    pub seed: SeedRecord,
    pub kernel: KernelKind,
    pub beta: PortkeyBeta,
}

impl<S> ChainTrace<S> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Loop counts of the steps that actually invoked a factory.
    pub fn factory_loops(&self) -> impl Iterator<Item = u64> + '_ {
        self.loops.iter().copied().filter(|&l| l > 0)
    }
}

fn check_compatible<M: TargetModel>(model: &M, kernel: KernelKind) -> Result<()> {
    match kernel {
        KernelKind::Portkey if model.flipped() => Err(Error::ModelContract(
            "portkey kernel needs a model decomposing pi q, not its reciprocal".into(),
        )),
        KernelKind::FlippedPortkey if !model.flipped() => Err(Error::ModelContract(
            "flipped portkey kernel needs a model decomposing 1 / (pi q)".into(),
        )),
        _ => Ok(()),
    }
}

fn explicit_log_weights<M: TargetModel>(
    model: &M,
    x: &M::State,
    y: &M::State,
) -> Result<(f64, f64)> {
    let missing = || Error::ModelContract("explicit kernels need an exact log density".into());
    let lx = model.log_density(x).ok_or_else(missing)?;
    let ly = model.log_density(y).ok_or_else(missing)?;
    let qxy = model.log_proposal_density(x, y).unwrap_or(0.0);
    let qyx = model.log_proposal_density(y, x).unwrap_or(0.0);
    Ok((lx + qxy, ly + qyx))
}

/// Runs the acceptance step for a proposal `y` already drawn from `x`.
fn accept_proposal<M, R>(
    model: &M,
    x: &M::State,
    y: &M::State,
    kernel: KernelKind,
    beta: PortkeyBeta,
    rng: &mut R,
    max_loops: u64,
) -> Result<(bool, Option<FactoryOutcome>)>
where
    M: TargetModel,
    R: Rng + ?Sized,
{
    match kernel {
        KernelKind::BarkerExplicit | KernelKind::MhExplicit => {
            let (wx, wy) = explicit_log_weights(model, x, y)?;
            let alpha = if kernel == KernelKind::BarkerExplicit {
                1.0 / (1.0 + (wx - wy).exp())
            } else {
                (wy - wx).exp().min(1.0)
            };
            Ok((rng.random::<f64>() < alpha, None))
        }
        _ => {
            let cx = model.weighted_coin(x, y)?;
            let cy = model.weighted_coin(y, x)?;
            cx.validate()?;
            cy.validate()?;
            let outcome = match (kernel, model.flipped()) {
                (KernelKind::TwoCoin, false) => two_coin(&cx, &cy, rng, max_loops)?,
                (KernelKind::TwoCoin, true) => {
                    flipped_portkey_two_coin(&cx, &cy, PortkeyBeta::ONE, rng, max_loops)?
                }
                (KernelKind::Portkey, _) => portkey_two_coin(&cx, &cy, beta, rng, max_loops)?,
                (KernelKind::FlippedPortkey, _) => {
                    flipped_portkey_two_coin(&cx, &cy, beta, rng, max_loops)?
                }
                _ => unreachable!("explicit kernels handled above"),
            };
            Ok((outcome.accepted, Some(outcome)))
        }
    }
}

/// One Barker-type transition from `x`.
///
/// `beta` is ignored by the kernels that have no portkey gate.
pub fn step<M, R>(
    model: &M,
    x: &ChainState<M::State>,
    kernel: KernelKind,
    beta: PortkeyBeta,
    rng: &mut R,
    max_loops: u64,
) -> Result<StepRecord<M::State>>
where
    M: TargetModel,
    R: Rng + ?Sized,
{
    check_compatible(model, kernel)?;
    let y = model.propose(&x.value, rng);
    let (accepted, outcome) = if model.in_support(&y) {
        accept_proposal(model, &x.value, &y, kernel, beta, rng, max_loops)?
    } else {
        (false, None)
    };
    let value = if accepted { y } else { x.value.clone() };
    Ok(StepRecord {
        next: ChainState {
            value,
            step_index: x.step_index + 1,
        },
        accepted,
        outcome,
    })
}

/// Runs `n_steps` transitions from the model's initial state on the stream
/// named by `seed`.
pub fn run_chain<M: TargetModel>(
    model: &M,
    kernel: KernelKind,
    beta: PortkeyBeta,
    n_steps: usize,
    seed: SeedRecord,
    max_loops: u64,
) -> Result<ChainTrace<M::State>> {
    if n_steps == 0 {
        return Err(Error::domain("n_steps must be at least 1"));
    }
    check_compatible(model, kernel)?;
    let mut rng = seed.rng();
    let mut state = ChainState::new(model.initial_state());
    let mut trace = ChainTrace {
        states: Vec::with_capacity(n_steps),
        accepted: Vec::with_capacity(n_steps),
        loops: Vec::with_capacity(n_steps),
        seed,
        kernel,
        beta,
    };
    for i in 0..n_steps {
        let rec =
            step(model, &state, kernel, beta, &mut rng, max_loops).map_err(|e| Error::AtStep {
                step: i as u64,
                source: Box::new(e),
            })?;
        trace.accepted.push(rec.accepted);
        trace.loops.push(rec.loops());
        trace.states.push(rec.next.value.clone());
        state = rec.next;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factory::{BernoulliCoin, DEFAULT_MAX_LOOPS};
    use crate::models::discrete::DiscreteTarget;
    use crate::rng::{stream_rng, SeedRecord};

    /// Two states, uniform unnormalized density 1, always propose the other
    /// state. Coins decompose pi q = 1 as c = 1, p = 1.
    fn two_state(flipped: bool) -> DiscreteTarget {
        DiscreteTarget::symmetric_uniform_proposal(vec![1.0, 1.0], 1.0, flipped).unwrap()
    }

    fn acceptance_rate<M: TargetModel>(model: &M, kernel: KernelKind, beta: f64, n: usize) -> f64 {
        let t = run_chain(
            model,
            kernel,
            PortkeyBeta::new(beta).unwrap(),
            n,
            SeedRecord::new(5, 0),
            100,
        )
        .unwrap();
        t.accepted.iter().filter(|&&a| a).count() as f64 / n as f64
    }

    #[test]
    fn two_state_explicit_barker_accepts_half() {
        let n = 100_000;
        let rate = acceptance_rate(&two_state(false), KernelKind::BarkerExplicit, 1.0, n);
        assert!((rate - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
        let rate = acceptance_rate(&two_state(false), KernelKind::MhExplicit, 1.0, n);
        assert_eq!(rate, 1.0);
    }

    #[test]
    fn two_state_portkey_accepts_quarter() {
        let n = 100_000;
        let sd = (0.25 * 0.75 / n as f64).sqrt();
        let rate = acceptance_rate(&two_state(false), KernelKind::Portkey, 0.5, n);
        assert!((rate - 0.25).abs() < 4.0 * sd, "{rate}");
        let rate = acceptance_rate(&two_state(true), KernelKind::FlippedPortkey, 0.5, n);
        assert!((rate - 0.25).abs() < 4.0 * sd, "{rate}");
    }

    #[test]
    fn kernel_model_mismatch_is_rejected() {
        let seed = SeedRecord::new(1, 0);
        let e = run_chain(
            &two_state(false),
            KernelKind::FlippedPortkey,
            PortkeyBeta::ONE,
            5,
            seed,
            10,
        );
        assert!(matches!(e, Err(Error::ModelContract(_))));
        let e = run_chain(
            &two_state(true),
            KernelKind::Portkey,
            PortkeyBeta::ONE,
            5,
            seed,
            10,
        );
        assert!(matches!(e, Err(Error::ModelContract(_))));
        assert!(run_chain(
            &two_state(false),
            KernelKind::TwoCoin,
            PortkeyBeta::ONE,
            0,
            seed,
            10
        )
        .is_err());
    }

    #[test]
    fn trace_shape_and_determinism() {
        let m = two_state(false);
        let seed = SeedRecord::new(77, 2);
        let t1 = run_chain(
            &m,
            KernelKind::Portkey,
            PortkeyBeta::new(0.9).unwrap(),
            1,
            seed,
            100,
        )
        .unwrap();
        assert_eq!(t1.len(), 1);
        let a = run_chain(
            &m,
            KernelKind::Portkey,
            PortkeyBeta::new(0.9).unwrap(),
            500,
            seed,
            100,
        )
        .unwrap();
        let b = run_chain(
            &m,
            KernelKind::Portkey,
            PortkeyBeta::new(0.9).unwrap(),
            500,
            seed,
            100,
        )
        .unwrap();
        assert_eq!(a, b);
        assert!(a.loops.iter().all(|&l| l >= 1));
        let e = run_chain(
            &m,
            KernelKind::BarkerExplicit,
            PortkeyBeta::ONE,
            50,
            seed,
            100,
        )
        .unwrap();
        assert!(e.loops.iter().all(|&l| l == 0));
    }

    #[test]
    fn beta_one_portkey_matches_two_coin_trace() {
        let m = DiscreteTarget::symmetric_uniform_proposal(vec![0.1, 0.3, 0.2, 0.4], 2.0, false)
            .unwrap();
        let seed = SeedRecord::new(3, 9);
        let a = run_chain(
            &m,
            KernelKind::TwoCoin,
            PortkeyBeta::ONE,
            2000,
            seed,
            DEFAULT_MAX_LOOPS,
        )
        .unwrap();
        let b = run_chain(
            &m,
            KernelKind::Portkey,
            PortkeyBeta::ONE,
            2000,
            seed,
            DEFAULT_MAX_LOOPS,
        )
        .unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.accepted, b.accepted);
        assert_eq!(a.loops, b.loops);
    }

    /// A model on the positive half-line whose proposals are often negative.
    struct HalfLine;

    impl TargetModel for HalfLine {
        type State = f64;
        type Coin = BernoulliCoin;

        fn initial_state(&self) -> f64 {
            1.0
        }
        fn propose<R: Rng + ?Sized>(&self, from: &f64, rng: &mut R) -> f64 {
            from - 10.0 * rng.random::<f64>()
        }
        fn in_support(&self, s: &f64) -> bool {
            *s > 0.0
        }
        fn weighted_coin(&self, _: &f64, _: &f64) -> Result<WeightedCoin<BernoulliCoin>> {
            WeightedCoin::new(1.0, BernoulliCoin::new(0.5)?)
        }
    }

    #[test]
    fn out_of_support_proposal_skips_factory() {
        let mut rng = stream_rng(4, 0);
        let x = ChainState::new(0.001);
        // proposal is from - 10 u, negative unless u < 1e-4
        for _ in 0..100 {
            let rec = step(
                &HalfLine,
                &x,
                KernelKind::TwoCoin,
                PortkeyBeta::ONE,
                &mut rng,
                10,
            )
            .unwrap();
            if rec.outcome.is_none() {
                assert!(!rec.accepted);
                assert_eq!(rec.next.value, 0.001);
                assert_eq!(rec.loops(), 0);
                assert_eq!(rec.next.step_index, 1);
                return;
            }
        }
        panic!("expected an out-of-support proposal");
    }

    struct BadBound;

    impl TargetModel for BadBound {
        type State = f64;
        type Coin = BernoulliCoin;

        fn initial_state(&self) -> f64 {
            0.0
        }
        fn propose<R: Rng + ?Sized>(&self, from: &f64, rng: &mut R) -> f64 {
            from + rng.random::<f64>() - 0.5
        }
        fn in_support(&self, _: &f64) -> bool {
            true
        }
        fn weighted_coin(&self, _: &f64, _: &f64) -> Result<WeightedCoin<BernoulliCoin>> {
            WeightedCoin::new(1.0, BernoulliCoin::unchecked(1.5))
        }
    }

    #[test]
    fn violated_bound_is_a_contract_error_with_step_index() {
        let err = run_chain(
            &BadBound,
            KernelKind::TwoCoin,
            PortkeyBeta::ONE,
            10,
            SeedRecord::new(1, 1),
            10,
        )
        .unwrap_err();
        assert!(matches!(err, Error::AtStep { step: 0, .. }));
        assert!(matches!(err.root(), Error::ModelContract(_)));
    }

    #[test]
    fn kernel_names_round_trip() {
        for k in KernelKind::ALL {
            assert_eq!(k.as_str().parse::<KernelKind>().unwrap(), k);
        }
        assert!("metropolis".parse::<KernelKind>().is_err());
    }
}
