//! Barker-type MCMC for targets known only through Bernoulli factories.
//!
//! The acceptance step of these chains never evaluates the target density.
//! Instead, each side of a proposed move is written as a bound times a coin,
//! `pi(x) q(x, y) = c_x p_x`, and a two-coin factory returns "accept" with
//! Barker's probability `c_y p_y / (c_x p_x + c_y p_y)`. The portkey variant
//! adds an early exit with probability `1 - beta` on every loop, which keeps
//! the loop count geometric with mean at most `1 / (1 - beta)` at the price of
//! a slightly lower acceptance rate. The flipped variant works with bounds on
//! the reciprocal `1 / (pi(x) q(x, y))` instead.
//!
//! - [`factory`]: the coins and the three factories, with closed-form
//!   acceptance and loop-count expressions.
//! - [`kernel`]: the model contract, one-step transitions and whole chains.
//! - [`models`]: a Gamma mixture of Weibulls, a constrained correlation
//!   model, and small discrete targets for validation.
//! - [`diagnostics`]: ACF, batch-means ESS and loop statistics.

pub mod diagnostics;
pub mod error;
pub mod factory;
pub mod kernel;
pub mod models;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
pub use factory::{FactoryOutcome, PortkeyBeta, DEFAULT_MAX_LOOPS};
pub use kernel::{run_chain, step, ChainState, ChainTrace, KernelKind, StepRecord, TargetModel};
pub use rng::{stream_rng, SeedRecord, SimRng};
