//! Numerical toolkit for multi-population mean-field games coupled through a
//! stochastic-block-model graphon.
//!
//! Three solution paths are provided:
//!
//! * [`mirror`] — exact fixed-point solving under complete information:
//!   stable-population computation, exact policy evaluation, and proximal
//!   policy improvement, iterated to a Nash equilibrium.
//! * [`oracle`] — the same loop driven by a sampling simulator: transition
//!   kernels are estimated from stratified draws and evaluation runs against
//!   the estimate.
//! * [`ggrs`] — finite-agent learning from a single trajectory: the agent
//!   network is re-sampled from the block model at every step, each agent
//!   feels only its current neighbors, and policies are learned by
//!   conditional temporal-difference evaluation plus mirror ascent.
//!
//! [`bench`] builds the three-population epidemic benchmark used by the
//! test-suite and the CLI; [`metrics`] houses evaluation metrics (average
//! discounted reward, exploitability, deviation curves, empirical Lipschitz
//! estimation).

pub mod bench;
pub mod evaluation;
pub mod game;
pub mod ggrs;
pub mod metrics;
pub mod mirror;
pub mod oracle;
pub mod population;
pub mod regularizer;
pub mod rng;
pub mod simplex;
pub mod types;

mod error;

pub use error::{Error, Result};
pub use game::{mixed_reward, mixed_transition, GameModel, LipschitzConstants};
pub use regularizer::{Regularizer, RegularizerKind};
pub use types::{
    ensemble_distance, policy_distance, Distribution, FiniteSpace, ImpactVector,
    MeanFieldEnsemble, Observation, Policy, PolicyProfile, QTable,
};
