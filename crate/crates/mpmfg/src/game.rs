//! The game primitive: transition kernel, reward, discount, and the mixed
//! (state-strategy) kernel forms shared by every solver.

use std::fmt;
use std::sync::Arc;

use crate::regularizer::Regularizer;
use crate::types::{Distribution, FiniteSpace, ImpactVector};
use crate::{Error, Result};

/// Joint Lipschitz constants of the transition kernel and reward with respect
/// to (impact, state, action), when they are known for a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzConstants {
    pub p_mu: f64,
    pub p_s: f64,
    pub p_a: f64,
    pub r_mu: f64,
    pub r_s: f64,
    pub r_a: f64,
}

impl LipschitzConstants {
    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.p_mu, self.p_s, self.p_a, self.r_mu, self.r_s, self.r_a,
        ];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(
                "lipschitz constants must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Lipschitz bound of the one-step population update in the ensemble
    /// argument: p_s/2 + p_a + p_mu.
    pub fn population_update_bound(&self) -> f64 {
        0.5 * self.p_s + self.p_a + self.p_mu
    }
}

type TransitionFn = dyn Fn(usize, usize, &[f64], &mut [f64]) + Send + Sync;
type RewardFn = dyn Fn(usize, usize, usize, &[f64]) -> f64 + Send + Sync;

/// A discounted game shared by all populations: `transition(s, a, z)` is a
/// state distribution and `reward(k, s, a, z)` a bounded scalar. The impact
/// vector `z` carries the connectivity-weighted influence of all populations;
/// the reward may differ across populations.
#[derive(Clone)]
pub struct GameModel {
    states: FiniteSpace,
    actions: FiniteSpace,
    discount: f64,
    reward_min: f64,
    reward_max: f64,
    lipschitz: Option<LipschitzConstants>,
    transition: Arc<TransitionFn>,
    reward: Arc<RewardFn>,
}

impl fmt::Debug for GameModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GameModel")
            .field("states", &self.states.size())
            .field("actions", &self.actions.size())
            .field("discount", &self.discount)
            .field("reward_range", &(self.reward_min, self.reward_max))
            .finish()
    }
}

impl GameModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        states: FiniteSpace,
        actions: FiniteSpace,
        discount: f64,
        reward_range: (f64, f64),
        lipschitz: Option<LipschitzConstants>,
        transition: Arc<TransitionFn>,
        reward: Arc<RewardFn>,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&discount) || discount <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "discount must lie in (0, 1), got {discount}"
            )));
        }
        if reward_range.0 > reward_range.1 {
            return Err(Error::InvalidParameter("empty reward range".into()));
        }
        if let Some(l) = &lipschitz {
            l.validate()?;
        }
        Ok(Self {
            states,
            actions,
            discount,
            reward_min: reward_range.0,
            reward_max: reward_range.1,
            lipschitz,
            transition,
            reward,
        })
    }

    #[inline]
    pub fn num_states(&self) -> usize {
        self.states.size()
    }

    #[inline]
    pub fn num_actions(&self) -> usize {
        self.actions.size()
    }

    #[inline]
    pub fn discount(&self) -> f64 {
        self.discount
    }

    #[inline]
    pub fn reward_range(&self) -> (f64, f64) {
        (self.reward_min, self.reward_max)
    }

    pub fn lipschitz(&self) -> Option<&LipschitzConstants> {
        self.lipschitz.as_ref()
    }

    /// Writes the transition row P(.|s, a, z) into `out` without validating.
    #[inline]
    pub fn transition_into(&self, s: usize, a: usize, z: &[f64], out: &mut [f64]) {
        (self.transition)(s, a, z, out);
    }

    /// The transition row as a validated distribution.
    pub fn transition(&self, s: usize, a: usize, z: &ImpactVector) -> Result<Distribution> {
        let mut out = vec![0.0; self.num_states()];
        self.transition_into(s, a, z.weights(), &mut out);
        Distribution::new(out)
    }

    /// R(k, s, a, z) for population `k`.
    #[inline]
    pub fn reward(&self, k: usize, s: usize, a: usize, z: &[f64]) -> f64 {
        (self.reward)(k, s, a, z)
    }

    /// Bound on the magnitude of learned action values:
    /// (max |reward| + h_max) / (1 - discount).
    pub fn q_bound(&self, h: &Regularizer) -> f64 {
        let r = self.reward_min.abs().max(self.reward_max.abs());
        (r + h.h_max(self.num_actions())) / (1.0 - self.discount)
    }

    /// Upper bound on achievable regularized action values:
    /// (max reward + h_max) / (1 - discount). The optimistic initialization
    /// point for value learners.
    pub fn q_upper(&self, h: &Regularizer) -> f64 {
        (self.reward_max + h.h_max(self.num_actions())) / (1.0 - self.discount)
    }
}

/// Mixed-strategy transition: the u-weighted convex combination of the
/// action-conditional transition rows at (s, z).
pub fn mixed_transition(
    model: &GameModel,
    s: usize,
    u: &Distribution,
    z: &ImpactVector,
) -> Result<Distribution> {
    if u.len() != model.num_actions() {
        return Err(Error::ShapeMismatch(format!(
            "strategy over {} actions for a model with {}",
            u.len(),
            model.num_actions()
        )));
    }
    let n = model.num_states();
    let mut acc = vec![0.0; n];
    let mut row = vec![0.0; n];
    for (a, &w) in u.weights().iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        model.transition_into(s, a, z.weights(), &mut row);
        for (acc_s, &r) in acc.iter_mut().zip(&row) {
            *acc_s += w * r;
        }
    }
    Distribution::new(acc)
}

/// Mixed-strategy reward: the u-weighted average of R(k, s, ., z).
pub fn mixed_reward(
    model: &GameModel,
    k: usize,
    s: usize,
    u: &Distribution,
    z: &ImpactVector,
) -> Result<f64> {
    if u.len() != model.num_actions() {
        return Err(Error::ShapeMismatch(format!(
            "strategy over {} actions for a model with {}",
            u.len(),
            model.num_actions()
        )));
    }
    Ok(u.weights()
        .iter()
        .enumerate()
        .map(|(a, &w)| w * model.reward(k, s, a, z.weights()))
        .sum())
}
