//! Proximal policy improvement and the complete-information equilibrium
//! solver.
//!
//! The improvement step maximizes, per state, the regularized payoff
//! `<u, q(s, .)> + h(u)` minus a squared-distance proximal penalty keeping
//! the new strategy near the current one. Iterating improvement against the
//! stable mean field drives the profile to the game's equilibrium.

use crate::evaluation::exact_q;
use crate::game::{GameModel, LipschitzConstants};
use crate::population::{stable_ensemble, FixedPoint, SbmModel, STABLE_MAX_ITER, STABLE_TOL};
use crate::regularizer::Regularizer;
use crate::simplex::project_to_simplex;
use crate::types::{
    policy_distance, Distribution, MeanFieldEnsemble, Policy, PolicyProfile, QTable,
};
use crate::{Error, Result};

/// Inner solver settings for the per-state proximal maximization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerConfig {
    pub max_iter: usize,
    /// Gradient step; defaults to eta / (1 + eta) when unset.
    pub step: Option<f64>,
    /// Stop when the iterate moves less than this in L1.
    pub tol: f64,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            step: None,
            tol: 1e-10,
        }
    }
}

/// Configuration of the proximal improvement step.
#[derive(Debug, Clone, PartialEq)]
pub struct PmaConfig {
    /// Learning rate eta > 0 (the proximal weight is 1 / (2 eta)).
    pub eta: f64,
    /// Slack of the strategy constraint set {u : h(u) >= h_max - l_h}.
    /// `None` leaves the constraint inactive.
    pub l_h: Option<f64>,
    pub inner: InnerConfig,
}

impl PmaConfig {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::InvalidParameter(format!("eta must be > 0, got {eta}")));
        }
        Ok(Self {
            eta,
            l_h: None,
            inner: InnerConfig::default(),
        })
    }

    pub fn with_constraint(mut self, l_h: f64) -> Result<Self> {
        if l_h < 0.0 {
            return Err(Error::InvalidParameter("l_h must be >= 0".into()));
        }
        self.l_h = Some(l_h);
        Ok(self)
    }

    /// Constraint slack from declared model constants, when available.
    pub fn with_constraint_from(mut self, model: &GameModel) -> Result<Self> {
        if let Some(c) = model.lipschitz() {
            self.l_h = Some(constraint_slack(c, model.discount())?);
        }
        Ok(self)
    }

    fn step_size(&self) -> f64 {
        self.inner.step.unwrap_or(self.eta / (1.0 + self.eta))
    }
}

/// The action-value oscillation bound `r_a + gamma r_s p_a / (2 - gamma p_s)`
/// that sizes the strategy constraint set.
pub fn constraint_slack(c: &LipschitzConstants, gamma: f64) -> Result<f64> {
    c.validate()?;
    if gamma * c.p_s >= 2.0 {
        return Err(Error::InvalidParameter(format!(
            "discount * p_s = {} not below 2",
            gamma * c.p_s
        )));
    }
    Ok(c.r_a + gamma * c.r_s * c.p_a / (2.0 - gamma * c.p_s))
}

/// Outcome of one proximal improvement; `converged` is false when any
/// per-state inner solve hit its iteration budget.
#[derive(Debug, Clone)]
pub struct AscentOutcome {
    pub policy: Policy,
    pub converged: bool,
}

fn objective(q_row: &[f64], pi_row: &[f64], u: &[f64], h: &Regularizer, eta: f64) -> f64 {
    let lin: f64 = u.iter().zip(q_row).map(|(ui, qi)| ui * qi).sum();
    let prox: f64 = u
        .iter()
        .zip(pi_row)
        .map(|(ui, pi)| (ui - pi) * (ui - pi))
        .sum();
    lin + h.eval(u) - prox / (2.0 * eta)
}

/// Maximizes the proximal objective for one state by projected gradient
/// ascent (monotone: the step is halved locally whenever it would decrease
/// the objective). Returns the best iterate and whether movement fell below
/// tolerance.
fn solve_state(
    q_row: &[f64],
    pi_row: &[f64],
    h: &Regularizer,
    cfg: &PmaConfig,
) -> (Vec<f64>, bool) {
    let n = q_row.len();
    let eta = cfg.eta;
    let base_step = cfg.step_size();
    let mut u: Vec<f64> = pi_row.to_vec();
    let mut best = u.clone();
    let mut best_val = objective(q_row, pi_row, &u, h, eta);
    let mut grad = vec![0.0; n];
    let mut converged = false;
    for _ in 0..cfg.inner.max_iter {
        h.grad_into(&u, &mut grad);
        for a in 0..n {
            grad[a] += q_row[a] - (u[a] - pi_row[a]) / eta;
        }
        let mut step = base_step;
        let mut accepted = None;
        for _ in 0..40 {
            let mut cand: Vec<f64> = u.iter().zip(&grad).map(|(ui, g)| ui + step * g).collect();
            project_to_simplex(&mut cand);
            let val = objective(q_row, pi_row, &cand, h, eta);
            if val >= best_val - 1e-15 {
                accepted = Some((cand, val));
                break;
            }
            step *= 0.5;
        }
        let Some((next, val)) = accepted else {
            break; // no ascent direction left at this scale
        };
        let moved: f64 = next.iter().zip(&u).map(|(a, b)| (a - b).abs()).sum();
        if val > best_val {
            best_val = val;
            best = next.clone();
        }
        u = next;
        if moved <= cfg.inner.tol {
            converged = true;
            break;
        }
    }
    (best, converged)
}

/// Pulls `u` toward the regularizer's maximizer until it enters the
/// superlevel set {h >= h_max - slack}. The set is convex and contains
/// u_max, so the segment crosses its boundary once; bisect to 1e-10.
fn enforce_constraint(u: &mut [f64], h: &Regularizer, slack: f64) {
    let n = u.len();
    let target = h.h_max(n) - slack;
    if h.eval(u) >= target {
        return;
    }
    let u_max = h.u_max(n);
    let blend = |t: f64, out: &mut [f64], base: &[f64]| {
        for i in 0..n {
            out[i] = (1.0 - t) * base[i] + t * u_max.get(i);
        }
    };
    let base = u.to_vec();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut buf = vec![0.0; n];
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        blend(mid, &mut buf, &base);
        if h.eval(&buf) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    blend(hi, &mut buf, &base);
    u.copy_from_slice(&buf);
}

/// One proximal improvement of a single policy against the action values
/// `q`. Each state's strategy maximizes
/// `<u, q(s,.)> + h(u) - ||u - pi(s)||^2 / (2 eta)` over the constrained
/// simplex.
pub fn ascent_step(
    q: &QTable,
    pi: &Policy,
    cfg: &PmaConfig,
    h: &Regularizer,
) -> Result<AscentOutcome> {
    if q.states() != pi.states() || q.actions() != pi.actions() {
        return Err(Error::ShapeMismatch(format!(
            "q table {}x{} vs policy {}x{}",
            q.states(),
            q.actions(),
            pi.states(),
            pi.actions()
        )));
    }
    if q.data().iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite action value".into()));
    }
    let mut rows = Vec::with_capacity(pi.states());
    let mut all_converged = true;
    for s in 0..pi.states() {
        let (mut u, conv) = solve_state(q.row(s), pi.row(s), h, cfg);
        all_converged &= conv;
        if let Some(slack) = cfg.l_h {
            enforce_constraint(&mut u, h, slack);
        }
        rows.push(Distribution::new(u)?);
    }
    Ok(AscentOutcome {
        policy: Policy::from_rows(rows)?,
        converged: all_converged,
    })
}

/// One full improvement of a profile: compute the stable ensemble, evaluate
/// each population exactly there, and take one proximal step per population.
pub fn improve_profile(
    model: &GameModel,
    h: &Regularizer,
    sbm: &SbmModel,
    profile: &PolicyProfile,
    cfg: &PmaConfig,
) -> Result<(PolicyProfile, FixedPoint<MeanFieldEnsemble>)> {
    let fp = stable_ensemble(model, sbm, profile, STABLE_TOL, STABLE_MAX_ITER, None)?;
    let mut next = profile.clone();
    for k in 0..sbm.populations() {
        let q = exact_q(model, h, sbm, profile, &fp.value, k)?;
        let out = ascent_step(&q, profile.policy(k), cfg, h)?;
        next.set_policy(k, out.policy);
    }
    Ok((next, fp))
}

/// Result of the complete-information solve.
#[derive(Debug, Clone)]
pub struct NashSolve {
    pub profile: PolicyProfile,
    pub ensemble: MeanFieldEnsemble,
    /// Successive policy distances, one entry per outer iteration.
    pub trace: Vec<f64>,
    /// The profile after each outer iteration (same length as `trace`).
    pub intermediates: Vec<PolicyProfile>,
    pub iterations: usize,
    pub converged: bool,
}

/// Iterates profile improvement until successive profiles move less than
/// `eps_pi`, starting from `pi0` (the regularizer-maximizing constant
/// profile when absent).
pub fn solve(
    model: &GameModel,
    h: &Regularizer,
    sbm: &SbmModel,
    pi0: Option<&PolicyProfile>,
    cfg: &PmaConfig,
    eps_pi: f64,
    max_outer: usize,
) -> Result<NashSolve> {
    if eps_pi <= 0.0 {
        return Err(Error::InvalidParameter("eps_pi must be > 0".into()));
    }
    let mut profile = match pi0 {
        Some(p) => p.clone(),
        None => PolicyProfile::constant(
            h.u_max(model.num_actions()),
            sbm.populations(),
            model.num_states(),
        ),
    };
    let mut trace = Vec::new();
    let mut intermediates = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_outer {
        let (next, _) = improve_profile(model, h, sbm, &profile, cfg)?;
        let delta = policy_distance(&next, &profile)?;
        trace.push(delta);
        intermediates.push(next.clone());
        profile = next;
        iterations += 1;
        if delta <= eps_pi {
            converged = true;
            break;
        }
    }
    let ensemble = stable_ensemble(model, sbm, &profile, STABLE_TOL, STABLE_MAX_ITER, None)?.value;
    Ok(NashSolve {
        profile,
        ensemble,
        trace,
        intermediates,
        iterations,
        converged,
    })
}
