//! Simulator-driven learning: transition kernels estimated from stratified
//! oracle draws, population updates pushed through the estimate, and the
//! proximal improvement loop run entirely against estimated quantities.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::evaluation::solve_bellman_linear;
use crate::game::GameModel;
use crate::population::{aggregated_impact, FixedPoint, SbmModel};
use crate::regularizer::Regularizer;
use crate::rng::{derive_stream, tag};
use crate::types::{
    ensemble_distance, policy_distance, Distribution, ImpactVector, MeanFieldEnsemble,
    PolicyProfile, QTable,
};
use crate::{Error, Result};

/// A sampling wrapper around a game: `sample` draws the next state from the
/// true kernel and returns the (deterministic) reward. Draw streams are named
/// by (group, state, action) so estimation work can be reordered or
/// parallelized without changing results.
pub struct SimulatorOracle {
    model: GameModel,
    seed: u64,
    streams: HashMap<(usize, usize, usize), ChaCha8Rng>,
    row_buf: Vec<f64>,
}

impl SimulatorOracle {
    pub fn new(model: GameModel, seed: u64) -> Self {
        let n = model.num_states();
        Self {
            model,
            seed,
            streams: HashMap::new(),
            row_buf: vec![0.0; n],
        }
    }

    pub fn model(&self) -> &GameModel {
        &self.model
    }

    /// One draw of (next state, reward) at (s, a, z) for stream group `k`.
    pub fn sample(&mut self, k: usize, s: usize, a: usize, z: &[f64]) -> (usize, f64) {
        let seed = self.seed;
        let stream = self
            .streams
            .entry((k, s, a))
            .or_insert_with(|| derive_stream(seed, &[tag::ORACLE, k as u64, s as u64, a as u64]));
        self.model.transition_into(s, a, z, &mut self.row_buf);
        let u: f64 = stream.gen();
        let s_next = crate::rng::sample_index(&self.row_buf, u);
        let r = self.model.reward(k, s, a, z);
        (s_next, r)
    }
}

/// Empirical transition rows at one impact vector, with per-pair visit
/// counts. Rows are valid distributions wherever the count is positive.
#[derive(Debug, Clone)]
pub struct EmpiricalKernel {
    states: usize,
    actions: usize,
    counts: Vec<u32>,
    rows: Vec<f64>,
}

impl EmpiricalKernel {
    #[inline]
    pub fn count(&self, s: usize, a: usize) -> u32 {
        self.counts[s * self.actions + a]
    }

    #[inline]
    pub fn visited(&self, s: usize, a: usize) -> bool {
        self.count(s, a) > 0
    }

    /// The estimated row, or None for an unvisited pair.
    pub fn row(&self, s: usize, a: usize) -> Option<&[f64]> {
        if !self.visited(s, a) {
            return None;
        }
        let i = (s * self.actions + a) * self.states;
        Some(&self.rows[i..i + self.states])
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }
}

/// Estimates every transition row at impact `z` from exactly `n_per_pair`
/// draws per state-action pair (stratified, so no pair goes unvisited).
pub fn estimate_kernel(
    oracle: &mut SimulatorOracle,
    group: usize,
    z: &ImpactVector,
    n_per_pair: usize,
) -> Result<EmpiricalKernel> {
    if n_per_pair == 0 {
        return Err(Error::InvalidParameter("n_per_pair must be >= 1".into()));
    }
    let (ns, na) = (oracle.model.num_states(), oracle.model.num_actions());
    let mut counts = vec![0u32; ns * na];
    let mut rows = vec![0.0; ns * na * ns];
    for s in 0..ns {
        for a in 0..na {
            let base = (s * na + a) * ns;
            for _ in 0..n_per_pair {
                let (s_next, _) = oracle.sample(group, s, a, z.weights());
                rows[base + s_next] += 1.0;
            }
            counts[s * na + a] = n_per_pair as u32;
            for x in &mut rows[base..base + ns] {
                *x /= n_per_pair as f64;
            }
        }
    }
    Ok(EmpiricalKernel {
        states: ns,
        actions: na,
        counts,
        rows,
    })
}

/// One-step ensemble evolution through estimated kernels: per population,
/// estimate the rows at that population's impact and push its field through
/// policy and estimate.
pub fn approx_step_ensemble(
    oracle: &mut SimulatorOracle,
    sbm: &SbmModel,
    mu: &MeanFieldEnsemble,
    profile: &PolicyProfile,
    n_per_pair: usize,
) -> Result<MeanFieldEnsemble> {
    let ns = oracle.model.num_states();
    let mut fields = Vec::with_capacity(sbm.populations());
    for k in 0..sbm.populations() {
        let z = aggregated_impact(sbm, mu, k)?;
        let kernel = estimate_kernel(oracle, k, &z, n_per_pair)?;
        let pi = profile.policy(k);
        let field = mu.field(k);
        let mut acc = vec![0.0; ns];
        for s in 0..ns {
            let m = field.get(s);
            if m == 0.0 {
                continue;
            }
            for (a, &pa) in pi.row(s).iter().enumerate() {
                let coeff = m * pa;
                if coeff == 0.0 {
                    continue;
                }
                let row = kernel.row(s, a).ok_or_else(|| {
                    Error::Numerical(format!("unvisited pair ({s}, {a}) carries mass"))
                })?;
                for (acc_s, &p) in acc.iter_mut().zip(row) {
                    *acc_s += coeff * p;
                }
            }
        }
        fields.push(Distribution::new(acc)?);
    }
    MeanFieldEnsemble::new(fields)
}

/// Iterates the estimated one-step update until the successive change drops
/// to `eps_pop` (or the budget runs out; the last iterate is then returned
/// flagged). Follows the post-update convention: the returned ensemble is the
/// newest iterate.
pub fn approx_stable_ensemble(
    oracle: &mut SimulatorOracle,
    sbm: &SbmModel,
    profile: &PolicyProfile,
    eps_pop: f64,
    n_per_pair: usize,
    mu0: Option<&MeanFieldEnsemble>,
    max_iter: usize,
) -> Result<FixedPoint<MeanFieldEnsemble>> {
    if eps_pop <= 0.0 {
        return Err(Error::InvalidParameter("eps_pop must be > 0".into()));
    }
    if max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
    }
    let mut mu = match mu0 {
        Some(m) => m.clone(),
        None => MeanFieldEnsemble::uniform(sbm.populations(), oracle.model.num_states()),
    };
    let mut delta = f64::INFINITY;
    for it in 0..max_iter {
        let next = approx_step_ensemble(oracle, sbm, &mu, profile, n_per_pair)?;
        if next.has_nan() {
            return Err(Error::Numerical("NaN in sampled population iterate".into()));
        }
        delta = ensemble_distance(&next, &mu)?;
        mu = next;
        if delta <= eps_pop {
            return Ok(FixedPoint {
                value: mu,
                iterations: it + 1,
                residual: delta,
                converged: true,
            });
        }
    }
    Ok(FixedPoint {
        value: mu,
        iterations: max_iter,
        residual: delta,
        converged: false,
    })
}

/// Evaluation against an estimated kernel: solves the same Bellman linear
/// system as the exact path, with estimated rows in place of the true ones.
fn q_from_kernel(
    model: &GameModel,
    h: &Regularizer,
    kernel: &EmpiricalKernel,
    z: &ImpactVector,
    pi: &crate::types::Policy,
    k: usize,
    q_tol: f64,
) -> Result<QTable> {
    let (ns, na) = (model.num_states(), model.num_actions());
    let h_pi: Vec<f64> = (0..ns).map(|s| h.eval(pi.row(s))).collect();
    let mut b = vec![0.0; ns * na];
    for s in 0..ns {
        for a in 0..na {
            let row = kernel
                .row(s, a)
                .ok_or_else(|| Error::Numerical(format!("unvisited pair ({s}, {a})")))?;
            let cont: f64 = row.iter().zip(&h_pi).map(|(p, hh)| p * hh).sum();
            b[s * na + a] = model.reward(k, s, a, z.weights()) + model.discount() * cont;
        }
    }
    let q = solve_bellman_linear(
        ns,
        na,
        model.discount(),
        &mut |s, a, out| out.copy_from_slice(kernel.row(s, a).unwrap()),
        &b,
        pi,
    )?;
    // direct solve; verify the defect against the estimated system
    let mut worst: f64 = 0.0;
    for s in 0..ns {
        for a in 0..na {
            let row = kernel.row(s, a).unwrap();
            let mut cont = 0.0;
            for (s_next, &p) in row.iter().enumerate() {
                let ev: f64 = pi
                    .row(s_next)
                    .iter()
                    .zip(q.row(s_next))
                    .map(|(pa, qv)| pa * qv)
                    .sum();
                cont += p * (ev + h_pi[s_next]);
            }
            let t = model.reward(k, s, a, z.weights()) + model.discount() * cont;
            worst = worst.max((q.get(s, a) - t).abs());
        }
    }
    if worst > q_tol {
        return Err(Error::Numerical(format!(
            "kernel evaluation residual {worst} above {q_tol}"
        )));
    }
    Ok(q)
}

/// Result of the simulator-driven solve.
#[derive(Debug, Clone)]
pub struct OracleSolve {
    pub profile: PolicyProfile,
    pub trace: Vec<f64>,
    /// The profile after each outer iteration (same length as `trace`).
    pub intermediates: Vec<PolicyProfile>,
    pub iterations: usize,
    pub converged: bool,
    /// True when every inner population loop met its tolerance.
    pub population_converged: bool,
}

/// The improvement loop driven entirely by the oracle: per outer iteration,
/// reach an approximately stable ensemble (warm-started from the previous
/// one), evaluate each population against a freshly estimated kernel at the
/// frozen ensemble, and take one proximal step.
#[allow(clippy::too_many_arguments)]
pub fn solve(
    oracle: &mut SimulatorOracle,
    h: &Regularizer,
    sbm: &SbmModel,
    pi0: Option<&PolicyProfile>,
    cfg: &crate::mirror::PmaConfig,
    eps_pi: f64,
    eps_pop: f64,
    n_per_pair: usize,
    q_tol: f64,
    max_outer: usize,
    max_pop_iter: usize,
) -> Result<OracleSolve> {
    if eps_pi <= 0.0 {
        return Err(Error::InvalidParameter("eps_pi must be > 0".into()));
    }
    let model = oracle.model.clone();
    let mut profile = match pi0 {
        Some(p) => p.clone(),
        None => PolicyProfile::constant(
            h.u_max(model.num_actions()),
            sbm.populations(),
            model.num_states(),
        ),
    };
    let mut mu = MeanFieldEnsemble::uniform(sbm.populations(), model.num_states());
    let mut trace = Vec::new();
    let mut intermediates = Vec::new();
    let mut converged = false;
    let mut population_converged = true;
    let mut iterations = 0;
    while iterations < max_outer {
        let fp = approx_stable_ensemble(
            oracle,
            sbm,
            &profile,
            eps_pop,
            n_per_pair,
            Some(&mu),
            max_pop_iter,
        )?;
        population_converged &= fp.converged;
        mu = fp.value;
        let mut next = profile.clone();
        for k in 0..sbm.populations() {
            let z = aggregated_impact(sbm, &mu, k)?;
            let kernel = estimate_kernel(oracle, k, &z, n_per_pair)?;
            let q = q_from_kernel(&model, h, &kernel, &z, profile.policy(k), k, q_tol)?;
            let out = crate::mirror::ascent_step(&q, profile.policy(k), cfg, h)?;
            next.set_policy(k, out.policy);
        }
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
    Ok(OracleSolve {
        profile,
        trace,
        intermediates,
        iterations,
        converged,
        population_converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::FiniteSpace;
    use std::sync::Arc;

    fn deterministic_cycle_game() -> GameModel {
        // next state = s + 1 mod 3 for action 0, stay for action 1
        GameModel::new(
            FiniteSpace::new(3).unwrap(),
            FiniteSpace::new(2).unwrap(),
            0.9,
            (0.0, 1.0),
            None,
            Arc::new(|s, a, _z, out: &mut [f64]| {
                out.fill(0.0);
                out[if a == 0 { (s + 1) % 3 } else { s }] = 1.0;
            }),
            Arc::new(|_k, s, _a, _z| if s == 0 { 1.0 } else { 0.0 }),
        )
        .unwrap()
    }

    #[test]
    fn deterministic_kernel_is_estimated_exactly() {
        let mut oracle = SimulatorOracle::new(deterministic_cycle_game(), 7);
        let z = ImpactVector::zeros(3);
        let kernel = estimate_kernel(&mut oracle, 0, &z, 1).unwrap();
        for s in 0..3 {
            let row = kernel.row(s, 0).unwrap();
            let mut expect = vec![0.0; 3];
            expect[(s + 1) % 3] = 1.0;
            assert_eq!(row, &expect[..]);
        }
    }

    #[test]
    fn zero_samples_is_rejected() {
        let mut oracle = SimulatorOracle::new(deterministic_cycle_game(), 7);
        let z = ImpactVector::zeros(3);
        assert!(estimate_kernel(&mut oracle, 0, &z, 0).is_err());
    }

    #[test]
    fn estimated_rows_sum_to_one() {
        let (model, _) = crate::bench::build_epidemic();
        let mut oracle = SimulatorOracle::new(model, 3);
        let z = ImpactVector::new(vec![0.25, 0.25]).unwrap();
        let kernel = estimate_kernel(&mut oracle, 1, &z, 37).unwrap();
        for s in 0..2 {
            for a in 0..2 {
                let sum: f64 = kernel.row(s, a).unwrap().iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn binomial_concentration_of_estimated_row() {
        let (model, _) = crate::bench::build_epidemic();
        let mut oracle = SimulatorOracle::new(model, 11);
        // healthy, masked, z(sick) = 0.5: true sick probability 0.5
        let z = ImpactVector::new(vec![0.0, 0.5]).unwrap();
        let n = 1_000_000;
        let kernel = estimate_kernel(&mut oracle, 0, &z, n).unwrap();
        let p_hat = kernel.row(crate::bench::HEALTHY, crate::bench::MASK).unwrap()
            [crate::bench::SICK];
        let se = (0.5 * 0.5 / n as f64).sqrt();
        assert!(
            (p_hat - 0.5).abs() <= 3.0 * se,
            "p_hat {p_hat} off by more than 3 standard errors ({se})"
        );
    }

    #[test]
    fn deterministic_model_approx_step_matches_exact() {
        let model = deterministic_cycle_game();
        let sbm = SbmModel::new(&[vec![1.0, 0.5], vec![0.5, 1.0]], None).unwrap();
        let mut oracle = SimulatorOracle::new(model.clone(), 5);
        let mu = MeanFieldEnsemble::uniform(2, 3);
        let profile = PolicyProfile::uniform(2, 3, 2);
        let approx = approx_step_ensemble(&mut oracle, &sbm, &mu, &profile, 1).unwrap();
        let exact = crate::population::step_ensemble(&model, &sbm, &mu, &profile).unwrap();
        assert!(ensemble_distance(&approx, &exact).unwrap() < 1e-15);
    }

    #[test]
    fn point_field_with_deterministic_policy_returns_single_row() {
        let model = deterministic_cycle_game();
        let sbm = SbmModel::new(&[vec![1.0]], None).unwrap();
        let mut oracle = SimulatorOracle::new(model, 5);
        let mu = MeanFieldEnsemble::new(vec![Distribution::point_mass(1, 3)]).unwrap();
        let det = crate::types::Policy::constant(Distribution::point_mass(0, 2), 3);
        let profile = PolicyProfile::new(vec![det]).unwrap();
        let next = approx_step_ensemble(&mut oracle, &sbm, &mu, &profile, 4).unwrap();
        assert_eq!(next.field(0).weights(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn identity_transition_stabilizes_immediately() {
        let model = GameModel::new(
            FiniteSpace::new(2).unwrap(),
            FiniteSpace::new(2).unwrap(),
            0.9,
            (0.0, 0.0),
            None,
            Arc::new(|s, _a, _z, out: &mut [f64]| {
                out.fill(0.0);
                out[s] = 1.0;
            }),
            Arc::new(|_, _, _, _| 0.0),
        )
        .unwrap();
        let sbm = SbmModel::new(&[vec![1.0]], None).unwrap();
        let mut oracle = SimulatorOracle::new(model, 5);
        let profile = PolicyProfile::uniform(1, 2, 2);
        let fp =
            approx_stable_ensemble(&mut oracle, &sbm, &profile, 1e-9, 3, None, 50).unwrap();
        assert!(fp.converged);
        assert_eq!(fp.iterations, 1);
    }

    #[test]
    fn oracle_draws_are_reproducible() {
        let (model, _) = crate::bench::build_epidemic();
        let z = ImpactVector::new(vec![0.2, 0.3]).unwrap();
        let mut a = SimulatorOracle::new(model.clone(), 99);
        let mut b = SimulatorOracle::new(model, 99);
        for _ in 0..100 {
            assert_eq!(a.sample(1, 0, 1, z.weights()), b.sample(1, 0, 1, z.weights()));
        }
    }
}
