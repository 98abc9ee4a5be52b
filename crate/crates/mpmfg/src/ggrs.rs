//! Finite-agent dynamics with per-step network re-sampling, and learning on
//! top of them.
//!
//! At every step a fresh 0/1 adjacency is drawn from the block model: each
//! unordered pair of agents connects independently with the block
//! probability of their populations. Each agent then feels only its current
//! neighbors through the empirical neighbor impact, acts, and transitions.
//! Policy evaluation uses conditional temporal-difference updates: one sparse
//! update per mixing window, taken from the representative agent of each
//! population, all populations sharing a single trajectory that is never
//! reset.
//!
//! Randomness is a pure function of `(seed, step, entity)`: edges are decided
//! by hashing `(seed, step, pair)` and agent draws by hashing
//! `(seed, step, agent)`. Identical seeds give bit-identical trajectories
//! regardless of evaluation order.

use serde::{Deserialize, Serialize};

use crate::game::GameModel;
use crate::mirror::PmaConfig;
use crate::population::{AgentStates, SbmModel};
use crate::regularizer::Regularizer;
use crate::rng::{derive_seed, mix64, sample_index, tag, unit_f64};
use crate::types::{
    policy_distance, ImpactVector, MeanFieldEnsemble, Observation, Policy, PolicyProfile, QTable,
};
use crate::{Error, Result};

/// A sampled 0/1 network over all agents, stored as per-agent neighbor lists
/// (symmetric; a self-loop appears once in its agent's list).
#[derive(Debug, Clone)]
pub struct Adjacency {
    neighbors: Vec<Vec<u32>>,
}

impl Adjacency {
    pub fn num_agents(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors_of(&self, agent: usize) -> &[u32] {
        &self.neighbors[agent]
    }

    pub fn edge_count(&self) -> usize {
        let total: usize = self.neighbors.iter().map(|n| n.len()).sum();
        let self_loops = self
            .neighbors
            .iter()
            .enumerate()
            .filter(|(i, n)| n.contains(&(*i as u32)))
            .count();
        (total - self_loops) / 2 + self_loops
    }

    pub fn is_symmetric(&self) -> bool {
        for (i, ns) in self.neighbors.iter().enumerate() {
            for &j in ns {
                if j as usize != i && !self.neighbors[j as usize].contains(&(i as u32)) {
                    return false;
                }
            }
        }
        true
    }
}

/// Per-population agent offsets in the flat agent indexing.
fn offsets_of(sizes: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(sizes.len() + 1);
    let mut acc = 0;
    offsets.push(0);
    for &n in sizes {
        acc += n;
        offsets.push(acc);
    }
    offsets
}

/// Largest supported agent count: pair encodings must fit 32 bits.
pub const MAX_AGENTS: usize = 65_535;

/// Per-block edge thresholds for an inclusive 32-bit hash comparison:
/// P(hash <= t) = (t + 1) / 2^32, so a block weight of exactly 1 maps to
/// `u32::MAX` and is never missed. Weights below 2^-32 round up to one part
/// in 2^32.
fn thresholds_of(sbm: &SbmModel) -> Vec<u32> {
    let k = sbm.populations();
    let mut t = vec![0u32; k * k];
    for i in 0..k {
        for j in 0..k {
            let w = sbm.weight(i, j);
            let scaled = (w * 2f64.powi(32)).min(2f64.powi(32)).max(1.0) as u64;
            t[i * k + j] = (scaled - 1) as u32;
        }
    }
    t
}

/// Whitens a raw draw key before it meets the structured pair encodings; a
/// raw low-entropy key could otherwise cancel against a pair word.
#[inline(always)]
fn adjacency_key(raw: u64) -> u32 {
    mix64(raw ^ 0x5bf0_3635_ded0_e9ca) as u32
}

/// 32-bit finalizer with full avalanche.
#[inline(always)]
fn fmix32(mut x: u32) -> u32 {
    x ^= x >> 16;
    x = x.wrapping_mul(0x85eb_ca6b);
    x ^= x >> 13;
    x = x.wrapping_mul(0xc2b2_ae35);
    x ^= x >> 16;
    x
}

/// Edge presence for the unordered pair (alpha <= beta) under `key`.
/// The encoding `alpha * n + beta` is unique below [`MAX_AGENTS`].
#[inline(always)]
fn edge_bit(key: u32, pair: u32, thresh: u32) -> u32 {
    (fmix32(key ^ pair) <= thresh) as u32
}

fn check_agent_count(n: usize) -> Result<()> {
    if n > MAX_AGENTS {
        return Err(Error::InvalidParameter(format!(
            "{n} agents exceeds the supported maximum {MAX_AGENTS}"
        )));
    }
    Ok(())
}

/// Visits every present edge (alpha <= beta) of the adjacency keyed by
/// `step_key`.
#[inline]
fn for_each_edge<F: FnMut(u32, u32)>(
    pop_of: &[u8],
    thresholds: &[u32],
    populations: usize,
    step_key: u64,
    self_loops: bool,
    mut visit: F,
) {
    let n = pop_of.len();
    let key = adjacency_key(step_key);
    for alpha in 0..n as u32 {
        let ka = pop_of[alpha as usize] as usize * populations;
        let base = alpha * n as u32;
        let start = if self_loops { alpha } else { alpha + 1 };
        for beta in start..n as u32 {
            let thresh = thresholds[ka + pop_of[beta as usize] as usize];
            if edge_bit(key, base + beta, thresh) == 1 {
                visit(alpha, beta);
            }
        }
    }
}

/// Samples one adjacency from the block model. `key` names the draw: the
/// result is a pure function of it (stepped dynamics use the step index;
/// standalone sampling can pass any derived seed).
pub fn sample_adjacency(sbm: &SbmModel, key: u64, self_loops: bool) -> Result<Adjacency> {
    let sizes = sbm
        .sizes()
        .ok_or_else(|| Error::InvalidParameter("block model carries no agent counts".into()))?;
    let offsets = offsets_of(sizes);
    let n = offsets[offsets.len() - 1];
    check_agent_count(n)?;
    let mut pop_of = vec![0u8; n];
    for (k, w) in sizes.iter().enumerate() {
        for i in offsets[k]..offsets[k] + w {
            pop_of[i] = k as u8;
        }
    }
    let thresholds = thresholds_of(sbm);
    let mut neighbors = vec![Vec::new(); n];
    for_each_edge(
        &pop_of,
        &thresholds,
        sbm.populations(),
        key,
        self_loops,
        |a, b| {
            neighbors[a as usize].push(b);
            if a != b {
                neighbors[b as usize].push(a);
            }
        },
    );
    Ok(Adjacency { neighbors })
}

/// The empirical neighbor impact of agent (k, l): each neighbor from
/// population i contributes `1 / (K N_i)` mass at its current state.
pub fn neighbor_impact(
    adj: &Adjacency,
    sbm: &SbmModel,
    states: &AgentStates,
    k: usize,
    l: usize,
) -> Result<ImpactVector> {
    let sizes = sbm
        .sizes()
        .ok_or_else(|| Error::InvalidParameter("block model carries no agent counts".into()))?;
    if k >= sizes.len() || l >= sizes[k] {
        return Err(Error::IndexOutOfRange(format!("agent ({k}, {l})")));
    }
    let offsets = offsets_of(sizes);
    let num_states = states
        .per_population
        .iter()
        .flat_map(|g| g.iter())
        .max()
        .map_or(1, |m| m + 1);
    // flat lookups
    let mut flat_state = Vec::with_capacity(offsets[sizes.len()]);
    let mut flat_pop = Vec::with_capacity(offsets[sizes.len()]);
    for (i, group) in states.per_population.iter().enumerate() {
        if group.len() != sizes[i] {
            return Err(Error::ShapeMismatch(format!(
                "population {i} has {} agents, sizes say {}",
                group.len(),
                sizes[i]
            )));
        }
        for &s in group {
            flat_state.push(s);
            flat_pop.push(i);
        }
    }
    let kk = sizes.len() as f64;
    let mut z = vec![0.0; num_states];
    for &nb in adj.neighbors_of(offsets[k] + l) {
        let i = flat_pop[nb as usize];
        z[flat_state[nb as usize]] += 1.0 / (kk * sizes[i] as f64);
    }
    ImpactVector::new(z)
}

/// Learning-rate schedule for conditional TD updates; `n` is 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CtdSchedule {
    /// (2 / (1 - discount)) / (n + t0 - 1).
    Practical { t0: f64 },
    /// 2 / (4 (1 + discount)^2 / rho + rho (n - 1)) with
    /// rho = (1 - discount) * delta_mix * zeta.
    Theoretical { delta_mix: f64, zeta: f64 },
    /// Fixed rate (limiting cases and tests).
    Constant { beta: f64 },
}

impl CtdSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            CtdSchedule::Practical { t0 } if *t0 >= 1.0 => Ok(()),
            CtdSchedule::Practical { t0 } => Err(Error::InvalidParameter(format!(
                "t0 must be >= 1, got {t0}"
            ))),
            CtdSchedule::Theoretical { delta_mix, zeta } if *delta_mix > 0.0 && *zeta > 0.0 => {
                Ok(())
            }
            CtdSchedule::Theoretical { .. } => Err(Error::InvalidParameter(
                "theoretical schedule needs delta_mix > 0 and zeta > 0".into(),
            )),
            CtdSchedule::Constant { beta } if *beta >= 0.0 => Ok(()),
            CtdSchedule::Constant { .. } => {
                Err(Error::InvalidParameter("constant rate must be >= 0".into()))
            }
        }
    }

    /// The rate for the n-th update (n starts at 1).
    pub fn rate(&self, n: usize, discount: f64) -> f64 {
        match self {
            CtdSchedule::Practical { t0 } => {
                (2.0 / (1.0 - discount)) / (n as f64 + t0 - 1.0)
            }
            CtdSchedule::Theoretical { delta_mix, zeta } => {
                let rho = (1.0 - discount) * delta_mix * zeta;
                2.0 / (4.0 * (1.0 + discount).powi(2) / rho + rho * (n as f64 - 1.0))
            }
            CtdSchedule::Constant { beta } => *beta,
        }
    }
}

/// Configuration of the trajectory learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GgrsConfig {
    /// TD updates per policy-improvement round.
    pub i_ctd: usize,
    /// Dynamics steps between consecutive TD updates (>= 2: one update spans
    /// the last two steps of the window).
    pub i_mix: usize,
    /// Policy-improvement rounds.
    pub outer_iters: usize,
    pub schedule: CtdSchedule,
    pub seed: u64,
    /// Whether an agent may draw itself as a neighbor.
    pub self_loops: bool,
}

impl GgrsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.i_mix < 2 {
            return Err(Error::InvalidParameter(format!(
                "i_mix must be >= 2, got {}",
                self.i_mix
            )));
        }
        self.schedule.validate()
    }
}

/// What the representative agent of one population saw in one step.
#[derive(Debug, Clone, Copy)]
pub struct RepObs {
    pub s: usize,
    pub a: usize,
    pub r: f64,
}

/// The stepping engine: owns the flat agent state and a step counter, and
/// advances all agents one step at a time. States persist across learning
/// phases (single path, no resets).
pub struct GgrsSim {
    model: GameModel,
    sbm: SbmModel,
    profile: PolicyProfile,
    seed: u64,
    t: u64,
    self_loops: bool,
    offsets: Vec<usize>,
    pop_of: Vec<u8>,
    states: Vec<u16>,
    thresholds: Vec<u32>,
    inv_k_sizes: Vec<f64>,
    num_states: usize,
    groups: usize,
    counts: Vec<u32>,
    rep_index: Vec<usize>,
}

impl GgrsSim {
    pub fn new(
        model: GameModel,
        sbm: SbmModel,
        initial: &AgentStates,
        profile: PolicyProfile,
        seed: u64,
        self_loops: bool,
    ) -> Result<Self> {
        let sizes = sbm
            .sizes()
            .ok_or_else(|| Error::InvalidParameter("block model carries no agent counts".into()))?
            .to_vec();
        initial.validate(&sbm, model.num_states())?;
        if profile.populations() != sbm.populations() {
            return Err(Error::ShapeMismatch(format!(
                "profile has {} populations, model {}",
                profile.populations(),
                sbm.populations()
            )));
        }
        for (k, group) in initial.per_population.iter().enumerate() {
            if group.len() != sizes[k] {
                return Err(Error::ShapeMismatch(format!(
                    "population {k}: {} initial states for {} agents",
                    group.len(),
                    sizes[k]
                )));
            }
        }
        if model.num_states() > u16::MAX as usize {
            return Err(Error::InvalidParameter("state space too large".into()));
        }
        let offsets = offsets_of(&sizes);
        let n = offsets[sizes.len()];
        check_agent_count(n)?;
        let mut pop_of = vec![0u8; n];
        let mut states = vec![0u16; n];
        for (k, group) in initial.per_population.iter().enumerate() {
            for (l, &s) in group.iter().enumerate() {
                pop_of[offsets[k] + l] = k as u8;
                states[offsets[k] + l] = s as u16;
            }
        }
        let kk = sizes.len() as f64;
        let inv_k_sizes = sizes.iter().map(|&m| 1.0 / (kk * m as f64)).collect();
        let thresholds = thresholds_of(&sbm);
        let num_states = model.num_states();
        let groups = sizes.len() * num_states;
        let rep_index = offsets[..sizes.len()].to_vec();
        Ok(Self {
            model,
            sbm,
            profile,
            seed,
            t: 0,
            self_loops,
            offsets,
            pop_of,
            states,
            thresholds,
            inv_k_sizes,
            num_states,
            groups,
            counts: vec![0; n * groups],
            rep_index,
        })
    }

    pub fn step_index(&self) -> u64 {
        self.t
    }

    pub fn profile(&self) -> &PolicyProfile {
        &self.profile
    }

    /// Installs a new profile for every agent (centralized synchronization).
    pub fn set_profile(&mut self, profile: PolicyProfile) -> Result<()> {
        if profile.populations() != self.sbm.populations() {
            return Err(Error::ShapeMismatch("profile population count".into()));
        }
        self.profile = profile;
        Ok(())
    }

    pub fn agent_states(&self) -> AgentStates {
        let mut per = Vec::with_capacity(self.sbm.populations());
        for k in 0..self.sbm.populations() {
            per.push(
                self.states[self.offsets[k]..self.offsets[k + 1]]
                    .iter()
                    .map(|&s| s as usize)
                    .collect(),
            );
        }
        AgentStates::new(per)
    }

    /// Empirical state distribution of each population.
    pub fn ensemble(&self) -> MeanFieldEnsemble {
        let mut fields = Vec::with_capacity(self.sbm.populations());
        for k in 0..self.sbm.populations() {
            let group = &self.states[self.offsets[k]..self.offsets[k + 1]];
            let mut w = vec![0.0; self.num_states];
            for &s in group {
                w[s as usize] += 1.0;
            }
            for x in &mut w {
                *x /= group.len() as f64;
            }
            fields.push(crate::types::Distribution::new(w).unwrap());
        }
        MeanFieldEnsemble::new(fields).unwrap()
    }

    /// Per-agent neighbor-group counts for the adjacency keyed by this step.
    /// Every unordered pair is evaluated from both endpoints (pure gather, no
    /// scattered writes), with the pair encoded identically from either side,
    /// so the counts match [`sample_adjacency`] bit for bit.
    fn fill_counts(&mut self, step_key: u64) {
        let key = adjacency_key(step_key);
        let groups = self.groups;
        let ns = self.num_states;
        let kk = self.sbm.populations();
        let n = self.pop_of.len() as u32;
        let two_state = ns == 2;
        self.counts.fill(0);
        let counts: &mut [u32] = &mut self.counts[..];
        let states: &[u16] = &self.states[..];
        let thresholds: &[u32] = &self.thresholds[..];
        let offsets: &[usize] = &self.offsets[..];
        for alpha in 0..n {
            let a = alpha as usize;
            let ka = self.pop_of[a] as usize;
            let row = &mut counts[a * groups..(a + 1) * groups];
            for j in 0..kk {
                let thresh = thresholds[ka * kk + j];
                let (lo, hi) = (offsets[j] as u32, offsets[j + 1] as u32);
                // below alpha: pair id beta * n + alpha, stride n
                let below_end = hi.min(alpha);
                if two_state {
                    let mut total = 0u32;
                    let mut ones = 0u32;
                    let mut pair = lo * n + alpha;
                    for beta in lo..below_end {
                        let e = edge_bit(key, pair, thresh);
                        total += e;
                        ones += e * states[beta as usize] as u32;
                        pair += n;
                    }
                    let base = alpha * n;
                    let above_start = lo.max(alpha + 1);
                    for beta in above_start..hi {
                        let e = edge_bit(key, base + beta, thresh);
                        total += e;
                        ones += e * states[beta as usize] as u32;
                    }
                    row[j * 2] += total - ones;
                    row[j * 2 + 1] += ones;
                } else {
                    let mut pair = lo * n + alpha;
                    for beta in lo..below_end {
                        let e = edge_bit(key, pair, thresh);
                        row[j * ns + states[beta as usize] as usize] += e;
                        pair += n;
                    }
                    let base = alpha * n;
                    let above_start = lo.max(alpha + 1);
                    for beta in above_start..hi {
                        let e = edge_bit(key, base + beta, thresh);
                        row[j * ns + states[beta as usize] as usize] += e;
                    }
                }
                // the self pair sits in alpha's own block
                if self.self_loops && (lo..hi).contains(&alpha) {
                    let e = edge_bit(key, alpha * n + alpha, thresh);
                    row[j * ns + states[a] as usize] += e;
                }
            }
        }
    }

    #[inline]
    fn impact_from_counts(&self, agent: usize, z: &mut [f64]) {
        z.fill(0.0);
        let base = agent * self.groups;
        for i in 0..self.sbm.populations() {
            let w = self.inv_k_sizes[i];
            for s in 0..self.num_states {
                z[s] += w * self.counts[base + i * self.num_states + s] as f64;
            }
        }
    }

    /// Advances every agent one step with per-agent neighbor impacts from a
    /// freshly sampled network. Returns the representative observation of
    /// each population; per-agent rewards are written to `rewards_out` when
    /// provided.
    pub fn step_resampled(&mut self, rewards_out: Option<&mut Vec<f64>>) -> Vec<RepObs> {
        let step_key = derive_seed(self.seed, &[tag::ADJACENCY, self.t]);
        self.fill_counts(step_key);
        let mut z = vec![0.0; self.num_states];
        self.advance_agents(rewards_out, |sim, agent, zbuf| {
            sim.impact_from_counts(agent, zbuf);
        }, &mut z)
    }

    /// Advances every agent one step under full connectivity: all agents of
    /// one population share the block-weighted empirical ensemble impact.
    /// Uses the same per-agent action/transition draws as `step_resampled`,
    /// so matched-seed runs are coupled.
    pub fn step_fully_connected(&mut self, rewards_out: Option<&mut Vec<f64>>) -> Vec<RepObs> {
        let mu = self.ensemble();
        let kk = self.sbm.populations();
        let mut impacts = vec![0.0; kk * self.num_states];
        for k in 0..kk {
            let z = crate::population::aggregated_impact(&self.sbm, &mu, k).unwrap();
            impacts[k * self.num_states..(k + 1) * self.num_states]
                .copy_from_slice(z.weights());
        }
        let mut z = vec![0.0; self.num_states];
        self.advance_agents(rewards_out, move |sim, agent, zbuf| {
            let k = sim.pop_of[agent] as usize;
            zbuf.copy_from_slice(&impacts[k * sim.num_states..(k + 1) * sim.num_states]);
        }, &mut z)
    }

    fn advance_agents<F>(
        &mut self,
        mut rewards_out: Option<&mut Vec<f64>>,
        impact_of: F,
        z: &mut [f64],
    ) -> Vec<RepObs>
    where
        F: Fn(&Self, usize, &mut [f64]),
    {
        let act_key = derive_seed(self.seed, &[tag::ACTION, self.t]);
        let nxt_key = derive_seed(self.seed, &[tag::NEXT_STATE, self.t]);
        let n = self.pop_of.len();
        if let Some(r) = rewards_out.as_deref_mut() {
            r.clear();
            r.reserve(n);
        }
        let mut reps = vec![
            RepObs {
                s: 0,
                a: 0,
                r: 0.0
            };
            self.sbm.populations()
        ];
        let mut row = vec![0.0; self.num_states];
        let mut next_states = vec![0u16; n];
        for agent in 0..n {
            let k = self.pop_of[agent] as usize;
            let s = self.states[agent] as usize;
            impact_of(self, agent, z);
            let u_a = unit_f64(mix64(act_key ^ agent as u64));
            let a = sample_index(self.profile.policy(k).row(s), u_a);
            let r = self.model.reward(k, s, a, z);
            self.model.transition_into(s, a, z, &mut row);
            let u_s = unit_f64(mix64(nxt_key ^ agent as u64));
            let s_next = sample_index(&row, u_s);
            next_states[agent] = s_next as u16;
            if let Some(out) = rewards_out.as_deref_mut() {
                out.push(r);
            }
            if agent == self.rep_index[k] {
                reps[k] = RepObs { s, a, r };
            }
        }
        self.states = next_states;
        self.t += 1;
        reps
    }
}

/// One step of the re-sampled dynamics as a standalone operation: returns
/// the advanced states, all agents' rewards, and the adjacency that was
/// used. `step` keys the draw; successive calls should pass successive
/// indices.
pub fn step_dynamics(
    model: &GameModel,
    sbm: &SbmModel,
    states: &AgentStates,
    profile: &PolicyProfile,
    seed: u64,
    step: u64,
    self_loops: bool,
) -> Result<(AgentStates, Vec<f64>, Adjacency)> {
    let mut sim = GgrsSim::new(
        model.clone(),
        sbm.clone(),
        states,
        profile.clone(),
        seed,
        self_loops,
    )?;
    sim.t = step;
    let adj = sample_adjacency(sbm, derive_seed(seed, &[tag::ADJACENCY, step]), self_loops)?;
    let mut rewards = Vec::new();
    sim.step_resampled(Some(&mut rewards));
    Ok((sim.agent_states(), rewards, adj))
}

/// The sparse TD update: the Bellman defect of `q` at the observation,
/// placed at the observed state-action pair.
pub fn td_update(
    q: &QTable,
    omega: &Observation,
    pi: &Policy,
    discount: f64,
    h: &Regularizer,
) -> (usize, usize, f64) {
    let scalar = q.get(omega.s, omega.a)
        - omega.r
        - h.eval(pi.row(omega.s))
        - discount * q.get(omega.s_next, omega.a_next);
    (omega.s, omega.a, scalar)
}

/// Output of one evaluation phase.
#[derive(Debug, Clone)]
pub struct CtdOutcome {
    pub q_tables: Vec<QTable>,
    pub final_states: AgentStates,
}

fn ctd_pass(
    sim: &mut GgrsSim,
    h: &Regularizer,
    i_ctd: usize,
    i_mix: usize,
    schedule: &CtdSchedule,
) -> Result<Vec<QTable>> {
    let (ns, na) = (sim.model.num_states(), sim.model.num_actions());
    let kk = sim.sbm.populations();
    let gamma = sim.model.discount();
    let q_bound = sim.model.q_bound(h);
    let q_init = sim.model.q_upper(h);
    let mut tables = vec![QTable::constant(ns, na, q_init); kk];
    for n in 0..i_ctd {
        let mut prev: Vec<RepObs> = Vec::new();
        let mut last: Vec<RepObs> = Vec::new();
        for t in 0..i_mix {
            let reps = sim.step_resampled(None);
            if t + 2 == i_mix {
                prev = reps.clone();
            }
            if t + 1 == i_mix {
                last = reps;
            } else if t + 2 == i_mix {
                // prev holds the second-to-last step
            }
        }
        let beta = schedule.rate(n + 1, gamma);
        for k in 0..kk {
            let omega = Observation {
                s: prev[k].s,
                a: prev[k].a,
                r: prev[k].r,
                s_next: last[k].s,
                a_next: last[k].a,
            };
            let (s, a, scalar) = td_update(&tables[k], &omega, sim.profile.policy(k), gamma, h);
            let updated = tables[k].get(s, a) - beta * scalar;
            tables[k].set(s, a, updated.clamp(-q_bound, q_bound));
        }
    }
    Ok(tables)
}

/// Conditional TD evaluation of a frozen profile from a single shared
/// trajectory: per update, run `i_mix` dynamics steps and apply one sparse
/// update per population from its representative agent's last transition.
/// Tables start optimistically at the upper achievable value and stay
/// clamped to the magnitude bound.
pub fn ctd_learn(
    model: &GameModel,
    h: &Regularizer,
    sbm: &SbmModel,
    states0: &AgentStates,
    profile: &PolicyProfile,
    cfg: &GgrsConfig,
) -> Result<CtdOutcome> {
    cfg.validate()?;
    let mut sim = GgrsSim::new(
        model.clone(),
        sbm.clone(),
        states0,
        profile.clone(),
        cfg.seed,
        cfg.self_loops,
    )?;
    let q_tables = ctd_pass(&mut sim, h, cfg.i_ctd, cfg.i_mix, &cfg.schedule)?;
    Ok(CtdOutcome {
        q_tables,
        final_states: sim.agent_states(),
    })
}

/// Optional per-round trace instrumentation for [`pma_ctd`].
#[derive(Debug, Clone, Default)]
pub struct TraceOptions {
    /// When set, each record carries the distance to this reference profile.
    pub reference: Option<PolicyProfile>,
    /// When true, each record carries the exact max exploitability of the
    /// current profile (computed from the model, for diagnostics).
    pub exploitability: bool,
}

/// One policy-improvement round of the trajectory learner.
#[derive(Debug, Clone)]
pub struct PmaCtdRecord {
    pub iteration: usize,
    pub delta_pi: f64,
    /// The synchronized profile after this round.
    pub profile: PolicyProfile,
    pub distance_to_reference: Option<f64>,
    pub max_exploitability: Option<f64>,
    pub q_tables: Vec<QTable>,
}

#[derive(Debug, Clone)]
pub struct PmaCtdOutcome {
    pub profile: PolicyProfile,
    pub trace: Vec<PmaCtdRecord>,
    pub final_states: AgentStates,
}

/// The full trajectory learner: `outer_iters` rounds of {conditional TD
/// evaluation; one proximal improvement per population; synchronize}. Agent
/// states persist across all rounds; value tables restart from the bound
/// each round.
#[allow(clippy::too_many_arguments)]
pub fn pma_ctd(
    model: &GameModel,
    h: &Regularizer,
    sbm: &SbmModel,
    states0: &AgentStates,
    pi0: &PolicyProfile,
    cfg: &GgrsConfig,
    pma: &PmaConfig,
    trace_opts: &TraceOptions,
) -> Result<PmaCtdOutcome> {
    cfg.validate()?;
    let mut sim = GgrsSim::new(
        model.clone(),
        sbm.clone(),
        states0,
        pi0.clone(),
        cfg.seed,
        cfg.self_loops,
    )?;
    let mut trace = Vec::with_capacity(cfg.outer_iters);
    for m in 1..=cfg.outer_iters {
        let q_tables = ctd_pass(&mut sim, h, cfg.i_ctd, cfg.i_mix, &cfg.schedule)?;
        let mut next = sim.profile.clone();
        for k in 0..sbm.populations() {
            let out = crate::mirror::ascent_step(&q_tables[k], sim.profile.policy(k), pma, h)?;
            next.set_policy(k, out.policy);
        }
        let delta = policy_distance(&next, &sim.profile)?;
        sim.set_profile(next)?;
        let distance_to_reference = match &trace_opts.reference {
            Some(r) => Some(policy_distance(sim.profile(), r)?),
            None => None,
        };
        let max_exploitability = if trace_opts.exploitability {
            Some(crate::metrics::max_exploitability(
                model,
                h,
                sbm,
                sim.profile(),
                1e-9,
            )?)
        } else {
            None
        };
        trace.push(PmaCtdRecord {
            iteration: m,
            delta_pi: delta,
            profile: sim.profile().clone(),
            distance_to_reference,
            max_exploitability,
            q_tables,
        });
    }
    Ok(PmaCtdOutcome {
        profile: sim.profile().clone(),
        trace,
        final_states: sim.agent_states(),
    })
}

/// Draws initial agent states: agent (k, l) samples from `mu0`'s k-th field
/// using its own named stream.
pub fn initial_states(sbm: &SbmModel, mu0: &MeanFieldEnsemble, seed: u64) -> Result<AgentStates> {
    let sizes = sbm
        .sizes()
        .ok_or_else(|| Error::InvalidParameter("block model carries no agent counts".into()))?;
    if mu0.populations() != sizes.len() {
        return Err(Error::ShapeMismatch("initial ensemble population count".into()));
    }
    let offsets = offsets_of(sizes);
    let mut per = Vec::with_capacity(sizes.len());
    for (k, &m) in sizes.iter().enumerate() {
        let field = mu0.field(k);
        let mut group = Vec::with_capacity(m);
        for l in 0..m {
            let agent = (offsets[k] + l) as u64;
            let u = unit_f64(mix64(derive_seed(seed, &[tag::INIT_STATE]) ^ agent));
            group.push(field.sample(u));
        }
        per.push(group);
    }
    Ok(AgentStates::new(per))
}

/// Per-block edge counts of the adjacency keyed by `key` (upper-triangle
/// blocks, self-pairs included according to `self_loops`). Same edge
/// predicate as [`sample_adjacency`], without materializing lists.
pub fn block_edge_counts(sbm: &SbmModel, key: u64, self_loops: bool) -> Result<Vec<u64>> {
    let sizes = sbm
        .sizes()
        .ok_or_else(|| Error::InvalidParameter("block model carries no agent counts".into()))?;
    let offsets = offsets_of(sizes);
    let n = offsets[sizes.len()];
    check_agent_count(n)?;
    let mut pop_of = vec![0u8; n];
    for (k, w) in sizes.iter().enumerate() {
        for i in offsets[k]..offsets[k] + w {
            pop_of[i] = k as u8;
        }
    }
    let thresholds = thresholds_of(sbm);
    let kk = sbm.populations();
    let mut counts = vec![0u64; kk * kk];
    for_each_edge(&pop_of, &thresholds, kk, key, self_loops, |a, b| {
        let (i, j) = (pop_of[a as usize] as usize, pop_of[b as usize] as usize);
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        counts[lo * kk + hi] += 1;
    });
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::FiniteSpace;
    use std::sync::Arc;

    fn small_sbm(w: f64, sizes: Vec<usize>) -> SbmModel {
        let k = sizes.len();
        SbmModel::new(&vec![vec![w; k]; k], Some(sizes)).unwrap()
    }

    fn identity_game() -> GameModel {
        GameModel::new(
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
        .unwrap()
    }

    #[test]
    fn full_connectivity_gives_complete_graph() {
        let sbm = small_sbm(1.0, vec![3, 2]);
        let adj = sample_adjacency(&sbm, 42, true).unwrap();
        assert!(adj.is_symmetric());
        for i in 0..5 {
            assert_eq!(adj.neighbors_of(i).len(), 5, "agent {i}");
        }
        let adj = sample_adjacency(&sbm, 42, false).unwrap();
        for i in 0..5 {
            assert_eq!(adj.neighbors_of(i).len(), 4, "agent {i}");
        }
    }

    #[test]
    fn near_zero_connectivity_gives_empty_graph() {
        let sbm = small_sbm(1e-9, vec![10, 10]);
        let adj = sample_adjacency(&sbm, 7, true).unwrap();
        assert_eq!(adj.edge_count(), 0);
    }

    #[test]
    fn adjacency_is_reproducible_and_key_sensitive() {
        let sbm = small_sbm(0.5, vec![20, 20]);
        let a = sample_adjacency(&sbm, 1, true).unwrap();
        let b = sample_adjacency(&sbm, 1, true).unwrap();
        let c = sample_adjacency(&sbm, 2, true).unwrap();
        for i in 0..40 {
            assert_eq!(a.neighbors_of(i), b.neighbors_of(i));
        }
        assert!((0..40).any(|i| a.neighbors_of(i) != c.neighbors_of(i)));
    }

    #[test]
    fn block_counts_agree_with_materialized_adjacency() {
        let (_, sbm) = crate::bench::build_epidemic();
        let sbm = sbm.with_sizes(vec![30, 25, 20]).unwrap();
        for key in 0..5u64 {
            let adj = sample_adjacency(&sbm, key, true).unwrap();
            let counts = block_edge_counts(&sbm, key, true).unwrap();
            let offsets = [0usize, 30, 55, 75];
            let pop = |i: usize| (0..3).find(|&k| i < offsets[k + 1]).unwrap();
            let mut expect = vec![0u64; 9];
            for i in 0..75 {
                for &j in adj.neighbors_of(i) {
                    let j = j as usize;
                    if j < i {
                        continue;
                    }
                    let (a, b) = (pop(i), pop(j));
                    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                    expect[lo * 3 + hi] += 1;
                }
            }
            assert_eq!(counts, expect, "key {key}");
        }
    }

    #[test]
    fn empty_adjacency_gives_zero_impact() {
        let sbm = small_sbm(1e-9, vec![5, 5]);
        let adj = sample_adjacency(&sbm, 3, true).unwrap();
        let states = AgentStates::new(vec![vec![0; 5], vec![1; 5]]);
        let z = neighbor_impact(&adj, &sbm, &states, 0, 0).unwrap();
        assert!(z.weights().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn complete_graph_impact_is_population_average() {
        let sbm = small_sbm(1.0, vec![4, 4]);
        let adj = sample_adjacency(&sbm, 3, true).unwrap();
        let states = AgentStates::new(vec![vec![0, 0, 1, 1], vec![1, 1, 1, 1]]);
        let z = neighbor_impact(&adj, &sbm, &states, 0, 2).unwrap();
        // (1/2)(mu_0 + mu_1) with mu_0 = (.5, .5), mu_1 = (0, 1)
        assert!((z.weights()[0] - 0.25).abs() < 1e-12);
        assert!((z.weights()[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn identity_transition_leaves_states_alone() {
        let model = identity_game();
        let sbm = small_sbm(0.5, vec![6, 6]);
        let states = AgentStates::new(vec![vec![0, 1, 0, 1, 0, 1], vec![1; 6]]);
        let profile = PolicyProfile::uniform(2, 2, 2);
        let (next, rewards, adj) =
            step_dynamics(&model, &sbm, &states, &profile, 11, 0, true).unwrap();
        assert_eq!(next, states);
        assert!(rewards.iter().all(|&r| r == 0.0));
        assert!(adj.is_symmetric());
    }

    #[test]
    fn td_update_arithmetic() {
        let mut q = QTable::zeros(2, 2);
        q.set(0, 1, 2.0);
        q.set(1, 0, 1.0);
        let pi = Policy::uniform(2, 2);
        // h(pi(s)) = 0.1 with a constant-regularizer stand-in: use entropy
        // scale chosen so h(uniform over 2) = 0.1
        let h = Regularizer::entropy(0.1 / 2.0_f64.ln()).unwrap();
        let omega = Observation {
            s: 0,
            a: 1,
            r: 0.5,
            s_next: 1,
            a_next: 0,
        };
        let (s, a, scalar) = td_update(&q, &omega, &pi, 0.95, &h);
        assert_eq!((s, a), (0, 1));
        assert!((scalar - 0.45).abs() < 1e-12, "scalar {scalar}");
    }

    #[test]
    fn td_update_of_zero_table_is_negative_reward() {
        let q = QTable::zeros(1, 1);
        let pi = Policy::uniform(1, 1);
        let omega = Observation {
            s: 0,
            a: 0,
            r: 1.0,
            s_next: 0,
            a_next: 0,
        };
        let (_, _, scalar) = td_update(&q, &omega, &pi, 0.9, &Regularizer::zero());
        assert_eq!(scalar, -1.0);
    }

    #[test]
    fn zero_updates_or_zero_rate_leave_tables_at_bound() {
        let (model, sbm) = crate::bench::build_epidemic();
        let sbm = sbm.with_sizes(vec![5, 5, 5]).unwrap();
        let h = Regularizer::entropy(0.5).unwrap();
        let profile = PolicyProfile::uniform(3, 2, 2);
        let states = AgentStates::new(vec![vec![0, 1, 0, 1, 0]; 3]);
        let bound = model.q_upper(&h);

        let cfg = GgrsConfig {
            i_ctd: 0,
            i_mix: 2,
            outer_iters: 1,
            schedule: CtdSchedule::Practical { t0: 100.0 },
            seed: 5,
            self_loops: true,
        };
        let out = ctd_learn(&model, &h, &sbm, &states, &profile, &cfg).unwrap();
        assert!(out.q_tables[0].data().iter().all(|&x| x == bound));

        let cfg = GgrsConfig {
            i_ctd: 25,
            i_mix: 2,
            schedule: CtdSchedule::Constant { beta: 0.0 },
            ..cfg
        };
        let out = ctd_learn(&model, &h, &sbm, &states, &profile, &cfg).unwrap();
        for k in 0..3 {
            assert!(out.q_tables[k].data().iter().all(|&x| x == bound));
        }
    }

    #[test]
    fn i_mix_below_two_is_rejected() {
        let cfg = GgrsConfig {
            i_ctd: 1,
            i_mix: 1,
            outer_iters: 1,
            schedule: CtdSchedule::Practical { t0: 100.0 },
            seed: 0,
            self_loops: true,
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn practical_schedule_values() {
        let s = CtdSchedule::Practical { t0: 100.0 };
        let beta1 = s.rate(1, 0.95);
        assert!((beta1 - (2.0 / 0.05) / 100.0).abs() < 1e-12);
        // non-increasing
        let mut prev = beta1;
        for n in 2..50 {
            let b = s.rate(n, 0.95);
            assert!(b > 0.0 && b <= prev);
            prev = b;
        }
    }

    #[test]
    fn theoretical_schedule_is_positive_and_decreasing() {
        let s = CtdSchedule::Theoretical {
            delta_mix: 0.2,
            zeta: 0.1,
        };
        let mut prev = f64::INFINITY;
        for n in 1..100 {
            let b = s.rate(n, 0.9);
            assert!(b > 0.0 && b <= prev);
            prev = b;
        }
    }

    #[test]
    fn trajectories_are_bit_reproducible() {
        let (model, sbm) = crate::bench::build_epidemic();
        let sbm = sbm.with_sizes(vec![8, 8, 8]).unwrap();
        let mu0 = MeanFieldEnsemble::uniform(3, 2);
        let states = initial_states(&sbm, &mu0, 77).unwrap();
        let profile = PolicyProfile::uniform(3, 2, 2);
        let h = Regularizer::entropy(0.5).unwrap();
        let cfg = GgrsConfig {
            i_ctd: 10,
            i_mix: 3,
            outer_iters: 2,
            schedule: CtdSchedule::Practical { t0: 100.0 },
            seed: 123,
            self_loops: true,
        };
        let pma = PmaConfig::new(1.0).unwrap();
        let opts = TraceOptions::default();
        let a = pma_ctd(&model, &h, &sbm, &states, &profile, &cfg, &pma, &opts).unwrap();
        let b = pma_ctd(&model, &h, &sbm, &states, &profile, &cfg, &pma, &opts).unwrap();
        assert_eq!(a.profile, b.profile);
        assert_eq!(a.final_states, b.final_states);
        for (ra, rb) in a.trace.iter().zip(&b.trace) {
            assert_eq!(ra.delta_pi, rb.delta_pi);
            assert_eq!(ra.q_tables, rb.q_tables);
        }
    }

    #[test]
    fn zero_rounds_returns_initial_profile() {
        let (model, sbm) = crate::bench::build_epidemic();
        let sbm = sbm.with_sizes(vec![4, 4, 4]).unwrap();
        let profile = PolicyProfile::uniform(3, 2, 2);
        let states = AgentStates::new(vec![vec![0, 1, 0, 1]; 3]);
        let h = Regularizer::entropy(0.5).unwrap();
        let cfg = GgrsConfig {
            i_ctd: 5,
            i_mix: 2,
            outer_iters: 0,
            schedule: CtdSchedule::Practical { t0: 100.0 },
            seed: 1,
            self_loops: true,
        };
        let pma = PmaConfig::new(1.0).unwrap();
        let out = pma_ctd(
            &model,
            &h,
            &sbm,
            &states,
            &profile,
            &cfg,
            &pma,
            &TraceOptions::default(),
        )
        .unwrap();
        assert_eq!(out.profile, profile);
        assert!(out.trace.is_empty());
    }

    #[test]
    fn single_agent_populations_collapse_to_k_agent_game() {
        let model = identity_game();
        let sbm = small_sbm(1.0, vec![1, 1]);
        let states = AgentStates::new(vec![vec![0], vec![1]]);
        let profile = PolicyProfile::uniform(2, 2, 2);
        let adj = sample_adjacency(&sbm, 9, true).unwrap();
        // complete graph with self loops: impact = (1/K) sum of point masses
        let z = neighbor_impact(&adj, &sbm, &states, 0, 0).unwrap();
        assert!((z.weights()[0] - 0.5).abs() < 1e-12);
        assert!((z.weights()[1] - 0.5).abs() < 1e-12);
        let _ = (model, profile);
    }

    #[test]
    fn clamping_keeps_iterates_inside_bound() {
        let (model, sbm) = crate::bench::build_epidemic();
        let sbm = sbm.with_sizes(vec![10, 10, 10]).unwrap();
        let h = Regularizer::entropy(0.5).unwrap();
        let profile = PolicyProfile::uniform(3, 2, 2);
        let mu0 = MeanFieldEnsemble::uniform(3, 2);
        let states = initial_states(&sbm, &mu0, 3).unwrap();
        let bound = model.q_bound(&h);
        let cfg = GgrsConfig {
            i_ctd: 200,
            i_mix: 2,
            outer_iters: 1,
            schedule: CtdSchedule::Constant { beta: 1.5 },
            seed: 4,
            self_loops: true,
        };
        let out = ctd_learn(&model, &h, &sbm, &states, &profile, &cfg).unwrap();
        for k in 0..3 {
            assert!(out.q_tables[k]
                .data()
                .iter()
                .all(|&x| (-bound..=bound).contains(&x)));
        }
    }
}
