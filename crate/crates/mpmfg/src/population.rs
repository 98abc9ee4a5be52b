//! Aggregated impact, empirical ensembles, and mean-field evolution: the
//! one-step population update and its fixed point under a frozen profile.

use serde::{Deserialize, Serialize};

use crate::game::GameModel;
use crate::types::{
    ensemble_distance, Distribution, ImpactVector, MeanFieldEnsemble, PolicyProfile,
};
use crate::{Error, Result};

/// Block-model connectivity between populations: a symmetric K x K matrix of
/// pairwise connection probabilities, plus per-population agent counts for
/// finite-agent runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmModel {
    k: usize,
    w: Vec<f64>,
    sizes: Option<Vec<usize>>,
}

impl SbmModel {
    pub fn new(rows: &[Vec<f64>], sizes: Option<Vec<usize>>) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::InvalidParameter("empty connectivity matrix".into()));
        }
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::ShapeMismatch("connectivity matrix not square".into()));
        }
        let mut w = vec![0.0; k * k];
        for (i, row) in rows.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if !(x > 0.0 && x <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "connectivity entry {x} outside (0, 1]"
                    )));
                }
                if (x - rows[j][i]).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(
                        "connectivity matrix must be symmetric".into(),
                    ));
                }
                w[i * k + j] = x;
            }
        }
        if let Some(s) = &sizes {
            if s.len() != k {
                return Err(Error::ShapeMismatch("sizes length != populations".into()));
            }
            if s.iter().any(|&n| n == 0) {
                return Err(Error::InvalidParameter("population size must be >= 1".into()));
            }
        }
        Ok(Self { k, w, sizes })
    }

    #[inline]
    pub fn populations(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.k + j]
    }

    pub fn sizes(&self) -> Option<&[usize]> {
        self.sizes.as_deref()
    }

    pub fn with_sizes(&self, sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() != self.k {
            return Err(Error::ShapeMismatch("sizes length != populations".into()));
        }
        if sizes.iter().any(|&n| n == 0) {
            return Err(Error::InvalidParameter("population size must be >= 1".into()));
        }
        Ok(Self {
            k: self.k,
            w: self.w.clone(),
            sizes: Some(sizes),
        })
    }

    pub fn total_agents(&self) -> Option<usize> {
        self.sizes.as_ref().map(|s| s.iter().sum())
    }
}

/// The states of all agents, grouped by population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStates {
    pub per_population: Vec<Vec<usize>>,
}

impl AgentStates {
    pub fn new(per_population: Vec<Vec<usize>>) -> Self {
        Self { per_population }
    }

    pub fn populations(&self) -> usize {
        self.per_population.len()
    }

    pub fn validate(&self, sbm: &SbmModel, num_states: usize) -> Result<()> {
        if self.per_population.len() != sbm.populations() {
            return Err(Error::ShapeMismatch(format!(
                "{} agent groups for {} populations",
                self.per_population.len(),
                sbm.populations()
            )));
        }
        for (k, group) in self.per_population.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::EmptyPopulation(k));
            }
            if group.iter().any(|&s| s >= num_states) {
                return Err(Error::IndexOutOfRange(format!(
                    "agent state out of range in population {k}"
                )));
            }
        }
        Ok(())
    }
}

/// The impact felt by population `k`: the connectivity-weighted average of
/// all populations' state distributions, scaled by 1/K.
pub fn aggregated_impact(
    sbm: &SbmModel,
    mu: &MeanFieldEnsemble,
    k: usize,
) -> Result<ImpactVector> {
    if k >= sbm.populations() {
        return Err(Error::IndexOutOfRange(format!(
            "population {k} of {}",
            sbm.populations()
        )));
    }
    if mu.populations() != sbm.populations() {
        return Err(Error::ShapeMismatch(format!(
            "ensemble has {} populations, model {}",
            mu.populations(),
            sbm.populations()
        )));
    }
    let n = mu.states();
    let kk = sbm.populations() as f64;
    let mut z = vec![0.0; n];
    for i in 0..sbm.populations() {
        let w = sbm.weight(k, i) / kk;
        for (zs, &m) in z.iter_mut().zip(mu.field(i).weights()) {
            *zs += w * m;
        }
    }
    ImpactVector::new(z)
}

/// Normalized state histogram of each population.
pub fn empirical_ensemble(states: &AgentStates, num_states: usize) -> Result<MeanFieldEnsemble> {
    let mut fields = Vec::with_capacity(states.per_population.len());
    for (k, group) in states.per_population.iter().enumerate() {
        if group.is_empty() {
            return Err(Error::EmptyPopulation(k));
        }
        let mut counts = vec![0.0; num_states];
        for &s in group {
            if s >= num_states {
                return Err(Error::IndexOutOfRange(format!(
                    "state {s} of {num_states} in population {k}"
                )));
            }
            counts[s] += 1.0;
        }
        let n = group.len() as f64;
        for c in &mut counts {
            *c /= n;
        }
        fields.push(Distribution::new(counts)?);
    }
    MeanFieldEnsemble::new(fields)
}

/// One-step evolution of population `k`'s state distribution: push the
/// current field through the policy-mixed transition at this population's
/// aggregated impact.
pub fn step_population(
    model: &GameModel,
    sbm: &SbmModel,
    mu: &MeanFieldEnsemble,
    profile: &PolicyProfile,
    k: usize,
) -> Result<Distribution> {
    let z = aggregated_impact(sbm, mu, k)?;
    let n = model.num_states();
    let pi = profile.policy(k);
    let field = mu.field(k);
    let mut acc = vec![0.0; n];
    let mut row = vec![0.0; n];
    for s in 0..n {
        let m = field.get(s);
        if m == 0.0 {
            continue;
        }
        for (a, &pa) in pi.row(s).iter().enumerate() {
            let coeff = m * pa;
            if coeff == 0.0 {
                continue;
            }
            model.transition_into(s, a, z.weights(), &mut row);
            for (acc_s, &p) in acc.iter_mut().zip(&row) {
                *acc_s += coeff * p;
            }
        }
    }
    Distribution::new(acc)
}

/// One-step evolution of the whole ensemble.
pub fn step_ensemble(
    model: &GameModel,
    sbm: &SbmModel,
    mu: &MeanFieldEnsemble,
    profile: &PolicyProfile,
) -> Result<MeanFieldEnsemble> {
    let fields = (0..sbm.populations())
        .map(|k| step_population(model, sbm, mu, profile, k))
        .collect::<Result<Vec<_>>>()?;
    MeanFieldEnsemble::new(fields)
}

/// Result of an iterative fixed-point computation. `converged == false`
/// means the iteration budget ran out; the last iterate is still returned.
#[derive(Debug, Clone)]
pub struct FixedPoint<T> {
    pub value: T,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Default residual tolerance for the stable ensemble.
pub const STABLE_TOL: f64 = 1e-10;
/// Default iteration cap for the stable ensemble.
pub const STABLE_MAX_ITER: usize = 100_000;

/// The stable mean-field ensemble under a frozen profile: iterate the
/// one-step update from `mu0` (uniform when absent) until the residual
/// `d(mu, step(mu))` drops to `tol`.
pub fn stable_ensemble(
    model: &GameModel,
    sbm: &SbmModel,
    profile: &PolicyProfile,
    tol: f64,
    max_iter: usize,
    mu0: Option<&MeanFieldEnsemble>,
) -> Result<FixedPoint<MeanFieldEnsemble>> {
    if tol <= 0.0 {
        return Err(Error::InvalidParameter("tol must be > 0".into()));
    }
    if max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
    }
    let mut mu = match mu0 {
        Some(m) => m.clone(),
        None => MeanFieldEnsemble::uniform(sbm.populations(), model.num_states()),
    };
    let mut residual = f64::INFINITY;
    for it in 0..max_iter {
        let next = step_ensemble(model, sbm, &mu, profile)?;
        if next.has_nan() {
            return Err(Error::Numerical("NaN in population iterate".into()));
        }
        residual = ensemble_distance(&mu, &next)?;
        if residual <= tol {
            return Ok(FixedPoint {
                value: mu,
                iterations: it + 1,
                residual,
                converged: true,
            });
        }
        mu = next;
    }
    Ok(FixedPoint {
        value: mu,
        iterations: max_iter,
        residual,
        converged: false,
    })
}
