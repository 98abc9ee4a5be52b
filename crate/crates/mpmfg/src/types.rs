//! Core domain types: finite spaces, distributions, policies, mean-field
//! ensembles, impact vectors, Q tables, and the norms used throughout.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance for probability-mass validation on construction.
pub const DIST_TOL: f64 = 1e-9;

/// A finite index set of states or actions, elements `0..size`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteSpace {
    size: usize,
}

impl FiniteSpace {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidParameter("space size must be >= 1".into()));
        }
        Ok(Self { size })
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        i < self.size
    }
}

/// A probability vector over a finite space. Entries are nonnegative and sum
/// to one; small floating drift is absorbed by renormalizing on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    weights: Vec<f64>,
}

impl Distribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("empty weight vector".into()));
        }
        let mut w = weights;
        let mut sum = 0.0;
        for x in &mut w {
            if !x.is_finite() {
                return Err(Error::InvalidDistribution(format!("non-finite entry {x}")));
            }
            if *x < 0.0 {
                if *x < -DIST_TOL {
                    return Err(Error::InvalidDistribution(format!("negative entry {x}")));
                }
                *x = 0.0;
            }
            sum += *x;
        }
        if (sum - 1.0).abs() > DIST_TOL {
            return Err(Error::InvalidDistribution(format!(
                "mass {sum} not within {DIST_TOL} of 1"
            )));
        }
        for x in &mut w {
            *x /= sum;
        }
        Ok(Self { weights: w })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(i: usize, n: usize) -> Self {
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        Self { weights: w }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::ShapeMismatch(format!(
                "distribution lengths {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(l1(&self.weights, &other.weights))
    }

    /// Inverse-CDF sample given a uniform draw in [0, 1).
    #[inline]
    pub fn sample(&self, u: f64) -> usize {
        crate::rng::sample_index(&self.weights, u)
    }
}

#[inline]
pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// The aggregated impact felt by one population: a connectivity-weighted
/// average of state distributions. Entries lie in [0, 1] and the total mass
/// is at most 1, but it is *not* a probability vector in general.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactVector {
    weights: Vec<f64>,
}

impl ImpactVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let mut mass = 0.0;
        for &x in &weights {
            if !x.is_finite() || !(-DIST_TOL..=1.0 + DIST_TOL).contains(&x) {
                return Err(Error::InvalidDistribution(format!(
                    "impact entry {x} outside [0, 1]"
                )));
            }
            mass += x;
        }
        if mass > 1.0 + DIST_TOL {
            return Err(Error::InvalidDistribution(format!(
                "impact mass {mass} exceeds 1"
            )));
        }
        Ok(Self { weights })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            weights: vec![0.0; n],
        }
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn l1_distance(&self, other: &Self) -> f64 {
        l1(&self.weights, &other.weights)
    }
}

/// A stationary policy: one action distribution per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    rows: Vec<Distribution>,
}

impl Policy {
    pub fn from_rows(rows: Vec<Distribution>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidParameter("policy with no states".into()));
        }
        let n = rows[0].len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::ShapeMismatch("ragged policy rows".into()));
        }
        Ok(Self { rows })
    }

    pub fn uniform(states: usize, actions: usize) -> Self {
        Self {
            rows: vec![Distribution::uniform(actions); states],
        }
    }

    /// Policy that plays the same mixed strategy in every state.
    pub fn constant(row: Distribution, states: usize) -> Self {
        Self {
            rows: vec![row; states],
        }
    }

    #[inline]
    pub fn states(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn actions(&self) -> usize {
        self.rows[0].len()
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        self.rows[s].weights()
    }

    #[inline]
    pub fn prob(&self, a: usize, s: usize) -> f64 {
        self.rows[s].get(a)
    }

    pub fn rows(&self) -> &[Distribution] {
        &self.rows
    }

    /// Smallest action probability across all states.
    pub fn min_prob(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.weights().iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    /// Verifies the non-degeneracy floor `zeta`.
    pub fn check_floor(&self, zeta: f64) -> Result<()> {
        if self.min_prob() < zeta {
            return Err(Error::InvalidDistribution(format!(
                "policy entry {} below floor {zeta}",
                self.min_prob()
            )));
        }
        Ok(())
    }

    /// Sup over states of the row L1 distance.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        if self.states() != other.states() || self.actions() != other.actions() {
            return Err(Error::ShapeMismatch(format!(
                "policy shapes {}x{} vs {}x{}",
                self.states(),
                self.actions(),
                other.states(),
                other.actions()
            )));
        }
        let mut d: f64 = 0.0;
        for s in 0..self.states() {
            d = d.max(l1(self.row(s), other.row(s)));
        }
        Ok(d)
    }
}

/// One policy per population, all over the same state/action spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyProfile {
    policies: Vec<Policy>,
}

impl PolicyProfile {
    pub fn new(policies: Vec<Policy>) -> Result<Self> {
        if policies.is_empty() {
            return Err(Error::InvalidParameter("profile with no populations".into()));
        }
        let (s, a) = (policies[0].states(), policies[0].actions());
        if policies.iter().any(|p| p.states() != s || p.actions() != a) {
            return Err(Error::ShapeMismatch(
                "policies in a profile must share spaces".into(),
            ));
        }
        Ok(Self { policies })
    }

    pub fn uniform(populations: usize, states: usize, actions: usize) -> Self {
        Self {
            policies: vec![Policy::uniform(states, actions); populations],
        }
    }

    /// Profile where every population plays `row` in every state.
    pub fn constant(row: Distribution, populations: usize, states: usize) -> Self {
        Self {
            policies: vec![Policy::constant(row, states); populations],
        }
    }

    #[inline]
    pub fn populations(&self) -> usize {
        self.policies.len()
    }

    #[inline]
    pub fn policy(&self, k: usize) -> &Policy {
        &self.policies[k]
    }

    pub fn policies(&self) -> &[Policy] {
        &self.policies
    }

    pub fn set_policy(&mut self, k: usize, policy: Policy) {
        self.policies[k] = policy;
    }
}

/// One state distribution per population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldEnsemble {
    fields: Vec<Distribution>,
}

impl MeanFieldEnsemble {
    pub fn new(fields: Vec<Distribution>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::InvalidParameter("ensemble with no populations".into()));
        }
        let n = fields[0].len();
        if fields.iter().any(|f| f.len() != n) {
            return Err(Error::ShapeMismatch("ragged ensemble".into()));
        }
        Ok(Self { fields })
    }

    pub fn uniform(populations: usize, states: usize) -> Self {
        Self {
            fields: vec![Distribution::uniform(states); populations],
        }
    }

    #[inline]
    pub fn populations(&self) -> usize {
        self.fields.len()
    }

    #[inline]
    pub fn states(&self) -> usize {
        self.fields[0].len()
    }

    #[inline]
    pub fn field(&self, k: usize) -> &Distribution {
        &self.fields[k]
    }

    pub fn fields(&self) -> &[Distribution] {
        &self.fields
    }

    pub fn has_nan(&self) -> bool {
        self.fields
            .iter()
            .any(|f| f.weights().iter().any(|x| x.is_nan()))
    }
}

/// Max over populations of the sup-over-states row L1 distance.
pub fn policy_distance(p: &PolicyProfile, q: &PolicyProfile) -> Result<f64> {
    if p.populations() != q.populations() {
        return Err(Error::ShapeMismatch(format!(
            "profiles with {} vs {} populations",
            p.populations(),
            q.populations()
        )));
    }
    let mut d: f64 = 0.0;
    for k in 0..p.populations() {
        d = d.max(p.policy(k).distance(q.policy(k))?);
    }
    Ok(d)
}

/// Max over populations of the L1 distance between state distributions.
pub fn ensemble_distance(a: &MeanFieldEnsemble, b: &MeanFieldEnsemble) -> Result<f64> {
    if a.populations() != b.populations() {
        return Err(Error::ShapeMismatch(format!(
            "ensembles with {} vs {} populations",
            a.populations(),
            b.populations()
        )));
    }
    let mut d: f64 = 0.0;
    for k in 0..a.populations() {
        d = d.max(a.field(k).l1_distance(b.field(k))?);
    }
    Ok(d)
}

/// A |S| x |A| table of action values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    states: usize,
    actions: usize,
    data: Vec<f64>,
}

impl QTable {
    pub fn zeros(states: usize, actions: usize) -> Self {
        Self {
            states,
            actions,
            data: vec![0.0; states * actions],
        }
    }

    pub fn constant(states: usize, actions: usize, value: f64) -> Self {
        Self {
            states,
            actions,
            data: vec![value; states * actions],
        }
    }

    pub fn from_data(states: usize, actions: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != states * actions {
            return Err(Error::ShapeMismatch(format!(
                "q table data length {} for {}x{}",
                data.len(),
                states,
                actions
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite q entry".into()));
        }
        Ok(Self {
            states,
            actions,
            data,
        })
    }

    #[inline]
    pub fn states(&self) -> usize {
        self.states
    }

    #[inline]
    pub fn actions(&self) -> usize {
        self.actions
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.data[s * self.actions + a]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.data[s * self.actions + a] = v;
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.data[s * self.actions..(s + 1) * self.actions]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn clamp(&mut self, bound: f64) {
        for x in &mut self.data {
            *x = x.clamp(-bound, bound);
        }
    }
}

/// One observed transition of a single agent: state, action, reward, next
/// state, and the action taken there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub s_next: usize,
    pub a_next: usize,
}
