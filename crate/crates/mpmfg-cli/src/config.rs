//! Experiment configuration: parsing, per-mode defaults, validation, and the
//! custom tabular model format.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use mpmfg::game::LipschitzConstants;
use mpmfg::population::SbmModel;
use mpmfg::types::FiniteSpace;
use mpmfg::{GameModel, Regularizer, RegularizerKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Oracle,
    Ggrs,
    Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSpec {
    Epidemic,
    /// Path to a custom tabular model file (see `CustomModelFile`).
    Custom(String),
}

/// One experiment. Optional fields fall back to per-mode defaults when the
/// configuration is resolved; a resolved configuration has every field that
/// its mode consumes filled in, and re-parsing its serialized form is the
/// identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub model: ModelSpec,
    pub seed: u64,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub regularizer: Option<RegularizerKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_pi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_outer: Option<usize>,

    // oracle mode
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_pop: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_pop_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_per_pair: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_tol: Option<f64>,

    // trajectory learner
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i_ctd: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i_mix: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub self_loops: Option<bool>,

    // deviation measurement
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviation_sizes: Option<Vec<Vec<usize>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_horizon: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_seeds: Option<usize>,

    /// Optional reference policy file (K x S x A array) for the
    /// distance-to-reference trace column.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_policy: Option<String>,
}

impl ExperimentConfig {
    pub fn minimal(mode: Mode, model: ModelSpec, seed: u64) -> Self {
        Self {
            mode,
            model,
            seed,
            regularizer: None,
            lambda: None,
            eta: None,
            eps_pi: None,
            max_outer: None,
            eps_pop: None,
            max_pop_iter: None,
            n_per_pair: None,
            q_tol: None,
            sizes: None,
            i_ctd: None,
            i_mix: None,
            outer_iters: None,
            t0: None,
            self_loops: None,
            deviation_sizes: None,
            t_horizon: None,
            n_seeds: None,
            reference_policy: None,
        }
    }

    /// Fills per-mode defaults and validates every field the mode consumes.
    pub fn resolved(mut self) -> Result<Self> {
        self.regularizer.get_or_insert(RegularizerKind::Entropy);
        match self.mode {
            Mode::Exact => {
                self.lambda.get_or_insert(1.0);
                self.eta.get_or_insert(0.15);
                self.eps_pi.get_or_insert(0.002);
                self.max_outer.get_or_insert(500);
            }
            Mode::Oracle => {
                self.lambda.get_or_insert(1.0);
                self.eta.get_or_insert(0.02);
                self.eps_pi.get_or_insert(0.002);
                self.max_outer.get_or_insert(400);
                self.eps_pop.get_or_insert(0.02);
                self.max_pop_iter.get_or_insert(300);
                self.n_per_pair.get_or_insert(100);
                self.q_tol.get_or_insert(1e-8);
            }
            Mode::Ggrs => {
                self.lambda.get_or_insert(0.5);
                self.eta.get_or_insert(0.1);
                self.sizes.get_or_insert(vec![500, 500, 500]);
                self.i_ctd.get_or_insert(500);
                self.i_mix.get_or_insert(200);
                self.outer_iters.get_or_insert(50);
                self.t0.get_or_insert(100.0);
                self.self_loops.get_or_insert(true);
            }
            Mode::Metrics => {
                self.lambda.get_or_insert(0.5);
                self.deviation_sizes
                    .get_or_insert(vec![vec![50, 50, 50], vec![500, 500, 500]]);
                self.t_horizon.get_or_insert(200);
                self.n_seeds.get_or_insert(20);
            }
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: Option<f64>| -> Result<()> {
            if let Some(x) = v {
                if !(x > 0.0) {
                    bail!("field '{name}' must be > 0, got {x}");
                }
            }
            Ok(())
        };
        if let Some(l) = self.lambda {
            if !(l >= 0.0) {
                bail!("field 'lambda' must be >= 0, got {l}");
            }
        }
        positive("eta", self.eta)?;
        positive("eps_pi", self.eps_pi)?;
        positive("eps_pop", self.eps_pop)?;
        positive("q_tol", self.q_tol)?;
        if let Some(i_mix) = self.i_mix {
            if i_mix < 2 {
                bail!("field 'i_mix' must be >= 2, got {i_mix}");
            }
        }
        if let Some(t0) = self.t0 {
            if t0 < 1.0 {
                bail!("field 't0' must be >= 1, got {t0}");
            }
        }
        if let Some(sizes) = &self.sizes {
            if sizes.iter().any(|&n| n == 0) {
                bail!("field 'sizes' must be all >= 1");
            }
        }
        if let Some(ds) = &self.deviation_sizes {
            if ds.len() < 2 {
                bail!("field 'deviation_sizes' needs at least two settings");
            }
        }
        if let Some(n) = self.n_seeds {
            if n == 0 {
                bail!("field 'n_seeds' must be >= 1");
            }
        }
        Ok(())
    }

    pub fn regularizer_value(&self) -> Result<Regularizer> {
        let kind = self.regularizer.unwrap_or(RegularizerKind::Entropy);
        let lambda = self.lambda.unwrap_or(1.0);
        Regularizer::new(kind, lambda).map_err(|e| anyhow::anyhow!(e.to_string()))
    }
}

/// Parses and resolves a configuration file, rejecting unknown keys.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let raw: ExperimentConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))?;
    raw.resolved()
}

/// A tabular game with transitions affine in the impact vector:
/// `P(s'|s,a,z) = base[s][a][s'] + sum_i impact[s][a][s'][i] * z[i]`.
/// Rewards are per-population tables, independent of the impact.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomModelFile {
    pub states: usize,
    pub actions: usize,
    pub discount: f64,
    pub connectivity: Vec<Vec<f64>>,
    /// reward[k][s][a]
    pub reward: Vec<Vec<Vec<f64>>>,
    /// transition_base[s][a][s']
    pub transition_base: Vec<Vec<Vec<f64>>>,
    /// transition_impact[s][a][s'][i]
    pub transition_impact: Vec<Vec<Vec<Vec<f64>>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<[f64; 6]>,
}

impl CustomModelFile {
    pub fn build(&self) -> Result<(GameModel, SbmModel)> {
        let (ns, na, k) = (self.states, self.actions, self.reward.len());
        if k == 0 {
            bail!("custom model needs at least one population reward table");
        }
        let check3 = |name: &str, t: &Vec<Vec<Vec<f64>>>, a: usize, b: usize, c: usize| {
            if t.len() != a
                || t.iter().any(|x| x.len() != b)
                || t.iter().flatten().any(|x| x.len() != c)
            {
                bail!("table '{name}' must be {a} x {b} x {c}");
            }
            Ok(())
        };
        check3("reward", &self.reward, k, ns, na)?;
        check3("transition_base", &self.transition_base, ns, na, ns)?;
        if self.transition_impact.len() != ns
            || self.transition_impact.iter().any(|x| x.len() != na)
            || self
                .transition_impact
                .iter()
                .flatten()
                .any(|x| x.len() != ns)
            || self
                .transition_impact
                .iter()
                .flatten()
                .flatten()
                .any(|x| x.len() != ns)
        {
            bail!("table 'transition_impact' must be {ns} x {na} x {ns} x {ns}");
        }
        // rows must stay on the simplex for every admissible impact vector.
        // P is affine in z and the impact region is the polytope with
        // vertices {0} and the unit coordinate vectors, so checking row sums
        // algebraically and nonnegativity at the vertices is exact.
        for s in 0..ns {
            for a in 0..na {
                let base_sum: f64 = self.transition_base[s][a].iter().sum();
                if (base_sum - 1.0).abs() > 1e-9 {
                    bail!("transition_base row ({s}, {a}) sums to {base_sum}, expected 1");
                }
                for i in 0..ns {
                    let coef_sum: f64 = (0..ns)
                        .map(|sp| self.transition_impact[s][a][sp][i])
                        .sum();
                    if coef_sum.abs() > 1e-9 {
                        bail!(
                            "transition_impact coefficients of z[{i}] at row ({s}, {a}) \
                             sum to {coef_sum}, expected 0"
                        );
                    }
                }
                for sp in 0..ns {
                    let at_zero = self.transition_base[s][a][sp];
                    if at_zero < -1e-12 {
                        bail!("transition row ({s}, {a}) negative at impact 0");
                    }
                    for i in 0..ns {
                        let at_corner = at_zero + self.transition_impact[s][a][sp][i];
                        if !(-1e-12..=1.0 + 1e-12).contains(&at_corner) {
                            bail!(
                                "transition row ({s}, {a}) leaves [0, 1] at impact corner {i}"
                            );
                        }
                    }
                }
            }
        }
        let flat_r: Vec<f64> = self.reward.iter().flatten().flatten().copied().collect();
        let r_min = flat_r.iter().copied().fold(f64::INFINITY, f64::min);
        let r_max = flat_r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lipschitz = self.lipschitz.map(|c| LipschitzConstants {
            p_mu: c[0],
            p_s: c[1],
            p_a: c[2],
            r_mu: c[3],
            r_s: c[4],
            r_a: c[5],
        });
        let base = self.transition_base.clone();
        let impact = self.transition_impact.clone();
        let reward = self.reward.clone();
        let model = GameModel::new(
            FiniteSpace::new(ns).map_err(|e| anyhow::anyhow!(e.to_string()))?,
            FiniteSpace::new(na).map_err(|e| anyhow::anyhow!(e.to_string()))?,
            self.discount,
            (r_min, r_max),
            lipschitz,
            Arc::new(move |s, a, z: &[f64], out: &mut [f64]| {
                let row = &base[s][a];
                let coef = &impact[s][a];
                for (sp, o) in out.iter_mut().enumerate() {
                    let mut v = row[sp];
                    for (i, &zi) in z.iter().enumerate() {
                        v += coef[sp][i] * zi;
                    }
                    *o = v.clamp(0.0, 1.0);
                }
            }),
            Arc::new(move |k, s, a, _z: &[f64]| reward[k][s][a]),
        )
        .map_err(|e| anyhow::anyhow!(e.to_string()))?;
        let sbm = SbmModel::new(&self.connectivity, None)
            .map_err(|e| anyhow::anyhow!(e.to_string()))?;
        if sbm.populations() != k {
            bail!(
                "connectivity is {} x {} but there are {k} reward tables",
                sbm.populations(),
                sbm.populations()
            );
        }
        Ok((model, sbm))
    }
}

/// Builds the game named by the configuration.
pub fn build_model(spec: &ModelSpec) -> Result<(GameModel, SbmModel)> {
    match spec {
        ModelSpec::Epidemic => Ok(mpmfg::bench::build_epidemic()),
        ModelSpec::Custom(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading custom model {path}"))?;
            let file: CustomModelFile = serde_json::from_str(&text)
                .with_context(|| format!("parsing custom model {path}"))?;
            file.build()
        }
    }
}
