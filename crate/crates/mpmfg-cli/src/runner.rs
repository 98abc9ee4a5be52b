//! Experiment orchestration: builds the model, dispatches to the requested
//! solver, and emits a manifest, a per-iteration trace, and the final policy
//! in machine-readable form.
//!
//! Output files contain no timestamps or timings, so identical configurations
//! and seeds reproduce them byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use mpmfg::ggrs::{initial_states, pma_ctd, CtdSchedule, GgrsConfig, TraceOptions};
use mpmfg::metrics::{deviation_curve, DeviationPoint};
use mpmfg::mirror::PmaConfig;
use mpmfg::oracle::SimulatorOracle;
use mpmfg::population::SbmModel;
use mpmfg::types::{Distribution, MeanFieldEnsemble, Policy, PolicyProfile};
use mpmfg::{GameModel, Regularizer};

use crate::config::{build_model, ExperimentConfig, Mode};

/// State/action label mapping of the epidemic benchmark, recorded in every
/// manifest for downstream consumers.
const LABELS_NOTE: &str = "states: healthy=0, sick=1; actions: mask=0, no_mask=1";

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    code_version: &'a str,
    config: &'a ExperimentConfig,
    label_mapping: &'a str,
    converged: bool,
    iterations: usize,
    /// Present when an inner loop (population stabilization) ran out of
    /// budget somewhere; results are still emitted.
    inner_loops_converged: bool,
    final_max_exploitability: Option<f64>,
}

pub struct RunSummary {
    pub out_dir: PathBuf,
    pub converged: bool,
    pub iterations: usize,
}

struct TraceRow {
    iteration: usize,
    delta_pi: f64,
    exploitability_max: f64,
    avg_rewards: Vec<f64>,
    dist_to_ref: Option<f64>,
}

fn load_reference(path: &str, populations: usize) -> Result<PolicyProfile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading reference {path}"))?;
    let raw: Vec<Vec<Vec<f64>>> = serde_json::from_str(&text)?;
    if raw.len() != populations {
        bail!("reference policy has {} populations, expected {populations}", raw.len());
    }
    let policies = raw
        .into_iter()
        .map(|rows| {
            let dists = rows
                .into_iter()
                .map(Distribution::new)
                .collect::<mpmfg::Result<Vec<_>>>()?;
            Policy::from_rows(dists)
        })
        .collect::<mpmfg::Result<Vec<_>>>()
        .map_err(|e| anyhow::anyhow!(e.to_string()))?;
    PolicyProfile::new(policies).map_err(|e| anyhow::anyhow!(e.to_string()))
}

fn write_trace_csv(path: &Path, rows: &[TraceRow], populations: usize) -> Result<()> {
    let mut out = String::from("iteration,delta_pi,exploitability_max");
    for k in 1..=populations {
        out.push_str(&format!(",avg_reward_{k}"));
    }
    out.push_str(",policy_dist_to_ref\n");
    for r in rows {
        out.push_str(&format!("{},{},{}", r.iteration, r.delta_pi, r.exploitability_max));
        for v in &r.avg_rewards {
            out.push_str(&format!(",{v}"));
        }
        match r.dist_to_ref {
            Some(d) => out.push_str(&format!(",{d}\n")),
            None => out.push_str(",\n"),
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_policy_json(path: &Path, profile: &PolicyProfile) -> Result<()> {
    let arr: Vec<Vec<&[f64]>> = profile
        .policies()
        .iter()
        .map(|p| (0..p.states()).map(|s| p.row(s)).collect())
        .collect();
    fs::write(path, serde_json::to_string_pretty(&arr)?)?;
    Ok(())
}

fn write_deviation_csv(path: &Path, points: &[DeviationPoint]) -> Result<()> {
    let mut out = String::from("min_population,mean_max_deviation,std_err\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{}\n",
            p.min_population, p.mean_max_deviation, p.std_err
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

fn trace_rows(
    model: &GameModel,
    h: &Regularizer,
    sbm: &SbmModel,
    intermediates: &[PolicyProfile],
    deltas: &[f64],
    reference: Option<&PolicyProfile>,
) -> Result<Vec<TraceRow>> {
    let mut rows = Vec::with_capacity(intermediates.len());
    for (i, (profile, &delta)) in intermediates.iter().zip(deltas).enumerate() {
        let report = mpmfg::metrics::report(model, h, sbm, profile, reference, 1e-9)
            .map_err(|e| anyhow::anyhow!(e.to_string()))?;
        rows.push(TraceRow {
            iteration: i + 1,
            delta_pi: delta,
            exploitability_max: report.max_exploitability,
            avg_rewards: report.avg_reward,
            dist_to_ref: report.policy_distance_to_reference,
        });
    }
    Ok(rows)
}

/// Runs one experiment, writing `manifest.json`, `trace.csv`, and
/// `policy.json` (or `deviation.csv` for the deviation mode) into `out_dir`.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path, threads: usize) -> Result<RunSummary> {
    if threads == 0 {
        bail!("threads must be >= 1");
    }
    // the worker cap cannot influence results; it is deliberately not part
    // of the manifest so reruns compare byte for byte across caps
    let cfg = cfg.clone().resolved()?;
    fs::create_dir_all(out_dir)?;
    let (model, sbm) = build_model(&cfg.model)?;
    let h = cfg.regularizer_value()?;
    let reference = match &cfg.reference_policy {
        Some(p) => Some(load_reference(p, sbm.populations())?),
        None => None,
    };

    let converged;
    let mut inner_converged = true;
    let iterations;
    let mut final_expl = None;

    match cfg.mode {
        Mode::Exact => {
            let pma = PmaConfig::new(cfg.eta.unwrap()).map_err(|e| anyhow::anyhow!(e.to_string()))?;
            let sol = mpmfg::mirror::solve(
                &model,
                &h,
                &sbm,
                None,
                &pma,
                cfg.eps_pi.unwrap(),
                cfg.max_outer.unwrap(),
            )
            .map_err(|e| anyhow::anyhow!(e.to_string()))?;
            converged = sol.converged;
            iterations = sol.iterations;
            let rows = trace_rows(&model, &h, &sbm, &sol.intermediates, &sol.trace, reference.as_ref())?;
            final_expl = rows.last().map(|r| r.exploitability_max);
            write_trace_csv(&out_dir.join("trace.csv"), &rows, sbm.populations())?;
            write_policy_json(&out_dir.join("policy.json"), &sol.profile)?;
        }
        Mode::Oracle => {
            let pma = PmaConfig::new(cfg.eta.unwrap()).map_err(|e| anyhow::anyhow!(e.to_string()))?;
            let mut oracle = SimulatorOracle::new(model.clone(), cfg.seed);
            let sol = mpmfg::oracle::solve(
                &mut oracle,
                &h,
                &sbm,
                None,
                &pma,
                cfg.eps_pi.unwrap(),
                cfg.eps_pop.unwrap(),
                cfg.n_per_pair.unwrap(),
                cfg.q_tol.unwrap(),
                cfg.max_outer.unwrap(),
                cfg.max_pop_iter.unwrap(),
            )
            .map_err(|e| anyhow::anyhow!(e.to_string()))?;
            converged = sol.converged;
            inner_converged = sol.population_converged;
            iterations = sol.iterations;
            let rows = trace_rows(&model, &h, &sbm, &sol.intermediates, &sol.trace, reference.as_ref())?;
            final_expl = rows.last().map(|r| r.exploitability_max);
            write_trace_csv(&out_dir.join("trace.csv"), &rows, sbm.populations())?;
            write_policy_json(&out_dir.join("policy.json"), &sol.profile)?;
        }
        Mode::Ggrs => {
            let sized = sbm
                .with_sizes(cfg.sizes.clone().unwrap())
                .map_err(|e| anyhow::anyhow!(e.to_string()))?;
            let pma = PmaConfig::new(cfg.eta.unwrap()).map_err(|e| anyhow::anyhow!(e.to_string()))?;
            let ggrs_cfg = GgrsConfig {
                i_ctd: cfg.i_ctd.unwrap(),
                i_mix: cfg.i_mix.unwrap(),
                outer_iters: cfg.outer_iters.unwrap(),
                schedule: CtdSchedule::Practical { t0: cfg.t0.unwrap() },
                seed: cfg.seed,
                self_loops: cfg.self_loops.unwrap(),
            };
            let mu0 = MeanFieldEnsemble::uniform(sized.populations(), model.num_states());
            let states = initial_states(&sized, &mu0, cfg.seed)
                .map_err(|e| anyhow::anyhow!(e.to_string()))?;
            let pi0 = PolicyProfile::constant(
                h.u_max(model.num_actions()),
                sized.populations(),
                model.num_states(),
            );
            let opts = TraceOptions {
                reference: reference.clone(),
                exploitability: false,
            };
            let out = pma_ctd(&model, &h, &sized, &states, &pi0, &ggrs_cfg, &pma, &opts)
                .map_err(|e| anyhow::anyhow!(e.to_string()))?;
            converged = true;
            iterations = out.trace.len();
            let profiles: Vec<PolicyProfile> =
                out.trace.iter().map(|r| r.profile.clone()).collect();
            let deltas: Vec<f64> = out.trace.iter().map(|r| r.delta_pi).collect();
            let rows = trace_rows(&model, &h, &sbm, &profiles, &deltas, reference.as_ref())?;
            final_expl = rows.last().map(|r| r.exploitability_max);
            write_trace_csv(&out_dir.join("trace.csv"), &rows, sbm.populations())?;
            write_policy_json(&out_dir.join("policy.json"), &out.profile)?;
        }
        Mode::Metrics => {
            let profile = PolicyProfile::uniform(
                sbm.populations(),
                model.num_states(),
                model.num_actions(),
            );
            let points = deviation_curve(
                &model,
                &sbm,
                &cfg.deviation_sizes.clone().unwrap(),
                &profile,
                cfg.t_horizon.unwrap(),
                cfg.n_seeds.unwrap(),
                cfg.seed,
            )
            .map_err(|e| anyhow::anyhow!(e.to_string()))?;
            converged = true;
            iterations = points.len();
            write_deviation_csv(&out_dir.join("deviation.csv"), &points)?;
        }
    }

    let manifest = Manifest {
        code_version: env!("CARGO_PKG_VERSION"),
        config: &cfg,
        label_mapping: LABELS_NOTE,
        converged,
        iterations,
        inner_loops_converged: inner_converged,
        final_max_exploitability: final_expl,
    };
    fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(RunSummary {
        out_dir: out_dir.to_path_buf(),
        converged,
        iterations,
    })
}
