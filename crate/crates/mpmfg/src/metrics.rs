//! Evaluation metrics: average discounted regularized reward, exploitability
//! against a frozen mean field, empirical Lipschitz estimation, and the
//! deviation curve comparing re-sampled dynamics to fully connected ones.

use serde::Serialize;

use crate::evaluation::{best_response, exact_value};
use crate::game::GameModel;
use crate::ggrs::{initial_states, GgrsSim};
use crate::population::{stable_ensemble, SbmModel, STABLE_MAX_ITER, STABLE_TOL};
use crate::regularizer::Regularizer;
use crate::rng::{derive_seed, tag};
use crate::types::{ensemble_distance, policy_distance, MeanFieldEnsemble, PolicyProfile};
use crate::{Error, Result};

/// Expected regularized value of population `k` at the stable ensemble of
/// `profile`, with the expectation over that population's own stable field.
pub fn average_reward(
    model: &GameModel,
    h: &Regularizer,
    sbm: &SbmModel,
    profile: &PolicyProfile,
    k: usize,
) -> Result<f64> {
    let fp = stable_ensemble(model, sbm, profile, STABLE_TOL, STABLE_MAX_ITER, None)?;
    if !fp.converged {
        return Err(Error::Numerical(
            "stable ensemble did not converge for average reward".into(),
        ));
    }
    let v = exact_value(model, h, sbm, profile, &fp.value, k)?;
    Ok(fp
        .value
        .field(k)
        .weights()
        .iter()
        .zip(&v)
        .map(|(m, vv)| m * vv)
        .sum())
}

/// How much population `k` could gain by best-responding while the mean
/// field stays frozen at the profile's stable ensemble: the expected gap
/// between the regularized optimal value and the profile's own value.
pub fn exploitability(
    model: &GameModel,
    h: &Regularizer,
    sbm: &SbmModel,
    profile: &PolicyProfile,
    k: usize,
    tol: f64,
) -> Result<f64> {
    let fp = stable_ensemble(model, sbm, profile, STABLE_TOL, STABLE_MAX_ITER, None)?;
    let mu = fp.value;
    let (v_star, _, _) = best_response(model, h, sbm, &mu, k, tol)?;
    let v = exact_value(model, h, sbm, profile, &mu, k)?;
    Ok(mu
        .field(k)
        .weights()
        .iter()
        .zip(v_star.iter().zip(&v))
        .map(|(m, (vs, vv))| m * (vs - vv))
        .sum())
}

/// Max over populations of [`exploitability`].
pub fn max_exploitability(
    model: &GameModel,
    h: &Regularizer,
    sbm: &SbmModel,
    profile: &PolicyProfile,
    tol: f64,
) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for k in 0..sbm.populations() {
        worst = worst.max(exploitability(model, h, sbm, profile, k, tol)?);
    }
    Ok(worst)
}

/// The re-derived exploitability variant: after best-responding at the
/// frozen field, population `k`'s deviation policy is installed, the
/// ensemble is re-derived under the deviated profile, and the deviator is
/// evaluated there. More expensive and not the variant used for the
/// standard reports.
pub fn exploitability_rederived(
    model: &GameModel,
    h: &Regularizer,
    sbm: &SbmModel,
    profile: &PolicyProfile,
    k: usize,
    tol: f64,
) -> Result<f64> {
    let fp = stable_ensemble(model, sbm, profile, STABLE_TOL, STABLE_MAX_ITER, None)?;
    let (_, br_policy, _) = best_response(model, h, sbm, &fp.value, k, tol)?;
    let mut deviated = profile.clone();
    deviated.set_policy(k, br_policy);
    let fp_dev = stable_ensemble(model, sbm, &deviated, STABLE_TOL, STABLE_MAX_ITER, None)?;
    let v_dev = exact_value(model, h, sbm, &deviated, &fp_dev.value, k)?;
    let v_cur = exact_value(model, h, sbm, profile, &fp.value, k)?;
    let dev: f64 = fp_dev
        .value
        .field(k)
        .weights()
        .iter()
        .zip(&v_dev)
        .map(|(m, v)| m * v)
        .sum();
    let cur: f64 = fp
        .value
        .field(k)
        .weights()
        .iter()
        .zip(&v_cur)
        .map(|(m, v)| m * v)
        .sum();
    Ok(dev - cur)
}

/// A full metric snapshot of one profile.
#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub avg_reward: Vec<f64>,
    pub exploitability: Vec<f64>,
    pub max_exploitability: f64,
    pub policy_distance_to_reference: Option<f64>,
}

pub fn report(
    model: &GameModel,
    h: &Regularizer,
    sbm: &SbmModel,
    profile: &PolicyProfile,
    reference: Option<&PolicyProfile>,
    tol: f64,
) -> Result<MetricReport> {
    let mut avg = Vec::with_capacity(sbm.populations());
    let mut expl = Vec::with_capacity(sbm.populations());
    for k in 0..sbm.populations() {
        avg.push(average_reward(model, h, sbm, profile, k)?);
        expl.push(exploitability(model, h, sbm, profile, k, tol)?);
    }
    let max_expl = expl.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let dist = match reference {
        Some(r) => Some(policy_distance(profile, r)?),
        None => None,
    };
    Ok(MetricReport {
        avg_reward: avg,
        exploitability: expl,
        max_exploitability: max_expl,
        policy_distance_to_reference: dist,
    })
}

/// Largest output/input distance ratio of a black-box map over sampled
/// input pairs. Pairs closer than 1e-8 in input distance are skipped; it is
/// an error if every pair degenerates.
pub fn estimate_lipschitz<X, Y>(
    op: impl Fn(&X) -> Y,
    mut sampler: impl FnMut() -> X,
    input_distance: impl Fn(&X, &X) -> f64,
    output_distance: impl Fn(&Y, &Y) -> f64,
    n_pairs: usize,
) -> Result<f64> {
    if n_pairs < 2 {
        return Err(Error::InvalidParameter("need at least 2 pairs".into()));
    }
    let mut best: Option<f64> = None;
    for _ in 0..n_pairs {
        let x1 = sampler();
        let x2 = sampler();
        let din = input_distance(&x1, &x2);
        if din < 1e-8 {
            continue;
        }
        let dout = output_distance(&op(&x1), &op(&x2));
        let ratio = dout / din;
        best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
    }
    best.ok_or_else(|| Error::Numerical("all sampled pairs were degenerate".into()))
}

/// One row of the deviation table.
#[derive(Debug, Clone, Serialize)]
pub struct DeviationPoint {
    pub min_population: usize,
    pub mean_max_deviation: f64,
    pub std_err: f64,
}

/// For each size setting, runs matched pairs of trajectories from identical
/// initial states and coupled per-agent draws — one with per-step network
/// re-sampling, one fully connected on the known block weights — and
/// reports the mean over seeds of the maximal ensemble deviation over the
/// horizon.
pub fn deviation_curve(
    model: &GameModel,
    sbm: &SbmModel,
    size_settings: &[Vec<usize>],
    profile: &PolicyProfile,
    horizon: usize,
    n_seeds: usize,
    seed: u64,
) -> Result<Vec<DeviationPoint>> {
    if size_settings.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two size settings".into(),
        ));
    }
    if n_seeds == 0 {
        return Err(Error::InvalidParameter("need at least one seed".into()));
    }
    let mu0 = MeanFieldEnsemble::uniform(sbm.populations(), model.num_states());
    let mut out = Vec::with_capacity(size_settings.len());
    for sizes in size_settings {
        let sized = sbm.with_sizes(sizes.clone())?;
        let mut devs = Vec::with_capacity(n_seeds);
        for i in 0..n_seeds {
            let run_seed = derive_seed(seed, &[tag::TEST, i as u64]);
            let states = initial_states(&sized, &mu0, run_seed)?;
            let mut resampled = GgrsSim::new(
                model.clone(),
                sized.clone(),
                &states,
                profile.clone(),
                run_seed,
                true,
            )?;
            let mut connected = GgrsSim::new(
                model.clone(),
                sized.clone(),
                &states,
                profile.clone(),
                run_seed,
                true,
            )?;
            let mut worst: f64 = 0.0;
            for _ in 0..horizon {
                resampled.step_resampled(None);
                connected.step_fully_connected(None);
                let d = ensemble_distance(&resampled.ensemble(), &connected.ensemble())?;
                worst = worst.max(d);
            }
            devs.push(worst);
        }
        let n = devs.len() as f64;
        let mean = devs.iter().sum::<f64>() / n;
        let var = devs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n.max(2.0 - 1.0);
        let std_err = (var / n).sqrt();
        out.push(DeviationPoint {
            min_population: *sizes.iter().min().unwrap(),
            mean_max_deviation: mean,
            std_err,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Distribution, FiniteSpace};
    use std::sync::Arc;

    fn trivial_game() -> (GameModel, SbmModel) {
        let model = GameModel::new(
            FiniteSpace::new(1).unwrap(),
            FiniteSpace::new(1).unwrap(),
            0.5,
            (0.0, 0.0),
            None,
            Arc::new(|_s, _a, _z, out: &mut [f64]| out[0] = 1.0),
            Arc::new(|_, _, _, _| 0.0),
        )
        .unwrap();
        let sbm = SbmModel::new(&[vec![1.0]], None).unwrap();
        (model, sbm)
    }

    #[test]
    fn zero_game_has_zero_metrics() {
        let (model, sbm) = trivial_game();
        let profile = PolicyProfile::uniform(1, 1, 1);
        let h = Regularizer::zero();
        assert_eq!(
            average_reward(&model, &h, &sbm, &profile, 0).unwrap(),
            0.0
        );
        let e = exploitability(&model, &h, &sbm, &profile, 0, 1e-10).unwrap();
        assert!(e.abs() < 1e-9);
    }

    #[test]
    fn constant_reward_discounts_geometrically() {
        let model = GameModel::new(
            FiniteSpace::new(2).unwrap(),
            FiniteSpace::new(2).unwrap(),
            0.9,
            (3.0, 3.0),
            None,
            Arc::new(|s, _a, _z, out: &mut [f64]| {
                out.fill(0.0);
                out[s] = 1.0;
            }),
            Arc::new(|_, _, _, _| 3.0),
        )
        .unwrap();
        let sbm = SbmModel::new(&[vec![1.0]], None).unwrap();
        let profile = PolicyProfile::uniform(1, 2, 2);
        let v = average_reward(&model, &Regularizer::zero(), &sbm, &profile, 0).unwrap();
        assert!((v - 3.0 / (1.0 - 0.9)).abs() < 1e-8);
    }

    #[test]
    fn single_action_game_has_zero_exploitability() {
        let model = GameModel::new(
            FiniteSpace::new(1).unwrap(),
            FiniteSpace::new(1).unwrap(),
            0.9,
            (2.0, 2.0),
            None,
            Arc::new(|_s, _a, _z, out: &mut [f64]| out[0] = 1.0),
            Arc::new(|_, _, _, _| 2.0),
        )
        .unwrap();
        let sbm = SbmModel::new(&[vec![1.0]], None).unwrap();
        let profile = PolicyProfile::uniform(1, 1, 1);
        let e = exploitability(&model, &Regularizer::zero(), &sbm, &profile, 0, 1e-12).unwrap();
        assert!(e.abs() < 1e-8, "exploitability {e}");
    }

    #[test]
    fn lipschitz_of_constant_and_identity_maps() {
        let mut state = 0u64;
        let mut sampler = || {
            state = crate::rng::mix64(state.wrapping_add(1));
            vec![
                crate::rng::unit_f64(state),
                1.0 - crate::rng::unit_f64(state),
            ]
        };
        let l1 = |a: &Vec<f64>, b: &Vec<f64>| -> f64 {
            a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
        };
        let c = estimate_lipschitz(|_x| vec![1.0, 0.0], &mut sampler, l1, l1, 50).unwrap();
        assert_eq!(c, 0.0);
        let id = estimate_lipschitz(|x: &Vec<f64>| x.clone(), &mut sampler, l1, l1, 50).unwrap();
        assert!((id - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_rejects_degenerate_sampling() {
        let l1 = |a: &Vec<f64>, b: &Vec<f64>| -> f64 {
            a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
        };
        let r = estimate_lipschitz(
            |x: &Vec<f64>| x.clone(),
            || vec![0.5, 0.5],
            l1,
            l1,
            10,
        );
        assert!(r.is_err());
    }

    #[test]
    fn deviation_is_zero_when_impacts_cannot_differ() {
        // transition ignores z entirely: both arms see identical draws
        let model = GameModel::new(
            FiniteSpace::new(2).unwrap(),
            FiniteSpace::new(2).unwrap(),
            0.9,
            (0.0, 0.0),
            None,
            Arc::new(|_s, _a, _z, out: &mut [f64]| {
                out[0] = 0.5;
                out[1] = 0.5;
            }),
            Arc::new(|_, _, _, _| 0.0),
        )
        .unwrap();
        let sbm = SbmModel::new(&[vec![1.0, 1.0], vec![1.0, 1.0]], None).unwrap();
        let profile = PolicyProfile::uniform(2, 2, 2);
        let points = deviation_curve(
            &model,
            &sbm,
            &[vec![10, 10], vec![30, 30]],
            &profile,
            20,
            3,
            9,
        )
        .unwrap();
        for p in &points {
            assert_eq!(p.mean_max_deviation, 0.0);
        }
    }

    #[test]
    fn zero_horizon_has_zero_deviation() {
        let (model, sbm) = crate::bench::build_epidemic();
        let profile = PolicyProfile::uniform(3, 2, 2);
        let points = deviation_curve(
            &model,
            &sbm,
            &[vec![5, 5, 5], vec![10, 10, 10]],
            &profile,
            0,
            2,
            3,
        )
        .unwrap();
        for p in &points {
            assert_eq!(p.mean_max_deviation, 0.0);
        }
    }

    #[test]
    fn relabeling_symmetry_of_average_reward() {
        // swapping state labels consistently leaves the metric unchanged
        let (model, sbm) = crate::bench::build_epidemic();
        let h = Regularizer::entropy(1.0).unwrap();
        // swapped model: state s of the original is state 1-s here
        let swapped = GameModel::new(
            FiniteSpace::new(2).unwrap(),
            FiniteSpace::new(2).unwrap(),
            model.discount(),
            model.reward_range(),
            None,
            Arc::new(|s, a, z, out: &mut [f64]| {
                // map to original labels, evaluate, map back
                let z_orig = [z[1], z[0]];
                let s_orig = 1 - s;
                let p_sick = if s_orig == 1 {
                    0.7
                } else if a == 0 {
                    0.8 * z_orig[1] + 0.1
                } else {
                    0.55 * z_orig[1] + 0.3
                };
                out[1] = 1.0 - p_sick; // healthy is label 1 after swap
                out[0] = p_sick;
            }),
            Arc::new(|k, s, a, _z| {
                let s_orig = 1 - s;
                let mut r = 0.0;
                if s_orig == 1 {
                    r -= 2.0 * (k + 1) as f64;
                }
                if a == 0 {
                    r -= 1.0;
                }
                if s_orig == 1 && a == 1 {
                    r -= 0.5;
                }
                r
            }),
        )
        .unwrap();
        let mk = |x: f64| Distribution::new(vec![x, 1.0 - x]).unwrap();
        let profile = PolicyProfile::new(vec![
            crate::types::Policy::from_rows(vec![mk(0.3), mk(0.8)]).unwrap(),
            crate::types::Policy::from_rows(vec![mk(0.5), mk(0.6)]).unwrap(),
            crate::types::Policy::from_rows(vec![mk(0.7), mk(0.2)]).unwrap(),
        ])
        .unwrap();
        // swapped profile: rows exchanged
        let swapped_profile = PolicyProfile::new(
            profile
                .policies()
                .iter()
                .map(|p| {
                    crate::types::Policy::from_rows(vec![
                        Distribution::new(p.row(1).to_vec()).unwrap(),
                        Distribution::new(p.row(0).to_vec()).unwrap(),
                    ])
                    .unwrap()
                })
                .collect(),
        )
        .unwrap();
        for k in 0..3 {
            let a = average_reward(&model, &h, &sbm, &profile, k).unwrap();
            let b = average_reward(&swapped, &h, &sbm, &swapped_profile, k).unwrap();
            assert!((a - b).abs() < 1e-8, "population {k}: {a} vs {b}");
        }
    }
}
