//! Statistical properties of the re-sampled finite-agent dynamics: block
//! density concentration, trajectory closeness to the deterministic mean
//! field, reachability, visitation convergence, and the TD-update mean.

use mpmfg::evaluation::exact_regularized_q;
use mpmfg::ggrs::{
    block_edge_counts, ctd_learn, initial_states, pma_ctd, td_update, CtdSchedule, GgrsConfig,
    GgrsSim, TraceOptions,
};
use mpmfg::mirror::{ascent_step, PmaConfig};
use mpmfg::population::{stable_ensemble, step_ensemble, SbmModel};
use mpmfg::rng::{derive_seed, mix64, sample_index, tag, unit_f64};
use mpmfg::types::{
    Distribution, FiniteSpace, MeanFieldEnsemble, Observation, PolicyProfile, QTable,
};
use mpmfg::{ensemble_distance, policy_distance, GameModel, Regularizer};
use std::sync::Arc;

#[test]
fn block_densities_concentrate_on_the_connectivity() {
    let (_, sbm) = mpmfg::bench::build_epidemic();
    let sized = sbm.with_sizes(vec![500, 500, 500]).unwrap();
    let samples = 10_000usize;
    let mut totals = vec![0u64; 9];
    for i in 0..samples {
        let key = derive_seed(99, &[tag::ADJACENCY, i as u64]);
        let counts = block_edge_counts(&sized, key, true).unwrap();
        for (t, c) in totals.iter_mut().zip(&counts) {
            *t += c;
        }
    }
    for i in 0..3 {
        for j in i..3 {
            let pairs_per_sample = if i == j {
                500u64 * 501 / 2
            } else {
                500 * 500
            } as f64;
            let trials = pairs_per_sample * samples as f64;
            let p = sized.weight(i, j);
            let se = (p * (1.0 - p) / trials).sqrt();
            let observed = totals[i * 3 + j] as f64 / trials;
            assert!(
                (observed - p).abs() <= 3.0 * se,
                "block ({i}, {j}): observed {observed:.6} vs {p} (3 se = {:.6})",
                3.0 * se
            );
        }
    }
}

#[test]
fn trajectory_tracks_the_deterministic_mean_field() {
    let (model, sbm) = mpmfg::bench::build_epidemic();
    let sized = sbm.with_sizes(vec![500, 500, 500]).unwrap();
    let profile = PolicyProfile::uniform(3, 2, 2);
    let mu0 = MeanFieldEnsemble::uniform(3, 2);
    let states = initial_states(&sized, &mu0, 4).unwrap();
    let mut sim = GgrsSim::new(model.clone(), sized, &states, profile.clone(), 4, true).unwrap();
    let mut mu = mpmfg::population::empirical_ensemble(&states, 2).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        sim.step_resampled(None);
        mu = step_ensemble(&model, &sbm, &mu, &profile).unwrap();
        worst = worst.max(ensemble_distance(&sim.ensemble(), &mu).unwrap());
    }
    println!("max deviation from deterministic trajectory: {worst:.4}");
    assert!(worst <= 0.15, "max deviation {worst}");
}

#[test]
fn every_agent_reaches_every_state_quickly() {
    let (model, sbm) = mpmfg::bench::build_epidemic();
    let sized = sbm.with_sizes(vec![50, 50, 50]).unwrap();
    // floored profile: all probabilities well above 0.05
    let profile = PolicyProfile::uniform(3, 2, 2);
    let mu0 = MeanFieldEnsemble::uniform(3, 2);
    for seed in 0..20u64 {
        let states = initial_states(&sized, &mu0, seed).unwrap();
        let mut sim =
            GgrsSim::new(model.clone(), sized.clone(), &states, profile.clone(), seed, true)
                .unwrap();
        let mut visited = vec![[false; 2]; 150];
        for (i, group) in states.per_population.iter().enumerate() {
            for (l, &s) in group.iter().enumerate() {
                visited[i * 50 + l][s] = true;
            }
        }
        for _ in 0..100 {
            sim.step_resampled(None);
            let snap = sim.agent_states();
            for (i, group) in snap.per_population.iter().enumerate() {
                for (l, &s) in group.iter().enumerate() {
                    visited[i * 50 + l][s] = true;
                }
            }
        }
        assert!(
            visited.iter().all(|v| v[0] && v[1]),
            "seed {seed}: some agent missed a state within 100 steps"
        );
    }
}

#[test]
fn representative_occupancy_converges_to_the_stable_field() {
    let (model, sbm) = mpmfg::bench::build_epidemic();
    let sized = sbm.with_sizes(vec![500, 500, 500]).unwrap();
    let profile = PolicyProfile::uniform(3, 2, 2);
    let stable = stable_ensemble(&model, &sbm, &profile, 1e-10, 100_000, None)
        .unwrap()
        .value;
    let mu0 = MeanFieldEnsemble::uniform(3, 2);
    let states = initial_states(&sized, &mu0, 11).unwrap();
    let mut sim = GgrsSim::new(model, sized, &states, profile, 11, true).unwrap();
    let horizon = 2000usize;
    let mut occupancy = vec![[0.0f64; 2]; 3];
    let mut samples = 0usize;
    for t in 0..horizon {
        let reps = sim.step_resampled(None);
        if t >= horizon / 2 {
            for (k, r) in reps.iter().enumerate() {
                occupancy[k][r.s] += 1.0;
            }
            samples += 1;
        }
    }
    for k in 0..3 {
        let emp: Vec<f64> = occupancy[k].iter().map(|c| c / samples as f64).collect();
        let l1: f64 = emp
            .iter()
            .zip(stable.field(k).weights())
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(l1 <= 0.1, "population {k}: occupancy gap {l1:.3}");
    }
}

#[test]
fn td_update_mean_vanishes_at_the_exact_values() {
    // draw observations from the stationary chain of the frozen-impact
    // process; the update at the exact values has zero mean
    let (model, sbm) = mpmfg::bench::build_epidemic();
    let h = Regularizer::entropy(0.5).unwrap();
    let profile = PolicyProfile::uniform(3, 2, 2);
    let fp = stable_ensemble(&model, &sbm, &profile, 1e-10, 100_000, None).unwrap();
    let k = 1;
    let z = mpmfg::population::aggregated_impact(&sbm, &fp.value, k).unwrap();
    let q = exact_regularized_q(&model, &h, &sbm, &profile, &fp.value, k).unwrap();
    let pi = profile.policy(k);

    let draws = 100_000usize;
    let mut s = 0usize;
    let mut row = vec![0.0; 2];
    let mut a = 0usize;
    // warm up the chain, tracking (state, action) pairs
    let mut step = |s: &mut usize, a: &mut usize, t: u64| {
        let u_a = unit_f64(mix64(derive_seed(5150, &[tag::ACTION, t])));
        *a = sample_index(pi.row(*s), u_a);
        model.transition_into(*s, *a, z.weights(), &mut row);
        let u_s = unit_f64(mix64(derive_seed(5150, &[tag::NEXT_STATE, t])));
        *s = sample_index(&row, u_s);
    };
    for t in 0..1000 {
        step(&mut s, &mut a, t);
    }
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    let mut prev_s = s;
    let mut prev_a = a;
    for t in 1000..(1000 + draws as u64) {
        let r = model.reward(k, prev_s, prev_a, z.weights());
        step(&mut s, &mut a, t);
        // (s, a) now holds the next state and its action
        let omega = Observation {
            s: prev_s,
            a: prev_a,
            r,
            s_next: s,
            a_next: a,
        };
        let (_, _, scalar) = td_update(&q, &omega, pi, model.discount(), &h);
        sum += scalar;
        sumsq += scalar * scalar;
        prev_s = s;
        prev_a = a;
        let _ = &mut step;
    }
    let mean = sum / draws as f64;
    let var = (sumsq / draws as f64 - mean * mean).max(0.0);
    let se = (var / draws as f64).sqrt();
    assert!(
        mean.abs() <= 4.0 * se + 1e-9,
        "mean update {mean:.5} vs 4 se = {:.5}",
        4.0 * se
    );
}

#[test]
fn near_zero_discount_learner_matches_one_exact_step() {
    // deterministic cycling transitions, impact-free rewards, and a discount
    // so small the value table equals the one-step reward plus bonus: one
    // learning round then reproduces the exact improvement step
    let model = GameModel::new(
        FiniteSpace::new(2).unwrap(),
        FiniteSpace::new(2).unwrap(),
        1e-12,
        (0.0, 1.0),
        None,
        Arc::new(|s, _a, _z: &[f64], out: &mut [f64]| {
            out.fill(0.0);
            out[1 - s] = 1.0;
        }),
        Arc::new(|_k, s, a, _z: &[f64]| if s == 0 && a == 0 { 1.0 } else { 0.3 }),
    )
    .unwrap();
    let sbm = SbmModel::new(&[vec![1.0]], Some(vec![10])).unwrap();
    let h = Regularizer::entropy(0.4).unwrap();
    let profile = PolicyProfile::uniform(1, 2, 2);
    let states = mpmfg::population::AgentStates::new(vec![vec![0; 10]]);
    let cfg = GgrsConfig {
        i_ctd: 60,
        i_mix: 2,
        outer_iters: 1,
        schedule: CtdSchedule::Constant { beta: 1.0 },
        seed: 8,
        self_loops: true,
    };
    let pma = PmaConfig::new(0.7).unwrap();
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

    // exact counterpart: q(s, a) = R(s, a) (+ negligible continuation)
    let mut q = QTable::zeros(2, 2);
    for s in 0..2 {
        for a in 0..2 {
            q.set(s, a, model.reward(0, s, a, &[0.0, 0.0]) + h.eval(profile.policy(0).row(s)));
        }
    }
    let exact_step = ascent_step(&q, profile.policy(0), &pma, &h).unwrap();
    let d = policy_distance(
        &out.profile,
        &PolicyProfile::new(vec![exact_step.policy]).unwrap(),
    )
    .unwrap();
    assert!(d < 1e-6, "distance {d}");
}

#[test]
fn ctd_tables_do_not_change_unvisited_entries_beyond_init() {
    let (model, sbm) = mpmfg::bench::build_epidemic();
    let sized = sbm.with_sizes(vec![20, 20, 20]).unwrap();
    let h = Regularizer::entropy(0.5).unwrap();
    // deterministic policy: never mask; the (s, mask) entries stay at the
    // bound since the representative agent never plays them
    let never_mask = PolicyProfile::constant(Distribution::point_mass(1, 2), 3, 2);
    let states = mpmfg::population::AgentStates::new(vec![vec![0; 20], vec![1; 20], vec![0; 20]]);
    let cfg = GgrsConfig {
        i_ctd: 50,
        i_mix: 3,
        outer_iters: 1,
        schedule: CtdSchedule::Practical { t0: 100.0 },
        seed: 2,
        self_loops: true,
    };
    let out = ctd_learn(&model, &h, &sized, &states, &never_mask, &cfg).unwrap();
    let init = model.q_upper(&h);
    for k in 0..3 {
        for s in 0..2 {
            assert_eq!(out.q_tables[k].get(s, 0), init, "population {k} state {s}");
        }
    }
}

#[test]
fn matched_arms_share_per_agent_draws() {
    // with an impact-independent model the re-sampled and fully connected
    // arms produce identical trajectories under the same seed
    let model = GameModel::new(
        FiniteSpace::new(2).unwrap(),
        FiniteSpace::new(2).unwrap(),
        0.9,
        (0.0, 0.0),
        None,
        Arc::new(|_s, _a, _z: &[f64], out: &mut [f64]| {
            out[0] = 0.35;
            out[1] = 0.65;
        }),
        Arc::new(|_, _, _, _: &[f64]| 0.0),
    )
    .unwrap();
    let sbm = SbmModel::new(&[vec![0.6, 0.3], vec![0.3, 0.6]], Some(vec![40, 40])).unwrap();
    let profile = PolicyProfile::uniform(2, 2, 2);
    let mu0 = MeanFieldEnsemble::uniform(2, 2);
    let states = initial_states(&sbm, &mu0, 6).unwrap();
    let mut a = GgrsSim::new(model.clone(), sbm.clone(), &states, profile.clone(), 6, true)
        .unwrap();
    let mut b = GgrsSim::new(model, sbm, &states, profile, 6, true).unwrap();
    for _ in 0..50 {
        a.step_resampled(None);
        b.step_fully_connected(None);
        assert_eq!(a.agent_states(), b.agent_states());
    }
}

#[test]
fn deviation_declines_across_three_sizes() {
    let (model, sbm) = mpmfg::bench::build_epidemic();
    let profile = PolicyProfile::uniform(3, 2, 2);
    let points = mpmfg::metrics::deviation_curve(
        &model,
        &sbm,
        &[vec![50, 50, 50], vec![150, 150, 150], vec![500, 500, 500]],
        &profile,
        150,
        6,
        13,
    )
    .unwrap();
    for p in &points {
        assert!(p.mean_max_deviation >= 0.0);
    }
    assert!(
        points[0].mean_max_deviation >= points[1].mean_max_deviation
            && points[1].mean_max_deviation >= points[2].mean_max_deviation,
        "{points:?}"
    );
}
