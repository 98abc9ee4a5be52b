//! The acceptance suite: end-to-end gates over the epidemic benchmark.
//! Each criterion prints one pass/fail line; all thresholds are pinned here.

use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use mpmfg::evaluation::{exact_q, exact_regularized_q};
use mpmfg::ggrs::{
    ctd_learn, initial_states, neighbor_impact, pma_ctd, sample_adjacency, CtdSchedule,
    GgrsConfig, TraceOptions,
};
use mpmfg::mirror::{ascent_step, improve_profile, solve, NashSolve, PmaConfig};
use mpmfg::oracle::{estimate_kernel, SimulatorOracle};
use mpmfg::population::{stable_ensemble, AgentStates, SbmModel};
use mpmfg::rng::{derive_seed, mix64, tag, unit_f64};
use mpmfg::types::{
    Distribution, FiniteSpace, ImpactVector, MeanFieldEnsemble, Policy, PolicyProfile, QTable,
};
use mpmfg::{policy_distance, GameModel, Regularizer};

/// Rounds of the trajectory learner used by the size-effect gate. The round
/// count is a free experimental choice (the per-round sampling volume is
/// pinned); this many rounds is past the exact solver's convergence horizon
/// at the same proximal rate.
const SIZE_EFFECT_ROUNDS: usize = 6;
/// Proximal rate for the trajectory learner gates.
const GGRS_ETA: f64 = 0.1;

pub struct CriterionResult {
    pub number: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CriterionResult {
    fn new(number: usize, name: &'static str, passed: bool, detail: String) -> Self {
        CriterionResult {
            number,
            name,
            passed,
            detail,
        }
    }

    pub fn print(&self) {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        println!("{tag} criterion {}: {} — {}", self.number, self.name, self.detail);
    }
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn r_squared(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if syy == 0.0 {
        return 1.0;
    }
    (sxy * sxy) / (sxx * syy)
}

struct Fixtures {
    model: GameModel,
    sbm: SbmModel,
    h1: Regularizer,
    h05: Regularizer,
    exact1: NashSolve,
    exact1_seconds: f64,
    exact05: NashSolve,
}

fn fixtures() -> &'static Fixtures {
    static CELL: OnceLock<Fixtures> = OnceLock::new();
    CELL.get_or_init(|| {
        let (model, sbm) = mpmfg::bench::build_epidemic();
        let h1 = Regularizer::entropy(1.0).unwrap();
        let h05 = Regularizer::entropy(0.5).unwrap();
        let cfg = PmaConfig::new(0.15).unwrap();
        let t0 = Instant::now();
        let exact1 = solve(&model, &h1, &sbm, None, &cfg, 0.002, 500).unwrap();
        let exact1_seconds = t0.elapsed().as_secs_f64();
        let exact05 = solve(&model, &h05, &sbm, None, &cfg, 0.002, 500).unwrap();
        Fixtures {
            model,
            sbm,
            h1,
            h05,
            exact1,
            exact1_seconds,
            exact05,
        }
    })
}

/// Complete-information solve: converges, small fixed-point residual, near
/// zero exploitability, bounded runtime.
pub fn criterion_1() -> CriterionResult {
    let fx = fixtures();
    let cfg = PmaConfig::new(0.15).unwrap();
    let sol = &fx.exact1;
    let (next, _) = improve_profile(&fx.model, &fx.h1, &fx.sbm, &sol.profile, &cfg).unwrap();
    let residual = policy_distance(&next, &sol.profile).unwrap();
    let expl =
        mpmfg::metrics::max_exploitability(&fx.model, &fx.h1, &fx.sbm, &sol.profile, 1e-9)
            .unwrap();
    let passed = sol.converged
        && sol.iterations <= 500
        && residual <= 0.004
        && expl <= 1e-3
        && fx.exact1_seconds < 60.0;
    CriterionResult::new(
        1,
        "exact solve converges",
        passed,
        format!(
            "converged={} iterations={} residual={residual:.2e} max_exploitability={expl:.2e} \
             runtime={:.2}s",
            sol.converged, sol.iterations, fx.exact1_seconds
        ),
    )
}

/// The successive-change trace decays geometrically: log-linear fit after a
/// five-iteration burn-in explains at least 90% of the variance.
pub fn criterion_2() -> CriterionResult {
    let fx = fixtures();
    let logs: Vec<f64> = fx.exact1.trace.iter().skip(5).map(|d| d.ln()).collect();
    let r2 = if logs.len() >= 3 { r_squared(&logs) } else { f64::NAN };
    let passed = logs.len() >= 3 && r2 >= 0.9;
    CriterionResult::new(
        2,
        "linear convergence rate",
        passed,
        format!("post-burn-in points={} R^2={r2:.4}", logs.len()),
    )
}

/// Populations with a higher sickness penalty mask at least as often, in
/// both states.
pub fn criterion_3() -> CriterionResult {
    let fx = fixtures();
    let p = &fx.exact1.profile;
    let mut ok = true;
    let mut detail = String::new();
    for s in 0..2 {
        let rates: Vec<f64> = (0..3).map(|k| p.policy(k).prob(0, s)).collect();
        ok &= rates[0] <= rates[1] + 1e-6 && rates[1] <= rates[2] + 1e-6;
        detail.push_str(&format!(
            "state {s}: mask rates ({:.4}, {:.4}, {:.4}); ",
            rates[0], rates[1], rates[2]
        ));
    }
    CriterionResult::new(3, "mask-rate ordering across populations", ok, detail)
}

/// The simulator-driven loop lands near the exact equilibrium.
pub fn criterion_4() -> CriterionResult {
    let fx = fixtures();
    let cfg = PmaConfig::new(0.02).unwrap();
    let t0 = Instant::now();
    let mut dists = Vec::new();
    for seed in 0..5u64 {
        let mut oracle = SimulatorOracle::new(fx.model.clone(), seed);
        let out = mpmfg::oracle::solve(
            &mut oracle,
            &fx.h1,
            &fx.sbm,
            None,
            &cfg,
            0.002,
            0.02,
            100,
            1e-8,
            400,
            300,
        )
        .unwrap();
        dists.push(policy_distance(&out.profile, &fx.exact1.profile).unwrap());
    }
    let elapsed = t0.elapsed();
    let med = median(&mut dists);
    let passed = med <= 0.1 && elapsed < Duration::from_secs(300);
    CriterionResult::new(
        4,
        "simulator loop agrees with exact solve",
        passed,
        format!("median distance={med:.4} over 5 seeds, runtime={elapsed:.2?}"),
    )
}

/// The per-agent neighbor impact is unbiased for the connectivity-weighted
/// empirical ensemble: Monte-Carlo means over fresh networks stay within
/// three standard errors.
pub fn criterion_5() -> CriterionResult {
    let fx = fixtures();
    let sized = fx.sbm.with_sizes(vec![50, 50, 50]).unwrap();
    let resamples = 10_000usize;
    let mut worst = 0.0f64;
    let mut failures = 0usize;
    for config_idx in 0..10u64 {
        // random state configuration
        let cfg_seed = derive_seed(2024, &[tag::TEST, config_idx]);
        let per: Vec<Vec<usize>> = (0..3)
            .map(|k| {
                (0..50)
                    .map(|l| (mix64(cfg_seed ^ (k * 1000 + l) as u64) & 1) as usize)
                    .collect()
            })
            .collect();
        let states = AgentStates::new(per);
        let mu = mpmfg::population::empirical_ensemble(&states, 2).unwrap();
        // one probe agent per population
        for k in 0..3 {
            let expect = mpmfg::population::aggregated_impact(&sized, &mu, k).unwrap();
            let mut sum = [0.0f64; 2];
            let mut sumsq = [0.0f64; 2];
            for i in 0..resamples {
                let key = derive_seed(cfg_seed, &[tag::ADJACENCY, i as u64]);
                let adj = sample_adjacency(&sized, key, true).unwrap();
                let z = neighbor_impact(&adj, &sized, &states, k, 0).unwrap();
                for s in 0..2 {
                    sum[s] += z.weights()[s];
                    sumsq[s] += z.weights()[s] * z.weights()[s];
                }
            }
            for s in 0..2 {
                let mean = sum[s] / resamples as f64;
                let var = (sumsq[s] / resamples as f64 - mean * mean).max(0.0);
                let se = (var / resamples as f64).sqrt();
                let gap = (mean - expect.weights()[s]).abs();
                worst = worst.max(if se > 0.0 { gap / se } else { 0.0 });
                if gap > 3.0 * se {
                    failures += 1;
                }
            }
        }
    }
    let passed = failures == 0;
    CriterionResult::new(
        5,
        "neighbor impact is unbiased",
        passed,
        format!("worst deviation={worst:.2} standard errors over 60 coordinates"),
    )
}

/// Deviation between re-sampled and fully connected finite dynamics shrinks
/// with population size: the mean max-deviation ratio (small over large) is
/// at least 2.
pub fn criterion_6() -> CriterionResult {
    let fx = fixtures();
    let profile = PolicyProfile::uniform(3, 2, 2);
    let t0 = Instant::now();
    let points = mpmfg::metrics::deviation_curve(
        &fx.model,
        &fx.sbm,
        &[vec![50, 50, 50], vec![500, 500, 500]],
        &profile,
        200,
        20,
        7,
    )
    .unwrap();
    let elapsed = t0.elapsed();
    let ratio = points[0].mean_max_deviation / points[1].mean_max_deviation;
    let passed = ratio >= 2.0 && elapsed < Duration::from_secs(600);
    CriterionResult::new(
        6,
        "deviation shrinks with population size",
        passed,
        format!(
            "mean max-deviation {:.4} at min 50 vs {:.4} at min 500, ratio={ratio:.2}, \
             runtime={elapsed:.2?}",
            points[0].mean_max_deviation, points[1].mean_max_deviation
        ),
    )
}

/// Longer conditional-TD evaluation is more accurate: at a fixed uniform
/// profile the median sup error against the exact regularized values is
/// strictly smaller at 500 updates than at 50.
pub fn criterion_7() -> CriterionResult {
    let fx = fixtures();
    let sized = fx.sbm.with_sizes(vec![500, 500, 500]).unwrap();
    let profile = PolicyProfile::uniform(3, 2, 2);
    let mu0 = MeanFieldEnsemble::uniform(3, 2);
    let fp = stable_ensemble(&fx.model, &fx.sbm, &profile, 1e-10, 100_000, None).unwrap();
    let q_exact: Vec<QTable> = (0..3)
        .map(|k| {
            exact_regularized_q(&fx.model, &fx.h05, &fx.sbm, &profile, &fp.value, k).unwrap()
        })
        .collect();
    let mut errs = [Vec::new(), Vec::new()];
    for seed in 0..10u64 {
        let states = initial_states(&sized, &mu0, seed).unwrap();
        for (slot, i_ctd) in [(0usize, 500usize), (1, 50)] {
            let cfg = GgrsConfig {
                i_ctd,
                i_mix: 200,
                outer_iters: 1,
                schedule: CtdSchedule::Practical { t0: 100.0 },
                seed,
                self_loops: true,
            };
            let out = ctd_learn(&fx.model, &fx.h05, &sized, &states, &profile, &cfg).unwrap();
            let err = (0..3)
                .map(|k| out.q_tables[k].sup_distance(&q_exact[k]))
                .fold(0.0f64, f64::max);
            errs[slot].push(err);
        }
    }
    let med_long = median(&mut errs[0]);
    let med_short = median(&mut errs[1]);
    let passed = med_long < med_short;
    CriterionResult::new(
        7,
        "conditional TD error decays with updates",
        passed,
        format!("median sup error {med_long:.2} at 500 updates vs {med_short:.2} at 50"),
    )
}

/// Larger populations learn better policies, and learning improves on its
/// first round.
pub fn criterion_8() -> CriterionResult {
    let fx = fixtures();
    let mu0 = MeanFieldEnsemble::uniform(3, 2);
    let pi0 = PolicyProfile::constant(fx.h05.u_max(2), 3, 2);
    let pma = PmaConfig::new(GGRS_ETA).unwrap();
    let mut dists = [Vec::new(), Vec::new()];
    let mut expl_improves = true;
    let mut expl_detail = String::new();
    for (slot, sizes) in [(0usize, vec![500usize, 500, 500]), (1, vec![50, 50, 50])] {
        let sized = fx.sbm.with_sizes(sizes).unwrap();
        for seed in 0..5u64 {
            let states = initial_states(&sized, &mu0, seed).unwrap();
            let cfg = GgrsConfig {
                i_ctd: 500,
                i_mix: 200,
                outer_iters: SIZE_EFFECT_ROUNDS,
                schedule: CtdSchedule::Practical { t0: 100.0 },
                seed,
                self_loops: true,
            };
            let opts = TraceOptions {
                reference: Some(fx.exact05.profile.clone()),
                exploitability: true,
            };
            let out =
                pma_ctd(&fx.model, &fx.h05, &sized, &states, &pi0, &cfg, &pma, &opts).unwrap();
            dists[slot]
                .push(policy_distance(&out.profile, &fx.exact05.profile).unwrap());
            // the improvement clause applies to the headline configuration
            // (the larger population); the small arm is the comparison run
            if slot == 0 {
                let first = out.trace.first().unwrap().max_exploitability.unwrap();
                let last = out.trace.last().unwrap().max_exploitability.unwrap();
                expl_detail.push_str(&format!("seed {seed}: {first:.3} -> {last:.3}; "));
                if last >= first {
                    expl_improves = false;
                }
            }
        }
    }
    let med_large = median(&mut dists[0]);
    let med_small = median(&mut dists[1]);
    let passed = med_large < med_small && expl_improves;
    CriterionResult::new(
        8,
        "population size improves learning",
        passed,
        format!(
            "median distance to exact equilibrium: {med_large:.3} at 500 vs {med_small:.3} \
             at 50 ({SIZE_EFFECT_ROUNDS} rounds); exploitability improves in every \
             headline run: {expl_improves} [{expl_detail}]"
        ),
    )
}

// ---- criterion 9: oracle equivalences -------------------------------------

/// Independent value-iteration evaluation of q, run to numerical fixed point.
fn value_iteration_q(
    model: &GameModel,
    h: &Regularizer,
    sbm: &SbmModel,
    profile: &PolicyProfile,
    mu: &MeanFieldEnsemble,
    k: usize,
) -> QTable {
    let z = mpmfg::population::aggregated_impact(sbm, mu, k).unwrap();
    let (ns, na) = (model.num_states(), model.num_actions());
    let pi = profile.policy(k);
    let h_pi: Vec<f64> = (0..ns).map(|s| h.eval(pi.row(s))).collect();
    let mut q = vec![0.0; ns * na];
    let mut row = vec![0.0; ns];
    for _ in 0..10_000 {
        let mut next = vec![0.0; ns * na];
        let mut delta = 0.0f64;
        for s in 0..ns {
            for a in 0..na {
                model.transition_into(s, a, z.weights(), &mut row);
                let mut cont = 0.0;
                for (sp, &p) in row.iter().enumerate() {
                    let ev: f64 = pi
                        .row(sp)
                        .iter()
                        .enumerate()
                        .map(|(ap, &pa)| pa * (q[sp * na + ap] + h_pi[sp]))
                        .sum();
                    cont += p * ev;
                }
                let v = model.reward(k, s, a, z.weights()) + model.discount() * cont;
                delta = delta.max((v - q[s * na + a]).abs());
                next[s * na + a] = v;
            }
        }
        q = next;
        if delta < 1e-13 {
            break;
        }
    }
    QTable::from_data(ns, na, q).unwrap()
}

fn random_game(seed: u64) -> (GameModel, SbmModel, PolicyProfile, MeanFieldEnsemble) {
    let mut ctr = seed;
    let mut next_u = move || {
        ctr = ctr.wrapping_add(1);
        unit_f64(mix64(derive_seed(seed, &[tag::TEST, ctr])))
    };
    let ns = 2 + (next_u() * 2.0) as usize;
    let na = 2 + (next_u() * 2.0) as usize;
    let kk = 1 + (next_u() * 2.0) as usize;
    let gamma = 0.7 + 0.25 * next_u();
    // random fixed transition rows (impact-independent) and rewards
    let mut rows = vec![0.0; ns * na * ns];
    for sa in 0..ns * na {
        let mut sum = 0.0;
        for sp in 0..ns {
            let w = 0.05 + next_u();
            rows[sa * ns + sp] = w;
            sum += w;
        }
        for sp in 0..ns {
            rows[sa * ns + sp] /= sum;
        }
    }
    let rewards: Vec<f64> = (0..kk * ns * na).map(|_| 2.0 * next_u() - 1.0).collect();
    let (ns_c, na_c) = (ns, na);
    let model = GameModel::new(
        FiniteSpace::new(ns).unwrap(),
        FiniteSpace::new(na).unwrap(),
        gamma,
        (-1.0, 1.0),
        None,
        std::sync::Arc::new(move |s, a, _z: &[f64], out: &mut [f64]| {
            out.copy_from_slice(&rows[(s * na_c + a) * ns_c..(s * na_c + a + 1) * ns_c]);
        }),
        std::sync::Arc::new(move |k, s, a, _z: &[f64]| rewards[(k * ns_c + s) * na_c + a]),
    )
    .unwrap();
    let mut w = vec![vec![0.0; kk]; kk];
    for i in 0..kk {
        for j in 0..=i {
            let v = 0.2 + 0.8 * next_u();
            w[i][j] = v;
            w[j][i] = v;
        }
    }
    let sbm = SbmModel::new(&w, None).unwrap();
    let mut policies = Vec::new();
    for _ in 0..kk {
        let mut rows_p = Vec::new();
        for _ in 0..ns {
            let mut weights: Vec<f64> = (0..na).map(|_| 0.1 + next_u()).collect();
            let sum: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|x| *x /= sum);
            rows_p.push(Distribution::new(weights).unwrap());
        }
        policies.push(Policy::from_rows(rows_p).unwrap());
    }
    let profile = PolicyProfile::new(policies).unwrap();
    let mut fields = Vec::new();
    for _ in 0..kk {
        let mut weights: Vec<f64> = (0..ns).map(|_| 0.1 + next_u()).collect();
        let sum: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|x| *x /= sum);
        fields.push(Distribution::new(weights).unwrap());
    }
    let mu = MeanFieldEnsemble::new(fields).unwrap();
    (model, sbm, profile, mu)
}

/// Brute-force maximizer of the proximal objective over the simplex.
fn grid_oracle(q_row: &[f64], pi_row: &[f64], h: &Regularizer, eta: f64) -> Vec<f64> {
    let objective = |u: &[f64]| -> f64 {
        let lin: f64 = u.iter().zip(q_row).map(|(a, b)| a * b).sum();
        let prox: f64 = u
            .iter()
            .zip(pi_row)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        lin + h.eval(u) - prox / (2.0 * eta)
    };
    match q_row.len() {
        2 => {
            let steps = 100_000usize;
            let mut best = vec![0.5, 0.5];
            let mut best_val = f64::NEG_INFINITY;
            for i in 0..=steps {
                let t = i as f64 / steps as f64;
                let u = [t, 1.0 - t];
                let v = objective(&u);
                if v > best_val {
                    best_val = v;
                    best = u.to_vec();
                }
            }
            best
        }
        3 => {
            // coarse sweep then local refinement (the objective is strictly
            // concave, so one basin)
            let mut best = vec![1.0 / 3.0; 3];
            let mut best_val = f64::NEG_INFINITY;
            let coarse = 200usize;
            for i in 0..=coarse {
                for j in 0..=(coarse - i) {
                    let u = [
                        i as f64 / coarse as f64,
                        j as f64 / coarse as f64,
                        (coarse - i - j) as f64 / coarse as f64,
                    ];
                    let v = objective(&u);
                    if v > best_val {
                        best_val = v;
                        best = u.to_vec();
                    }
                }
            }
            let fine_step = 2.5e-4;
            let radius = 0.012;
            let n_steps = (2.0 * radius / fine_step) as i64;
            let (cx, cy) = (best[0], best[1]);
            for i in -n_steps..=n_steps {
                for j in -n_steps..=n_steps {
                    let x = cx + i as f64 * fine_step;
                    let y = cy + j as f64 * fine_step;
                    let z = 1.0 - x - y;
                    if x < 0.0 || y < 0.0 || z < 0.0 {
                        continue;
                    }
                    let u = [x, y, z];
                    let v = objective(&u);
                    if v > best_val {
                        best_val = v;
                        best = u.to_vec();
                    }
                }
            }
            best
        }
        _ => unreachable!(),
    }
}

pub fn criterion_9() -> CriterionResult {
    // (a) exact linear-solve evaluation vs independent value iteration
    let mut worst_a = 0.0f64;
    for seed in 0..20u64 {
        let (model, sbm, profile, mu) = random_game(seed);
        let h = if seed % 2 == 0 {
            Regularizer::entropy(0.3 + 0.02 * seed as f64).unwrap()
        } else {
            Regularizer::zero()
        };
        for k in 0..sbm.populations() {
            let solved = exact_q(&model, &h, &sbm, &profile, &mu, k).unwrap();
            let iterated = value_iteration_q(&model, &h, &sbm, &profile, &mu, k);
            worst_a = worst_a.max(solved.sup_distance(&iterated));
        }
    }
    let pass_a = worst_a <= 1e-8;

    // (b) proximal step vs brute-force grid search
    let mut worst_b = 0.0f64;
    for case in 0..200u64 {
        let na = if case % 2 == 0 { 2 } else { 3 };
        let seed = derive_seed(77, &[tag::TEST, case]);
        let mut ctr = 0u64;
        let next_u = |c: &mut u64| {
            *c += 1;
            unit_f64(mix64(seed ^ *c))
        };
        let q_row: Vec<f64> = (0..na).map(|_| 6.0 * next_u(&mut ctr) - 3.0).collect();
        let mut pi_row: Vec<f64> = (0..na).map(|_| 0.05 + next_u(&mut ctr)).collect();
        let sum: f64 = pi_row.iter().sum();
        pi_row.iter_mut().for_each(|x| *x /= sum);
        let eta = 0.05 + 2.0 * next_u(&mut ctr);
        let h = match case % 3 {
            0 => Regularizer::entropy(0.3 + next_u(&mut ctr)).unwrap(),
            1 => Regularizer::neg_squared_l2(0.3 + next_u(&mut ctr)).unwrap(),
            _ => Regularizer::zero(),
        };
        let q = QTable::from_data(1, na, q_row.clone()).unwrap();
        let pi = Policy::from_rows(vec![Distribution::new(pi_row.clone()).unwrap()]).unwrap();
        let cfg = PmaConfig::new(eta).unwrap();
        let out = ascent_step(&q, &pi, &cfg, &h).unwrap();
        let grid = grid_oracle(&q_row, &pi_row, &h, eta);
        let d: f64 = out
            .policy
            .row(0)
            .iter()
            .zip(&grid)
            .map(|(a, b)| (a - b).abs())
            .sum();
        worst_b = worst_b.max(d);
    }
    let pass_b = worst_b <= 1e-3;

    // (c) deterministic kernels are estimated exactly
    let (det_model, _) = deterministic_cycle_game();
    let mut oracle = SimulatorOracle::new(det_model, 3);
    let z = ImpactVector::zeros(3);
    let mut pass_c = true;
    for n in [1usize, 7] {
        let kernel = estimate_kernel(&mut oracle, 0, &z, n).unwrap();
        for s in 0..3 {
            for a in 0..2 {
                let expect_next = if a == 0 { (s + 1) % 3 } else { s };
                let row = kernel.row(s, a).unwrap();
                for (sp, &p) in row.iter().enumerate() {
                    let expect = if sp == expect_next { 1.0 } else { 0.0 };
                    pass_c &= p == expect;
                }
            }
        }
    }

    let passed = pass_a && pass_b && pass_c;
    CriterionResult::new(
        9,
        "oracle equivalences",
        passed,
        format!(
            "value-iteration gap={worst_a:.2e} (<=1e-8: {pass_a}); grid gap={worst_b:.2e} \
             (<=1e-3: {pass_b}); deterministic kernel exact: {pass_c}"
        ),
    )
}

fn deterministic_cycle_game() -> (GameModel, SbmModel) {
    let model = GameModel::new(
        FiniteSpace::new(3).unwrap(),
        FiniteSpace::new(2).unwrap(),
        0.9,
        (0.0, 1.0),
        None,
        std::sync::Arc::new(|s, a, _z: &[f64], out: &mut [f64]| {
            out.fill(0.0);
            out[if a == 0 { (s + 1) % 3 } else { s }] = 1.0;
        }),
        std::sync::Arc::new(|_k, s, _a, _z: &[f64]| if s == 0 { 1.0 } else { 0.0 }),
    )
    .unwrap();
    let sbm = SbmModel::new(&[vec![1.0]], None).unwrap();
    (model, sbm)
}

/// Reruns of every mode with the same configuration and seed produce
/// byte-identical outputs, independent of the worker cap.
pub fn criterion_10(binary: &Path) -> CriterionResult {
    use std::process::Command;
    let tmp = std::env::temp_dir().join(format!("mpmfg-determinism-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&tmp);
    std::fs::create_dir_all(&tmp).unwrap();

    let configs = [
        ("exact", r#"{"mode":"exact","model":"epidemic","seed":11}"#),
        (
            "oracle",
            r#"{"mode":"oracle","model":"epidemic","seed":11,"max_outer":40}"#,
        ),
        (
            "ggrs",
            r#"{"mode":"ggrs","model":"epidemic","seed":11,"sizes":[30,30,30],"i_ctd":20,"i_mix":5,"outer_iters":3}"#,
        ),
        (
            "metrics",
            r#"{"mode":"metrics","model":"epidemic","seed":11,"deviation_sizes":[[10,10,10],[20,20,20]],"t_horizon":20,"n_seeds":3}"#,
        ),
    ];
    let mut passed = true;
    let mut detail = String::new();
    for (name, json) in configs {
        let cfg_path = tmp.join(format!("{name}.json"));
        std::fs::write(&cfg_path, json).unwrap();
        let mut outputs = Vec::new();
        for (run, threads) in [(0, "1"), (1, "8"), (2, "1")] {
            let dir = tmp.join(format!("{name}-{run}"));
            let status = Command::new(binary)
                .arg("run")
                .arg(&cfg_path)
                .arg("--out")
                .arg(&dir)
                .arg("--threads")
                .arg(threads)
                .output()
                .expect("running the experiment binary");
            if !status.status.success() {
                passed = false;
                detail.push_str(&format!(
                    "{name}: run failed: {}; ",
                    String::from_utf8_lossy(&status.stderr)
                ));
                break;
            }
            let mut bundle = Vec::new();
            for file in ["manifest.json", "trace.csv", "policy.json", "deviation.csv"] {
                if let Ok(bytes) = std::fs::read(dir.join(file)) {
                    bundle.push((file, bytes));
                }
            }
            outputs.push(bundle);
        }
        if outputs.len() == 3 {
            let identical = outputs[0] == outputs[1] && outputs[1] == outputs[2];
            if !identical {
                passed = false;
                detail.push_str(&format!("{name}: outputs differ across reruns; "));
            } else {
                detail.push_str(&format!("{name}: identical ({} files); ", outputs[0].len()));
            }
        }
    }
    let _ = std::fs::remove_dir_all(&tmp);
    CriterionResult::new(10, "byte-identical reruns", passed, detail)
}

/// Runs the requested criteria (all when `filter` is None), printing one
/// line each; returns true when every one passed.
pub fn run_all(filter: Option<&[usize]>, binary: &Path) -> bool {
    let wanted = |n: usize| filter.map_or(true, |f| f.contains(&n));
    let mut all = true;
    let runners: Vec<(usize, Box<dyn Fn() -> CriterionResult>)> = vec![
        (1, Box::new(criterion_1)),
        (2, Box::new(criterion_2)),
        (3, Box::new(criterion_3)),
        (4, Box::new(criterion_4)),
        (5, Box::new(criterion_5)),
        (6, Box::new(criterion_6)),
        (7, Box::new(criterion_7)),
        (8, Box::new(criterion_8)),
        (9, Box::new(criterion_9)),
    ];
    for (n, f) in runners {
        if wanted(n) {
            let r = f();
            r.print();
            all &= r.passed;
        }
    }
    if wanted(10) {
        let r = criterion_10(binary);
        r.print();
        all &= r.passed;
    }
    all
}
