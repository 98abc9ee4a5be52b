use mpmfg::ggrs::{ctd_learn, initial_states, pma_ctd, CtdSchedule, GgrsConfig, TraceOptions};
use mpmfg::mirror::{solve, PmaConfig};
use mpmfg::population::stable_ensemble;
use mpmfg::types::{MeanFieldEnsemble, PolicyProfile};
use mpmfg::{policy_distance, Regularizer};

fn main() {
    let (model, sbm) = mpmfg::bench::build_epidemic();
    let h = Regularizer::entropy(0.5).unwrap();
    let profile = PolicyProfile::uniform(3, 2, 2);
    let mu0 = MeanFieldEnsemble::uniform(3, 2);

    // exact reference at lambda = 0.5
    let exact = solve(&model, &h, &sbm, None, &PmaConfig::new(0.15).unwrap(), 0.002, 500).unwrap();

    // CTD accuracy: I_ctd 500 vs 50 at N = 500 per population, 3 seeds
    let sized = sbm.with_sizes(vec![500; 3]).unwrap();
    let fp = stable_ensemble(&model, &sbm, &profile, 1e-10, 100000, None).unwrap();
    let q_ref =
        mpmfg::evaluation::exact_regularized_q(&model, &h, &sbm, &profile, &fp.value, 0).unwrap();
    println!("exact Q (pop 1) row0={:?} row1={:?}", q_ref.row(0), q_ref.row(1));
    for i_ctd in [50usize, 500] {
        let mut errs = Vec::new();
        for seed in 0..3u64 {
            let states = initial_states(&sized, &mu0, seed).unwrap();
            let cfg = GgrsConfig {
                i_ctd,
                i_mix: 200,
                outer_iters: 1,
                schedule: CtdSchedule::Practical { t0: 100.0 },
                seed,
                self_loops: true,
            };
            let t0 = std::time::Instant::now();
            let out = ctd_learn(&model, &h, &sized, &states, &profile, &cfg).unwrap();
            let q_exact = mpmfg::evaluation::exact_regularized_q(
                &model, &h, &sbm, &profile, &fp.value, 0,
            )
            .unwrap();
            let e = out.q_tables[0].sup_distance(&q_exact);
            errs.push(e);
            if seed == 0 {
                println!(
                    "I_ctd={i_ctd} seed0: sup err={e:.3} q00={:.2} time={:?}",
                    out.q_tables[0].get(0, 0),
                    t0.elapsed()
                );
            }
        }
        errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!("I_ctd={i_ctd}: median sup err={:.3}", errs[1]);
    }

    // PMA-CTD eta sweep at small N
    let small = sbm.with_sizes(vec![150; 3]).unwrap();
    for eta in [0.05f64, 0.1, 0.2] {
        let mut dists = Vec::new();
        for seed in 0..3u64 {
            let states = initial_states(&small, &mu0, seed).unwrap();
            let cfg = GgrsConfig {
                i_ctd: 500,
                i_mix: 200,
                outer_iters: 10,
                schedule: CtdSchedule::Practical { t0: 100.0 },
                seed,
                self_loops: true,
            };
            let out = pma_ctd(
                &model,
                &h,
                &small,
                &states,
                &profile,
                &cfg,
                &PmaConfig::new(eta).unwrap(),
                &TraceOptions::default(),
            )
            .unwrap();
            dists.push(policy_distance(&out.profile, &exact.profile).unwrap());
        }
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!("pma_ctd N=150 eta={eta} M=10: dists={dists:?}");
    }
}
