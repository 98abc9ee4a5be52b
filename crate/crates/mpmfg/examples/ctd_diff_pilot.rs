use mpmfg::ggrs::{ctd_learn, initial_states, CtdSchedule, GgrsConfig};
use mpmfg::population::stable_ensemble;
use mpmfg::types::{MeanFieldEnsemble, PolicyProfile};
use mpmfg::Regularizer;

fn main() {
    let (model, sbm) = mpmfg::bench::build_epidemic();
    let h = Regularizer::entropy(0.5).unwrap();
    let profile = PolicyProfile::uniform(3, 2, 2);
    let mu0 = MeanFieldEnsemble::uniform(3, 2);
    let fp = stable_ensemble(&model, &sbm, &profile, 1e-10, 100000, None).unwrap();
    for n_per in [500usize, 50] {
        let sized = sbm.with_sizes(vec![n_per; 3]).unwrap();
        println!("== N per population: {n_per}");
        for seed in 0..4u64 {
            let states = initial_states(&sized, &mu0, seed).unwrap();
            let cfg = GgrsConfig {
                i_ctd: 500,
                i_mix: 200,
                outer_iters: 1,
                schedule: CtdSchedule::Practical { t0: 100.0 },
                seed,
                self_loops: true,
            };
            let out = ctd_learn(&model, &h, &sized, &states, &profile, &cfg).unwrap();
            for k in [0usize] {
                let q_exact = mpmfg::evaluation::exact_regularized_q(
                    &model, &h, &sbm, &profile, &fp.value, k,
                )
                .unwrap();
                let true_dh = q_exact.get(0, 0) - q_exact.get(0, 1);
                let true_ds = q_exact.get(1, 0) - q_exact.get(1, 1);
                let q = &out.q_tables[k];
                println!(
                    "  seed {seed} pop {k}: learned diffs H={:+.3} S={:+.3} (true H={true_dh:+.3} S={true_ds:+.3}); levels H=({:+.1},{:+.1}) S=({:+.1},{:+.1})",
                    q.get(0, 0) - q.get(0, 1),
                    q.get(1, 0) - q.get(1, 1),
                    q.get(0, 0), q.get(0, 1), q.get(1, 0), q.get(1, 1),
                );
            }
        }
    }
}
