use mpmfg::ggrs::{initial_states, pma_ctd, CtdSchedule, GgrsConfig, TraceOptions};
use mpmfg::mirror::{solve, PmaConfig};
use mpmfg::types::{MeanFieldEnsemble, PolicyProfile};
use mpmfg::{policy_distance, Regularizer};

fn main() {
    let (model, sbm) = mpmfg::bench::build_epidemic();
    let h = Regularizer::entropy(0.5).unwrap();
    let exact = solve(&model, &h, &sbm, None, &PmaConfig::new(0.15).unwrap(), 0.002, 500).unwrap();
    let mu0 = MeanFieldEnsemble::uniform(3, 2);
    let pi0 = PolicyProfile::constant(h.u_max(2), 3, 2);
    let pma = PmaConfig::new(0.1).unwrap();
    let m = 6usize;
    for sizes in [vec![50usize; 3], vec![500; 3]] {
        let sized = sbm.with_sizes(sizes.clone()).unwrap();
        let mut dists = Vec::new();
        for seed in 0..5u64 {
            let states = initial_states(&sized, &mu0, seed).unwrap();
            let cfg = GgrsConfig {
                i_ctd: 500,
                i_mix: 200,
                outer_iters: m,
                schedule: CtdSchedule::Practical { t0: 100.0 },
                seed,
                self_loops: true,
            };
            let opts = TraceOptions {
                reference: Some(exact.profile.clone()),
                exploitability: true,
            };
            let out = pma_ctd(&model, &h, &sized, &states, &pi0, &cfg, &pma, &opts).unwrap();
            let d = policy_distance(&out.profile, &exact.profile).unwrap();
            let e1 = out.trace.first().unwrap().max_exploitability.unwrap();
            let em = out.trace.last().unwrap().max_exploitability.unwrap();
            let ref_curve: Vec<f64> = out
                .trace
                .iter()
                .map(|r| (r.distance_to_reference.unwrap() * 1000.0).round() / 1000.0)
                .collect();
            println!(
                "N={} seed={seed}: final_dist={d:.3} expl {e1:.3}->{em:.3} curve={ref_curve:?}",
                sizes[0]
            );
            dists.push(d);
        }
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!("N={}: median={:.4}", sizes[0], dists[2]);
    }
}
