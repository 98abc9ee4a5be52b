use mpmfg::mirror::{solve, PmaConfig};
use mpmfg::oracle::SimulatorOracle;
use mpmfg::{policy_distance, Regularizer};

fn main() {
    let (model, sbm) = mpmfg::bench::build_epidemic();
    let h = Regularizer::entropy(1.0).unwrap();
    let cfg_ref = PmaConfig::new(0.15).unwrap();
    let exact = solve(&model, &h, &sbm, None, &cfg_ref, 0.002, 500).unwrap();
    for (eta, eps_pop, max_pop, max_outer) in [
        (0.05, 0.02, 300usize, 200usize),
        (0.03, 0.02, 300, 300),
        (0.05, 0.01, 500, 200),
        (0.05, 0.05, 100, 200),
        (0.02, 0.02, 300, 400),
    ] {
        let cfg = PmaConfig::new(eta).unwrap();
        let t0 = std::time::Instant::now();
        let mut dists = Vec::new();
        for seed in 0..7u64 {
            let mut oracle = SimulatorOracle::new(model.clone(), seed);
            let out = mpmfg::oracle::solve(
                &mut oracle, &h, &sbm, None, &cfg, 0.002, eps_pop, 100, 1e-8, max_outer, max_pop,
            )
            .unwrap();
            dists.push(policy_distance(&out.profile, &exact.profile).unwrap());
        }
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!(
            "eta={eta} eps_pop={eps_pop} max_pop={max_pop} outer={max_outer}: median={:.4} max={:.4} time/run={:?}",
            dists[3], dists[6], t0.elapsed() / 7
        );
    }
}
