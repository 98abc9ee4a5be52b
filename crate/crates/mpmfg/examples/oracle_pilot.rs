use mpmfg::mirror::{solve, PmaConfig};
use mpmfg::oracle::SimulatorOracle;
use mpmfg::{policy_distance, Regularizer};

fn main() {
    let (model, sbm) = mpmfg::bench::build_epidemic();

    // reference game for the trajectory learner (lambda = 0.5)
    let h05 = Regularizer::entropy(0.5).unwrap();
    let cfg = PmaConfig::new(0.15).unwrap();
    let sol = solve(&model, &h05, &sbm, None, &cfg, 0.002, 500).unwrap();
    println!(
        "lambda=0.5 exact: converged={} iters={}",
        sol.converged, sol.iterations
    );
    for k in 0..3 {
        let p = sol.profile.policy(k);
        println!("  pop{}: Y|H={:.4} Y|S={:.4}", k + 1, p.prob(0, 0), p.prob(0, 1));
    }

    // simulator path at lambda = 1.0 against its exact reference
    let h = Regularizer::entropy(1.0).unwrap();
    let exact = solve(&model, &h, &sbm, None, &cfg, 0.002, 500).unwrap();
    for eta in [0.1, 0.15, 0.3] {
        let cfg = PmaConfig::new(eta).unwrap();
        let t0 = std::time::Instant::now();
        let mut dists = Vec::new();
        for seed in 0..5u64 {
            let mut oracle = SimulatorOracle::new(model.clone(), seed);
            let out = mpmfg::oracle::solve(
                &mut oracle, &h, &sbm, None, &cfg, 0.002, 0.02, 100, 1e-8, 200, 300,
            )
            .unwrap();
            let d = policy_distance(&out.profile, &exact.profile).unwrap();
            dists.push(d);
        }
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!(
            "oracle eta={eta}: dists={:?} median={:.4} time={:?}",
            dists.iter().map(|d| (d * 1e4).round() / 1e4).collect::<Vec<_>>(),
            dists[2],
            t0.elapsed()
        );
    }
}
