use mpmfg::mirror::{solve, PmaConfig};
use mpmfg::Regularizer;

fn main() {
    let (model, sbm) = mpmfg::bench::build_epidemic();
    let h = Regularizer::entropy(1.0).unwrap();
    for eta in [0.5, 1.0, 2.0, 5.0] {
        let cfg = PmaConfig::new(eta).unwrap();
        let t0 = std::time::Instant::now();
        let sol = solve(&model, &h, &sbm, None, &cfg, 0.002, 500).unwrap();
        let dt = t0.elapsed();
        println!(
            "eta={eta}: converged={} iters={} time={dt:?}",
            sol.converged, sol.iterations
        );
        if sol.converged {
            for k in 0..3 {
                let p = sol.profile.policy(k);
                println!(
                    "  pop {}: mask|healthy={:.4} mask|sick={:.4}",
                    k + 1,
                    p.prob(0, 0),
                    p.prob(0, 1)
                );
            }
            let me = mpmfg::metrics::max_exploitability(&model, &h, &sbm, &sol.profile, 1e-9)
                .unwrap();
            // residual: one more improvement application
            let (next, _) =
                mpmfg::mirror::improve_profile(&model, &h, &sbm, &sol.profile, &cfg).unwrap();
            let res = mpmfg::policy_distance(&next, &sol.profile).unwrap();
            println!("  max exploitability={me:.3e} fixed-point residual={res:.3e}");
            let tail: Vec<f64> = sol.trace.iter().rev().take(4).cloned().collect();
            println!("  trace len={} tail={tail:?}", sol.trace.len());
        }
    }
}
