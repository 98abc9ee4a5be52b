use mpmfg::mirror::{solve, PmaConfig};
use mpmfg::Regularizer;

fn r_squared(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let xs: Vec<f64> = (0..ys.len()).map(|i| i as f64).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    (sxy * sxy) / (sxx * syy)
}

fn main() {
    let (model, sbm) = mpmfg::bench::build_epidemic();
    let h = Regularizer::entropy(1.0).unwrap();
    for eta in [0.1, 0.15, 0.2, 0.3] {
        let cfg = PmaConfig::new(eta).unwrap();
        let sol = solve(&model, &h, &sbm, None, &cfg, 0.002, 500).unwrap();
        let logs: Vec<f64> = sol.trace.iter().skip(5).map(|d| d.ln()).collect();
        let r2 = if logs.len() >= 3 { r_squared(&logs) } else { f64::NAN };
        let me =
            mpmfg::metrics::max_exploitability(&model, &h, &sbm, &sol.profile, 1e-9).unwrap();
        println!(
            "eta={eta}: converged={} iters={} post-burn-in points={} R2={r2:.4} max_expl={me:.2e}",
            sol.converged,
            sol.iterations,
            logs.len()
        );
        for k in 0..3 {
            let p = sol.profile.policy(k);
            print!("  pop{}: Y|H={:.4} Y|S={:.4}", k + 1, p.prob(0, 0), p.prob(0, 1));
        }
        println!();
    }
}
