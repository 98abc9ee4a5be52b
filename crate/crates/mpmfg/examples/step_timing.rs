use mpmfg::ggrs::{initial_states, GgrsSim};
use mpmfg::types::{MeanFieldEnsemble, PolicyProfile};

fn main() {
    let (model, sbm) = mpmfg::bench::build_epidemic();
    for n in [150usize, 1500] {
        let sized = sbm.with_sizes(vec![n / 3; 3]).unwrap();
        let mu0 = MeanFieldEnsemble::uniform(3, 2);
        let states = initial_states(&sized, &mu0, 1).unwrap();
        let profile = PolicyProfile::uniform(3, 2, 2);
        let mut sim = GgrsSim::new(model.clone(), sized, &states, profile, 42, true).unwrap();
        let steps = if n == 1500 { 2000 } else { 20000 };
        let t0 = std::time::Instant::now();
        for _ in 0..steps {
            sim.step_resampled(None);
        }
        let dt = t0.elapsed();
        println!(
            "N={n}: {} steps in {:?} -> {:.3} ms/step",
            steps,
            dt,
            dt.as_secs_f64() * 1000.0 / steps as f64
        );
    }
}
