use mpmfg::ggrs::{initial_states, GgrsSim};
use mpmfg::types::{MeanFieldEnsemble, PolicyProfile};

fn main() {
    let (model, sbm) = mpmfg::bench::build_epidemic();
    let sized = sbm.with_sizes(vec![500; 3]).unwrap();
    let mu0 = MeanFieldEnsemble::uniform(3, 2);
    let states = initial_states(&sized, &mu0, 1).unwrap();
    let profile = PolicyProfile::uniform(3, 2, 2);
    let mut sim = GgrsSim::new(model.clone(), sized, &states, profile, 42, true).unwrap();
    let t0 = std::time::Instant::now();
    for _ in 0..2000 {
        sim.step_fully_connected(None);
    }
    println!(
        "fully connected (dynamics only): {:.3} ms/step",
        t0.elapsed().as_secs_f64() * 1000.0 / 2000.0
    );
}
