//! Multi-objective Bayesian optimization on BraninCurrin: one multi-output
//! surrogate, Thompson samples optimized with NSGA-II, and greedy
//! hypervolume-improvement selection from the predicted front.
//!
//! Run with: `cargo run --release --example multi_objective_bo`

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use vbll_bo::acquisition::nsga2::NsgaConfig;
use vbll_bo::acquisition::pareto::ParetoArchive;
use vbll_bo::acquisition::{nsga2_optimize, select_hvi_candidate, thompson_sample, unit_bounds};
use vbll_bo::benchmarks::{initial_design, make_problem, ProblemOptions};
use vbll_bo::surrogate::{bo_step, ReinitPolicy, SurrogateModel, TrainConfig};

fn main() {
    let horizon = 25;
    let problem = make_problem("branincurrin", &ProblemOptions::default()).unwrap();
    let reference = problem.reference_point.clone().unwrap();
    println!("reference point: {reference:?}");

    let cfg = TrainConfig {
        hidden_layers: vec![48, 48, 48],
        max_epochs: 1500,
        patience: 100,
        ..TrainConfig::default()
    };
    let nsga = NsgaConfig { population: 50, generations: 60, ..NsgaConfig::default() };

    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let mut data = initial_design(&problem, &mut rng).unwrap();
    let mut archive = ParetoArchive::new(reference);
    for y in data.targets() {
        archive.insert(y.clone());
    }

    let mut model: Option<SurrogateModel> = None;
    println!("iter   hypervolume   front size");
    for t in 0..horizon {
        let (m, _) =
            bo_step(model.take(), &ReinitPolicy::Always, &data, &cfg, t, horizon, &mut rng).unwrap();

        // One joint weight draw gives a deterministic two-output network;
        // NSGA-II recovers its predicted Pareto front.
        let sample = thompson_sample(&m, &mut rng);
        let front = nsga2_optimize(&sample, &unit_bounds(2), &nsga, &mut rng);
        let ys: Vec<Vec<f64>> = front.iter().map(|(_, y)| y.clone()).collect();
        let pick = select_hvi_candidate(&archive, &ys, &mut rng).unwrap();

        let x_raw = data.denormalize(&front[pick].0);
        let y = problem.evaluate_noisy(&x_raw, &mut rng).unwrap();
        archive.insert(y.clone());
        data.push(x_raw, y);
        model = Some(m);

        if (t + 1) % 5 == 0 {
            println!(
                "{:>4}   {:>10.4}   {:>4}",
                t + 1,
                archive.hypervolume().unwrap(),
                archive.points().len()
            );
        }
    }
}
