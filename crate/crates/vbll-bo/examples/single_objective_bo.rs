//! Single-objective Bayesian optimization on Branin with analytic Thompson
//! sampling, wired up by hand from the library pieces (the `vbll-bo run`
//! command does the same from a config file).
//!
//! Run with: `cargo run --release --example single_objective_bo`

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use vbll_bo::acquisition::{optimize_ts_single, thompson_sample, unit_bounds};
use vbll_bo::benchmarks::{initial_design, make_problem, ProblemOptions};
use vbll_bo::surrogate::{bo_step, ReinitPolicy, SurrogateModel, TrainConfig};

fn main() {
    let horizon = 30;
    let problem = make_problem("branin", &ProblemOptions::default()).unwrap();
    let cfg = TrainConfig {
        hidden_layers: vec![64, 64, 64],
        max_epochs: 1000,
        patience: 100,
        ..TrainConfig::default()
    };
    let policy = ReinitPolicy::Always;

    let mut rng = ChaCha12Rng::seed_from_u64(2024);
    let mut data = initial_design(&problem, &mut rng).unwrap();
    let mut model: Option<SurrogateModel> = None;
    let mut best = f64::NEG_INFINITY;

    println!("iter   canonical best (true optimum 0.397887)");
    for t in 0..horizon {
        let (m, _reinit) = bo_step(model.take(), &policy, &data, &cfg, t, horizon, &mut rng).unwrap();

        let sample = thompson_sample(&m, &mut rng);
        let x_unit = optimize_ts_single(&sample, &unit_bounds(2), 10, &mut rng);
        let x_raw = data.denormalize(&x_unit);
        let y = problem.evaluate_noisy(&x_raw, &mut rng).unwrap();
        best = best.max(y[0]);
        data.push(x_raw, y);
        model = Some(m);

        if (t + 1) % 5 == 0 {
            // Canonical units: this benchmark is a negated minimization task.
            println!("{:>4}   {:.5}", t + 1, -best);
        }
    }
    let final_model = model.unwrap();
    println!("\ntotal surrogate fit time: {:.1}s", final_model.fit_seconds);
}
