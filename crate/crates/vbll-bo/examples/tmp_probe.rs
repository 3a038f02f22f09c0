use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use vbll_bo::acquisition::{optimize_ts_single, thompson_sample, unit_bounds};
use vbll_bo::benchmarks::{initial_design, make_problem, ProblemOptions};
use vbll_bo::surrogate::{bo_step, ReinitPolicy, SurrogateModel, TrainConfig};

fn main() {
    for (lr, me) in [(1e-3, 4000usize), (3e-3, 1500)] {
        let problem = make_problem("branin", &ProblemOptions::default()).unwrap();
        let cfg = TrainConfig {
            hidden_layers: vec![32; 3], learning_rate: lr, max_epochs: me, patience: 100,
            ..TrainConfig::default()
        };
        let t0 = std::time::Instant::now();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut data = initial_design(&problem, &mut rng).unwrap();
        let mut model: Option<SurrogateModel> = None;
        let mut best = f64::NEG_INFINITY;
        let horizon = 40;
        for t in 0..horizon {
            let (m, _) = bo_step(model.take(), &ReinitPolicy::Always, &data, &cfg, t, horizon, &mut rng).unwrap();
            let s = thompson_sample(&m, &mut rng);
            let xu = optimize_ts_single(&s, &unit_bounds(2), 10, &mut rng);
            let xr = data.denormalize(&xu);
            let y = problem.evaluate_noisy(&xr, &mut rng).unwrap();
            best = best.max(y[0]);
            data.push(xr, y);
            model = Some(m);
        }
        println!("lr {lr} max_epochs {me}: best canonical {:.4} | fit {:.1}s total", -best, model.unwrap().fit_seconds);
    }
}
