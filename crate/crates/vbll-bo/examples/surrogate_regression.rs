//! Train a VBLL surrogate on noisy 1-D data and inspect its predictive
//! distribution, then warm-start a second training round.
//!
//! Run with: `cargo run --release --example surrogate_regression`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use vbll_bo::surrogate::{train_full, warm_start_train, Dataset, TrainConfig};

fn main() {
    // Noisy observations of f(x) = sin(2 pi x) on [0, 1].
    let mut rng = ChaCha12Rng::seed_from_u64(0);
    let mut data = Dataset::new(vec![(0.0, 1.0)], 1);
    for i in 0..24 {
        let x = i as f64 / 23.0;
        let y = (2.0 * std::f64::consts::PI * x).sin() + 0.05 * rng.gen_range(-1.0..1.0);
        data.push(vec![x], vec![y]);
    }

    let cfg = TrainConfig {
        hidden_layers: vec![32, 32],
        max_epochs: 3000,
        patience: 100,
        ..TrainConfig::default()
    };
    let model = train_full(42, &data, &cfg).unwrap();
    println!(
        "trained for {} epochs (early stop: {}), best loss {:.4}, fit time {:.2}s",
        model.last_report.epochs_run,
        model.last_report.stopped_early,
        model.last_report.best_loss,
        model.fit_seconds
    );
    println!("learned noise sd (standardized): {:.4}", model.head.noise.sigma2(0).sqrt());

    println!("\n  x      truth    mean     sd");
    for i in 0..=10 {
        let x = i as f64 / 10.0;
        let (mean, var) = model.predict_raw(&[x])[0];
        let truth = (2.0 * std::f64::consts::PI * x).sin();
        println!("  {x:.2}   {truth:+.3}   {mean:+.3}   {:.3}", var.sqrt());
    }

    // Warm start re-uses the learned features and converges quickly.
    let warm = warm_start_train(&model, &data, &cfg).unwrap();
    println!(
        "\nwarm start: {} epochs (cold start took {}), best loss {:.4}",
        warm.last_report.epochs_run, model.last_report.epochs_run, warm.last_report.best_loss
    );
}
