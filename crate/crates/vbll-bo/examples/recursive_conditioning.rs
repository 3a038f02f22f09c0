//! Exact recursive conditioning of the last layer: agreement with the dense
//! batch posterior, monotone shrinkage of the predictive variance, and cost
//! independent of the dataset size.
//!
//! Run with: `cargo run --release --example recursive_conditioning`

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use vbll_bo::linalg::rel_frobenius;
use vbll_bo::surrogate::{condition_on, train_full, Dataset, TrainConfig};
use vbll_bo::vbll::fit_last_layer_exact;

fn main() {
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let mut data = Dataset::new(vec![(0.0, 1.0)], 1);
    for i in 0..16 {
        let x = i as f64 / 15.0;
        data.push(vec![x], vec![(4.0 * x).cos()]);
    }
    let cfg = TrainConfig {
        hidden_layers: vec![32, 32],
        max_epochs: 1500,
        patience: 80,
        ..TrainConfig::default()
    };
    let mut model = train_full(7, &data, &cfg).unwrap();
    model.refit_head_exact(&data).unwrap();

    // Stream new points through O(m^2) recursive updates.
    let probe = vec![0.41];
    let mut all = data.clone();
    println!("step   predictive var at probe");
    println!("  -    {:.6}", model.predict_raw(&probe)[0].1);
    for step in 0..8 {
        let x: f64 = rng.gen_range(0.0..1.0);
        let y = (4.0 * x).cos();
        condition_on(&mut model, &[x], &[y]);
        all.push(vec![x], vec![y]);
        println!("  {step}    {:.6}", model.predict_raw(&probe)[0].1);
    }

    // The recursion never revisited old data, yet it matches the dense
    // batch posterior over everything observed.
    let feats: Vec<Vec<f64>> =
        all.inputs().iter().map(|x| model.backbone.features(&all.normalize(x))).collect();
    let ys: Vec<Vec<f64>> = all.targets().iter().map(|y| model.standardizer.standardize(y)).collect();
    let exact = fit_last_layer_exact(
        model.feature_dim(),
        &feats,
        &ys,
        &model.head.prior,
        &model.head.noise,
    )
    .unwrap();
    let drift = rel_frobenius(
        &model.head.posteriors[0].chol.reconstruct(),
        &exact.posteriors[0].chol.reconstruct(),
    );
    println!("\nrelative precision drift vs dense batch posterior: {drift:.2e}");

    // Conditioning cost does not depend on how much data came before.
    for n in [10usize, 1000] {
        let mut big = Dataset::new(vec![(0.0, 1.0)], 1);
        for i in 0..n {
            let x: f64 = (i as f64 + 0.5) / n as f64;
            big.push(vec![x], vec![(4.0 * x).cos()]);
        }
        let mut m = train_full(3, &big, &TrainConfig { max_epochs: 60, patience: 20, ..cfg.clone() }).unwrap();
        let start = Instant::now();
        for _ in 0..200 {
            condition_on(&mut m, &[0.3], &[0.5]);
        }
        println!("200 recursive updates with |D| = {n:>4}: {:.1} ms", start.elapsed().as_secs_f64() * 1e3);
    }
}
