//! Hyperparameter sweep over the noise-prior (Wishart) scale, the main
//! robustness knob of the surrogate. Writes one record directory per value
//! under a temporary root and prints the final incumbents.
//!
//! Run with: `cargo run --release --example sweep_wishart`

use vbll_bo::harness::{sweep, ExperimentConfig};

fn main() {
    let cfg = ExperimentConfig::from_json(
        r#"{
        "name": "wishart-sweep",
        "problem": "branin",
        "horizon": 15,
        "seeds": [0, 1, 2],
        "surrogate": { "width": 24, "depth": 2, "max_epochs": 800, "patience": 60 },
        "reinit": { "kind": "always" },
        "acquisition": { "kind": "ts", "restarts": 8 }
    }"#,
    )
    .unwrap();

    let out = std::env::temp_dir().join("vbll-bo-sweep-demo");
    let results = sweep(&cfg, "wishart_scale", &[1e-5, 0.01, 1.0], &out, 3, None).unwrap();

    println!("wishart_scale   median final best (canonical)");
    for (value, outcomes) in results {
        let mut finals: Vec<f64> = outcomes
            .iter()
            .filter_map(|o| o.record.as_ref().ok())
            .map(|r| -r.rows.last().unwrap().metric)
            .collect();
        finals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!("{value:>12}   {:.4}", finals[finals.len() / 2]);
    }
    println!("records under {}", out.display());
}
