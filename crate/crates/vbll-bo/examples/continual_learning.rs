//! The continual-learning trade-off: event-triggered re-initialization
//! against retraining at every step, on Ackley (2D). The event trigger
//! conditions the last layer recursively whenever the incoming observation
//! is well explained, cutting fit time while tracking a similar optimum.
//!
//! Run with: `cargo run --release --example continual_learning`

use vbll_bo::harness::{run_seed, ExperimentConfig, ReinitConfig, SurrogateConfig};

fn config(kind: &str) -> ExperimentConfig {
    let body = format!(
        r#"{{
        "name": "cl-demo",
        "problem": "ackley2d",
        "horizon": 40,
        "seeds": [0],
        "surrogate": {{ "width": 32, "depth": 3, "max_epochs": 2000, "patience": 100 }},
        "reinit": {{ "kind": "{kind}" }},
        "acquisition": {{ "kind": "ts", "restarts": 10 }}
    }}"#
    );
    ExperimentConfig::from_json(&body).unwrap()
}

fn main() {
    // Keep the two arms identical except for the policy.
    let always = config("always");
    let mut event = config("event");
    event.reinit = ReinitConfig { kind: "event".into(), threshold: Some(0.0), ..Default::default() };
    let _ = SurrogateConfig::default(); // defaults documented in the README

    for cfg in [&always, &event] {
        let record = run_seed(cfg, 0).unwrap();
        let last = record.rows.last().unwrap();
        let retrains: u32 = record.rows.iter().map(|r| r.reinit_flag as u32).sum();
        println!(
            "policy {:<8}  best (canonical) {:>7.4}  fit {:>6.2}s  retrains {:>2}/{}",
            cfg.reinit.kind,
            -last.metric,
            last.cumulative_fit_seconds,
            retrains,
            cfg.horizon,
        );
        let flags: String = record
            .rows
            .iter()
            .skip(record.rows.len() - cfg.horizon)
            .map(|r| if r.reinit_flag == 1 { 'R' } else { '.' })
            .collect();
        println!("  decisions: {flags}");
    }
}
