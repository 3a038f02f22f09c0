//! Derive the default reference points for the multi-objective benchmarks.
//!
//! For each problem, run NSGA-II (population 200, 500 generations, fixed
//! seed) on the true objectives, estimate the front's nadir and ideal
//! points, and set the reference to `nadir - 0.1 (ideal - nadir)` per
//! coordinate. The result is written to `configs/ref_points.json`; the
//! constants in the problem registry are kept in sync with that file.
//!
//! Run with: `cargo run --release --example derive_ref_points`

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use vbll_bo::acquisition::nsga2::{nsga2_run, NsgaConfig};
use vbll_bo::benchmarks::{make_problem, ProblemOptions};

fn main() {
    let cfg = NsgaConfig { population: 200, generations: 500, ..NsgaConfig::default() };
    let mut table: BTreeMap<String, Vec<f64>> = BTreeMap::new();

    for name in ["branincurrin", "dtlz1", "dtlz2"] {
        let problem = make_problem(name, &ProblemOptions::default()).unwrap();
        let objective = |x: &[f64]| problem.evaluate(x);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let front = nsga2_run(&objective, problem.bounds(), &cfg, &mut rng);

        let k = problem.output_dim();
        let mut nadir = vec![f64::INFINITY; k];
        let mut ideal = vec![f64::NEG_INFINITY; k];
        for (_, y) in &front {
            for j in 0..k {
                nadir[j] = nadir[j].min(y[j]);
                ideal[j] = ideal[j].max(y[j]);
            }
        }
        let reference: Vec<f64> =
            (0..k).map(|j| nadir[j] - 0.1 * (ideal[j] - nadir[j])).collect();
        println!("{name}: front size {}, nadir {nadir:?}, ideal {ideal:?}", front.len());
        println!("{name}: reference point {reference:?}");
        table.insert(name.to_string(), reference);
    }

    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/ref_points.json");
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(&path, serde_json::to_string_pretty(&table).unwrap()).unwrap();
    println!("wrote {}", path.canonicalize().unwrap().display());
}
