//! Closed-form test objectives with bounds and optima metadata, observation
//! noise injection, Sobol initial designs, and a sampled-network objective.
//!
//! Everything uses the maximization convention: benchmarks whose canonical
//! form is minimized are negated at this boundary, so a problem with known
//! canonical minimum `v*` has maximized optimum `-v*`.

use std::f64::consts::{E, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sobol_seq::SobolStream;
use crate::surrogate::Dataset;

/// Default reference points (maximization convention) for the
/// multi-objective problems, derived once by an NSGA-II oracle on the true
/// objectives (nadir of the front minus a 10% range margin); see
/// `configs/ref_points.json` and the `derive_ref_points` example.
pub const BRANINCURRIN_REF: [f64; 2] = [-19.21933976756646, -6.137887164815952];
pub const DTLZ1_REF: [f64; 2] = [-0.5500628551448423, -0.5500628543248249];
pub const DTLZ2_REF: [f64; 2] = [-1.1000000235885994, -1.1000000075096286];

#[derive(Debug, Clone, Serialize, Deserialize)]
enum ProblemKind {
    Branin,
    Ackley { dim: usize },
    Hartmann6,
    NnDraw { weights: Vec<Vec<f64>>, biases: Vec<Vec<f64>>, dims: Vec<usize> },
    BraninCurrin,
    Dtlz1 { dim: usize },
    Dtlz2 { dim: usize },
}

/// A benchmark objective: raw box bounds, K maximized outputs, optional
/// optimum metadata and reference point, and a noise level for observations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Problem {
    name: String,
    bounds: Vec<(f64, f64)>,
    outputs: usize,
    kind: ProblemKind,
    pub noise_std: f64,
    /// Maximized optimum value, when known in closed form.
    pub known_optimum: Option<f64>,
    /// Reference point for hypervolume (multi-objective only).
    pub reference_point: Option<Vec<f64>>,
}

/// Options accepted by [`make_problem`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemOptions {
    /// Observation noise standard deviation, i.i.d. per output.
    pub noise_std: f64,
    /// Seed fixing the sampled network of the `nndraw` objective.
    pub nn_seed: u64,
    /// Input dimensionality of the `nndraw` objective.
    pub nn_dim: usize,
    /// Override for the default reference point.
    pub reference_point: Option<Vec<f64>>,
}

impl Default for ProblemOptions {
    fn default() -> Self {
        ProblemOptions { noise_std: 0.0, nn_seed: 2024, nn_dim: 200, reference_point: None }
    }
}

pub const PROBLEM_NAMES: &[&str] =
    &["branin", "ackley2d", "ackley5d", "hartmann6", "nndraw", "branincurrin", "dtlz1", "dtlz2"];

pub fn list_problems() -> &'static [&'static str] {
    PROBLEM_NAMES
}

fn branin(x1: f64, x2: f64) -> f64 {
    let a = 1.0;
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let r = 6.0;
    let s = 10.0;
    let t = 1.0 / (8.0 * PI);
    a * (x2 - b * x1 * x1 + c * x1 - r).powi(2) + s * (1.0 - t) * x1.cos() + s
}

fn ackley(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let sum_sq: f64 = x.iter().map(|v| v * v).sum();
    let sum_cos: f64 = x.iter().map(|v| (2.0 * PI * v).cos()).sum();
    -20.0 * (-0.2 * (sum_sq / d).sqrt()).exp() - (sum_cos / d).exp() + 20.0 + E
}

const HARTMANN6_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const HARTMANN6_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const HARTMANN6_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

fn hartmann6(x: &[f64]) -> f64 {
    let mut outer = 0.0;
    for i in 0..4 {
        let mut inner = 0.0;
        for j in 0..6 {
            let d = x[j] - HARTMANN6_P[i][j];
            inner += HARTMANN6_A[i][j] * d * d;
        }
        outer += HARTMANN6_ALPHA[i] * (-inner).exp();
    }
    -outer
}

/// The Currin exponential function on the unit square; the `x2 = 0` limit of
/// the exponential factor is 1.
fn currin(x1: f64, x2: f64) -> f64 {
    let factor = if x2 == 0.0 { 1.0 } else { 1.0 - (-1.0 / (2.0 * x2)).exp() };
    factor * (2300.0 * x1.powi(3) + 1900.0 * x1 * x1 + 2092.0 * x1 + 60.0)
        / (100.0 * x1.powi(3) + 500.0 * x1 * x1 + 4.0 * x1 + 20.0)
}

fn dtlz1(x: &[f64]) -> [f64; 2] {
    let tail = &x[1..];
    let g = 100.0
        * (tail.len() as f64
            + tail.iter().map(|v| (v - 0.5).powi(2) - (20.0 * PI * (v - 0.5)).cos()).sum::<f64>());
    [0.5 * x[0] * (1.0 + g), 0.5 * (1.0 - x[0]) * (1.0 + g)]
}

fn dtlz2(x: &[f64]) -> [f64; 2] {
    let g: f64 = x[1..].iter().map(|v| (v - 0.5).powi(2)).sum();
    [(1.0 + g) * (PI * x[0] / 2.0).cos(), (1.0 + g) * (PI * x[0] / 2.0).sin()]
}

fn nn_draw_net(dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<usize>) {
    // Two hidden ReLU layers of 50 units, scalar output; every weight and
    // bias drawn from the standard normal with a fixed problem seed.
    let dims = vec![dim, 50, 50, 1];
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..dims.len() - 1 {
        weights.push((0..dims[l] * dims[l + 1]).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
        biases.push((0..dims[l + 1]).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
    }
    (weights, biases, dims)
}

fn nn_draw_eval(weights: &[Vec<f64>], biases: &[Vec<f64>], dims: &[usize], x: &[f64]) -> f64 {
    let mut act = x.to_vec();
    for l in 0..weights.len() {
        let (n_in, n_out) = (dims[l], dims[l + 1]);
        let mut next = biases[l].clone();
        for (i, &a) in act.iter().enumerate().take(n_in) {
            for j in 0..n_out {
                next[j] += a * weights[l][i * n_out + j];
            }
        }
        if l + 1 < weights.len() {
            for v in next.iter_mut() {
                *v = v.max(0.0); // ReLU on hidden layers
            }
        }
        act = next;
    }
    act[0]
}

/// Build a benchmark by registry name.
pub fn make_problem(name: &str, options: &ProblemOptions) -> Result<Problem> {
    let lower = name.to_ascii_lowercase();
    let mut problem = match lower.as_str() {
        "branin" => Problem {
            name: lower.clone(),
            bounds: vec![(-5.0, 10.0), (0.0, 15.0)],
            outputs: 1,
            kind: ProblemKind::Branin,
            noise_std: options.noise_std,
            known_optimum: Some(-0.3978873577297383),
            reference_point: None,
        },
        "ackley2d" | "ackley5d" => {
            let dim = if lower == "ackley2d" { 2 } else { 5 };
            Problem {
                name: lower.clone(),
                bounds: vec![(-5.0, 10.0); dim],
                outputs: 1,
                kind: ProblemKind::Ackley { dim },
                noise_std: options.noise_std,
                known_optimum: Some(0.0),
                reference_point: None,
            }
        }
        "hartmann6" => Problem {
            name: lower.clone(),
            bounds: vec![(0.0, 1.0); 6],
            outputs: 1,
            kind: ProblemKind::Hartmann6,
            noise_std: options.noise_std,
            known_optimum: Some(3.32236801141551),
            reference_point: None,
        },
        "nndraw" => {
            let (weights, biases, dims) = nn_draw_net(options.nn_dim, options.nn_seed);
            Problem {
                name: lower.clone(),
                bounds: vec![(0.0, 1.0); options.nn_dim],
                outputs: 1,
                kind: ProblemKind::NnDraw { weights, biases, dims },
                noise_std: options.noise_std,
                known_optimum: None,
                reference_point: None,
            }
        }
        "branincurrin" => Problem {
            name: lower.clone(),
            bounds: vec![(0.0, 1.0), (0.0, 1.0)],
            outputs: 2,
            kind: ProblemKind::BraninCurrin,
            noise_std: options.noise_std,
            known_optimum: None,
            reference_point: Some(BRANINCURRIN_REF.to_vec()),
        },
        "dtlz1" => Problem {
            name: lower.clone(),
            bounds: vec![(0.0, 1.0); 5],
            outputs: 2,
            kind: ProblemKind::Dtlz1 { dim: 5 },
            noise_std: options.noise_std,
            known_optimum: None,
            reference_point: Some(DTLZ1_REF.to_vec()),
        },
        "dtlz2" => Problem {
            name: lower.clone(),
            bounds: vec![(0.0, 1.0); 5],
            outputs: 2,
            kind: ProblemKind::Dtlz2 { dim: 5 },
            noise_std: options.noise_std,
            known_optimum: None,
            reference_point: Some(DTLZ2_REF.to_vec()),
        },
        _ => return Err(Error::UnknownProblem(name.to_string())),
    };
    if let Some(r) = &options.reference_point {
        if r.len() != problem.outputs {
            return Err(Error::InvalidConfig(format!(
                "reference point has {} entries for a {}-objective problem",
                r.len(),
                problem.outputs
            )));
        }
        problem.reference_point = Some(r.clone());
    }
    Ok(problem)
}

impl Problem {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn output_dim(&self) -> usize {
        self.outputs
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn in_bounds(&self, x: &[f64]) -> bool {
        x.len() == self.bounds.len()
            && x.iter().zip(&self.bounds).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Noise-free objective values, maximization convention.
    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.bounds.len());
        match &self.kind {
            ProblemKind::Branin => vec![-branin(x[0], x[1])],
            ProblemKind::Ackley { .. } => vec![-ackley(x)],
            ProblemKind::Hartmann6 => vec![-hartmann6(x)],
            ProblemKind::NnDraw { weights, biases, dims } => {
                vec![nn_draw_eval(weights, biases, dims, x)]
            }
            ProblemKind::BraninCurrin => {
                let b = branin(15.0 * x[0] - 5.0, 15.0 * x[1]);
                let c = currin(x[0], x[1]);
                vec![-b, -c]
            }
            ProblemKind::Dtlz1 { .. } => {
                let f = dtlz1(x);
                vec![-f[0], -f[1]]
            }
            ProblemKind::Dtlz2 { .. } => {
                let f = dtlz2(x);
                vec![-f[0], -f[1]]
            }
        }
    }

    /// Objective values with i.i.d. Gaussian observation noise per output.
    pub fn evaluate_noisy<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        if !self.in_bounds(x) {
            return Err(Error::OutOfBounds(x.to_vec()));
        }
        let mut y = self.evaluate(x);
        if self.noise_std > 0.0 {
            for v in y.iter_mut() {
                *v += self.noise_std * rng.sample::<f64, _>(StandardNormal);
            }
        }
        Ok(y)
    }
}

/// Number of initial points: the input dimensionality for single-objective
/// problems, `2 (D + 1)` for multi-objective ones.
pub fn initial_design_size(problem: &Problem) -> usize {
    if problem.output_dim() == 1 {
        problem.input_dim()
    } else {
        2 * (problem.input_dim() + 1)
    }
}

/// Scrambled Sobol initial design mapped to the raw bounds and evaluated
/// (with noise when configured).
pub fn initial_design<R: Rng + ?Sized>(problem: &Problem, rng: &mut R) -> Result<Dataset> {
    let n = initial_design_size(problem);
    let mut stream = SobolStream::new_scrambled(problem.input_dim(), rng.gen());
    let mut data = Dataset::new(problem.bounds().to_vec(), problem.output_dim());
    for _ in 0..n {
        let unit = stream.next_point();
        let x: Vec<f64> =
            unit.iter().zip(problem.bounds()).map(|(u, (lo, hi))| lo + u * (hi - lo)).collect();
        let y = problem.evaluate_noisy(&x, rng)?;
        data.push(x, y);
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_rejects_unknown_names() {
        assert!(matches!(
            make_problem("nope", &ProblemOptions::default()),
            Err(Error::UnknownProblem(_))
        ));
        for name in list_problems() {
            assert!(make_problem(name, &ProblemOptions::default()).is_ok());
        }
    }

    #[test]
    fn ackley_is_zero_at_origin() {
        let p = make_problem("ackley2d", &ProblemOptions::default()).unwrap();
        let v = p.evaluate(&[0.0, 0.0])[0];
        assert!(v.abs() <= 1e-12, "{v}");
        let p5 = make_problem("ackley5d", &ProblemOptions::default()).unwrap();
        assert!(p5.evaluate(&[0.0; 5])[0].abs() <= 1e-12);
    }

    #[test]
    fn branin_known_minimizers() {
        let p = make_problem("branin", &ProblemOptions::default()).unwrap();
        for x in [[PI, 2.275], [-PI, 12.275], [9.42478, 2.475]] {
            let v = p.evaluate(&x)[0];
            assert!((v - -0.397887).abs() <= 1e-4, "branin at {x:?} gives {v}");
        }
        assert!((p.known_optimum.unwrap() - -0.3978873577297383).abs() <= 1e-12);
    }

    #[test]
    fn hartmann6_known_minimizer() {
        let p = make_problem("hartmann6", &ProblemOptions::default()).unwrap();
        let xstar = [0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573];
        let v = p.evaluate(&xstar)[0];
        assert!((v - 3.32237).abs() <= 1e-4, "{v}");
    }

    #[test]
    fn negation_convention_on_known_optima() {
        // Maximized optimum == -(canonical minimum) for every problem that
        // states one.
        let branin = make_problem("branin", &ProblemOptions::default()).unwrap();
        assert_eq!(branin.known_optimum.unwrap(), -0.3978873577297383);
        let ackley = make_problem("ackley5d", &ProblemOptions::default()).unwrap();
        assert_eq!(ackley.known_optimum.unwrap(), 0.0);
        let hartmann = make_problem("hartmann6", &ProblemOptions::default()).unwrap();
        assert!(hartmann.known_optimum.unwrap() > 3.32236 && hartmann.known_optimum.unwrap() < 3.32237);
    }

    #[test]
    fn dtlz_front_identities() {
        let d1 = make_problem("dtlz1", &ProblemOptions::default()).unwrap();
        let d2 = make_problem("dtlz2", &ProblemOptions::default()).unwrap();
        for i in 0..=10 {
            let x1 = i as f64 / 10.0;
            let x = [x1, 0.5, 0.5, 0.5, 0.5];
            let f1 = d1.evaluate(&x);
            // Canonical values are the negated outputs.
            assert!((-f1[0] + -f1[1] - 0.5).abs() <= 1e-9, "dtlz1 front at {x1}");
            let f2 = d2.evaluate(&x);
            let norm = (f2[0] * f2[0] + f2[1] * f2[1]).sqrt();
            assert!((norm - 1.0).abs() <= 1e-9, "dtlz2 front at {x1}");
        }
    }

    #[test]
    fn currin_limit_at_zero() {
        let p = make_problem("branincurrin", &ProblemOptions::default()).unwrap();
        let v = p.evaluate(&[0.3, 0.0]);
        assert!(v.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn nndraw_is_bit_identical_per_seed() {
        let opts = ProblemOptions { nn_dim: 20, nn_seed: 99, ..ProblemOptions::default() };
        let a = make_problem("nndraw", &opts).unwrap();
        let b = make_problem("nndraw", &opts).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x: Vec<f64> = (0..20).map(|_| rng.gen::<f64>()).collect();
            assert_eq!(a.evaluate(&x), b.evaluate(&x));
        }
        let c = make_problem("nndraw", &ProblemOptions { nn_seed: 100, ..opts }).unwrap();
        let x = vec![0.5; 20];
        assert_ne!(a.evaluate(&x), c.evaluate(&x));
    }

    #[test]
    fn noisy_evaluation_statistics_and_determinism() {
        let p = make_problem("branin", &ProblemOptions { noise_std: 0.1, ..Default::default() })
            .unwrap();
        let x = [1.0, 5.0];
        let clean = p.evaluate(&x)[0];

        let noiseless =
            make_problem("branin", &ProblemOptions::default()).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        assert_eq!(noiseless.evaluate_noisy(&x, &mut rng).unwrap()[0], clean);

        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let n = 10_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let v = p.evaluate_noisy(&x, &mut rng).unwrap()[0];
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / n as f64;
        let std = ((sumsq / n as f64) - mean * mean).sqrt();
        assert!((std - 0.1).abs() <= 0.005, "std {std}");

        let a = p.evaluate_noisy(&x, &mut ChaCha12Rng::seed_from_u64(7)).unwrap();
        let b = p.evaluate_noisy(&x, &mut ChaCha12Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn out_of_bounds_is_rejected() {
        let p = make_problem("hartmann6", &ProblemOptions::default()).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        assert!(matches!(
            p.evaluate_noisy(&[2.0, 0.0, 0.0, 0.0, 0.0, 0.0], &mut rng),
            Err(Error::OutOfBounds(_))
        ));
    }

    #[test]
    fn initial_design_sizes_and_bounds() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let branin = make_problem("branin", &ProblemOptions::default()).unwrap();
        let d = initial_design(&branin, &mut rng).unwrap();
        assert_eq!(d.len(), 2);
        for x in d.inputs() {
            assert!(branin.in_bounds(x));
        }

        let bc = make_problem("branincurrin", &ProblemOptions::default()).unwrap();
        let d = initial_design(&bc, &mut rng).unwrap();
        assert_eq!(d.len(), 6);
        for x in d.inputs() {
            assert!(bc.in_bounds(x));
        }
    }
}
