//! NSGA-II: elitist multi-objective genetic algorithm with fast
//! non-dominated sorting, crowding distance, binary tournament selection,
//! simulated binary crossover, and polynomial mutation. Maximization
//! convention, matching the rest of the crate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::pareto::dominates;

/// Solver configuration. Operator defaults are the common reference values;
/// `mutation_prob = None` selects `1/D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsgaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub crossover_eta: f64,
    pub mutation_prob: Option<f64>,
    pub mutation_eta: f64,
}

impl Default for NsgaConfig {
    fn default() -> Self {
        NsgaConfig {
            population: 100,
            generations: 200,
            crossover_prob: 0.9,
            crossover_eta: 15.0,
            mutation_prob: None,
            mutation_eta: 20.0,
        }
    }
}

impl NsgaConfig {
    pub fn validate(&self) {
        assert!(self.population >= 4 && self.population % 2 == 0, "population must be even, >= 4");
        assert!(self.generations >= 1);
    }
}

/// Fast non-dominated sort; returns fronts of indices, best first.
pub fn non_dominated_sort(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&points[i], &points[j]) {
                dominated_by[i].push(j);
                domination_count[j] += 1;
            } else if dominates(&points[j], &points[i]) {
                dominated_by[j].push(i);
                domination_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        fronts.push(std::mem::take(&mut current));
        current = next;
    }
    fronts
}

/// Crowding distance within one front; boundary points get infinity.
pub fn crowding_distance(front: &[Vec<f64>]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n == 0 {
        return dist;
    }
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let k = front[0].len();
    for obj in 0..k {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| front[a][obj].partial_cmp(&front[b][obj]).unwrap());
        let lo = front[idx[0]][obj];
        let hi = front[idx[n - 1]][obj];
        dist[idx[0]] = f64::INFINITY;
        dist[idx[n - 1]] = f64::INFINITY;
        if hi - lo <= 0.0 {
            continue;
        }
        for w in 1..n - 1 {
            dist[idx[w]] += (front[idx[w + 1]][obj] - front[idx[w - 1]][obj]) / (hi - lo);
        }
    }
    dist
}

/// Simulated binary crossover (bounded), per-variable with probability 0.5.
fn sbx<R: Rng + ?Sized>(
    p1: &[f64],
    p2: &[f64],
    bounds: &[(f64, f64)],
    eta: f64,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    for d in 0..p1.len() {
        if rng.gen::<f64>() > 0.5 {
            continue;
        }
        let (lo, hi) = bounds[d];
        let (mut y1, mut y2) = (p1[d].min(p2[d]), p1[d].max(p2[d]));
        if (y2 - y1).abs() < 1e-14 {
            continue;
        }
        let u: f64 = rng.gen();
        let make_child = |beta_bound: f64| -> f64 {
            let alpha = 2.0 - beta_bound.powf(-(eta + 1.0));
            if u <= 1.0 / alpha {
                (u * alpha).powf(1.0 / (eta + 1.0))
            } else {
                (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
            }
        };
        let beta1 = 1.0 + 2.0 * (y1 - lo) / (y2 - y1);
        let betaq1 = make_child(beta1);
        let mut ch1 = 0.5 * ((y1 + y2) - betaq1 * (y2 - y1));
        let beta2 = 1.0 + 2.0 * (hi - y2) / (y2 - y1);
        let betaq2 = make_child(beta2);
        let mut ch2 = 0.5 * ((y1 + y2) + betaq2 * (y2 - y1));
        ch1 = ch1.clamp(lo, hi);
        ch2 = ch2.clamp(lo, hi);
        if rng.gen::<f64>() < 0.5 {
            std::mem::swap(&mut ch1, &mut ch2);
        }
        (y1, y2) = (ch1, ch2);
        c1[d] = y1;
        c2[d] = y2;
    }
    (c1, c2)
}

/// Polynomial mutation (bounded).
fn polynomial_mutation<R: Rng + ?Sized>(
    x: &mut [f64],
    bounds: &[(f64, f64)],
    prob: f64,
    eta: f64,
    rng: &mut R,
) {
    for d in 0..x.len() {
        if rng.gen::<f64>() >= prob {
            continue;
        }
        let (lo, hi) = bounds[d];
        let span = hi - lo;
        if span <= 0.0 {
            continue;
        }
        let y = x[d];
        let delta1 = (y - lo) / span;
        let delta2 = (hi - y) / span;
        let u: f64 = rng.gen();
        let mut_pow = 1.0 / (eta + 1.0);
        let deltaq = if u < 0.5 {
            let xy = 1.0 - delta1;
            let val = 2.0 * u + (1.0 - 2.0 * u) * xy.powf(eta + 1.0);
            val.powf(mut_pow) - 1.0
        } else {
            let xy = 1.0 - delta2;
            let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy.powf(eta + 1.0);
            1.0 - val.powf(mut_pow)
        };
        x[d] = (y + deltaq * span).clamp(lo, hi);
    }
}

struct Ranked {
    rank: Vec<usize>,
    crowding: Vec<f64>,
}

fn rank_population(objs: &[Vec<f64>]) -> Ranked {
    let fronts = non_dominated_sort(objs);
    let mut rank = vec![0usize; objs.len()];
    let mut crowding = vec![0.0; objs.len()];
    for (r, front) in fronts.iter().enumerate() {
        let pts: Vec<Vec<f64>> = front.iter().map(|&i| objs[i].clone()).collect();
        let dist = crowding_distance(&pts);
        for (slot, &i) in front.iter().enumerate() {
            rank[i] = r;
            crowding[i] = dist[slot];
        }
    }
    Ranked { rank, crowding }
}

fn tournament<R: Rng + ?Sized>(ranked: &Ranked, n: usize, rng: &mut R) -> usize {
    let a = rng.gen_range(0..n);
    let b = rng.gen_range(0..n);
    if ranked.rank[a] < ranked.rank[b] {
        a
    } else if ranked.rank[b] < ranked.rank[a] {
        b
    } else if ranked.crowding[a] >= ranked.crowding[b] {
        a
    } else {
        b
    }
}

/// Run NSGA-II on an arbitrary vector objective (maximized). Returns the
/// final population's first non-dominated front as `(x, y)` pairs
/// (at most `population` of them).
pub fn nsga2_run<R: Rng + ?Sized>(
    objective: &dyn Fn(&[f64]) -> Vec<f64>,
    bounds: &[(f64, f64)],
    cfg: &NsgaConfig,
    rng: &mut R,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    cfg.validate();
    let d = bounds.len();
    let pm = cfg.mutation_prob.unwrap_or(1.0 / d as f64);
    let p = cfg.population;

    let mut pop: Vec<Vec<f64>> = (0..p)
        .map(|_| bounds.iter().map(|(lo, hi)| lo + rng.gen::<f64>() * (hi - lo)).collect())
        .collect();
    let mut objs: Vec<Vec<f64>> = pop.iter().map(|x| objective(x)).collect();

    for _ in 0..cfg.generations {
        let ranked = rank_population(&objs);
        let mut offspring = Vec::with_capacity(p);
        while offspring.len() < p {
            let i = tournament(&ranked, p, rng);
            let j = tournament(&ranked, p, rng);
            let (mut c1, mut c2) = if rng.gen::<f64>() < cfg.crossover_prob {
                sbx(&pop[i], &pop[j], bounds, cfg.crossover_eta, rng)
            } else {
                (pop[i].clone(), pop[j].clone())
            };
            polynomial_mutation(&mut c1, bounds, pm, cfg.mutation_eta, rng);
            polynomial_mutation(&mut c2, bounds, pm, cfg.mutation_eta, rng);
            offspring.push(c1);
            if offspring.len() < p {
                offspring.push(c2);
            }
        }
        let off_objs: Vec<Vec<f64>> = offspring.iter().map(|x| objective(x)).collect();

        // Elitist environmental selection over parents + offspring.
        let mut all = pop;
        all.extend(offspring);
        let mut all_objs = objs;
        all_objs.extend(off_objs);
        let fronts = non_dominated_sort(&all_objs);
        let mut next_pop = Vec::with_capacity(p);
        let mut next_objs = Vec::with_capacity(p);
        for front in fronts {
            if next_pop.len() + front.len() <= p {
                for &i in &front {
                    next_pop.push(all[i].clone());
                    next_objs.push(all_objs[i].clone());
                }
            } else {
                let pts: Vec<Vec<f64>> = front.iter().map(|&i| all_objs[i].clone()).collect();
                let dist = crowding_distance(&pts);
                let mut order: Vec<usize> = (0..front.len()).collect();
                order.sort_by(|&a, &b| dist[b].partial_cmp(&dist[a]).unwrap());
                for &slot in order.iter().take(p - next_pop.len()) {
                    next_pop.push(all[front[slot]].clone());
                    next_objs.push(all_objs[front[slot]].clone());
                }
                break;
            }
            if next_pop.len() == p {
                break;
            }
        }
        pop = next_pop;
        objs = next_objs;
    }

    let fronts = non_dominated_sort(&objs);
    fronts[0].iter().map(|&i| (pop[i].clone(), objs[i].clone())).collect()
}
