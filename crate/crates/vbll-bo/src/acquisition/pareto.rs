//! Pareto bookkeeping: exact hypervolume for 2 and 3 objectives, the
//! non-dominated archive of observed objective vectors, and greedy
//! hypervolume-improvement candidate selection.
//!
//! Maximization convention throughout: the hypervolume is the Lebesgue
//! measure of the union of boxes `[r, p]` over archive points `p` that
//! dominate the reference point `r`; points failing `p > r` coordinatewise
//! are ignored.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `a` weakly dominates `b` with at least one strict coordinate.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strict = true;
        }
    }
    strict
}

fn hv_2d(points: &[Vec<f64>], r: &[f64]) -> f64 {
    let mut pts: Vec<&Vec<f64>> =
        points.iter().filter(|p| p[0] > r[0] && p[1] > r[1]).collect();
    pts.sort_by(|a, b| b[0].partial_cmp(&a[0]).unwrap());
    let mut hv = 0.0;
    let mut level = r[1];
    for p in pts {
        if p[1] > level {
            hv += (p[0] - r[0]) * (p[1] - level);
            level = p[1];
        }
    }
    hv
}

fn hv_3d(points: &[Vec<f64>], r: &[f64]) -> f64 {
    let pts: Vec<&Vec<f64>> = points
        .iter()
        .filter(|p| p[0] > r[0] && p[1] > r[1] && p[2] > r[2])
        .collect();
    if pts.is_empty() {
        return 0.0;
    }
    // Slice along the third objective: between consecutive levels, the cross
    // section is the 2-D hypervolume of the points reaching that high.
    let mut levels: Vec<f64> = pts.iter().map(|p| p[2]).collect();
    levels.sort_by(|a, b| b.partial_cmp(a).unwrap());
    levels.dedup();
    let mut hv = 0.0;
    for (i, &z) in levels.iter().enumerate() {
        let z_below = if i + 1 < levels.len() { levels[i + 1] } else { r[2] };
        let slab: Vec<Vec<f64>> = pts
            .iter()
            .filter(|p| p[2] >= z)
            .map(|p| vec![p[0], p[1]])
            .collect();
        hv += (z - z_below) * hv_2d(&slab, &r[0..2]);
    }
    hv
}

/// Exact hypervolume of a point set against a reference point.
pub fn hypervolume(points: &[Vec<f64>], reference: &[f64]) -> Result<f64> {
    match reference.len() {
        2 => Ok(hv_2d(points, reference)),
        3 => Ok(hv_3d(points, reference)),
        k => Err(Error::UnsupportedDimension(k)),
    }
}

/// Non-dominated set of observed objective vectors plus the reference point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParetoArchive {
    points: Vec<Vec<f64>>,
    reference: Vec<f64>,
}

impl ParetoArchive {
    pub fn new(reference: Vec<f64>) -> Self {
        ParetoArchive { points: Vec::new(), reference }
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Insert an observation, dropping it if dominated and evicting any
    /// archive points it dominates. Returns whether the point was kept.
    pub fn insert(&mut self, y: Vec<f64>) -> bool {
        assert_eq!(y.len(), self.reference.len());
        if self.points.iter().any(|p| dominates(p, &y) || p == &y) {
            return false;
        }
        self.points.retain(|p| !dominates(&y, p));
        self.points.push(y);
        true
    }

    pub fn hypervolume(&self) -> Result<f64> {
        hypervolume(&self.points, &self.reference)
    }

    /// Hypervolume after hypothetically adding `y`.
    pub fn hypervolume_with(&self, y: &[f64]) -> Result<f64> {
        let mut pts = self.points.clone();
        pts.push(y.to_vec());
        hypervolume(&pts, &self.reference)
    }
}

/// Greedy hypervolume-improvement selection: the index of the front point
/// whose addition to the archive increases the hypervolume the most. When
/// the maximum improvement is zero or attained by several points, one of the
/// maximizers is drawn uniformly.
pub fn select_hvi_candidate<R: Rng + ?Sized>(
    archive: &ParetoArchive,
    front_objectives: &[Vec<f64>],
    rng: &mut R,
) -> Result<usize> {
    assert!(!front_objectives.is_empty(), "front must be non-empty");
    let base = archive.hypervolume()?;
    let mut improvements = Vec::with_capacity(front_objectives.len());
    for y in front_objectives {
        improvements.push(archive.hypervolume_with(y)? - base);
    }
    let max = improvements.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let maximizers: Vec<usize> =
        improvements.iter().enumerate().filter(|(_, &v)| v == max).map(|(i, _)| i).collect();
    if maximizers.len() == 1 {
        Ok(maximizers[0])
    } else {
        Ok(maximizers[rng.gen_range(0..maximizers.len())])
    }
}
