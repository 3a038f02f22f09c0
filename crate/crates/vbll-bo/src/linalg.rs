//! Dense vector/matrix kernels: Cholesky factorization, rank-1 Cholesky
//! update, triangular solves, log-determinants, and Gaussian sampling.
//!
//! Everything operates on `f64` with a row-major `(i, j)` indexing contract
//! and no aliasing between inputs and outputs. All functions are pure.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dims must be >= 1");
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty());
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix { rows: rows.len(), cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Maximum relative symmetry defect `|a_ij - a_ji| / max_abs`.
    pub fn symmetry_defect(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let scale = self.data.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs() / scale);
            }
        }
        worst
    }
}

/// Lower-triangular factor with strictly positive diagonal, packed row-major
/// (`len = dim (dim + 1) / 2`). Houses `L` where a precision is `L L^T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerTriangular {
    dim: usize,
    data: Vec<f64>,
}

#[inline]
fn tri_index(i: usize, j: usize) -> usize {
    debug_assert!(j <= i);
    i * (i + 1) / 2 + j
}

impl LowerTriangular {
    /// Identity factor (so `L L^T = I`).
    pub fn identity(dim: usize) -> Self {
        let mut l = LowerTriangular { dim, data: vec![0.0; dim * (dim + 1) / 2] };
        for i in 0..dim {
            l.data[tri_index(i, i)] = 1.0;
        }
        l
    }

    /// Diagonal factor from positive entries.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut l = LowerTriangular::identity(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            assert!(d > 0.0, "diagonal must be strictly positive");
            l.data[tri_index(i, i)] = d;
        }
        l
    }

    /// Build from packed row-major lower-triangle entries.
    pub fn from_packed(dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), dim * (dim + 1) / 2);
        let l = LowerTriangular { dim, data };
        for i in 0..dim {
            assert!(l.get(i, i) > 0.0, "diagonal must be strictly positive");
        }
        l
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.data[tri_index(i, j)]
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[tri_index(i, j)] = v;
    }

    pub fn packed(&self) -> &[f64] {
        &self.data
    }

    pub fn packed_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Dense `L L^T`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.dim;
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let upper = j.min(i);
                let mut s = 0.0;
                for k in 0..=upper {
                    s += self.get(i, k) * self.get(j, k);
                }
                a.set(i, j, s);
            }
        }
        a
    }

    /// Inverse of the factor itself (also lower triangular).
    pub fn inverse(&self) -> LowerTriangular {
        let n = self.dim;
        let mut inv = LowerTriangular { dim: n, data: vec![0.0; n * (n + 1) / 2] };
        // Forward substitution against each unit basis vector, restricted to
        // the nonzero pattern of the result.
        for j in 0..n {
            inv.data[tri_index(j, j)] = 1.0 / self.data[tri_index(j, j)];
            for i in (j + 1)..n {
                let mut s = 0.0;
                for k in j..i {
                    s += self.data[tri_index(i, k)] * inv.data[tri_index(k, j)];
                }
                inv.data[tri_index(i, j)] = -s / self.data[tri_index(i, i)];
            }
        }
        inv
    }
}

/// Cholesky factorization of a symmetric positive-definite matrix.
///
/// Never regularizes: a non-positive pivot is reported as
/// [`Error::NotPositiveDefinite`] so the caller can decide how to repair
/// (see [`cholesky_jittered`]).
pub fn cholesky(a: &Matrix) -> Result<LowerTriangular> {
    assert_eq!(a.rows(), a.cols(), "cholesky needs a square matrix");
    debug_assert!(a.symmetry_defect() <= 1e-10, "matrix not symmetric");
    let n = a.rows();
    let mut l = LowerTriangular { dim: n, data: vec![0.0; n * (n + 1) / 2] };
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.data[tri_index(i, k)] * l.data[tri_index(j, k)];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::NotPositiveDefinite { index: i, pivot: s });
                }
                l.data[tri_index(i, i)] = s.sqrt();
            } else {
                l.data[tri_index(i, j)] = s / l.data[tri_index(j, j)];
            }
        }
    }
    Ok(l)
}

/// Cholesky with the explicit jitter ladder: on failure add `1e-8` to the
/// diagonal and retry, doubling up to `1e-4`. Returns the factor and the
/// jitter that was finally applied (0.0 when none was needed).
pub fn cholesky_jittered(a: &Matrix) -> Result<(LowerTriangular, f64)> {
    match cholesky(a) {
        Ok(l) => return Ok((l, 0.0)),
        Err(Error::NotPositiveDefinite { .. }) => {}
        Err(e) => return Err(e),
    }
    let mut jitter = 1e-8;
    let mut last;
    loop {
        let mut aj = a.clone();
        for i in 0..a.rows() {
            aj.set(i, i, aj.get(i, i) + jitter);
        }
        match cholesky(&aj) {
            Ok(l) => return Ok((l, jitter)),
            Err(e) => last = e,
        }
        jitter *= 2.0;
        if jitter > 1e-4 {
            return Err(last);
        }
    }
}

/// Rank-1 Cholesky update: returns `L'` with `L' L'^T = L L^T + v v^T`.
///
/// Sequence of Givens-style eliminations (the classic `cholupdate`,
/// cf. LINPACK `dchud`), O(dim^2) and triangularity-preserving. Updating a
/// positive-definite matrix by an outer product keeps it positive definite,
/// so this cannot fail for finite inputs.
pub fn chol_rank1_update(l: &LowerTriangular, v: &[f64]) -> LowerTriangular {
    assert_eq!(v.len(), l.dim(), "dimension mismatch");
    let n = l.dim();
    let mut out = l.clone();
    let mut work = v.to_vec();
    for j in 0..n {
        let ljj = out.data[tri_index(j, j)];
        let wj = work[j];
        let r = (ljj * ljj + wj * wj).sqrt();
        let c = r / ljj;
        let s = wj / ljj;
        out.data[tri_index(j, j)] = r;
        for i in (j + 1)..n {
            let lij = (out.data[tri_index(i, j)] + s * work[i]) / c;
            work[i] = c * work[i] - s * lij;
            out.data[tri_index(i, j)] = lij;
        }
    }
    out
}

/// Solve `L x = b` (or `L^T x = b` when `transpose`) by substitution.
pub fn tri_solve(l: &LowerTriangular, b: &[f64], transpose: bool) -> Vec<f64> {
    assert_eq!(b.len(), l.dim(), "dimension mismatch");
    let n = l.dim();
    let mut x = b.to_vec();
    if !transpose {
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= l.data[tri_index(i, k)] * x[k];
            }
            x[i] = s / l.data[tri_index(i, i)];
        }
    } else {
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= l.data[tri_index(k, i)] * x[k];
            }
            x[i] = s / l.data[tri_index(i, i)];
        }
    }
    x
}

/// `log det(L L^T) = 2 * sum_i log L_ii`.
pub fn logdet_precision(l: &LowerTriangular) -> f64 {
    (0..l.dim()).map(|i| l.data[tri_index(i, i)].ln()).sum::<f64>() * 2.0
}

/// `trace((L L^T)^{-1}) = ||L^{-1}||_F^2`.
pub fn inv_trace_from_chol(l: &LowerTriangular) -> f64 {
    let inv = l.inverse();
    inv.data.iter().map(|v| v * v).sum()
}

/// Draw from `N(mean, (L L^T)^{-1})` given pre-drawn standard normals `z`:
/// `mean + solve(L^T, z)`.
pub fn sample_gaussian_with(mean: &[f64], l_prec: &LowerTriangular, z: &[f64]) -> Vec<f64> {
    assert_eq!(mean.len(), l_prec.dim());
    assert_eq!(z.len(), l_prec.dim());
    let mut x = tri_solve(l_prec, z, true);
    for (xi, mi) in x.iter_mut().zip(mean) {
        *xi += mi;
    }
    x
}

/// Draw from `N(mean, (L L^T)^{-1})`; deterministic given the generator.
pub fn sample_gaussian<R: Rng + ?Sized>(
    mean: &[f64],
    l_prec: &LowerTriangular,
    rng: &mut R,
) -> Vec<f64> {
    let z: Vec<f64> = (0..l_prec.dim()).map(|_| rng.sample(StandardNormal)).collect();
    sample_gaussian_with(mean, l_prec, &z)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Relative Frobenius distance `||a - b||_F / max(||b||_F, 1e-300)`.
pub fn rel_frobenius(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.rows(), b.rows());
    assert_eq!(a.cols(), b.cols());
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in a.data().iter().zip(b.data()) {
        num += (x - y) * (x - y);
        den += y * y;
    }
    num.sqrt() / den.sqrt().max(1e-300)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_oracles::{dense_inverse, lu_slogdet, random_spd};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn cholesky_diagonal_case() {
        let a = Matrix::from_rows(&[vec![4.0, 0.0], vec![0.0, 9.0]]);
        let l = cholesky(&a).unwrap();
        assert_eq!(l.get(0, 0), 2.0);
        assert_eq!(l.get(1, 1), 3.0);
        assert_eq!(l.get(1, 0), 0.0);
    }

    #[test]
    fn cholesky_identity_case() {
        let a = Matrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.0 });
        let l = cholesky(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(l.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn cholesky_reconstructs_2x2() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let l = cholesky(&a).unwrap();
        assert!(rel_frobenius(&l.reconstruct(), &a) <= 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        match cholesky(&a) {
            Err(Error::NotPositiveDefinite { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn cholesky_jitter_ladder_repairs_semidefinite() {
        // Rank-deficient PSD matrix: plain cholesky fails, jittered succeeds.
        let a = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(cholesky(&a).is_err());
        let (l, jitter) = cholesky_jittered(&a).unwrap();
        assert!(jitter >= 1e-8 && jitter <= 1e-4);
        assert!(l.get(1, 1) > 0.0);
    }

    #[test]
    fn cholesky_reconstruction_sweep() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for trial in 0..1000 {
            let n = 1 + (trial % 32);
            let a = random_spd(n, &mut rng);
            let l = cholesky(&a).unwrap();
            assert!(rel_frobenius(&l.reconstruct(), &a) <= 1e-10, "dim {n}");
        }
    }

    #[test]
    fn rank1_update_axis_aligned() {
        let l = LowerTriangular::identity(2);
        let up = chol_rank1_update(&l, &[1.0, 0.0]);
        assert!((up.get(0, 0) - 2.0_f64.sqrt()).abs() <= 1e-15);
        assert_eq!(up.get(1, 1), 1.0);
        assert_eq!(up.get(1, 0), 0.0);
    }

    #[test]
    fn rank1_update_zero_vector_is_identity_op() {
        let l = LowerTriangular::identity(2);
        let up = chol_rank1_update(&l, &[0.0, 0.0]);
        assert_eq!(up, l);
    }

    #[test]
    fn rank1_update_matches_refactorization() {
        let l = LowerTriangular::identity(2);
        let up = chol_rank1_update(&l, &[1.0, 1.0]);
        let expect = cholesky(&Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]])).unwrap();
        assert!(rel_frobenius(&up.reconstruct(), &expect.reconstruct()) <= 1e-12);
    }

    #[test]
    fn rank1_update_sweep_vs_refactorization() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for trial in 0..1000 {
            let n = 1 + (trial % 16);
            let a = random_spd(n, &mut rng);
            let l = cholesky(&a).unwrap();
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let up = chol_rank1_update(&l, &v);

            let mut avv = a.clone();
            for i in 0..n {
                for j in 0..n {
                    avv.set(i, j, avv.get(i, j) + v[i] * v[j]);
                }
            }
            let refac = cholesky(&avv).unwrap();
            assert!(rel_frobenius(&up.reconstruct(), &refac.reconstruct()) <= 1e-9);
            for i in 0..n {
                assert!(up.get(i, i) > 0.0);
            }
        }
    }

    #[test]
    fn tri_solve_identity_and_diagonal() {
        let l = LowerTriangular::identity(3);
        let b = vec![1.0, -2.0, 3.0];
        assert_eq!(tri_solve(&l, &b, false), b);
        assert_eq!(tri_solve(&l, &b, true), b);

        let d = LowerTriangular::from_diagonal(&[2.0, 3.0]);
        assert_eq!(tri_solve(&d, &[2.0, 3.0], false), vec![1.0, 1.0]);
    }

    #[test]
    fn tri_solve_matches_dense_inverse_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.gen_range(1..=10);
            let a = random_spd(n, &mut rng);
            let l = cholesky(&a).unwrap();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();

            let ldense = Matrix::from_fn(n, n, |i, j| l.get(i, j));
            let linv = dense_inverse(&ldense);
            for transpose in [false, true] {
                let x = tri_solve(&l, &b, transpose);
                let expect: Vec<f64> = (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|k| if transpose { linv.get(k, i) } else { linv.get(i, k) } * b[k])
                            .sum()
                    })
                    .collect();
                for (xi, ei) in x.iter().zip(&expect) {
                    assert!((xi - ei).abs() <= 1e-10 * ei.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn logdet_diagonal_cases() {
        assert_eq!(logdet_precision(&LowerTriangular::identity(4)), 0.0);
        let l = LowerTriangular::from_diagonal(&[2.0, 3.0]);
        let expect = 2.0 * (2.0_f64.ln() + 3.0_f64.ln());
        assert!((logdet_precision(&l) - expect).abs() <= 1e-12);
        assert!((expect - 3.5835).abs() < 1e-3);
    }

    #[test]
    fn logdet_matches_lu_slogdet_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..200 {
            let n = rng.gen_range(1..=12);
            let a = random_spd(n, &mut rng);
            let l = cholesky(&a).unwrap();
            assert!((logdet_precision(&l) - lu_slogdet(&l.reconstruct())).abs() <= 1e-9);
        }
    }

    #[test]
    fn inv_trace_cases_and_oracle() {
        assert_eq!(inv_trace_from_chol(&LowerTriangular::identity(5)), 5.0);
        let l = LowerTriangular::from_diagonal(&[2.0, 4.0]);
        assert!((inv_trace_from_chol(&l) - 0.3125).abs() <= 1e-15);

        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.gen_range(1..=10);
            let a = random_spd(n, &mut rng);
            let l = cholesky(&a).unwrap();
            let inv = dense_inverse(&a);
            let trace: f64 = (0..n).map(|i| inv.get(i, i)).sum();
            assert!((inv_trace_from_chol(&l) - trace).abs() <= 1e-9 * trace.max(1.0));
        }
    }

    #[test]
    fn sample_gaussian_zero_noise_returns_mean() {
        let l = LowerTriangular::from_diagonal(&[2.0, 1.0]);
        let mean = vec![1.5, -0.5];
        assert_eq!(sample_gaussian_with(&mean, &l, &[0.0, 0.0]), mean);
    }

    #[test]
    fn sample_gaussian_seed_determinism() {
        let l = LowerTriangular::identity(3);
        let mean = vec![0.0; 3];
        let a = sample_gaussian(&mean, &l, &mut ChaCha12Rng::seed_from_u64(9));
        let b = sample_gaussian(&mean, &l, &mut ChaCha12Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn sample_gaussian_moment_check() {
        let n = 2;
        let mean = vec![0.0; n];
        let l = LowerTriangular::identity(n);
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let draws = 100_000;
        let mut cov = vec![0.0; n * n];
        for _ in 0..draws {
            let x = sample_gaussian(&mean, &l, &mut rng);
            for i in 0..n {
                for j in 0..n {
                    cov[i * n + j] += x[i] * x[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let c = cov[i * n + j] / draws as f64;
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((c - expect).abs() <= 5e-2, "cov[{i}{j}] = {c}");
            }
        }

        // Precision diag(2,1)^2 on the first coordinate => variance 1/4.
        let l = LowerTriangular::from_diagonal(&[2.0, 1.0]);
        let mut s2 = 0.0;
        for _ in 0..draws {
            let x = sample_gaussian(&mean, &l, &mut rng);
            s2 += x[0] * x[0];
        }
        assert!((s2 / draws as f64 - 0.25).abs() <= 5e-2 * 0.25 + 5e-3);
    }

    #[test]
    fn lower_triangular_inverse_is_inverse() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let a = random_spd(8, &mut rng);
        let l = cholesky(&a).unwrap();
        let inv = l.inverse();
        for i in 0..8 {
            for j in 0..8 {
                let mut s = 0.0;
                for k in 0..8 {
                    s += l.get(i, k) * inv.get(k, j);
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((s - expect).abs() <= 1e-10);
            }
        }
    }
}
