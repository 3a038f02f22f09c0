//! Dense brute-force oracles shared by unit tests. Deliberately independent
//! of the triangular fast paths they are used to check.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::linalg::Matrix;

/// `B B^T + n I`: comfortably positive definite.
pub fn random_spd(n: usize, rng: &mut ChaCha12Rng) -> Matrix {
    let b = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    Matrix::from_fn(n, n, |i, j| {
        let mut s = if i == j { n as f64 } else { 0.0 };
        for k in 0..n {
            s += b.get(i, k) * b.get(j, k);
        }
        s
    })
}

/// Log-determinant of a positive-definite matrix via LU with partial
/// pivoting.
pub fn lu_slogdet(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    let mut logdet = 0.0;
    for col in 0..n {
        let (piv, _) = (col..n)
            .map(|r| (r, m[r][col].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        m.swap(col, piv);
        logdet += m[col][col].abs().ln();
        for r in (col + 1)..n {
            let f = m[r][col] / m[col][col];
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    logdet
}

/// Dense inverse via Gauss-Jordan elimination with partial pivoting.
pub fn dense_inverse(a: &Matrix) -> Matrix {
    let n = a.rows();
    let mut aug: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = a.row(i).to_vec();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| aug[x][col].abs().partial_cmp(&aug[y][col].abs()).unwrap())
            .unwrap();
        aug.swap(col, piv);
        let d = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != col {
                let f = aug[r][col];
                for c in 0..2 * n {
                    aug[r][c] -= f * aug[col][c];
                }
            }
        }
    }
    Matrix::from_fn(n, n, |i, j| aug[i][n + j])
}
