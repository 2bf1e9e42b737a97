//! Truncated SVD: dense decomposition for small matrices, randomized range
//! finder with power iterations otherwise.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use super::CsrMatrix;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdOptions {
    pub oversampling: usize,
    pub power_iterations: usize,
    /// Use the dense decomposition when `min(rows, cols)` is at most this.
    pub dense_threshold: usize,
    pub seed: u64,
}

impl Default for SvdOptions {
    fn default() -> Self {
        SvdOptions {
            oversampling: 10,
            power_iterations: 2,
            dense_threshold: 256,
            seed: 0x5eed,
        }
    }
}

/// Top-k singular triplets, values descending. Columns of `left` and
/// `right` are the singular vectors; each pair is sign-normalized so the
/// largest-magnitude entry of the left vector is positive.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub left: DMatrix<f64>,
    pub values: Vec<f64>,
    pub right: DMatrix<f64>,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.values.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.values.clone()));
        &self.left * s * self.right.transpose()
    }
}

fn dense_svd(a: DMatrix<f64>, k: usize) -> Result<TruncatedSvd> {
    let m = faer::Mat::<f64>::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)]);
    let svd = m
        .thin_svd()
        .map_err(|e| Error::NumericsError(format!("SVD did not converge: {e:?}")))?;
    let (u, v, s) = (svd.U(), svd.V(), svd.S().column_vector());
    let mut order: Vec<usize> = (0..s.nrows()).collect();
    order.sort_by(|&x, &y| s[y].total_cmp(&s[x]).then(x.cmp(&y)));
    order.truncate(k);
    let left = DMatrix::from_fn(u.nrows(), k, |r, j| u[(r, order[j])]);
    let right = DMatrix::from_fn(v.nrows(), k, |r, j| v[(r, order[j])]);
    let values = order.iter().map(|&o| s[o]).collect();
    Ok(TruncatedSvd {
        left,
        values,
        right,
    })
}

fn orthonormal_basis(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

fn randomized_svd(a: &CsrMatrix, k: usize, opts: &SvdOptions) -> Result<TruncatedSvd> {
    let l = (k + opts.oversampling).min(a.nrows().min(a.ncols()));
    let mut rng = Rng::seed_from_u64(opts.seed);
    let omega = DMatrix::from_fn(a.ncols(), l, |_, _| StandardNormal.sample(&mut rng));
    let mut q = orthonormal_basis(a.mul_dense(&omega));
    for _ in 0..opts.power_iterations {
        let z = orthonormal_basis(a.tr_mul_dense(&q));
        q = orthonormal_basis(a.mul_dense(&z));
    }
    // B = Qᵀ A, formed as (Aᵀ Q)ᵀ
    let b = a.tr_mul_dense(&q).transpose();
    let small = dense_svd(b, k)?;
    Ok(TruncatedSvd {
        left: q * small.left,
        values: small.values,
        right: small.right,
    })
}

fn normalize_signs(svd: &mut TruncatedSvd) {
    for j in 0..svd.rank() {
        let col = svd.left.column(j);
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            svd.left.column_mut(j).neg_mut();
            svd.right.column_mut(j).neg_mut();
        }
    }
}

/// Top-`k` singular triplets of a sparse matrix.
pub fn truncated_svd(matrix: &CsrMatrix, k: usize, opts: &SvdOptions) -> Result<TruncatedSvd> {
    let min_dim = matrix.nrows().min(matrix.ncols());
    if k == 0 || k > min_dim {
        return Err(Error::ShapeError(format!(
            "rank {k} outside 1..={min_dim} for a {}x{} matrix",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    let mut out = if min_dim <= opts.dense_threshold {
        dense_svd(matrix.to_dense(), k)?
    } else {
        randomized_svd(matrix, k, opts)?
    };
    if out.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericsError("non-finite singular value".into()));
    }
    normalize_signs(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// One-sided Jacobi SVD; independent of the library decomposition.
    pub(crate) fn jacobi_singular_values(a: &DMatrix<f64>) -> Vec<f64> {
        let mut m = if a.nrows() >= a.ncols() { a.clone() } else { a.transpose() };
        let n = m.ncols();
        for _sweep in 0..100 {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in p + 1..n {
                    let alpha: f64 = m.column(p).norm_squared();
                    let beta: f64 = m.column(q).norm_squared();
                    let gamma: f64 = m.column(p).dot(&m.column(q));
                    if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                        continue;
                    }
                    off = off.max(gamma.abs() / (alpha * beta).sqrt());
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let t = if zeta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for r in 0..m.nrows() {
                        let (x, y) = (m[(r, p)], m[(r, q)]);
                        m[(r, p)] = c * x - s * y;
                        m[(r, q)] = s * x + c * y;
                    }
                }
            }
            if off < 1e-15 {
                break;
            }
        }
        let mut v: Vec<f64> = (0..n).map(|j| m.column(j).norm()).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    fn random_dense(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn diagonal() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 3.0), (1, 1, 1.0)]).unwrap();
        let s = truncated_svd(&m, 2, &SvdOptions::default()).unwrap();
        assert!((s.values[0] - 3.0).abs() < 1e-12 && (s.values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_two_reconstruction() {
        let a = random_dense(20, 2, 1) * random_dense(2, 15, 2);
        let s = truncated_svd(&CsrMatrix::from_dense(&a), 2, &SvdOptions::default()).unwrap();
        assert!((s.reconstruct() - &a).abs().max() < 1e-8);
    }

    #[test]
    fn matches_jacobi_oracle() {
        let a = random_dense(30, 20, 3);
        let s = truncated_svd(&CsrMatrix::from_dense(&a), 5, &SvdOptions::default()).unwrap();
        let oracle = jacobi_singular_values(&a);
        for j in 0..5 {
            assert!((s.values[j] - oracle[j]).abs() < 1e-8, "{j}: {} vs {}", s.values[j], oracle[j]);
        }
        let utu = s.left.transpose() * &s.left;
        let vtv = s.right.transpose() * &s.right;
        assert!((utu - DMatrix::identity(5, 5)).abs().max() < 1e-8);
        assert!((vtv - DMatrix::identity(5, 5)).abs().max() < 1e-8);
    }

    #[test]
    fn randomized_path_on_low_rank_plus_noise() {
        let a = random_dense(300, 6, 4) * random_dense(6, 280, 5) + random_dense(300, 280, 6) * 1e-3;
        let m = CsrMatrix::from_dense(&a);
        let fast = truncated_svd(&m, 4, &SvdOptions::default()).unwrap();
        let exact = truncated_svd(
            &m,
            4,
            &SvdOptions {
                dense_threshold: usize::MAX,
                ..SvdOptions::default()
            },
        )
        .unwrap();
        for j in 0..4 {
            assert!((fast.values[j] - exact.values[j]).abs() / exact.values[j] < 1e-8);
        }
    }

    #[test]
    fn permutation_invariant_values() {
        let a = random_dense(12, 9, 7);
        let rows: Vec<usize> = vec![3, 0, 11, 5, 1, 9, 2, 7, 4, 10, 6, 8];
        let cols: Vec<usize> = vec![8, 2, 0, 5, 7, 1, 3, 6, 4];
        let p = DMatrix::from_fn(12, 9, |r, c| a[(rows[r], cols[c])]);
        let s1 = truncated_svd(&CsrMatrix::from_dense(&a), 9, &SvdOptions::default()).unwrap();
        let s2 = truncated_svd(&CsrMatrix::from_dense(&p), 9, &SvdOptions::default()).unwrap();
        for (x, y) in s1.values.iter().zip(&s2.values) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_rank() {
        let m = CsrMatrix::from_triplets(2, 3, vec![(0, 0, 1.0)]).unwrap();
        assert!(truncated_svd(&m, 3, &SvdOptions::default()).is_err());
        assert!(truncated_svd(&m, 0, &SvdOptions::default()).is_err());
    }
}
